"""Experiment protocols, metric collection, and oracle learning-rate
selection.

Each ``run_*`` function executes one protocol over the configured learning
rates and seeds and returns an append-only list of :class:`MetricsRow`.
Rows are flat (method, protocol, depth, width, lr, seed, step, metric,
value, wall_clock_ms) so a single CSV schema serves every protocol.

Protocols expect :class:`~hgfnet.data.Dataset` inputs and never load files
themselves; the CLI owns data loading.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .core import make_rng
from .data import Dataset, DriftSchedule, subset
from .estimators import HgfClassifier, MlpClassifier, PcnClassifier

CSV_HEADER = (
    "method",
    "protocol",
    "depth",
    "width",
    "lr",
    "seed",
    "step",
    "metric",
    "value",
    "wall_clock_ms",
)

HGF_LR_SWEEP = (1e-4, 5e-4, 1e-3, 2e-3)
BASELINE_LR_SWEEP = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class ExperimentConfig:
    """One protocol cell: a method, an architecture, and sweep lists."""

    method: str = "hgf"
    protocol: str = "direct"
    depth: int = 2
    width: int = 32
    lrs: tuple = HGF_LR_SWEEP
    seeds: tuple = (0,)
    epochs: int = 50
    batch_size: int = 64
    # hgf-specific knobs
    weight_rule: str = "precision"
    precision_mode: str = "temporal_carryover"
    prior_precision: object = 1.0
    volatility: bool = False
    # online protocol
    online_iterations: int = 64
    online_samples: int = 200
    test_subset: int = 1000
    # data-efficiency protocol
    subset_sizes: tuple = (60, 300, 600, 3000, 6000)
    # drift protocol
    drift_iterations: int = 3000
    drift_period: int = 64
    drift_train: int = 120
    pretrain_n: int = 6000
    pretrain_passes: int = 64
    # timing protocol
    timing_warmup: int = 20
    timing_trials: int = 100
    timing_epoch_samples: int = 10000

    def __post_init__(self):
        if self.method not in ("hgf", "mlp", "pcn"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.lrs:
            raise ValueError("lr sweep must be non-empty")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ValueError("seeds must be non-empty and distinct")


@dataclass
class MetricsRow:
    method: str
    protocol: str
    depth: int
    width: int
    lr: float
    seed: int
    step: int
    metric: str
    value: float
    wall_clock_ms: float = 0.0


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r.method,
                    r.protocol,
                    r.depth,
                    r.width,
                    repr(r.lr),
                    r.seed,
                    r.step,
                    r.metric,
                    repr(r.value),
                    f"{r.wall_clock_ms:.3f}",
                ]
            )


def read_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                MetricsRow(
                    method=rec["method"],
                    protocol=rec["protocol"],
                    depth=int(rec["depth"]),
                    width=int(rec["width"]),
                    lr=float(rec["lr"]),
                    seed=int(rec["seed"]),
                    step=int(rec["step"]),
                    metric=rec["metric"],
                    value=float(rec["value"]),
                    wall_clock_ms=float(rec["wall_clock_ms"]),
                )
            )
    return rows


def oracle_lr_select(rows, metric="test_accuracy", maximize=True):
    """Best lr per (method, depth, width) by seed-mean of the final step's
    metric; exact ties break toward the smaller lr."""
    finals = {}
    for r in rows:
        if r.metric != metric:
            continue
        key = (r.method, r.depth, r.width, r.lr, r.seed)
        prev = finals.get(key)
        if prev is None or r.step >= prev[0]:
            finals[key] = (r.step, r.value)
    groups = {}
    for (method, depth, width, lr, _seed), (_step, value) in finals.items():
        groups.setdefault((method, depth, width), {}).setdefault(lr, []).append(value)
    best = {}
    for gkey, by_lr in groups.items():
        scored = sorted(
            ((float(np.mean(vs)), lr) for lr, vs in by_lr.items()),
            key=lambda t: (-t[0] if maximize else t[0], t[1]),
        )
        best[gkey] = scored[0][1]
    return best


def build_model(cfg: ExperimentConfig, lr, seed, batch_size=None):
    """Estimator for one sweep cell; HGF is always sequential."""
    hidden = (cfg.width,) * cfg.depth
    if cfg.method == "hgf":
        return HgfClassifier(
            hidden_widths=hidden,
            learning_rate=lr,
            weight_rule=cfg.weight_rule,
            precision_mode=cfg.precision_mode,
            prior_precision=cfg.prior_precision,
            volatility=cfg.volatility,
            random_state=seed,
        )
    bs = cfg.batch_size if batch_size is None else batch_size
    if cfg.method == "mlp":
        return MlpClassifier(
            hidden_widths=hidden, learning_rate=lr, batch_size=bs, random_state=seed
        )
    return PcnClassifier(
        hidden_widths=hidden, learning_rate=lr, batch_size=bs, random_state=seed
    )


def _accuracy(model, ds: Dataset):
    return float(np.mean(model.predict(ds.images) == ds.labels))


def run_direct(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    """Epoch-based training on a fixed train set, per-epoch test accuracy."""
    rows = []
    classes = np.unique(train.labels)
    for lr in cfg.lrs:
        for seed in cfg.seeds:
            model = build_model(cfg, lr, seed)
            rng = make_rng(seed, "direct-order", repr(lr))
            for epoch in range(cfg.epochs):
                t0 = time.perf_counter()
                order = rng.permutation(train.n)
                model.partial_fit(
                    train.images[order], train.labels[order], classes=classes
                )
                ms = (time.perf_counter() - t0) * 1e3
                rows.append(
                    MetricsRow(
                        cfg.method, "direct", cfg.depth, cfg.width, lr, seed,
                        epoch, "test_accuracy", _accuracy(model, test), ms,
                    )
                )
    return rows


def run_online(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    """Streaming protocol: every iteration trains on a fresh random draw at
    batch size 1 and reports error on a seeded stratified test subset."""
    rows = []
    classes = np.unique(train.labels)
    for lr in cfg.lrs:
        for seed in cfg.seeds:
            model = build_model(cfg, lr, seed, batch_size=1)
            rng = make_rng(seed, "online", repr(lr))
            for it in range(cfg.online_iterations):
                t0 = time.perf_counter()
                idx = rng.choice(train.n, size=cfg.online_samples, replace=False)
                model.partial_fit(train.images[idx], train.labels[idx], classes=classes)
                ms = (time.perf_counter() - t0) * 1e3
                eval_ds = subset(
                    test, min(cfg.test_subset, test.n), seed=f"{seed}:online-test:{it}"
                )
                rows.append(
                    MetricsRow(
                        cfg.method, "online", cfg.depth, cfg.width, lr, seed,
                        it, "test_error", 1.0 - _accuracy(model, eval_ds), ms,
                    )
                )
    return rows


def run_data_efficiency(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    """Final test error after ``cfg.epochs`` epochs on stratified subsets of
    increasing size; step is the subset size."""
    rows = []
    classes = np.unique(train.labels)
    for size in cfg.subset_sizes:
        for lr in cfg.lrs:
            for seed in cfg.seeds:
                small = subset(train, size, seed=f"{seed}:de-subset")
                model = build_model(cfg, lr, seed)
                rng = make_rng(seed, "de-order", repr(lr), size)
                t0 = time.perf_counter()
                for _ in range(cfg.epochs):
                    order = rng.permutation(small.n)
                    model.partial_fit(
                        small.images[order], small.labels[order], classes=classes
                    )
                ms = (time.perf_counter() - t0) * 1e3
                rows.append(
                    MetricsRow(
                        cfg.method, "data_efficiency", cfg.depth, cfg.width, lr,
                        seed, size, "test_error", 1.0 - _accuracy(model, test), ms,
                    )
                )
    return rows


def run_concept_drift(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    """Online pretraining followed by a label-permutation drift phase.

    Labels of the upper half of the classes are re-permuted every
    ``drift_period`` iterations (a permutation is drawn at iteration 0 too).
    Model state — including HGF precisions — is never reset.
    """
    rows = []
    classes = np.unique(train.labels)
    schedule = DriftSchedule(
        period=cfg.drift_period,
        n_classes=len(classes),
        permuted_classes=tuple(range(len(classes) // 2, len(classes))),
        seed=0,
    )
    for lr in cfg.lrs:
        for seed in cfg.seeds:
            model = build_model(cfg, lr, seed, batch_size=1)
            rng = make_rng(seed, "drift", repr(lr))
            pre = subset(train, min(cfg.pretrain_n, train.n), seed=f"{seed}:drift-pre")
            for _ in range(cfg.pretrain_passes):
                order = rng.permutation(pre.n)
                model.partial_fit(pre.images[order], pre.labels[order], classes=classes)
            for it in range(cfg.drift_iterations):
                t0 = time.perf_counter()
                perm = schedule.permutation_for(it)
                idx = rng.choice(train.n, size=cfg.drift_train, replace=False)
                model.partial_fit(
                    train.images[idx], perm[train.labels[idx]], classes=classes
                )
                ms = (time.perf_counter() - t0) * 1e3
                eval_ds = subset(
                    test, min(cfg.test_subset, test.n), seed=f"{seed}:drift-test:{it}"
                )
                err = float(
                    np.mean(model.predict(eval_ds.images) != perm[eval_ds.labels])
                )
                rows.append(
                    MetricsRow(
                        cfg.method, "drift", cfg.depth, cfg.width, lr, seed,
                        it, "test_error", err, ms,
                    )
                )
    return rows


def recovery_curves(rows, period=64):
    """Average drift-phase error as a function of iterations since the last
    drift event, per (method, lr, seed) -> length-``period`` array."""
    out = {}
    for r in rows:
        if r.metric != "test_error":
            continue
        key = (r.method, r.lr, r.seed)
        out.setdefault(key, [[] for _ in range(period)])[r.step % period].append(r.value)
    return {
        key: np.array([np.mean(vals) if vals else np.nan for vals in buckets])
        for key, buckets in out.items()
    }


def run_precision_diag(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    """Spiral diagnostics: volatility-coupled HGF, fixed-precision HGF, and
    an MLP at the same depth/width; per-epoch accuracy plus per-layer mean
    predicted precision, precision-weighted error, and weight change for the
    HGF variants."""
    rows = []
    classes = np.unique(train.labels)
    hgf_lr = cfg.lrs[0]
    variants = {
        "hgf_volatility": dict(
            weight_rule="precision",
            precision_mode="temporal_carryover",
            volatility=True,
            prior_precision=1.0,
        ),
        "hgf_fixed": dict(
            weight_rule="precision",
            precision_mode="reset_each_sample",
            volatility=False,
            prior_precision="graded",
        ),
    }
    for name, kwargs in variants.items():
        for seed in cfg.seeds:
            model = HgfClassifier(
                hidden_widths=(cfg.width,) * cfg.depth,
                learning_rate=hgf_lr,
                random_state=seed,
                **kwargs,
            )
            rng = make_rng(seed, "pdiag-order", name)
            for epoch in range(cfg.epochs):
                t0 = time.perf_counter()
                order = rng.permutation(train.n)
                dw_sums = None
                n_steps = 0
                pwpe_sums = None
                for i in order:
                    model.partial_fit(
                        train.images[i : i + 1], train.labels[i : i + 1], classes=classes
                    )
                    diag = model.last_diagnostics_
                    dws = np.asarray(diag["mean_abs_dw"])
                    pwpes = np.asarray([l["mean_pwpe"] for l in diag["layers"]])
                    dw_sums = dws if dw_sums is None else dw_sums + dws
                    pwpe_sums = pwpes if pwpe_sums is None else pwpe_sums + pwpes
                    n_steps += 1
                ms = (time.perf_counter() - t0) * 1e3
                common = (name, "precision_diag", cfg.depth, cfg.width, hgf_lr, seed)
                rows.append(
                    MetricsRow(*common, epoch, "test_accuracy", _accuracy(model, test), ms)
                )
                for layer in model.net_.layer_diagnostics():
                    rows.append(
                        MetricsRow(
                            *common, epoch, f"pi_hat_layer{layer['layer']}",
                            layer["mean_pi_hat"], 0.0,
                        )
                    )
                for li, (dw, pwpe) in enumerate(zip(dw_sums, pwpe_sums)):
                    rows.append(
                        MetricsRow(*common, epoch, f"abs_dw_coupling{li}", dw / n_steps, 0.0)
                    )
                    rows.append(
                        MetricsRow(*common, epoch, f"pwpe_layer{li}", pwpe / n_steps, 0.0)
                    )
    mlp_lr = 5e-3
    for seed in cfg.seeds:
        model = MlpClassifier(
            hidden_widths=(cfg.width,) * cfg.depth,
            learning_rate=mlp_lr,
            batch_size=train.n,  # full-batch
            random_state=seed,
        )
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            model.partial_fit(train.images, train.labels, classes=classes)
            ms = (time.perf_counter() - t0) * 1e3
            rows.append(
                MetricsRow(
                    "mlp", "precision_diag", cfg.depth, cfg.width, mlp_lr, seed,
                    epoch, "test_accuracy", _accuracy(model, test), ms,
                )
            )
    return rows


def run_timing(cfg: ExperimentConfig, train: Dataset, test: Dataset = None):
    """Per-sample update wall-clock (batch 1, warm-up excluded) and one
    epoch's wall-clock at the protocol batch sizes."""
    rows = []
    classes = np.unique(train.labels)
    lr = cfg.lrs[0]
    for seed in cfg.seeds:
        model = build_model(cfg, lr, seed, batch_size=1)
        rng = make_rng(seed, "timing")
        order = rng.integers(train.n, size=cfg.timing_warmup + cfg.timing_trials)
        for k, i in enumerate(order[: cfg.timing_warmup]):
            model.partial_fit(train.images[i : i + 1], train.labels[i : i + 1], classes=classes)
        for trial, i in enumerate(order[cfg.timing_warmup :]):
            t0 = time.perf_counter()
            model.partial_fit(train.images[i : i + 1], train.labels[i : i + 1])
            ms = (time.perf_counter() - t0) * 1e3
            rows.append(
                MetricsRow(
                    cfg.method, "timing", cfg.depth, cfg.width, lr, seed,
                    trial, "per_sample_ms", ms, ms,
                )
            )
        epoch_model = build_model(cfg, lr, seed)
        idx = rng.integers(train.n, size=cfg.timing_epoch_samples)
        t0 = time.perf_counter()
        epoch_model.partial_fit(train.images[idx], train.labels[idx], classes=classes)
        ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            MetricsRow(
                cfg.method, "timing", cfg.depth, cfg.width, lr, seed,
                0, "epoch_ms", ms, ms,
            )
        )
    return rows


PROTOCOLS = {
    "direct": run_direct,
    "online": run_online,
    "data_efficiency": run_data_efficiency,
    "drift": run_concept_drift,
    "precision_diag": run_precision_diag,
    "timing": run_timing,
}


def run_protocol(cfg: ExperimentConfig, train: Dataset, test: Dataset):
    try:
        fn = PROTOCOLS[cfg.protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {cfg.protocol!r}") from None
    return fn(cfg, train, test)
