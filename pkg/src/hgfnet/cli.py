"""Command-line interface: train single cells, run benchmark protocols,
verify the core numerics, and inspect datasets.

Configuration comes from a YAML file (``--config``) with unknown keys
rejected; individual flags override file values. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np
import yaml

from .bench import (
    BASELINE_LR_SWEEP,
    HGF_LR_SWEEP,
    ExperimentConfig,
    oracle_lr_select,
    run_protocol,
    write_csv,
)
from .core import make_rng
from .data import Dataset, load_idx, spiral_dataset, split, synthetic_image_classification
from .errors import ConfigError, DataError, NumericalError
from .verify import run_all_checks

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# Recognized config-file keys and their coercions. Anything else is an error.
_CONFIG_KEYS = {
    "dataset": str,
    "data_dir": str,
    "output_dir": str,
    "train_fraction": float,
    "dataset_n": int,
    "method": str,
    "depth": int,
    "width": int,
    "lrs": lambda v: tuple(float(x) for x in v),
    "seeds": lambda v: tuple(int(x) for x in v),
    "epochs": int,
    "batch_size": int,
    "weight_rule": str,
    "precision_mode": str,
    "prior_precision": lambda v: v if isinstance(v, str) else (
        tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else float(v)
    ),
    "volatility": bool,
    "online_iterations": int,
    "online_samples": int,
    "test_subset": int,
    "subset_sizes": lambda v: tuple(int(x) for x in v),
    "drift_iterations": int,
    "drift_period": int,
    "drift_train": int,
    "pretrain_n": int,
    "pretrain_passes": int,
    "timing_warmup": int,
    "timing_trials": int,
    "timing_epoch_samples": int,
}

_EXPERIMENT_FIELDS = set(ExperimentConfig.__dataclass_fields__)

_FASHION_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_config(path):
    """Parse a YAML config file, rejecting unknown keys."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, value in raw.items():
        if value is None:
            continue
        try:
            out[key] = _CONFIG_KEYS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for config key {key!r}: {value!r}") from exc
    return out


def merged_config(config_path, overrides):
    cfg = load_config(config_path)
    cfg.update({k: v for k, v in overrides.items() if v is not None and v != ()})
    return cfg


def experiment_from(cfg, protocol):
    kwargs = {k: v for k, v in cfg.items() if k in _EXPERIMENT_FIELDS}
    if "lrs" not in kwargs:
        kwargs["lrs"] = (
            HGF_LR_SWEEP if cfg.get("method", "hgf") == "hgf" else BASELINE_LR_SWEEP
        )
    try:
        return ExperimentConfig(protocol=protocol, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _find_idx_pair(data_dir, stem_images, stem_labels):
    paths = []
    for stem in (stem_images, stem_labels):
        plain = os.path.join(data_dir, stem)
        gz = plain + ".gz"
        if os.path.exists(plain):
            paths.append(plain)
        elif os.path.exists(gz):
            paths.append(gz)
        else:
            raise DataError(f"missing data file {plain}[.gz]")
    return paths


def load_datasets(cfg):
    """Resolve the configured dataset into (train, test) splits.

    ``fashion_mnist`` reads the four official IDX files from ``data_dir``
    (flag/config key, falling back to the HGFNET_DATA_DIR environment
    variable); ``spiral`` and ``synthetic`` are generated deterministically.
    """
    name = cfg.get("dataset", "spiral")
    if name == "fashion_mnist":
        data_dir = cfg.get("data_dir") or os.environ.get("HGFNET_DATA_DIR")
        if not data_dir:
            raise ConfigError(
                "fashion_mnist needs a data directory: set data_dir or HGFNET_DATA_DIR"
            )
        if not os.path.isdir(data_dir):
            raise DataError(f"data directory {data_dir} does not exist")
        out = []
        for part, (stem_i, stem_l) in _FASHION_FILES.items():
            images_path, labels_path = _find_idx_pair(data_dir, stem_i, stem_l)
            ds = load_idx(images_path, labels_path, name=f"fashion_mnist-{part}")
            out.append(ds)
        return tuple(out)
    if name == "spiral":
        full = spiral_dataset(n=cfg.get("dataset_n", 1000), seed=0)
    elif name == "synthetic":
        full = synthetic_image_classification(n=cfg.get("dataset_n", 2000), seed=0)
    else:
        raise ConfigError(
            f"unknown dataset {name!r} (expected spiral, synthetic, or fashion_mnist)"
        )
    return split(full, cfg.get("train_fraction", 0.8), seed=0)


def _write_outputs(writers):
    """Run (path, fn) writers, removing everything written on any failure."""
    written = []
    try:
        for path, fn in writers:
            fn(path)
            written.append(path)
    except Exception:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return written


def _plot_rows(rows, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curve_metrics = {"test_accuracy", "test_error", "per_sample_ms"}
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for r in rows:
        if r.metric not in curve_metrics:
            continue
        series.setdefault((r.method, r.lr, r.seed, r.metric), []).append((r.step, r.value))
    for (method, lr, seed, metric), pts in sorted(series.items()):
        pts.sort()
        ax.plot(*zip(*pts), label=f"{method} lr={lr:g} seed={seed}")
    if series:
        ax.set_ylabel(sorted({k[3] for k in series})[0])
    ax.set_xlabel("step")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _run(fn):
    """Execute a command body, mapping library errors to exit codes."""
    try:
        return fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except (ValueError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _common_options(fn):
    for opt in reversed(
        [
            click.option("--config", "config_path", type=click.Path(), default=None,
                         help="YAML config file; flags override its values."),
            click.option("--dataset", type=str, default=None,
                         help="spiral, synthetic, or fashion_mnist."),
            click.option("--data-dir", type=str, default=None,
                         help="Directory with FashionMNIST IDX files (or set HGFNET_DATA_DIR)."),
            click.option("--output-dir", type=str, default=None,
                         help="Where CSV/snapshot/plot files go (default: current directory)."),
            click.option("--method", type=click.Choice(["hgf", "mlp", "pcn"]), default=None),
            click.option("--depth", type=int, default=None),
            click.option("--width", type=int, default=None),
            click.option("--lr", "lrs", type=float, multiple=True,
                         help="Learning rate(s); repeat for a sweep."),
            click.option("--seed", "seeds", type=int, multiple=True,
                         help="Seed(s); repeat for multiple."),
            click.option("--epochs", type=int, default=None),
        ]
    ):
        fn = opt(fn)
    return fn


def _gather(config_path, **overrides):
    return merged_config(config_path, overrides)


@click.group()
@click.version_option(package_name="hgfnet")
def main():
    """Hierarchical Gaussian filter networks: training, benchmarks, checks."""


@main.command()
@_common_options
@click.option("--checkpoint", type=str, default=None,
              help="Snapshot output path (default: <output-dir>/train.npz).")
def train(config_path, checkpoint, **overrides):
    """Train one (method, lr, seed) cell and write a snapshot plus a CSV of
    per-epoch test accuracy."""

    def body():
        cfg = _gather(config_path, **overrides)
        exp = experiment_from(cfg, "direct")
        if len(exp.lrs) != 1 or len(exp.seeds) != 1:
            raise ConfigError("train takes exactly one --lr and one --seed")
        train_ds, test_ds = load_datasets(cfg)
        out_dir = cfg.get("output_dir", ".")
        os.makedirs(out_dir, exist_ok=True)

        from .bench import _accuracy, build_model
        from .snapshot import save_mlp, save_network, save_pcn
        from .bench import MetricsRow
        import time

        lr, seed = exp.lrs[0], exp.seeds[0]
        model = build_model(exp, lr, seed)
        classes = np.unique(train_ds.labels)
        rng = make_rng(seed, "direct-order", repr(lr))
        rows = []
        for epoch in range(exp.epochs):
            t0 = time.perf_counter()
            order = rng.permutation(train_ds.n)
            model.partial_fit(
                train_ds.images[order], train_ds.labels[order], classes=classes
            )
            ms = (time.perf_counter() - t0) * 1e3
            rows.append(
                MetricsRow(
                    exp.method, "direct", exp.depth, exp.width, lr, seed,
                    epoch, "test_accuracy", _accuracy(model, test_ds), ms,
                )
            )
        csv_path = os.path.join(out_dir, "train.csv")
        snap_path = checkpoint or os.path.join(out_dir, "train.npz")
        savers = {
            "hgf": lambda p: save_network(model.net_, p),
            "mlp": lambda p: save_mlp(model.model_, p),
            "pcn": lambda p: save_pcn(model.model_, p),
        }
        _write_outputs(
            [(csv_path, lambda p: write_csv(rows, p)), (snap_path, savers[exp.method])]
        )
        click.echo(f"final test accuracy {rows[-1].value:.4f}")
        click.echo(f"wrote {csv_path} and {snap_path}")

    _run(body)


@main.group()
def bench():
    """Run a benchmark protocol and export its metrics CSV."""


def _run_bench(protocol, config_path, plot, overrides):
    def body():
        cfg = _gather(config_path, **overrides)
        exp = experiment_from(cfg, protocol)
        train_ds, test_ds = load_datasets(cfg)
        out_dir = cfg.get("output_dir", ".")
        os.makedirs(out_dir, exist_ok=True)
        rows = run_protocol(exp, train_ds, test_ds)
        csv_path = os.path.join(out_dir, f"{protocol}.csv")
        writers = [(csv_path, lambda p: write_csv(rows, p))]
        if plot:
            writers.append(
                (os.path.join(out_dir, f"{protocol}.svg"),
                 lambda p: _plot_rows(rows, p))
            )
        written = _write_outputs(writers)
        if protocol not in ("timing", "precision_diag"):
            metric = "test_accuracy" if protocol == "direct" else "test_error"
            best = oracle_lr_select(rows, metric=metric, maximize=metric == "test_accuracy")
            for (method, depth, width), lr in sorted(best.items()):
                click.echo(f"oracle lr for {method} d{depth} w{width}: {lr:g}")
        click.echo(f"wrote {', '.join(written)} ({len(rows)} rows)")

    _run(body)


def _bench_subcommand(cli_name, protocol):
    @bench.command(name=cli_name, help=f"Run the {protocol.replace('_', ' ')} protocol.")
    @_common_options
    @click.option("--plot/--no-plot", default=False, help="Also export an SVG line plot.")
    def cmd(config_path, plot, **overrides):
        _run_bench(protocol, config_path, plot, overrides)

    return cmd


bench_direct = _bench_subcommand("direct", "direct")
bench_online = _bench_subcommand("online", "online")
bench_data_efficiency = _bench_subcommand("data-efficiency", "data_efficiency")
bench_drift = _bench_subcommand("drift", "drift")
bench_precision = _bench_subcommand("precision", "precision_diag")
bench_timing = _bench_subcommand("timing", "timing")


@main.command()
@click.option("--seed", type=int, default=0)
def verify(seed):
    """Run the fast numeric self-checks and print a per-check table."""
    results = run_all_checks(seed=seed)
    width = max(len(r["name"]) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        failed += not r["passed"]
        click.echo(f"{r['name']:<{width}}  {status}  {r['detail']}")
    if failed:
        click.echo(f"{failed} check(s) failed", err=True)
        sys.exit(EXIT_NUMERICAL)


@main.command(name="dataset-info")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--data-dir", type=str, default=None)
def dataset_info(config_path, dataset, data_dir):
    """Print shapes and class counts for the configured dataset."""

    def body():
        cfg = _gather(config_path, dataset=dataset, data_dir=data_dir)
        train_ds, test_ds = load_datasets(cfg)
        for part, ds in (("train", train_ds), ("test", test_ds)):
            classes, counts = np.unique(ds.labels, return_counts=True)
            click.echo(
                f"{ds.name} [{part}]: {ds.n} samples x {ds.dim} features, "
                f"{len(classes)} classes"
            )
            click.echo(
                "  counts: "
                + ", ".join(f"{c}:{n}" for c, n in zip(classes, counts))
            )

    _run(body)


if __name__ == "__main__":
    main()
