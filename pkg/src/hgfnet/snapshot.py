"""Versioned snapshot container shared by all model kinds.

A flat npz archive with a payload tag ("hgf", "mlp", "pcn") and a format
version; used by the CLI to checkpoint between training phases.
"""

from __future__ import annotations

import numpy as np

from .core import Activation
from .errors import DataError
from .network import HgfNetwork, VolatilityParent
from .baselines import MlpModel, PcnModel

FORMAT_VERSION = 1


def _activation_fields(g):
    return {"g_kind": np.array(g.kind), "g_slope": np.array(g.slope)}


def _activation_from(z):
    kind = str(z["g_kind"])
    return Activation(kind) if kind == "relu" else Activation(kind, float(z["g_slope"]))


def save_network(net: HgfNetwork, path):
    arrays = {
        "payload": np.array("hgf"),
        "version": np.array(FORMAT_VERSION),
        "widths": np.array(list(reversed(net.widths))),  # input-first
        "omega": np.array(net.omega),
        "prior_precision": np.asarray(net.prior_precision, dtype=float),
        "precision_mode": np.array(net.precision_mode),
        "output": np.array(net.output),
        "with_volatility": np.array(net.volatility_parents is not None),
        **_activation_fields(net.g),
    }
    for l, coup in enumerate(net.couplings):
        arrays[f"w{l}"] = coup.weights
        arrays[f"b{l}"] = coup.bias
    for l, layer in enumerate(net.layers):
        arrays[f"mu{l}"] = layer.mu
        arrays[f"pi{l}"] = layer.pi
    if net.volatility_parents is not None:
        for l, vol in net.volatility_parents.items():
            arrays[f"vol_mu{l}"] = vol.mu
            arrays[f"vol_pi{l}"] = vol.pi
            arrays[f"vol_omega{l}"] = np.array(vol.omega)
    np.savez_compressed(path, **arrays)


def load_network(path):
    with np.load(path, allow_pickle=False) as z:
        if str(z["payload"]) != "hgf":
            raise DataError(f"{path}: payload tag {z['payload']} is not 'hgf'")
        if int(z["version"]) != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported snapshot version {int(z['version'])}")
        net = HgfNetwork(
            [int(w) for w in z["widths"]],
            g=_activation_from(z),
            omega=float(z["omega"]),
            with_volatility=bool(z["with_volatility"]),
            precision_mode=str(z["precision_mode"]),
            output=str(z["output"]),
            prior_precision=np.atleast_1d(z["prior_precision"]).tolist(),
        )
        for l, coup in enumerate(net.couplings):
            coup.weights = z[f"w{l}"].copy()
            coup.bias = z[f"b{l}"].copy()
        for l, layer in enumerate(net.layers):
            layer.mu = z[f"mu{l}"].copy()
            layer.pi = z[f"pi{l}"].copy()
        if net.volatility_parents is not None:
            for l, vol in net.volatility_parents.items():
                vol.mu = z[f"vol_mu{l}"].copy()
                vol.pi = z[f"vol_pi{l}"].copy()
                vol.omega = float(z[f"vol_omega{l}"])
        return net


def _save_stack(model, tag, path, extra=None):
    arrays = {
        "payload": np.array(tag),
        "version": np.array(FORMAT_VERSION),
        "widths": np.array(model.widths),
        "lr": np.array(model.adam.lr),
        **_activation_fields(model.g),
    }
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{k}"] = W
        arrays[f"b{k}"] = b
    if extra:
        arrays.update(extra)
    np.savez_compressed(path, **arrays)


def save_mlp(model: MlpModel, path):
    _save_stack(model, "mlp", path)


def save_pcn(model: PcnModel, path):
    _save_stack(
        model,
        "pcn",
        path,
        extra={"T": np.array(model.T), "activity_lr": np.array(model.activity_lr)},
    )


def _load_stack(z, model):
    for k in range(len(model.weights)):
        model.weights[k] = z[f"w{k}"].copy()
        model.biases[k] = z[f"b{k}"].copy()
    return model


def load_model(path):
    """Load any snapshot; returns the appropriate model object."""
    with np.load(path, allow_pickle=False) as z:
        tag = str(z["payload"])
        if tag == "hgf":
            pass  # fall through below, outside the context manager
        elif tag == "mlp":
            model = MlpModel([int(w) for w in z["widths"]], g=_activation_from(z), lr=float(z["lr"]))
            return _load_stack(z, model)
        elif tag == "pcn":
            model = PcnModel(
                [int(w) for w in z["widths"]],
                g=_activation_from(z),
                lr=float(z["lr"]),
                T=int(z["T"]),
                activity_lr=float(z["activity_lr"]),
            )
            return _load_stack(z, model)
        else:
            raise DataError(f"{path}: unknown payload tag {tag!r}")
    return load_network(path)
