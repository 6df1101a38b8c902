"""Scalar math primitives shared by every model.

Activation functions, the numerically stable logistic sigmoid, He weight
initialization, and deterministic RNG fan-out. Everything here is pure and
operates on float64 arrays.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Activation:
    """Piecewise-linear activation: plain ReLU or leaky ReLU.

    ``slope`` is the negative-branch slope; 0 for plain ReLU. The second
    derivative is treated as identically zero everywhere, including the kink.
    """

    kind: str = "leaky_relu"
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "relu":
            object.__setattr__(self, "slope", 0.0)
        elif not 0.0 < self.slope < 1.0:
            raise ValueError("leaky_relu slope must lie in (0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, x, self.slope * x)

    def deriv(self, x):
        # Derivative at the kink is defined as 1 so units exactly at zero
        # still pass gradient.
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, 1.0, self.slope)


RELU = Activation("relu")
LEAKY_RELU = Activation("leaky_relu", 0.01)


def sigmoid(x):
    """Logistic sigmoid computed in the stable branch form.

    Never overflows and never returns exactly 0 or 1 for finite input of
    moderate magnitude.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def he_init(fan_in, shape, rng):
    """Draw weights from Normal(0, 2/fan_in)."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed, *keys):
    """Deterministic, splittable RNG.

    ``make_rng(seed, "experiment", 3, "layer", 0)`` always yields the same
    generator; distinct key tuples yield statistically independent streams.
    """
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def one_hot(label, n_classes):
    label = int(label)
    if not 0 <= label < n_classes:
        raise ValueError(f"label {label} outside [0, {n_classes})")
    v = np.zeros(n_classes)
    v[label] = 1.0
    return v
