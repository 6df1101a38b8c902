"""Hebbian weight rules and the single-sample training step.

Three rules of increasing dependence on inferred precision:

- ``standard``: dW = eta * delta_child (x) g(mu_parent)
- ``precision``: the standard increment scaled per child unit by its
  posterior precision, giving each connection its own learning rate
- ``ratio``: the standard increment scaled by pi_child / (pi_child +
  pi_parent), a complementary Kalman gain that caps runaway updates when the
  parent is already highly certain

The ratio rule exists in two flavours: posterior precisions (default) or
predicted precisions, selected by ``ratio_uses_posterior``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .network import HgfNetwork

WEIGHT_RULES = ("standard", "precision", "ratio")


@dataclass(frozen=True)
class WeightRule:
    kind: str = "standard"
    eta: float = 1e-3
    ratio_uses_posterior: bool = True

    def __post_init__(self):
        if self.kind not in WEIGHT_RULES:
            raise ValueError(f"unknown weight rule {self.kind!r}")
        # eta = 0 is tolerated as the degenerate no-learning rate.
        if self.eta < 0:
            raise ValueError("eta must be non-negative")


def _child_posterior_pi(net: HgfNetwork, l: int):
    # A clamped continuous output layer has no posterior step; its predicted
    # precision stands in for the posterior. (With binary outcomes layer 0 is
    # the logit layer, which does get a posterior update.)
    if l == 0 and net.output == "continuous":
        return net.layers[0].pi_hat
    return net.layers[l].pi


def _parent_pi(net: HgfNetwork, l: int, posterior: bool):
    if l == net.input_index:
        # Observed input: precision pinned at the prior.
        return np.full(net.widths[l], net.prior_precision[l])
    layer = net.layers[l]
    return layer.pi if posterior else layer.pi_hat


def weight_update(net: HgfNetwork, rule: WeightRule):
    """Apply one Hebbian update to every coupling; returns mean |dW| per
    coupling (child-side first)."""
    mean_abs = []
    for l in range(net.n_layers - 1):
        child = net.layers[l]
        parent_act = net.g(net.layers[l + 1].mu)
        base = rule.eta * child.delta  # per child unit

        if rule.kind == "standard":
            gain_w = np.outer(base, parent_act)
            gain_b = base
        elif rule.kind == "precision":
            scaled = base * _child_posterior_pi(net, l)
            gain_w = np.outer(scaled, parent_act)
            gain_b = scaled
        else:  # ratio
            if rule.ratio_uses_posterior:
                pi_c = _child_posterior_pi(net, l)
            else:
                pi_c = child.pi_hat
            pi_p = _parent_pi(net, l + 1, rule.ratio_uses_posterior)
            factor = pi_c[:, None] / (pi_c[:, None] + pi_p[None, :])
            # Strictly inside (0, 1) in exact arithmetic; allow the upper
            # bound to round to 1.0 when the child is vastly more precise.
            if np.any(factor <= 0.0) or np.any(factor > 1.0):
                raise NumericalError("ratio gain left (0, 1]")
            # Bias parent is an always-on unit at the parent layer's prior.
            factor_b = pi_c / (pi_c + net.prior_precision[l + 1])
            gain_w = np.outer(base, parent_act) * factor
            gain_b = base * factor_b

        coup = net.couplings[l]
        coup.weights += gain_w
        coup.bias += gain_b
        mean_abs.append(
            float(
                (np.sum(np.abs(gain_w)) + np.sum(np.abs(gain_b)))
                / (gain_w.size + gain_b.size)
            )
        )
    return mean_abs


def train_step(net: HgfNetwork, x, y, rule: WeightRule):
    """One full training step: clamp, predict, errors, posterior updates
    (with volatility parents if enabled), weight update.

    Returns a diagnostics dict with per-hidden-layer mean |delta| and mean
    pi_hat, plus mean |dW| per coupling.
    """
    net.clamp_input(x)
    net.clamp_target(y)
    net.predict_sweep()
    net.prediction_errors()
    net.posterior_update()
    mean_abs_dw = weight_update(net, rule)
    diag = {
        "mean_abs_dw": mean_abs_dw,
        "layers": net.layer_diagnostics(),
        "mean_abs_delta": [
            float(np.mean(np.abs(net.layers[l].delta))) for l in net.hidden_indices()
        ],
    }
    net.release_target()
    return diag
