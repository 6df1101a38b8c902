"""Deep hierarchical Gaussian filter network.

A layered belief graph in which every layer tracks a posterior mean/precision
pair and a predicted mean/precision pair. Inference is a three-sweep routine:

1. top-down prediction: each layer's mean is predicted from its parent layer
   through the coupling weights and the activation nonlinearity, and its
   precision is shrunk by the process variance ``exp(mu_vol + omega)``;
2. prediction errors at the clamped layers;
3. bottom-up one-shot posterior updates: each continuous layer absorbs its
   child layer's precision-weighted errors in closed form (a Kalman-gain
   step), then emits its own refreshed error upward.

``layers`` holds the continuous state layers: index 0 is the output-side
layer, the last index is the clamped input layer. ``couplings[l]`` maps
parent layer ``l + 1`` to child layer ``l`` and has shape
``(width[l], width[l + 1])``.

For classification, binary outcome nodes hang off layer 0 through a fixed
unit coupling: layer 0 carries the logits, the binary nodes apply the
logistic link. Observing a clamped label updates layer 0 with the classic
binary-node rule (precision increment ``mu_hat*(1 - mu_hat)``, mean increment
``delta / pi``), after which evidence propagates upward through the ordinary
continuous machinery.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .core import Activation, he_init, sigmoid
from .errors import NumericalError

# Floor applied to volatility-parent precision; stands in for robust updates.
PI_FLOOR = 1e-8

# Clip on the log-variance exponent to keep exp() representable.
_EXP_CLIP = 600.0

# Keeps the binary-node precision 1/(mu(1-mu)) finite at saturation.
_BIN_EPS = 1e-12


@dataclass
class LayerBeliefs:
    """Belief state of one layer: mu, pi (posterior), mu_hat, pi_hat
    (prediction), delta (value prediction error)."""

    mu: np.ndarray
    pi: np.ndarray
    mu_hat: np.ndarray
    pi_hat: np.ndarray
    delta: np.ndarray

    @classmethod
    def zeros(cls, width, prior_precision=1.0):
        return cls(
            mu=np.zeros(width),
            pi=np.full(width, float(prior_precision)),
            mu_hat=np.zeros(width),
            pi_hat=np.full(width, float(prior_precision)),
            delta=np.zeros(width),
        )

    @property
    def width(self):
        return self.mu.shape[0]


@dataclass
class Coupling:
    """Value-coupling strengths (synaptic weights) plus bias from an
    always-on unit with activation 1."""

    weights: np.ndarray  # (child_width, parent_width)
    bias: np.ndarray  # (child_width,)


@dataclass
class VolatilityParent:
    """Per-unit log-volatility parent of one continuous layer.

    ``mu`` is the posterior log-volatility mean per child unit; its own tonic
    volatility is ``omega``. ``floor_hits`` counts precision-floor clips.
    """

    mu: np.ndarray
    pi: np.ndarray
    mu_hat: np.ndarray
    pi_hat: np.ndarray
    omega: float = -10.0
    floor_hits: int = 0

    @classmethod
    def for_width(cls, width, omega=-10.0):
        return cls(
            mu=np.zeros(width),
            pi=np.ones(width),
            mu_hat=np.zeros(width),
            pi_hat=np.ones(width),
            omega=float(omega),
        )


def value_posterior_update(mu_hat_b, pi_hat_b, weights, gprime_b, pi_hat_a, delta_a):
    """Closed-form posterior of a parent layer given one child layer.

    ``weights`` maps parent units to child predictions, shape
    ``(child_width, parent_width)``. With piecewise-linear activations the
    second-derivative term vanishes, so the precision gains a sum of squares
    and the mean moves by a precision-weighted Kalman gain on the child's
    prediction error. Returns ``(mu_b, pi_b)``.
    """
    pi_b = pi_hat_b + (weights**2).T @ pi_hat_a * gprime_b**2
    mu_b = mu_hat_b + gprime_b * (weights.T @ (pi_hat_a * delta_a)) / pi_b
    return mu_b, pi_b


def volatility_parent_update(vol, pi_hat_a, pi_a, delta_a, omega_child):
    """One-shot update of a volatility parent from its child layer's
    (post-update) beliefs.

    The volatility prediction error ``pi_hat/pi + pi_hat*delta**2 - 1`` is
    positive after surprising observations, inflating the child's future
    process variance, and negative when errors are small relative to the
    predicted precision. Precision is floored at ``PI_FLOOR``.
    """
    vope = pi_hat_a / pi_a + pi_hat_a * delta_a**2 - 1.0
    gamma = pi_hat_a * np.exp(np.clip(vol.mu_hat + omega_child, -_EXP_CLIP, _EXP_CLIP))
    pi_vol = vol.pi_hat + 0.5 * gamma**2 * (1.0 + vope)
    low = pi_vol < PI_FLOOR
    if np.any(low):
        vol.floor_hits += int(np.count_nonzero(low))
        pi_vol = np.maximum(pi_vol, PI_FLOOR)
    mu_vol = vol.mu_hat + gamma / (2.0 * pi_vol) * vope
    vol.mu = mu_vol
    vol.pi = pi_vol
    return vope


class HgfNetwork:
    """A stack of belief layers coupled by weights, trained one sample at a
    time with closed-form updates.

    Parameters
    ----------
    widths : sequence of int
        Layer widths from the input side to the output side, e.g.
        ``[784, 32, 32, 10]``. At least input, one hidden, and output.
    g : Activation
        Nonlinearity applied to parent means.
    omega : float
        Tonic log-volatility shared by all layers.
    with_volatility : bool
        Attach a per-unit volatility parent to every updatable layer.
    precision_mode : {"temporal_carryover", "reset_each_sample"}
        Whether posterior precisions persist across samples or restart from
        the prior at every sample.
    output : {"binary", "continuous"}
        Binary outcome nodes behind a logit layer (the classification head)
        or a plain continuous observed output layer.
    prior_precision : float or sequence of float
        Per-unit precision at initialization (and at every sample start in
        reset mode). A scalar applies to every layer; a sequence gives one
        value per layer from the output side inward, e.g. a depth-graded
        profile that keeps the bottom-up Kalman ratios near one.
    """

    def __init__(
        self,
        widths,
        g=None,
        omega=-10.0,
        with_volatility=False,
        precision_mode="temporal_carryover",
        output="binary",
        prior_precision=1.0,
        omega_vol=-10.0,
        rng=None,
    ):
        widths = [int(w) for w in widths]
        if len(widths) < 3 or any(w < 1 for w in widths):
            raise ValueError(
                "widths needs >= 3 positive entries (input, hidden..., output); "
                f"got {widths}"
            )
        if precision_mode not in ("temporal_carryover", "reset_each_sample"):
            raise ValueError(f"unknown precision_mode {precision_mode!r}")
        if output not in ("binary", "continuous"):
            raise ValueError(f"unknown output kind {output!r}")
        if rng is None:
            rng = np.random.default_rng(0)

        self.g = g if g is not None else Activation("leaky_relu", 0.01)
        self.omega = float(omega)
        self.precision_mode = precision_mode
        self.output = output

        # Internal layer order: index 0 = output side, last = input.
        self.widths = list(reversed(widths))
        self.n_layers = len(self.widths)
        if np.ndim(prior_precision) == 0:
            self.prior_precision = [float(prior_precision)] * self.n_layers
        else:
            self.prior_precision = [float(p) for p in prior_precision]
            if len(self.prior_precision) != self.n_layers:
                raise ValueError(
                    f"prior_precision needs {self.n_layers} entries, "
                    f"got {len(self.prior_precision)}"
                )
        if any(p <= 0 for p in self.prior_precision):
            raise ValueError("prior precisions must be positive")
        self.layers = [
            LayerBeliefs.zeros(w, p)
            for w, p in zip(self.widths, self.prior_precision)
        ]
        self.couplings = [
            Coupling(
                weights=he_init(
                    self.widths[l + 1], (self.widths[l], self.widths[l + 1]), rng
                ),
                bias=np.zeros(self.widths[l]),
            )
            for l in range(self.n_layers - 1)
        ]
        # Binary outcome nodes behind layer 0, linked with fixed unit
        # coupling; layer 0 then holds the logits.
        self.binary = (
            LayerBeliefs.zeros(self.widths[0]) if output == "binary" else None
        )
        self.volatility_parents = None
        if with_volatility:
            self.volatility_parents = {
                l: VolatilityParent.for_width(self.widths[l], omega_vol)
                for l in self.hidden_indices()
            }
        self._input_clamped = False
        self._target_clamped = False

    # ------------------------------------------------------------------
    # structure helpers

    @property
    def input_index(self):
        return self.n_layers - 1

    def hidden_indices(self):
        """Indices of updatable continuous layers, bottom-up. With binary
        outcomes layer 0 (the logits) is itself updatable."""
        start = 0 if self.output == "binary" else 1
        return range(start, self.n_layers - 1)

    @property
    def input_dim(self):
        return self.widths[self.input_index]

    @property
    def output_dim(self):
        return self.widths[0]

    def clone(self):
        return copy.deepcopy(self)

    # ------------------------------------------------------------------
    # clamping

    def clamp_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"input shape {x.shape} != ({self.input_dim},)")
        self.layers[self.input_index].mu = x.copy()
        self._input_clamped = True

    def clamp_target(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.output_dim,):
            raise ValueError(f"target shape {y.shape} != ({self.output_dim},)")
        if self.output == "binary":
            self.binary.mu = y.copy()
        else:
            self.layers[0].mu = y.copy()
        self._target_clamped = True

    def release_target(self):
        self._target_clamped = False

    # ------------------------------------------------------------------
    # sweeps

    def _shrunk_precision(self, pi_prev, mu_vol, omega):
        expo = np.clip(mu_vol + omega, -_EXP_CLIP, _EXP_CLIP)
        pi_hat = 1.0 / (1.0 / pi_prev + np.exp(expo))
        if np.any(pi_hat > pi_prev):
            raise NumericalError("predicted precision exceeded previous posterior")
        return pi_hat

    def predict_sweep(self):
        """Top-down pass: refresh mu_hat and pi_hat for every layer below the
        input, set unclamped means to their predictions."""
        if not self._input_clamped:
            raise RuntimeError("clamp_input must run before predict_sweep")

        if self.precision_mode == "reset_each_sample":
            for l in self.hidden_indices():
                self.layers[l].pi = np.full(
                    self.widths[l], self.prior_precision[l]
                )

        # Input layer: observed, shrunk from the prior with the shared omega.
        inp = self.layers[self.input_index]
        inp.pi_hat = self._shrunk_precision(
            np.full(inp.width, self.prior_precision[self.input_index]),
            0.0,
            self.omega,
        )
        inp.mu_hat = inp.mu.copy()
        inp.delta = np.zeros(inp.width)

        # Volatility parents predict first (their state feeds the children's
        # precision shrinkage).
        if self.volatility_parents is not None:
            for vol in self.volatility_parents.values():
                vol.mu_hat = vol.mu.copy()
                vol.pi_hat = self._shrunk_precision(vol.pi, 0.0, vol.omega)

        for l in range(self.n_layers - 2, -1, -1):
            layer = self.layers[l]
            parent = self.layers[l + 1]
            coup = self.couplings[l]
            layer.mu_hat = coup.weights @ self.g(parent.mu) + coup.bias
            mu_vol = 0.0
            if self.volatility_parents is not None and l in self.volatility_parents:
                mu_vol = self.volatility_parents[l].mu_hat
            layer.pi_hat = self._shrunk_precision(layer.pi, mu_vol, self.omega)
            if l > 0 or self.output == "binary":
                # Unclamped means carry no temporal continuity: re-predict.
                layer.mu = layer.mu_hat.copy()

        if self.output == "binary":
            p = np.clip(sigmoid(self.layers[0].mu_hat), _BIN_EPS, 1.0 - _BIN_EPS)
            self.binary.mu_hat = p
            self.binary.pi_hat = 1.0 / (p * (1.0 - p))
            if not self._target_clamped:
                self.binary.mu = p.copy()

    def prediction_errors(self):
        """Set delta = mu - mu_hat for every non-input layer (and the binary
        nodes when present)."""
        for l in range(self.n_layers - 1):
            layer = self.layers[l]
            layer.delta = layer.mu - layer.mu_hat
        if self.binary is not None:
            self.binary.delta = self.binary.mu - self.binary.mu_hat

    def posterior_update(self):
        """Bottom-up one-shot updates of all updatable layers.

        Each layer absorbs its child layer's current delta (refreshed as the
        sweep ascends, so evidence at the clamped output reaches every
        depth), then refreshes its own delta for the layer above.
        """
        for b in self.hidden_indices():
            layer = self.layers[b]
            if b == 0:
                # Binary child through the fixed unit link: the sigmoid slope
                # mu_hat*(1 - mu_hat) plays the role of the child's
                # precision, so the weighted error reduces to delta itself.
                slope = self.binary.mu_hat * (1.0 - self.binary.mu_hat)
                pi_b = layer.pi_hat + slope
                mu_b = layer.mu_hat + self.binary.delta / pi_b
            else:
                child = self.layers[b - 1]
                gprime = self.g.deriv(layer.mu_hat)
                mu_b, pi_b = value_posterior_update(
                    layer.mu_hat,
                    layer.pi_hat,
                    self.couplings[b - 1].weights,
                    gprime,
                    child.pi_hat,
                    child.delta,
                )
            if np.any(pi_b <= 0) or np.any(pi_b < layer.pi_hat):
                raise NumericalError("posterior precision lost mass in value update")
            layer.mu = mu_b
            layer.pi = pi_b
            layer.delta = layer.mu - layer.mu_hat
            if self.volatility_parents is not None and b in self.volatility_parents:
                volatility_parent_update(
                    self.volatility_parents[b],
                    layer.pi_hat,
                    layer.pi,
                    layer.delta,
                    self.omega,
                )

    # ------------------------------------------------------------------
    # readout and energy

    def infer(self, x):
        """Output probabilities (binary) or predicted means (continuous) for
        one input: prediction sweep only, no belief or weight learning."""
        self.release_target()
        self.clamp_input(x)
        self.predict_sweep()
        if self.output == "binary":
            return self.binary.mu_hat.copy()
        return self.layers[0].mu_hat.copy()

    def free_energy(self):
        """Sum of precision-weighted squared errors over continuous layers
        plus binary cross-entropy at the binary outcome nodes."""
        total = 0.0
        for l in range(self.n_layers - 1):
            layer = self.layers[l]
            total += 0.5 * np.sum(
                layer.pi_hat * layer.delta**2
                - np.log(layer.pi_hat)
                + np.log(2.0 * np.pi)
            )
        if self.binary is not None:
            y = self.binary.mu
            p = self.binary.mu_hat
            total += -np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
        return float(total)

    def free_energy_given_means(self, means):
        """Free energy as a function of posterior means, holding pi_hat fixed.

        ``means`` maps layer index to a mean vector overriding the stored
        posterior. Predictions of child layers are recomputed from the
        overridden means; used to probe stationarity of the one-shot update.
        """
        mus = [
            np.asarray(means.get(l, self.layers[l].mu), dtype=float)
            for l in range(self.n_layers)
        ]
        total = 0.0
        for l in range(self.n_layers - 2, -1, -1):
            coup = self.couplings[l]
            z = coup.weights @ self.g(mus[l + 1]) + coup.bias
            pi_hat = self.layers[l].pi_hat
            delta = mus[l] - z
            total += 0.5 * np.sum(
                pi_hat * delta**2 - np.log(pi_hat) + np.log(2.0 * np.pi)
            )
        if self.binary is not None:
            p = np.clip(sigmoid(mus[0]), _BIN_EPS, 1.0 - _BIN_EPS)
            y = self.binary.mu
            total += -np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
        return float(total)

    # ------------------------------------------------------------------
    # diagnostics

    def layer_diagnostics(self):
        """Per-updatable-layer mean pi_hat and mean precision-weighted
        error, output side first."""
        rows = []
        for l in self.hidden_indices():
            layer = self.layers[l]
            rows.append(
                {
                    "layer": l,
                    "mean_pi_hat": float(np.mean(layer.pi_hat)),
                    "mean_pwpe": float(np.mean(np.abs(layer.delta) * layer.pi_hat)),
                }
            )
        return rows


def graded_prior(n_layers, factor=4.0, cap=None):
    """Depth-graded prior precision profile: layer 0 (output side) at 1.0,
    each layer toward the input ``factor`` times more precise, optionally
    capped.

    Pinning precisions to such a profile keeps every bottom-up Kalman ratio
    ``pi_hat / (pi_hat + coupling increment)`` near one, so evidence at the
    output reaches deep layers without the geometric damping a uniform
    profile suffers. ``n_layers`` counts continuous layers (input included).
    """
    prof = [float(factor) ** l for l in range(n_layers)]
    if cap is not None:
        prof = [min(p, float(cap)) for p in prof]
    return prof


def build_network(
    widths,
    g=None,
    omega=-10.0,
    with_volatility=False,
    precision_mode="temporal_carryover",
    output="binary",
    rng=None,
    **kwargs,
):
    """Construct an :class:`HgfNetwork` with He-initialized couplings, zero
    biases, zero means, and unit prior precisions."""
    return HgfNetwork(
        widths,
        g=g,
        omega=omega,
        with_volatility=with_volatility,
        precision_mode=precision_mode,
        output=output,
        rng=rng,
        **kwargs,
    )
