"""Scikit-learn style classifiers wrapping the three methods.

All three estimators share the sklearn contract (``fit`` / ``partial_fit`` /
``predict`` / ``predict_proba`` / ``get_params``) so they can be swept and
scored with the usual ecosystem tooling. Binary problems use a single output
node; multi-class problems use one output node per class.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .baselines import MlpModel, PcnModel
from .core import Activation, make_rng
from .network import HgfNetwork, graded_prior
from .plasticity import WeightRule, train_step


def _resolve_classes(y, classes):
    return np.asarray(sorted(np.unique(y) if classes is None else classes))


class _SequentialClassifier(BaseEstimator, ClassifierMixin):
    """Shared fit/predict scaffolding; subclasses implement model building
    and per-batch updates."""

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self._setup(X, y, classes=None)
        rng = make_rng(self.random_state, "epoch-order")
        for _ in range(self.n_epochs):
            order = rng.permutation(X.shape[0]) if self.shuffle else np.arange(X.shape[0])
            self._run_pass(X[order], y[order])
        return self

    def partial_fit(self, X, y, classes=None):
        X, y = check_X_y(X, y)
        if not hasattr(self, "classes_"):
            self._setup(X, y, classes=classes)
        self._run_pass(X, y)
        return self

    def _setup(self, X, y, classes):
        self.classes_ = _resolve_classes(y, classes)
        self.n_features_in_ = X.shape[1]
        self._n_out = 1 if len(self.classes_) == 2 else len(self.classes_)
        self._build(X.shape[1])

    def _targets(self, y):
        idx = np.searchsorted(self.classes_, y)
        if self._n_out == 1:
            return idx.astype(float)[:, None]
        T = np.zeros((len(y), self._n_out))
        T[np.arange(len(y)), idx] = 1.0
        return T

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def predict_proba(self, X):
        X = check_array(X)
        if not hasattr(self, "classes_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")
        raw = self._scores(X)
        if self._n_out == 1:
            p = raw[:, 0]
            return np.stack([1.0 - p, p], axis=1)
        total = raw.sum(axis=1, keepdims=True)
        return raw / np.where(total > 0, total, 1.0)


class HgfClassifier(_SequentialClassifier):
    """Hierarchical Gaussian filter classifier with one-shot closed-form
    updates and Hebbian plasticity.

    Samples are always processed sequentially (no batching). ``weight_rule``
    selects the Hebbian rule; ``precision_mode`` controls whether posterior
    precisions persist across samples; ``volatility`` attaches per-unit
    volatility parents so squared prediction errors modulate precision.

    ``prior_precision`` may be a scalar, a per-layer sequence (output side
    first), or ``"graded"`` for a depth-graded profile that keeps evidence
    flowing to deep layers when precisions are pinned (reset mode).
    """

    def __init__(
        self,
        hidden_widths=(32, 32),
        learning_rate=1e-3,
        weight_rule="precision",
        ratio_uses_posterior=True,
        precision_mode="temporal_carryover",
        prior_precision=1.0,
        volatility=False,
        omega=-10.0,
        activation="leaky_relu",
        negative_slope=0.01,
        n_epochs=1,
        shuffle=True,
        random_state=0,
    ):
        self.hidden_widths = hidden_widths
        self.learning_rate = learning_rate
        self.weight_rule = weight_rule
        self.ratio_uses_posterior = ratio_uses_posterior
        self.precision_mode = precision_mode
        self.prior_precision = prior_precision
        self.volatility = volatility
        self.omega = omega
        self.activation = activation
        self.negative_slope = negative_slope
        self.n_epochs = n_epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def _build(self, n_features):
        g = Activation(self.activation, self.negative_slope)
        widths = [n_features, *self.hidden_widths, self._n_out]
        prior = self.prior_precision
        if isinstance(prior, str):
            if prior != "graded":
                raise ValueError(f"unknown prior_precision {prior!r}")
            prior = graded_prior(
                len(widths), factor=3.0, cap=0.2 * np.exp(-self.omega)
            )
        self.net_ = HgfNetwork(
            widths,
            g=g,
            omega=self.omega,
            with_volatility=self.volatility,
            precision_mode=self.precision_mode,
            prior_precision=prior,
            rng=make_rng(self.random_state, "hgf-init"),
        )
        self.rule_ = WeightRule(
            self.weight_rule, self.learning_rate, self.ratio_uses_posterior
        )

    def _run_pass(self, X, y):
        T = self._targets(y)
        for x_i, t_i in zip(X, T):
            self.last_diagnostics_ = train_step(self.net_, x_i, t_i, self.rule_)

    def _scores(self, X):
        return np.stack([self.net_.infer(x) for x in X])


class MlpClassifier(_SequentialClassifier):
    """Backprop MLP with Adam; softmax cross-entropy head for multi-class,
    sigmoid cross-entropy for binary."""

    def __init__(
        self,
        hidden_widths=(32, 32),
        learning_rate=1e-3,
        batch_size=64,
        activation="leaky_relu",
        negative_slope=0.01,
        n_epochs=1,
        shuffle=True,
        random_state=0,
    ):
        self.hidden_widths = hidden_widths
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.activation = activation
        self.negative_slope = negative_slope
        self.n_epochs = n_epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def _build(self, n_features):
        g = Activation(self.activation, self.negative_slope)
        self.model_ = MlpModel(
            [n_features, *self.hidden_widths, self._n_out],
            g=g,
            lr=self.learning_rate,
            rng=make_rng(self.random_state, "mlp-init"),
        )
        self.loss_ = "sigmoid_ce" if self._n_out == 1 else "softmax_ce"

    def _run_pass(self, X, y):
        T = self._targets(y)
        bs = max(1, int(self.batch_size))
        for start in range(0, X.shape[0], bs):
            self.model_.train_batch(X[start : start + bs], T[start : start + bs], loss=self.loss_)

    def _scores(self, X):
        logits = self.model_.predict_logits(X)
        if self._n_out == 1:
            from .core import sigmoid

            return sigmoid(logits)
        z = logits - logits.max(axis=1, keepdims=True)
        ez = np.exp(z)
        return ez / ez.sum(axis=1, keepdims=True)


class PcnClassifier(_SequentialClassifier):
    """Vanilla iterative predictive-coding classifier: activity relaxation
    per sample, Adam on the local weight gradients."""

    def __init__(
        self,
        hidden_widths=(32, 32),
        learning_rate=1e-3,
        batch_size=64,
        inference_steps=20,
        activity_lr=0.1,
        activation="leaky_relu",
        negative_slope=0.01,
        n_epochs=1,
        shuffle=True,
        random_state=0,
    ):
        self.hidden_widths = hidden_widths
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.inference_steps = inference_steps
        self.activity_lr = activity_lr
        self.activation = activation
        self.negative_slope = negative_slope
        self.n_epochs = n_epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def _build(self, n_features):
        g = Activation(self.activation, self.negative_slope)
        self.model_ = PcnModel(
            [n_features, *self.hidden_widths, self._n_out],
            g=g,
            lr=self.learning_rate,
            T=self.inference_steps,
            activity_lr=self.activity_lr,
            rng=make_rng(self.random_state, "pcn-init"),
        )

    def _run_pass(self, X, y):
        T = self._targets(y)
        bs = max(1, int(self.batch_size))
        for start in range(0, X.shape[0], bs):
            self.model_.train_batch(X[start : start + bs], T[start : start + bs])

    def _scores(self, X):
        logits = self.model_.predict_logits(X)
        if self._n_out == 1:
            return np.clip(logits, 0.0, 1.0)
        shifted = logits - logits.min(axis=1, keepdims=True)
        return shifted + 1e-12

    def predict(self, X):
        X = check_array(X)
        if not hasattr(self, "classes_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")
        logits = self.model_.predict_logits(X)
        if self._n_out == 1:
            return self.classes_[(logits[:, 0] > 0.5).astype(int)]
        return self.classes_[np.argmax(logits, axis=1)]
