"""From-scratch baselines: a backprop MLP with Adam and a vanilla iterative
predictive-coding network (PCN).

Both use the same affine-plus-activation stack as the filter network and are
written directly in numpy with hand-derived gradients; no autodiff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Activation, he_init, sigmoid


@dataclass
class AdamState:
    """Standard Adam with bias correction."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def init_layers(widths, rng):
    """He-initialized weight/bias pairs for a stack of affine layers."""
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(he_init(fan_in, (fan_out, fan_in), rng))
        biases.append(np.zeros(fan_out))
    return weights, biases


class MlpModel:
    """Fully-connected net, leaky-ReLU hidden layers, linear output logits."""

    def __init__(self, widths, g=None, lr=1e-3, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.g = g if g is not None else Activation("leaky_relu", 0.01)
        self.widths = list(widths)
        self.weights, self.biases = init_layers(self.widths, rng)
        self.adam = AdamState(lr=lr)

    def forward(self, X):
        """Returns (logits, cache) where cache holds pre-activations and
        layer inputs for the backward pass. X is (n, d)."""
        a = np.atleast_2d(np.asarray(X, dtype=float))
        inputs, preacts = [], []
        n_layers = len(self.weights)
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ W.T + b
            preacts.append(z)
            a = z if k == n_layers - 1 else self.g(z)
        return a, (inputs, preacts)

    def loss_and_grads(self, X, y, loss="softmax_ce"):
        """Scalar loss and parameter gradients, averaged over the batch.

        loss: "softmax_ce" (y one-hot, multi-class), "sigmoid_ce" (y in
        {0,1}, single logit), or "mse" (y same shape as logits).
        """
        logits, (inputs, preacts) = self.forward(X)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        n = logits.shape[0]
        if loss == "softmax_ce":
            z = logits - logits.max(axis=1, keepdims=True)
            ez = np.exp(z)
            p = ez / ez.sum(axis=1, keepdims=True)
            value = float(-np.mean(np.sum(y * (z - np.log(ez.sum(axis=1, keepdims=True))), axis=1)))
            dlogits = (p - y) / n
        elif loss == "sigmoid_ce":
            p = sigmoid(logits)
            value = float(
                np.mean(
                    np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
                )
                * logits.shape[1]
            )
            dlogits = (p - y) / n
        elif loss == "mse":
            diff = logits - y
            value = float(0.5 * np.sum(diff**2) / n)
            dlogits = diff / n
        else:
            raise ValueError(f"unknown loss {loss!r}")

        grads_W = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        d = dlogits
        for k in range(len(self.weights) - 1, -1, -1):
            grads_W[k] = d.T @ inputs[k]
            grads_b[k] = d.sum(axis=0)
            if k > 0:
                d = (d @ self.weights[k]) * self.g.deriv(preacts[k - 1])
        return value, grads_W, grads_b

    def train_batch(self, X, y, loss="softmax_ce"):
        value, gW, gb = self.loss_and_grads(X, y, loss=loss)
        self.adam.step(self.weights + self.biases, gW + gb)
        return value

    def predict_logits(self, X):
        logits, _ = self.forward(X)
        return logits


class PcnModel:
    """Vanilla predictive-coding network with identity precisions.

    Activities relax by T steps of gradient descent on the layerwise squared
    prediction-error energy (input and output clamped), then weights take an
    Adam step on the local gradients -eps_k g(x_{k-1})^T.
    """

    def __init__(self, widths, g=None, lr=1e-3, T=20, activity_lr=0.1, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.g = g if g is not None else Activation("leaky_relu", 0.01)
        self.widths = list(widths)
        self.weights, self.biases = init_layers(self.widths, rng)
        self.T = int(T)
        self.activity_lr = float(activity_lr)
        self.adam = AdamState(lr=lr)

    def _feedforward_activities(self, X):
        acts = [np.atleast_2d(np.asarray(X, dtype=float))]
        for W, b in zip(self.weights, self.biases):
            acts.append(self.g(acts[-1]) @ W.T + b)
        return acts

    def _errors(self, acts):
        return [
            acts[k] - (self.g(acts[k - 1]) @ W.T + b)
            for k, (W, b) in enumerate(zip(self.weights, self.biases), start=1)
        ]

    def energy(self, acts):
        return float(sum(0.5 * np.sum(e**2) for e in self._errors(acts)))

    def relax(self, X, y, T=None):
        """Clamp input/output, init hidden activities feedforward, relax."""
        T = self.T if T is None else T
        acts = self._feedforward_activities(X)
        acts[-1] = np.atleast_2d(np.asarray(y, dtype=float)).copy()
        K = len(self.weights)
        for _ in range(T):
            eps = self._errors(acts)
            for m in range(1, K):
                grad = eps[m - 1] - (eps[m] @ self.weights[m]) * self.g.deriv(acts[m])
                acts[m] = acts[m] - self.activity_lr * grad
        return acts

    def weight_grads(self, acts):
        eps = self._errors(acts)
        n = acts[0].shape[0]
        gW = [-(e.T @ self.g(a)) / n for e, a in zip(eps, acts[:-1])]
        gb = [-e.sum(axis=0) / n for e in eps]
        return gW, gb

    def train_batch(self, X, y):
        acts = self.relax(X, y)
        gW, gb = self.weight_grads(acts)
        self.adam.step(self.weights + self.biases, gW + gb)
        return self.energy(acts)

    def predict_logits(self, X):
        return self._feedforward_activities(X)[-1]
