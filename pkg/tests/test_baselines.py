import numpy as np
import pytest

from hgfnet.baselines import AdamState, MlpModel, PcnModel, init_layers
from hgfnet.core import Activation, make_rng


class TestAdam:
    def test_first_step_is_signed_lr(self):
        # After one step the bias-corrected moments equal g and g**2, so the
        # update is lr * g / (|g| + eps) regardless of gradient magnitude.
        adam = AdamState(lr=0.1)
        p = np.array([1.0, 1.0, 1.0])
        g = np.array([3.0, -0.5, 1e-4])
        expect = p - 0.1 * g / (np.abs(g) + adam.eps)
        adam.step([p], [g])
        assert np.allclose(p, expect)

    def test_zero_gradients_fixed_point(self):
        adam = AdamState(lr=0.1)
        p = np.array([2.0, -1.0])
        for _ in range(5):
            adam.step([p], [np.zeros(2)])
        assert np.array_equal(p, [2.0, -1.0])
        assert adam.t == 5

    def test_updates_in_place(self):
        adam = AdamState(lr=0.1)
        p = np.ones(3)
        ref = p
        adam.step([p], [np.ones(3)])
        assert ref is p and not np.allclose(p, 1.0)


class TestInitLayers:
    def test_shapes_and_zero_bias(self):
        weights, biases = init_layers([5, 7, 2], np.random.default_rng(0))
        assert [w.shape for w in weights] == [(7, 5), (2, 7)]
        assert all(np.all(b == 0.0) for b in biases)


class TestMlp:
    def test_softmax_loss_at_uniform_logits(self):
        model = MlpModel([3, 4, 5], rng=np.random.default_rng(0))
        for W in model.weights:
            W *= 0.0
        X = np.random.default_rng(0).normal(size=(6, 3))
        Y = np.eye(5)[np.arange(6) % 5]
        value, _, _ = model.loss_and_grads(X, Y, loss="softmax_ce")
        assert np.isclose(value, np.log(5.0))

    def test_mse_value(self):
        model = MlpModel([2, 2, 2], rng=np.random.default_rng(0))
        logits = model.predict_logits(np.ones((1, 2)))
        value, _, _ = model.loss_and_grads(np.ones((1, 2)), logits + 1.0, loss="mse")
        assert np.isclose(value, 0.5 * 2)

    def test_unknown_loss(self):
        model = MlpModel([2, 2, 2], rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            model.loss_and_grads(np.zeros((1, 2)), np.zeros((1, 2)), loss="hinge")

    def test_gradient_matches_finite_differences(self):
        rng = make_rng(0, "fd")
        model = MlpModel([3, 4, 2], g=Activation("leaky_relu", 0.01),
                         rng=np.random.default_rng(1))
        X = rng.normal(size=(4, 3))
        Y = rng.normal(size=(4, 2))
        _, gW, _ = model.loss_and_grads(X, Y, loss="mse")
        h = 1e-6
        W = model.weights[0]
        for idx in [(0, 0), (2, 1), (3, 2)]:
            orig = W[idx]
            W[idx] = orig + h
            fp, _, _ = model.loss_and_grads(X, Y, loss="mse")
            W[idx] = orig - h
            fm, _, _ = model.loss_and_grads(X, Y, loss="mse")
            W[idx] = orig
            assert np.isclose((fp - fm) / (2 * h), gW[0][idx], rtol=1e-4, atol=1e-7)

    def test_training_reduces_loss(self):
        rng = make_rng(0, "mlp-train")
        model = MlpModel([4, 8, 3], lr=1e-2, rng=np.random.default_rng(0))
        X = rng.normal(size=(32, 4))
        Y = np.eye(3)[rng.integers(3, size=32)]
        first = model.train_batch(X, Y)
        for _ in range(60):
            last = model.train_batch(X, Y)
        assert last < first


class TestPcn:
    def test_relax_reduces_energy(self):
        rng = make_rng(0, "pcn-relax")
        pcn = PcnModel([3, 6, 6, 2], rng=np.random.default_rng(0), T=40, activity_lr=0.05)
        X = rng.normal(size=(5, 3))
        Y = rng.normal(size=(5, 2))
        acts0 = pcn._feedforward_activities(X)
        acts0[-1] = Y.copy()
        start = pcn.energy(acts0)
        assert pcn.energy(pcn.relax(X, Y)) < start

    def test_energy_monotone_in_relax_steps(self):
        # Energy after T steps is non-increasing in T; the fixed step size
        # permits rare small increases at activation kinks (< 1% of steps).
        rng = make_rng(0, "pcn-mono")
        total, violations = 0, 0
        for case in range(30):
            pcn = PcnModel(
                [3, 6, 6, 2], rng=np.random.default_rng(case), activity_lr=0.02
            )
            X = rng.normal(size=(4, 3))
            Y = rng.normal(size=(4, 2))
            energies = [pcn.energy(pcn.relax(X, Y, T=t)) for t in range(21)]
            diffs = np.diff(energies)
            total += len(diffs)
            violations += int(np.sum(diffs > 1e-10))
        assert violations / total < 0.01

    def test_linear_fixed_point_analytic(self):
        # All-positive weights/activities keep leaky ReLU in its identity
        # branch, where the relaxed hidden activities solve a linear system.
        rng = make_rng(0, "pcn-linear")
        pcn = PcnModel([2, 3, 2], rng=np.random.default_rng(0), activity_lr=0.05)
        pcn.weights = [np.abs(rng.normal(size=(3, 2))) * 0.3 + 0.1,
                       np.abs(rng.normal(size=(2, 3))) * 0.3 + 0.1]
        pcn.biases = [np.full(3, 1.0), np.full(2, 0.5)]
        X = np.abs(rng.normal(size=(4, 2))) + 0.5
        Y = np.abs(rng.normal(size=(4, 2))) + 2.0
        acts = pcn.relax(X, Y, T=4000)
        assert all(np.all(a > 0) for a in acts)
        W1, W2 = pcn.weights
        b1, b2 = pcn.biases
        p1 = X @ W1.T + b1
        H = np.linalg.solve(
            np.eye(3) + W2.T @ W2, (p1 + (Y - b2) @ W2).T
        ).T
        assert np.allclose(acts[1], H, atol=1e-6)

    def test_training_reduces_energy(self):
        rng = make_rng(0, "pcn-train")
        pcn = PcnModel([4, 8, 3], lr=1e-2, rng=np.random.default_rng(0))
        X = rng.normal(size=(16, 4))
        Y = np.eye(3)[rng.integers(3, size=16)]
        first = pcn.train_batch(X, Y)
        for _ in range(40):
            last = pcn.train_batch(X, Y)
        assert last < first

    def test_predict_logits_deterministic(self):
        pcn = PcnModel([3, 4, 2], rng=np.random.default_rng(0))
        X = np.random.default_rng(1).normal(size=(5, 3))
        assert np.array_equal(pcn.predict_logits(X), pcn.predict_logits(X))
