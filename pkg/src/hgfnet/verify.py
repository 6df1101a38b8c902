"""Fast self-checks of the core numerics.

Each check is a small randomized experiment with an independent oracle
(central finite differences, the exact conjugate Gaussian posterior, or a
reference backprop computation). The CLI ``verify`` command prints one line
per check; the test suite asserts on the same results.
"""

from __future__ import annotations

import numpy as np

from .baselines import MlpModel, PcnModel
from .core import Activation, make_rng
from .network import HgfNetwork, value_posterior_update
from .plasticity import WeightRule, weight_update


def _result(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def check_one_shot_stationarity(n_chains=20, step=1e-5, tol=1e-6, seed=0):
    """On random 3-layer chains kept in the linear branch of leaky ReLU, the
    free energy's partial derivative with respect to the hidden mean must
    vanish after a single posterior update."""
    rng = make_rng(seed, "stationarity")
    worst = 0.0
    for _ in range(n_chains):
        net = HgfNetwork(
            [1, 1, 1],
            g=Activation("leaky_relu", 0.01),
            output="continuous",
            rng=np.random.default_rng(rng.integers(2**31)),
        )
        for coup in net.couplings:
            coup.weights = rng.uniform(0.5, 1.5, coup.weights.shape)
            coup.bias = rng.uniform(0.5, 1.0, coup.bias.shape)
        x = rng.uniform(0.5, 1.5, 1)
        net.clamp_input(x)
        net.predict_sweep()
        y = net.layers[0].mu_hat + rng.uniform(-0.3, 0.3, 1)
        net.clamp_target(y)
        net.predict_sweep()
        net.prediction_errors()
        net.posterior_update()
        mu = net.layers[1].mu
        f_plus = net.free_energy_given_means({1: mu + step})
        f_minus = net.free_energy_given_means({1: mu - step})
        worst = max(worst, abs((f_plus - f_minus) / (2 * step)))
    return _result(
        "one-shot stationarity",
        worst < tol,
        f"max |dF/dmu| = {worst:.3e} (tol {tol:.0e}, {n_chains} chains)",
    )


def check_kalman_equivalence(n_cases=100, tol=1e-12, seed=0):
    """The closed-form parent update on a two-node chain (unit coupling,
    linear branch) must equal the exact conjugate Gaussian posterior."""
    rng = make_rng(seed, "kalman")
    worst = 0.0
    for _ in range(n_cases):
        mu_prior = rng.normal()
        pi_prior = rng.uniform(0.1, 10.0)
        pi_obs = rng.uniform(0.1, 10.0)
        y = rng.normal()
        delta = np.array([y - mu_prior])
        mu_b, pi_b = value_posterior_update(
            np.array([mu_prior]),
            np.array([pi_prior]),
            np.array([[1.0]]),
            np.array([1.0]),
            np.array([pi_obs]),
            delta,
        )
        pi_ref = pi_prior + pi_obs
        mu_ref = (pi_prior * mu_prior + pi_obs * y) / pi_ref
        worst = max(
            worst,
            abs(pi_b[0] - pi_ref) / pi_ref,
            abs(mu_b[0] - mu_ref) / max(abs(mu_ref), 1e-3),
        )
    return _result(
        "Kalman equivalence",
        worst < tol,
        f"max rel err = {worst:.3e} (tol {tol:.0e}, {n_cases} cases)",
    )


def check_mlp_gradients(n_cases=50, tol=1e-4, seed=0):
    """Hand-derived MLP gradients vs central finite differences on width-4
    depth-2 nets, all three heads."""
    rng = make_rng(seed, "mlp-grad")
    worst = 0.0
    losses = ("softmax_ce", "sigmoid_ce", "mse")
    for case in range(n_cases):
        loss = losses[case % len(losses)]
        n_out = 3 if loss == "softmax_ce" else 2
        model = MlpModel(
            [4, 4, 4, n_out],
            g=Activation("leaky_relu", 0.01),
            lr=1e-3,
            rng=np.random.default_rng(rng.integers(2**31)),
        )
        X = rng.normal(size=(5, 4))
        if loss == "softmax_ce":
            Y = np.eye(n_out)[rng.integers(n_out, size=5)]
        elif loss == "sigmoid_ce":
            Y = rng.integers(2, size=(5, n_out)).astype(float)
        else:
            Y = rng.normal(size=(5, n_out))
        _, gW, gb = model.loss_and_grads(X, Y, loss=loss)
        h = 1e-6
        for params, grads in ((model.weights, gW), (model.biases, gb)):
            for P, G in zip(params, grads):
                it = np.nditer(P, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = P[idx]
                    P[idx] = orig + h
                    fp, _, _ = model.loss_and_grads(X, Y, loss=loss)
                    P[idx] = orig - h
                    fm, _, _ = model.loss_and_grads(X, Y, loss=loss)
                    P[idx] = orig
                    fd = (fp - fm) / (2 * h)
                    denom = max(abs(fd), abs(G[idx]), 1e-8)
                    worst = max(worst, abs(fd - G[idx]) / denom)
    return _result(
        "MLP gradient check",
        worst < tol,
        f"max rel err = {worst:.3e} (tol {tol:.0e}, {n_cases} nets)",
    )


def check_pcn_bp_correspondence(n_cases=20, min_cos=0.95, seed=0):
    """With activities relaxed to convergence, PCN weight gradients must
    align with backprop gradients of the same MSE objective.

    The correspondence is an approximation that becomes exact as output
    errors and weight magnitudes shrink (equilibrium errors pick up an
    extra (I + J J^T)^-1 factor at O(|W|^2), and leaky-ReLU branch flips
    between relaxed and feedforward activities add deriv-ratio noise), so
    the check runs in that regime: weights scaled down, gentle slope,
    targets a small perturbation of the feedforward output.
    """
    rng = make_rng(seed, "pcn-bp")
    worst = 1.0
    for _ in range(n_cases):
        init = np.random.default_rng(rng.integers(2**31))
        pcn = PcnModel(
            [4, 6, 6, 3],
            g=Activation("leaky_relu", 0.5),
            lr=1e-3,
            T=400,
            activity_lr=0.05,
            rng=init,
        )
        for W in pcn.weights:
            W *= 0.2
        mlp = MlpModel([4, 6, 6, 3], g=pcn.g, lr=1e-3)
        mlp.weights = [W.copy() for W in pcn.weights]
        mlp.biases = [b.copy() for b in pcn.biases]
        X = rng.normal(size=(8, 4))
        Y = pcn.predict_logits(X) + 0.02 * rng.normal(size=(8, 3))
        acts = pcn.relax(X, Y)
        gW_pcn, _ = pcn.weight_grads(acts)
        # The PCN stack applies g to the clamped input layer; feeding the
        # MLP g(X) makes both nets compute the identical function.
        _, gW_bp, _ = mlp.loss_and_grads(pcn.g(X), Y, loss="mse")
        for gp, gb in zip(gW_pcn, gW_bp):
            cos = np.sum(gp * gb) / (np.linalg.norm(gp) * np.linalg.norm(gb) + 1e-30)
            worst = min(worst, cos)
    return _result(
        "PCN-BP correspondence",
        worst > min_cos,
        f"min cosine = {worst:.4f} (threshold {min_cos}, {n_cases} nets)",
    )


def check_precision_monotonicity(n_samples=1000, seed=0):
    """Fuzz a small classifier network: shrinkage must strictly reduce
    precision on every predict sweep and the posterior update must never
    lose precision mass, on every unit of every sample."""
    rng = make_rng(seed, "fuzz")
    net = HgfNetwork(
        [6, 8, 8, 3],
        g=Activation("leaky_relu", 0.01),
        with_volatility=True,
        rng=np.random.default_rng(rng.integers(2**31)),
    )
    rule = WeightRule("precision", 1e-3)
    violations = 0
    for _ in range(n_samples):
        x = rng.normal(size=6)
        y = np.eye(3)[rng.integers(3)]
        net.clamp_input(x)
        net.clamp_target(y)
        prev_pi = [net.layers[l].pi.copy() for l in range(net.n_layers)]
        net.predict_sweep()
        for l in net.hidden_indices():
            if np.any(net.layers[l].pi_hat >= prev_pi[l]):
                violations += 1
        net.prediction_errors()
        net.posterior_update()
        for l in net.hidden_indices():
            if np.any(net.layers[l].pi < net.layers[l].pi_hat):
                violations += 1
        weight_update(net, rule)
        net.release_target()
    return _result(
        "precision monotonicity",
        violations == 0,
        f"{violations} violations over {n_samples} samples",
    )


def check_weight_rule_algebra(n_cases=20, seed=0):
    """With all precisions pinned to one, the precision rule must equal the
    standard rule exactly and the ratio rule exactly half of it."""
    rng = make_rng(seed, "algebra")
    exact = True
    for _ in range(n_cases):
        net = HgfNetwork(
            [3, 4, 4, 2],
            g=Activation("leaky_relu", 0.01),
            rng=np.random.default_rng(rng.integers(2**31)),
        )
        for coup in net.couplings:
            # Weights never enter the gain computation; zeroing them makes
            # the post-update weights equal the gains bit-for-bit.
            coup.weights[:] = 0.0
            coup.bias[:] = 0.0
        for l in range(net.n_layers):
            layer = net.layers[l]
            layer.mu = rng.normal(size=layer.width)
            layer.pi = np.ones(layer.width)
            layer.mu_hat = rng.normal(size=layer.width)
            layer.pi_hat = np.ones(layer.width)
            layer.delta = layer.mu - layer.mu_hat
        nets = {kind: net.clone() for kind in ("standard", "precision", "ratio")}
        for kind, copy_net in nets.items():
            weight_update(copy_net, WeightRule(kind, 1e-2))
        for idx in range(len(net.couplings)):
            w0 = net.couplings[idx].weights
            ds = nets["standard"].couplings[idx].weights - w0
            dp = nets["precision"].couplings[idx].weights - w0
            dr = nets["ratio"].couplings[idx].weights - w0
            if not (np.array_equal(ds, dp) and np.array_equal(dr * 2.0, ds)):
                exact = False
    return _result(
        "weight-rule algebra",
        exact,
        f"precision==standard and ratio==standard/2 at unit precision ({n_cases} states)",
    )


ALL_CHECKS = (
    check_one_shot_stationarity,
    check_kalman_equivalence,
    check_mlp_gradients,
    check_pcn_bp_correspondence,
    check_precision_monotonicity,
    check_weight_rule_algebra,
)


def run_all_checks(seed=0):
    return [check(seed=seed) for check in ALL_CHECKS]
