import numpy as np

import hgfnet.network
from hgfnet.verify import ALL_CHECKS, check_one_shot_stationarity, run_all_checks


def test_all_checks_pass():
    results = run_all_checks(seed=0)
    assert len(results) == len(ALL_CHECKS)
    for r in results:
        assert r["passed"], f"{r['name']}: {r['detail']}"


def test_check_names_unique():
    names = [r["name"] for r in run_all_checks(seed=0)]
    assert len(set(names)) == len(names)


def test_negative_control_sign_flip(monkeypatch):
    # Corrupting the update sign must break the stationarity check; this
    # guards against the check silently passing on anything.
    real = hgfnet.network.value_posterior_update

    def flipped(mu_hat_b, pi_hat_b, weights, gprime_b, pi_hat_a, delta_a):
        mu_b, pi_b = real(mu_hat_b, pi_hat_b, weights, gprime_b, pi_hat_a, delta_a)
        return mu_hat_b - (mu_b - mu_hat_b), pi_b

    monkeypatch.setattr(hgfnet.network, "value_posterior_update", flipped)
    result = check_one_shot_stationarity()
    assert not result["passed"]


def test_checks_deterministic():
    a = run_all_checks(seed=0)
    b = run_all_checks(seed=0)
    assert [r["detail"] for r in a] == [r["detail"] for r in b]
