import numpy as np
import pytest

from hgfnet.baselines import MlpModel, PcnModel
from hgfnet.core import make_rng
from hgfnet.errors import DataError
from hgfnet.network import HgfNetwork
from hgfnet.plasticity import WeightRule, train_step
from hgfnet.snapshot import (
    load_model,
    load_network,
    save_mlp,
    save_network,
    save_pcn,
)


def trained_net(**kwargs):
    net = HgfNetwork([3, 5, 2], rng=np.random.default_rng(0), **kwargs)
    rng = make_rng(0, "snap")
    rule = WeightRule("precision", 1e-2)
    for _ in range(10):
        train_step(net, rng.normal(size=3), np.array([1.0, 0.0]), rule)
    return net


class TestNetworkSnapshot:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {},
            {"with_volatility": True},
            {"precision_mode": "reset_each_sample", "prior_precision": [1.0, 3.0, 9.0]},
            {"output": "continuous"},
        ],
    )
    def test_round_trip_preserves_inference(self, tmp_path, kwargs):
        net = trained_net(**kwargs) if kwargs.get("output") != "continuous" else (
            HgfNetwork([3, 5, 2], rng=np.random.default_rng(0), **kwargs)
        )
        p = tmp_path / "net.npz"
        save_network(net, p)
        back = load_network(p)
        x = np.array([0.3, -0.2, 1.1])
        assert np.array_equal(back.infer(x), net.infer(x))
        assert back.precision_mode == net.precision_mode
        assert back.prior_precision == net.prior_precision
        if net.volatility_parents is not None:
            for l, vol in net.volatility_parents.items():
                assert np.array_equal(back.volatility_parents[l].mu, vol.mu)

    def test_wrong_payload_rejected(self, tmp_path):
        p = tmp_path / "x.npz"
        np.savez(p, payload=np.array("dataset"), version=np.array(1))
        with pytest.raises(DataError):
            load_network(p)

    def test_wrong_version_rejected(self, tmp_path):
        net = trained_net()
        p = tmp_path / "net.npz"
        save_network(net, p)
        with np.load(p) as z:
            arrays = dict(z)
        arrays["version"] = np.array(99)
        np.savez(p, **arrays)
        with pytest.raises(DataError):
            load_network(p)


class TestStackSnapshots:
    def test_mlp_round_trip(self, tmp_path):
        model = MlpModel([3, 6, 2], lr=2e-3, rng=np.random.default_rng(1))
        p = tmp_path / "mlp.npz"
        save_mlp(model, p)
        back = load_model(p)
        assert isinstance(back, MlpModel)
        X = np.random.default_rng(0).normal(size=(4, 3))
        assert np.array_equal(back.predict_logits(X), model.predict_logits(X))
        assert back.adam.lr == 2e-3

    def test_pcn_round_trip(self, tmp_path):
        model = PcnModel([3, 6, 2], lr=1e-3, T=13, activity_lr=0.07,
                         rng=np.random.default_rng(1))
        p = tmp_path / "pcn.npz"
        save_pcn(model, p)
        back = load_model(p)
        assert isinstance(back, PcnModel)
        assert back.T == 13 and back.activity_lr == 0.07
        X = np.random.default_rng(0).normal(size=(4, 3))
        assert np.array_equal(back.predict_logits(X), model.predict_logits(X))

    def test_load_model_dispatches_hgf(self, tmp_path):
        net = trained_net()
        p = tmp_path / "net.npz"
        save_network(net, p)
        back = load_model(p)
        assert isinstance(back, HgfNetwork)

    def test_unknown_tag(self, tmp_path):
        p = tmp_path / "x.npz"
        np.savez(p, payload=np.array("mystery"), version=np.array(1))
        with pytest.raises(DataError):
            load_model(p)
