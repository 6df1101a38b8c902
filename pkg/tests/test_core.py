import numpy as np
import pytest
from hypothesis import given, strategies as st

from hgfnet.core import Activation, he_init, make_rng, one_hot, sigmoid


class TestActivation:
    def test_relu_values(self):
        g = Activation("relu")
        assert np.array_equal(g(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])
        assert np.array_equal(g.deriv(np.array([-2.0, 0.0, 3.0])), [0.0, 1.0, 1.0])

    def test_leaky_values(self):
        g = Activation("leaky_relu", 0.1)
        assert np.allclose(g(np.array([-2.0, 3.0])), [-0.2, 3.0])
        assert np.array_equal(g.deriv(np.array([-2.0, 3.0])), [0.1, 1.0])

    def test_kink_derivative_is_one(self):
        assert Activation("leaky_relu", 0.01).deriv(np.array([0.0]))[0] == 1.0

    def test_relu_forces_zero_slope(self):
        assert Activation("relu", 0.5).slope == 0.0

    @pytest.mark.parametrize("kind,slope", [("tanh", 0.1), ("leaky_relu", 0.0), ("leaky_relu", 1.0)])
    def test_invalid(self, kind, slope):
        with pytest.raises(ValueError):
            Activation(kind, slope)


class TestSigmoid:
    def test_midpoint_and_symmetry(self):
        assert sigmoid(0.0) == 0.5
        x = np.linspace(-5, 5, 11)
        assert np.allclose(sigmoid(x) + sigmoid(-x), 1.0)

    def test_extreme_inputs_do_not_overflow(self):
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == 0.0
        assert 0.0 < sigmoid(-30.0) < sigmoid(30.0) < 1.0

    def test_scalar_returns_float(self):
        assert isinstance(sigmoid(1.2), float)

    @given(st.floats(min_value=-700, max_value=700))
    def test_bounded(self, x):
        assert 0.0 <= sigmoid(x) <= 1.0

    @given(st.floats(-30, 30), st.floats(0.01, 10))
    def test_monotone(self, x, dx):
        assert sigmoid(x + dx) > sigmoid(x)


class TestHeInit:
    def test_scale(self):
        w = he_init(100, (4000, 100), np.random.default_rng(0))
        assert abs(w.std() - np.sqrt(2 / 100)) < 0.005

    def test_invalid_fan_in(self):
        with pytest.raises(ValueError):
            he_init(0, (3, 3), np.random.default_rng(0))


class TestMakeRng:
    def test_same_keys_same_stream(self):
        a = make_rng(7, "x", 3).normal(size=5)
        b = make_rng(7, "x", 3).normal(size=5)
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_streams(self):
        a = make_rng(7, "x").normal(size=5)
        b = make_rng(7, "y").normal(size=5)
        assert not np.array_equal(a, b)

    def test_seed_matters(self):
        assert not np.array_equal(
            make_rng(0, "k").normal(size=5), make_rng(1, "k").normal(size=5)
        )

    def test_string_seeds_supported(self):
        a = make_rng("0:test:1").normal(size=3)
        b = make_rng("0:test:1").normal(size=3)
        assert np.array_equal(a, b)


class TestOneHot:
    def test_basic(self):
        assert np.array_equal(one_hot(2, 4), [0, 0, 1, 0])

    @pytest.mark.parametrize("label", [-1, 4])
    def test_out_of_range(self, label):
        with pytest.raises(ValueError):
            one_hot(label, 4)
