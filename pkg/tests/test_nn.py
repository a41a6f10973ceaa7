import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltrstack import nn
from ltrstack.errors import ConfigurationError, NumericError, ParseError, ShapeError
from oracles import oracle_forward


class TestInit:
    def test_same_config_bit_identical(self):
        a = nn.net_init(nn.NetConfig((3, 1), "relu", 7))
        b = nn.net_init(nn.NetConfig((3, 1), "relu", 7))
        for p, q in zip(a.parameters(), b.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_parameter_count(self):
        cfg = nn.NetConfig((4, 8, 1))
        assert cfg.parameter_count == 49
        assert nn.net_init(cfg).parameter_count == 49

    @pytest.mark.parametrize("widths", [(2,), (), (3, 0, 1)])
    def test_invalid_widths(self, widths):
        with pytest.raises(ConfigurationError):
            nn.NetConfig(widths)

    def test_bad_activation(self):
        with pytest.raises(ConfigurationError):
            nn.NetConfig((2, 1), "gelu")

    def test_init_bounds_and_zero_bias(self):
        net = nn.net_init(nn.NetConfig((16, 4, 1), init_seed=3))
        assert np.all(np.abs(net.weights[0]) <= 0.25)
        assert np.all(np.abs(net.weights[1]) <= 0.5)
        assert all(np.all(b == 0) for b in net.biases)

    def test_different_seed_differs(self):
        a = nn.net_init(nn.NetConfig((3, 4, 1), init_seed=1))
        b = nn.net_init(nn.NetConfig((3, 4, 1), init_seed=2))
        assert not np.array_equal(a.get_flat(), b.get_flat())


class TestForward:
    def test_zero_net_gives_zero(self):
        net = nn.net_init(nn.NetConfig((3, 5, 2)))
        net.set_flat(np.zeros(net.parameter_count))
        assert np.all(nn.forward(net, [1.0, -2.0, 3.0]) == 0.0)

    def test_identity_layer(self):
        net = nn.FeedForwardNet(nn.NetConfig((1, 1)), [np.array([[1.0]])], [np.array([0.0])])
        assert nn.forward(net, [2.5])[0] == 2.5

    @pytest.mark.parametrize("act", ["relu", "tanh"])
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, act, seed):
        net = nn.net_init(nn.NetConfig((5, 7, 3, 2), act, seed))
        x = np.random.default_rng(seed).normal(size=5)
        np.testing.assert_allclose(nn.forward(net, x), oracle_forward(net, x), rtol=1e-12, atol=1e-14)

    def test_width_mismatch(self):
        net = nn.net_init(nn.NetConfig((3, 1)))
        with pytest.raises(ShapeError):
            nn.forward(net, [1.0, 2.0])

    def test_pure(self):
        net = nn.net_init(nn.NetConfig((3, 4, 1), init_seed=5))
        before = net.get_flat().copy()
        x = np.ones((4, 3))
        y1 = nn.forward(net, x)
        y2 = nn.forward(net, x)
        assert np.array_equal(y1, y2)
        assert np.array_equal(before, net.get_flat())


class TestBackward:
    def test_zero_upstream(self):
        net = nn.net_init(nn.NetConfig((3, 4, 1), init_seed=1))
        g = nn.backward(net, [1.0, 2.0, 3.0], [0.0])
        assert np.all(g.flat() == 0.0)

    def test_single_linear_layer(self):
        net = nn.net_init(nn.NetConfig((3, 1), init_seed=1))
        x = np.array([0.5, -1.0, 2.0])
        g = nn.backward(net, x, [1.0])
        np.testing.assert_array_equal(g.weights[0][:, 0], x)
        np.testing.assert_array_equal(g.biases[0], [1.0])

    def test_upstream_shape_error(self):
        net = nn.net_init(nn.NetConfig((3, 2)))
        with pytest.raises(ShapeError):
            nn.backward(net, [1.0, 2.0, 3.0], [1.0])

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_check(self, seed):
        rng = np.random.default_rng(seed)
        widths = (int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 5)), 1)
        act = "relu" if seed % 2 else "tanh"
        net = nn.net_init(nn.NetConfig(widths, act, seed))
        for b in net.biases:
            b[...] = rng.normal(scale=0.1, size=b.shape)
        x = rng.normal(size=(3, widths[0]))
        up = rng.normal(size=(3, 1))
        analytic = nn.backward(net, x, up).arrays()
        numeric = nn.finite_difference_gradient(lambda: float((nn.forward(net, x) * up).sum()),
                                                net.parameters(), eps=1e-5)
        assert nn.max_relative_error(analytic, numeric) < 1e-4

    def test_input_gradient(self):
        net = nn.net_init(nn.NetConfig((4, 6, 1), "tanh", 9))
        x = np.random.default_rng(0).normal(size=(1, 4))
        _, dx = net.backward_from(net.activations(x), np.ones((1, 1)))
        num = nn.finite_difference_gradient(lambda: float(nn.forward(net, x).sum()), [x])[0]
        np.testing.assert_allclose(dx, num, rtol=1e-6, atol=1e-9)


class TestScalars:
    def test_sigmoid_values(self):
        assert nn.sigmoid(0.0) == 0.5
        assert nn.sigmoid(-500.0) >= 0.0
        assert math.isfinite(nn.sigmoid(500.0))

    @given(st.floats(-30, 30))
    def test_sigmoid_symmetry(self, x):
        assert abs(nn.sigmoid(x) + nn.sigmoid(-x) - 1.0) <= 1e-15

    @given(st.floats(-500, 500), st.floats(-500, 500))
    def test_sigmoid_monotone(self, a, b):
        if a < b:
            assert nn.sigmoid(a) <= nn.sigmoid(b)

    def test_sigmoid_array_matches_scalar(self):
        xs = np.linspace(-40, 40, 81)
        np.testing.assert_allclose(nn.sigmoid(xs), [nn.sigmoid(float(v)) for v in xs], rtol=1e-15)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_sigmoid_rejects_non_finite(self, bad):
        with pytest.raises(NumericError):
            nn.sigmoid(bad)

    def test_softplus_stable(self):
        assert nn.softplus(800.0) == 800.0
        assert nn.softplus(-800.0) == 0.0
        assert abs(nn.softplus(0.0) - math.log(2)) < 1e-15

    def test_softmax_examples(self):
        np.testing.assert_allclose(nn.softmax([2.0, 2.0, 2.0]), [1 / 3] * 3, atol=1e-15)
        out = nn.softmax([1000.0, 0.0])
        assert np.all(np.isfinite(out)) and out[0] == pytest.approx(1.0) and out[1] < 1e-300
        np.testing.assert_allclose(nn.softmax([1, 2, 3]), nn.softmax([11, 12, 13]), atol=1e-12)

    def test_softmax_empty(self):
        with pytest.raises(ShapeError):
            nn.softmax([])

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(-50, 50))
    def test_softmax_properties(self, v, c):
        p = nn.softmax(v)
        assert np.all(p > 0) or len(v) > 1
        assert abs(p.sum() - 1.0) < 1e-12
        np.testing.assert_allclose(p, nn.softmax(np.asarray(v) + c), atol=1e-12)


class TestOptimizer:
    def _scalar_net(self, value):
        return nn.FeedForwardNet(nn.NetConfig((1, 1)), [np.array([[value]])], [np.array([0.0])])

    def test_sgd_arithmetic(self):
        net = self._scalar_net(1.0)
        g = nn.GradientSet([np.array([[2.0]])], [np.array([0.0])])
        nn.optimizer_step(net, g, nn.OptimizerState("sgd", 0.1))
        assert net.weights[0][0, 0] == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("algo", ["sgd", "adam"])
    def test_zero_gradient_no_change(self, algo):
        net = nn.net_init(nn.NetConfig((3, 4, 1), init_seed=2))
        before = net.get_flat().copy()
        zero = nn.GradientSet([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])
        nn.optimizer_step(net, zero, nn.OptimizerState(algo, 0.01))
        assert np.array_equal(before, net.get_flat())

    def test_adam_first_step_by_hand(self):
        net = self._scalar_net(1.0)
        g = nn.GradientSet([np.array([[1.0]])], [np.array([0.0])])
        state = nn.OptimizerState("adam", 0.001)
        assert state.first_moment == [] and state.step == 0
        nn.optimizer_step(net, g, state)
        # m_hat = 1, v_hat = 1 on the first step
        expected = 1.0 - 0.001 * 1.0 / (1.0 + 1e-8)
        assert net.weights[0][0, 0] == pytest.approx(expected, abs=1e-15)
        assert state.step == 1
        assert state.first_moment[0][0, 0] == pytest.approx(0.1)
        assert state.second_moment[0][0, 0] == pytest.approx(0.001)

    def test_adam_matches_reference_over_steps(self):
        rng = np.random.default_rng(0)
        net = nn.net_init(nn.NetConfig((3, 5, 1), init_seed=4))
        ref = [p.copy() for p in net.parameters()]
        m = [np.zeros_like(p) for p in ref]
        v = [np.zeros_like(p) for p in ref]
        state = nn.OptimizerState("adam", 0.01)
        for t in range(1, 6):
            gs = [rng.normal(size=p.shape) for p in ref]
            nn.optimizer_step(net.parameters(), gs, state)
            for i, g in enumerate(gs):
                m[i] = 0.9 * m[i] + 0.1 * g
                v[i] = 0.999 * v[i] + 0.001 * g * g
                ref[i] -= 0.01 * (m[i] / (1 - 0.9**t)) / (np.sqrt(v[i] / (1 - 0.999**t)) + 1e-8)
        for p, r in zip(net.parameters(), ref):
            np.testing.assert_allclose(p, r, rtol=1e-13, atol=1e-15)

    def test_shape_mismatch(self):
        net = nn.net_init(nn.NetConfig((3, 1)))
        with pytest.raises(ShapeError):
            nn.optimizer_step(net, [np.zeros((2, 1)), np.zeros(1)], nn.OptimizerState("sgd", 0.1))

    def test_bad_state(self):
        with pytest.raises(ConfigurationError):
            nn.OptimizerState("rmsprop", 0.1)
        with pytest.raises(ConfigurationError):
            nn.OptimizerState("sgd", 0.0)

    def test_deterministic_training_sequence(self):
        def run():
            net = nn.net_init(nn.NetConfig((4, 6, 1), init_seed=11))
            state = nn.OptimizerState("adam", 0.01)
            rng = np.random.default_rng(3)
            for _ in range(10):
                x = rng.normal(size=(5, 4))
                nn.optimizer_step(net, nn.backward(net, x, np.ones((5, 1))), state)
            return net.get_flat()

        assert run().tobytes() == run().tobytes()


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        net = nn.net_init(nn.NetConfig((5, 3, 1), "tanh", 123))
        net.biases[0][...] = [0.1, -1 / 3, 1e-300]
        path = tmp_path / "net.json"
        nn.save_net(net, path)
        back = nn.load_net(path)
        assert back.config == net.config
        assert back.get_flat().tobytes() == net.get_flat().tobytes()

    def test_flat_layout_is_layer_order(self):
        net = nn.net_init(nn.NetConfig((2, 2, 1), init_seed=1))
        flat = net.get_flat()
        np.testing.assert_array_equal(flat[:4], net.weights[0].ravel())
        np.testing.assert_array_equal(flat[4:6], net.biases[0])

    def test_bad_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            nn.load_net(p)
        p.write_text(json.dumps({"format": "other"}))
        with pytest.raises(ParseError):
            nn.load_net(p)
