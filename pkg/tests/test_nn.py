import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitsentinel import nn
from splitsentinel.errors import ShapeError


def central_difference(f, params, eps=1e-5):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = f()
            p[idx] = old - eps
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def rel_error(a, b):
    a = np.concatenate([x.ravel() for x in a])
    b = np.concatenate([x.ravel() for x in b])
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


class TestDenseForward:
    def test_identity(self):
        layer = nn.DenseLayer(np.eye(2), np.zeros(2))
        pre, out = nn.dense_forward(layer, [3.0, -1.0])
        np.testing.assert_array_equal(out, [3.0, -1.0])

    def test_zero_weights_gives_bias(self):
        layer = nn.DenseLayer(np.zeros((2, 2)), [1.0, 2.0])
        _, out = nn.dense_forward(layer, [7.0, -4.0])
        np.testing.assert_array_equal(out, [1.0, 2.0])

    def test_hand_multiplied_leaky(self):
        layer = nn.DenseLayer([[1, 2], [3, 4]], np.zeros(2), nn.LeakyReLU(0.2))
        pre, out = nn.dense_forward(layer, [1.0, -1.0])
        np.testing.assert_allclose(pre, [-1.0, -1.0])
        np.testing.assert_allclose(out, [-0.2, -0.2])

    def test_batch_rows_match_vectors(self):
        rng = np.random.default_rng(1)
        layer = nn.glorot_layer(4, 3, rng, nn.LeakyReLU(0.2))
        x = rng.normal(size=(5, 4))
        _, batch = nn.dense_forward(layer, x)
        for row, expected in zip(x, batch):
            np.testing.assert_allclose(nn.dense_forward(layer, row)[1], expected, rtol=1e-14)

    def test_shape_mismatch(self):
        layer = nn.DenseLayer(np.eye(2), np.zeros(2))
        with pytest.raises(ShapeError):
            nn.dense_forward(layer, [1.0, 2.0, 3.0])

    def test_bias_length_checked(self):
        with pytest.raises(ShapeError):
            nn.DenseLayer(np.eye(2), np.zeros(3))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        layer = nn.glorot_layer(6, 2, rng, nn.LeakyReLU(0.2))
        x = rng.normal(size=6)
        a = nn.dense_forward(layer, x)[1]
        b = nn.dense_forward(layer, x.copy())[1]
        assert a.tobytes() == b.tobytes()


class TestLeakyRelu:
    @pytest.mark.parametrize("x, expected", [(5.0, 5.0), (-1.0, -0.2), (0.0, 0.0)])
    def test_values(self, x, expected):
        assert nn.leaky_relu(x, 0.2) == pytest.approx(expected)

    def test_derivative_at_zero_is_alpha(self):
        assert nn.leaky_relu_derivative(0.0, 0.2) == 0.2
        assert nn.leaky_relu_derivative(1e-12, 0.2) == 1.0

    def test_alpha_must_be_positive(self):
        with pytest.raises(ValueError):
            nn.leaky_relu(1.0, 0.0)
        with pytest.raises(ValueError):
            nn.LeakyReLU(-0.1)


class TestBackward:
    def test_linear_single_layer(self):
        layer = nn.DenseLayer(np.zeros((3, 4)), np.zeros(3))
        x = np.array([1.0, -2.0, 0.5, 3.0])
        tape = nn.forward([layer], x)
        (dW, db), = nn.backward([layer], tape, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(dW[0], x)
        np.testing.assert_array_equal(dW[1:], 0.0)
        assert db[0] == 1.0

    def test_zero_output_grad(self):
        rng = np.random.default_rng(0)
        layers = [nn.glorot_layer(5, 3, rng, nn.LeakyReLU(0.2)), nn.glorot_layer(3, 5, rng)]
        tape = nn.forward(layers, rng.normal(size=5))
        for dW, db in nn.backward(layers, tape, np.zeros(5)):
            assert not dW.any() and not db.any()

    def test_finite_difference_5_3_5(self):
        rng = np.random.default_rng(7)
        layers = [nn.glorot_layer(5, 3, rng, nn.LeakyReLU(0.2)), nn.glorot_layer(3, 5, rng)]
        for layer in layers:
            layer.bias[:] = rng.normal(size=layer.n_out)
        x = rng.normal(size=(4, 5))
        target = rng.normal(size=(4, 5))

        def loss():
            out = nn.forward(layers, x).output
            return 0.5 * np.sum((out - target) ** 2)

        tape = nn.forward(layers, x)
        grads = nn.backward(layers, tape, tape.output - target)
        params = [p for layer in layers for p in (layer.weights, layer.bias)]
        numeric = central_difference(loss, params)
        analytic = [g for pair in grads for g in pair]
        assert rel_error(analytic, numeric) < 1e-4

    def test_grad_shape_checked(self):
        rng = np.random.default_rng(0)
        layers = [nn.glorot_layer(2, 2, rng)]
        tape = nn.forward(layers, [1.0, 2.0])
        with pytest.raises(ShapeError):
            nn.backward(layers, tape, [1.0, 2.0, 3.0])


class TestL1:
    def test_sign(self):
        np.testing.assert_array_equal(nn.l1_gradient([[2.0, -3.0]], 5e-5), [[5e-5, -5e-5]])

    def test_zero_lambda(self):
        assert not nn.l1_gradient([[2.0, -3.0]], 0.0).any()

    def test_zero_weights(self):
        assert not nn.l1_gradient(np.zeros((2, 3)), 5e-5).any()


class TestAdam:
    @pytest.mark.parametrize("g", [0.5, -3.0, 1e-3])
    def test_first_step_closed_form(self, g):
        # m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
        p = np.array([0.0])
        nn.adam_update(nn.AdamState(learning_rate=1e-3), [p], [np.array([g])])
        expected = -1e-3 * g / (abs(g) + 1e-8)
        assert p[0] == pytest.approx(expected, rel=1e-12)
        assert p[0] == pytest.approx(-1e-3 * np.sign(g), rel=1e-4)

    def test_zero_grad_fresh_state(self):
        p = np.array([1.5, -2.0])
        nn.adam_update(nn.AdamState(), [p], [np.zeros(2)])
        np.testing.assert_array_equal(p, [1.5, -2.0])

    def test_two_steps_monotone(self):
        p = np.array([0.0])
        state = nn.AdamState()
        trace = [p[0]]
        for _ in range(2):
            nn.adam_update(state, [p], [np.array([2.0])])
            trace.append(p[0])
        assert trace[0] > trace[1] > trace[2]
        # constant gradient keeps m_hat = g and v_hat = g^2, so each step is ~lr
        assert trace[2] == pytest.approx(-2e-3, rel=1e-6)
        assert state.step == 2

    def test_step_count_and_second_moment(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=(3, 2))
        state = nn.AdamState()
        for k in range(5):
            nn.adam_update(state, [p], [rng.normal(size=(3, 2))])
            assert state.step == k + 1
            assert (state.second_moment[0] >= 0).all()

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6))
    def test_zero_learning_rate_never_moves(self, grads):
        p = np.arange(len(grads), dtype=float)
        before = p.copy()
        state = nn.AdamState(learning_rate=0.0)
        for _ in range(3):
            nn.adam_update(state, [p], [np.array(grads)])
        np.testing.assert_array_equal(p, before)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.adam_update(nn.AdamState(), [np.zeros(2)], [np.zeros(3)])
