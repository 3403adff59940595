import numpy as np
import pytest

from tensionnet import autograd as ag
from tensionnet.errors import ConfigurationError, NumericalError, UsageError
from tensionnet.nn import (
    AdamOptimizer,
    DenseLayer,
    Mlp,
    Rng,
    build_mlp,
    mlp_backward,
    mlp_forward,
    softmax,
)


def rel_error(a, b, eps=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.max(np.abs(a - b) / np.maximum(eps, np.abs(a) + np.abs(b)))


def numeric_grad(param, compute_loss, h=1e-5):
    """Central finite differences, elementwise."""
    g = np.zeros_like(param.data)
    it = np.nditer(param.data, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        old = param.data[idx]
        param.data[idx] = old + h
        up = compute_loss()
        param.data[idx] = old - h
        down = compute_loss()
        param.data[idx] = old
        g[idx] = (up - down) / (2 * h)
        it.iternext()
    return g


def naive_mlp_forward(mlp, x):
    """Independent forward oracle: plain Python loops, no shared code."""
    import math

    acts = {
        "relu": lambda v: max(v, 0.0),
        "tanh": math.tanh,
        "sigmoid": lambda v: 1.0 / (1.0 + math.exp(-v)),
        "identity": lambda v: v,
    }
    out = list(x)
    for layer in mlp.layers:
        nxt = []
        for i in range(layer.dim_out):
            s = float(layer.bias.data[i])
            for j in range(layer.dim_in):
                s += float(layer.weights.data[i, j]) * out[j]
            nxt.append(acts[layer.activation](s))
        out = nxt
    return np.array(out)


class TestMlpForward:
    def test_identity_layer_passes_through(self):
        layer = DenseLayer(2, 2)
        layer.weights.data = np.eye(2)
        out = mlp_forward(Mlp([layer]), [2.0, 3.0])
        np.testing.assert_array_equal(out, [2.0, 3.0])

    def test_sigmoid_of_zero_weights_is_half(self):
        layer = DenseLayer(3, 4, activation="sigmoid")
        out = mlp_forward(Mlp([layer]), [1.7, -2.0, 0.4])
        np.testing.assert_allclose(out, 0.5)

    def test_matches_naive_oracle(self):
        rng = Rng(3)
        mlp = build_mlp([3, 4, 2], hidden_activation="tanh",
                        output_activation="tanh", rng=rng)
        x = rng.normal(size=3)
        np.testing.assert_allclose(mlp_forward(mlp, x), naive_mlp_forward(mlp, x),
                                   atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        mlp = build_mlp([3, 2], rng=Rng(0))
        with pytest.raises(ConfigurationError):
            mlp_forward(mlp, [1.0, 2.0])

    def test_forward_purity(self):
        mlp = build_mlp([3, 3], rng=Rng(1))
        before = [p.data.copy() for p in mlp.parameters()]
        mlp_forward(mlp, [1.0, 2.0, 3.0])
        for p, b in zip(mlp.parameters(), before):
            np.testing.assert_array_equal(p.data, b)


class TestMlpBackward:
    def test_identity_layer_chain_rule(self):
        layer = DenseLayer(2, 2)
        layer.weights.data = np.eye(2)
        mlp = Mlp([layer])
        x = np.array([3.0, -1.0])
        mlp_forward(mlp, x)
        grad_in = mlp_backward(mlp, [1.0, 0.0])
        np.testing.assert_array_equal(grad_in, [1.0, 0.0])
        np.testing.assert_array_equal(layer.grad_weights, np.outer([1.0, 0.0], x))
        np.testing.assert_array_equal(layer.grad_bias, [1.0, 0.0])

    def test_zero_grad_out_gives_zero_grads(self):
        mlp = build_mlp([3, 4, 2], rng=Rng(5))
        mlp_forward(mlp, [0.3, -0.2, 1.1])
        grad_in = mlp_backward(mlp, [0.0, 0.0])
        np.testing.assert_array_equal(grad_in, 0.0)
        for layer in mlp.layers:
            np.testing.assert_array_equal(layer.grad_weights, 0.0)

    def test_backward_without_forward_raises(self):
        mlp = build_mlp([2, 2], rng=Rng(0))
        with pytest.raises(UsageError):
            mlp_backward(mlp, [1.0, 1.0])

    @pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid", "identity"])
    def test_finite_difference_fidelity(self, activation):
        rng = Rng(11)
        mlp = build_mlp([4, 5, 3], hidden_activation=activation, rng=rng)
        x = rng.normal(size=4)
        target = rng.normal(size=3)

        def loss():
            out = mlp_forward(mlp, x)
            return float(((out - target) ** 2).sum())

        # seed the backward pass with the hand-derived loss gradient
        mlp_forward(mlp, x)
        mlp_backward(mlp, 2.0 * (mlp._cached_output.data - target))
        for li, layer in enumerate(mlp.layers):
            for pname, param, analytic in (
                ("w", layer.weights, layer.grad_weights),
                ("b", layer.bias, layer.grad_bias),
            ):
                numeric = numeric_grad(param, loss)
                assert rel_error(analytic, numeric) < 1e-4, (li, pname)
            layer.weights.zero_grad()
            layer.bias.zero_grad()


class TestOptimizer:
    def test_zero_gradient_leaves_params(self):
        mlp = build_mlp([2, 2], rng=Rng(0))
        before = [p.data.copy() for p in mlp.parameters()]
        opt = AdamOptimizer(mlp.parameters())
        opt.step()
        for p, b in zip(mlp.parameters(), before):
            np.testing.assert_array_equal(p.data, b)

    def test_first_step_moves_by_lr(self):
        # m_hat = v_hat = 1 after one unit-gradient step, so the update is
        # -lr / (1 + eps) which is -0.1 to within eps
        param = ag.Tensor(np.zeros(1), requires_grad=True)
        param.grad = np.ones(1)
        opt = AdamOptimizer([param], learning_rate=0.1)
        opt.step()
        np.testing.assert_allclose(param.data, [-0.1], rtol=1e-7)

    def test_determinism(self):
        results = []
        for _ in range(2):
            param = ag.Tensor(np.array([0.5, -0.5]), requires_grad=True)
            opt = AdamOptimizer([param], learning_rate=0.01)
            for _ in range(3):
                param.grad = np.array([1.0, -2.0])
                opt.step()
            results.append(param.data.copy())
        np.testing.assert_array_equal(results[0], results[1])

    def test_nonfinite_gradient_aborts(self):
        param = ag.Tensor(np.zeros(2), requires_grad=True)
        param.grad = np.array([1.0, np.nan])
        opt = AdamOptimizer([param])
        before = param.data.copy()
        with pytest.raises(NumericalError):
            opt.step()
        np.testing.assert_array_equal(param.data, before)

    def test_invalid_betas_rejected(self):
        with pytest.raises(ConfigurationError):
            AdamOptimizer([], beta1=1.0)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), 1.0 / 3.0)

    def test_large_values_do_not_overflow(self):
        out = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-12)

    def test_matches_arbitrary_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 50
        xs = [0.0, -1.0]
        denom = sum(mpmath.e**x for x in xs)
        expected = [float(mpmath.e**x / denom) for x in xs]
        np.testing.assert_allclose(softmax(xs), expected, rtol=1e-14)
        np.testing.assert_allclose(softmax(xs), [0.7311, 0.2689], atol=1e-4)

    def test_simplex_property(self):
        rng = Rng(42)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            out = softmax(rng.normal(0.0, 10.0, size=n))
            assert np.all(out > 0.0)
            assert abs(out.sum() - 1.0) < 1e-9


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(123).normal(size=10)
        b = Rng(123).normal(size=10)
        np.testing.assert_array_equal(a, b)

    def test_children_are_independent_and_deterministic(self):
        r = Rng(7)
        np.testing.assert_array_equal(r.child(1).normal(size=4),
                                      Rng(7).child(1).normal(size=4))
        assert not np.array_equal(r.child(1).normal(size=4),
                                  r.child(2).normal(size=4))


def test_training_step_determinism():
    # same seed + same data => bitwise-identical parameters after k steps
    def run():
        rng = Rng(9)
        mlp = build_mlp([3, 4, 1], rng=rng)
        opt = AdamOptimizer(mlp.parameters(), learning_rate=0.01)
        x = Rng(10).normal(size=(8, 3))
        y = Rng(11).normal(size=(8, 1))
        for _ in range(5):
            out = mlp(ag.Tensor(x))
            loss = ag.square(out - ag.Tensor(y)).mean()
            loss.backward()
            opt.step()
        return [p.data.copy() for p in mlp.parameters()]

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)
