"""Dense layers, MLPs, seeded randomness and the adaptive-moment optimizer."""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigurationError, NumericalError, UsageError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")

_ACT_FNS = {
    "relu": ag.relu,
    "tanh": ag.tanh,
    "sigmoid": ag.sigmoid,
    "identity": lambda x: x,
}


class Rng:
    """Seeded random stream; identical seed gives an identical stream."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.default_rng(self.seed)

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def child(self, tag: int) -> "Rng":
        """Derive an independent, deterministic substream."""
        derived = (self.seed * 0x9E3779B97F4A7C15 + 0x1B873593 * (tag + 1)) % (2**63)
        return Rng(derived)


class DenseLayer:
    """One affine layer with a fixed activation and gradient buffers."""

    def __init__(self, dim_in: int, dim_out: int, activation: str = "identity",
                 rng: Rng | None = None):
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {activation!r}")
        if dim_in <= 0 or dim_out <= 0:
            raise ConfigurationError("layer dimensions must be positive")
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.activation = activation
        if rng is None:
            w = np.zeros((dim_out, dim_in))
        else:
            a = np.sqrt(6.0 / (dim_in + dim_out))
            w = rng.uniform(-a, a, size=(dim_out, dim_in))
        self.weights = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(dim_out), requires_grad=True)

    @property
    def grad_weights(self) -> np.ndarray:
        g = self.weights.grad
        return np.zeros_like(self.weights.data) if g is None else g

    @property
    def grad_bias(self) -> np.ndarray:
        g = self.bias.grad
        return np.zeros_like(self.bias.data) if g is None else g

    def forward(self, x: Tensor) -> Tensor:
        x = ag.as_tensor(x)
        if x.shape[-1] != self.dim_in:
            raise ConfigurationError(
                f"layer expects input dim {self.dim_in}, got {x.shape[-1]}"
            )
        return _ACT_FNS[self.activation](ag.linear(x, self.weights, self.bias))

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)


class Mlp:
    """A stack of DenseLayers with chained dimensions."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ConfigurationError("Mlp needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.dim_out != b.dim_in:
                raise ConfigurationError(
                    f"layer dims do not chain: {a.dim_out} -> {b.dim_in}"
                )
        self.layers = list(layers)
        self._cached_input: Tensor | None = None
        self._cached_output: Tensor | None = None

    @property
    def dim_in(self) -> int:
        return self.layers[0].dim_in

    @property
    def dim_out(self) -> int:
        return self.layers[-1].dim_out

    def forward(self, x: Tensor) -> Tensor:
        out = ag.as_tensor(x)
        for layer in self.layers:
            out = layer(out)
        return out

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def parameters(self) -> list[Tensor]:
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params


def build_mlp(dims: list[int], hidden_activation: str = "relu",
              output_activation: str = "identity", rng: Rng | None = None) -> Mlp:
    """Build an MLP from a [in, hidden..., out] dimension chain."""
    if len(dims) < 2:
        raise ConfigurationError("need at least input and output dims")
    layers = []
    for i, (din, dout) in enumerate(zip(dims, dims[1:])):
        act = output_activation if i == len(dims) - 2 else hidden_activation
        layers.append(DenseLayer(din, dout, activation=act, rng=rng))
    return Mlp(layers)


def mlp_forward(mlp: Mlp, x) -> np.ndarray:
    """Run the MLP on raw values, caching the tape for mlp_backward."""
    inp = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    out = mlp.forward(inp)
    mlp._cached_input = inp
    mlp._cached_output = out
    return out.data.copy()


def mlp_backward(mlp: Mlp, grad_out) -> np.ndarray:
    """Backpropagate from the last mlp_forward call.

    Accumulates into each layer's gradient buffers and returns the gradient
    with respect to the input.
    """
    if mlp._cached_output is None or mlp._cached_input is None:
        raise UsageError("mlp_backward called without a cached forward pass")
    mlp._cached_output.backward(np.asarray(grad_out, dtype=np.float64))
    grad_in = mlp._cached_input.grad
    mlp._cached_input = None
    mlp._cached_output = None
    return np.zeros(mlp.dim_in) if grad_in is None else grad_in


def softmax(xs, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax on raw arrays."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise ConfigurationError("softmax of empty input")
    shifted = xs - xs.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


class AdamOptimizer:
    """Adaptive moment estimation with bias correction.

    After each step the parameter gradients are zeroed; a non-finite
    gradient aborts the step before any parameter is touched.
    """

    def __init__(self, params: list[Tensor], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigurationError("betas must be in [0, 1)")
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        grads = []
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericalError(
                    f"non-finite gradient in parameter {i} "
                    f"(shape {p.data.shape}) at step {self.step_count}"
                )
            grads.append(g)
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.first_moment, self.second_moment):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            p.data = p.data - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
        self.zero_grad()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_dict(self) -> dict:
        return {
            "step_count": self.step_count,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "first_moment": [m.ravel().tolist() for m in self.first_moment],
            "second_moment": [v.ravel().tolist() for v in self.second_moment],
        }

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step_count"])
        self.learning_rate = float(state["learning_rate"])
        self.beta1 = float(state["beta1"])
        self.beta2 = float(state["beta2"])
        self.epsilon = float(state["epsilon"])
        self.first_moment = [
            np.array(vals, dtype=np.float64).reshape(p.data.shape)
            for vals, p in zip(state["first_moment"], self.params)
        ]
        self.second_moment = [
            np.array(vals, dtype=np.float64).reshape(p.data.shape)
            for vals, p in zip(state["second_moment"], self.params)
        ]
