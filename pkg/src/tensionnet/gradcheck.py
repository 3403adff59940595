"""End-to-end finite-difference validation of the analytic gradients."""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .config import TrainConfig
from .model import ConflictConsensusModel
from .nn import Rng

# small-but-complete pipeline dims for the end-to-end check
GRADCHECK_CONFIG = TrainConfig(
    d_text=6, d_image=5, d=4, d_v=4, K=3, p=2, iterations=2, tau=1.5, seed=7
)


def _random_batch(config: TrainConfig, rng: Rng, batch: int = 1) -> dict:
    return {
        "e_T": rng.normal(size=(batch, config.d_text)),
        "e_I": rng.normal(size=(batch, config.d_image)),
        "e_Y": (rng.normal(size=(batch, config.K)) > 0).astype(np.float64),
        "e_J": np.clip(rng.normal(size=(batch, config.p)), -1.0, 1.0),
        "labels": (rng.normal(size=batch) > 0).astype(np.float64),
    }


def run_gradcheck(config: TrainConfig | None = None, h: float = 1e-5,
                  tolerance: float = 1e-4, seed: int = 7) -> dict:
    """Compare every parameter's analytic gradient against central differences.

    Returns per-MLP worst relative errors and an overall pass flag.
    """
    if config is None:
        config = GRADCHECK_CONFIG
    model = ConflictConsensusModel(config)
    batch = _random_batch(config, Rng(seed))

    loss, _ = model.loss(batch)
    loss.backward()
    analytic = {
        name: [(layer.grad_weights.copy(), layer.grad_bias.copy())
               for layer in mlp.layers]
        for name, mlp in model.named_mlps().items()
    }

    def loss_value() -> float:
        with ag.no_grad():
            total, _ = model.loss(batch)
        return float(total.data)

    def rel_error(a: float, n: float) -> float:
        diff = abs(a - n)
        if diff < 1e-10:
            return 0.0
        return diff / max(abs(a), abs(n), 1e-6)

    per_mlp: dict[str, float] = {}
    worst = 0.0
    n_params = 0
    for name, mlp in model.named_mlps().items():
        mlp_worst = 0.0
        for layer_idx, layer in enumerate(mlp.layers):
            for param, grads in ((layer.weights, analytic[name][layer_idx][0]),
                                 (layer.bias, analytic[name][layer_idx][1])):
                flat = param.data.ravel()
                gflat = grads.ravel()
                for k in range(flat.size):
                    old = flat[k]
                    flat[k] = old + h
                    up = loss_value()
                    flat[k] = old - h
                    down = loss_value()
                    flat[k] = old
                    numeric = (up - down) / (2.0 * h)
                    mlp_worst = max(mlp_worst, rel_error(gflat[k], numeric))
                    n_params += 1
        per_mlp[name] = mlp_worst
        worst = max(worst, mlp_worst)
    return {
        "passed": worst < tolerance,
        "max_relative_error": worst,
        "tolerance": tolerance,
        "n_parameters": n_params,
        "per_mlp": per_mlp,
    }
