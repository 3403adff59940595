"""Self-describing JSON checkpoints; float values round-trip bit-exactly."""
from __future__ import annotations

import json

import numpy as np

from .config import TrainConfig
from .errors import DataError
from .model import ConflictConsensusModel
from .nn import AdamOptimizer

CHECKPOINT_FORMAT = "conflict-consensus-checkpoint-v1"


def save_checkpoint(path: str, model: ConflictConsensusModel,
                    optimizer: AdamOptimizer | None = None,
                    step_count: int = 0):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "step_count": int(step_count),
        "mlps": {},
    }
    for name, mlp in model.named_mlps().items():
        doc["mlps"][name] = [
            {
                "dim_in": layer.dim_in,
                "dim_out": layer.dim_out,
                "activation": layer.activation,
                "weights": layer.weights.data.ravel().tolist(),  # row-major
                "bias": layer.bias.data.tolist(),
            }
            for layer in mlp.layers
        ]
    if optimizer is not None:
        doc["optimizer"] = optimizer.state_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str) -> tuple[ConflictConsensusModel, dict]:
    """Rebuild the model from a checkpoint; returns (model, raw document)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"unexpected checkpoint format {doc.get('format')!r}")
    config = TrainConfig.from_dict(doc["config"])
    model = ConflictConsensusModel(config)
    for name, mlp in model.named_mlps().items():
        if name not in doc["mlps"]:
            raise DataError(f"checkpoint missing weights for {name!r}")
        stored = doc["mlps"][name]
        if len(stored) != len(mlp.layers):
            raise DataError(f"layer count mismatch for {name!r}")
        for layer, rec in zip(mlp.layers, stored):
            if (rec["dim_in"], rec["dim_out"]) != (layer.dim_in, layer.dim_out):
                raise DataError(f"layer shape mismatch in {name!r}")
            layer.activation = rec["activation"]
            layer.weights.data = np.array(rec["weights"], dtype=np.float64).reshape(
                layer.dim_out, layer.dim_in
            )
            layer.bias.data = np.array(rec["bias"], dtype=np.float64)
    return model, doc


def restore_optimizer(doc: dict, model: ConflictConsensusModel) -> AdamOptimizer | None:
    state = doc.get("optimizer")
    if state is None:
        return None
    optimizer = AdamOptimizer(
        model.parameters(),
        learning_rate=state["learning_rate"],
        beta1=state["beta1"],
        beta2=state["beta2"],
        epsilon=state["epsilon"],
    )
    optimizer.load_state_dict(state)
    return optimizer
