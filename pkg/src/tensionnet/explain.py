"""Per-sample attribution: conflict pairs, tension traces, consensus norms."""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .data import Sample
from .model import FEATURE_ROLES, ConflictConsensusModel, ViewResult


def _view_report(view: ViewResult) -> dict | None:
    if view.conflict_i is None:
        return None
    i, j = int(view.conflict_i[0]), int(view.conflict_j[0])
    return {
        "conflict_pair": [i, j],
        "conflict_roles": [FEATURE_ROLES[i], FEATURE_ROLES[j]],
        "conflict_tension": float(view.conflict_tension[0]),
        "scalar_tensions": [t[0].tolist() for t in view.trace_tensions],
        "feature_norms": [n[0].tolist() for n in view.trace_norms],
        "consensus_norm": (
            None if view.consensus_norm is None else float(view.consensus_norm[0])
        ),
    }


def explain(model: ConflictConsensusModel, sample: Sample) -> dict:
    """Interpretable evidence for one sample's prediction."""
    with ag.no_grad():
        out = model.forward(
            sample.e_T[np.newaxis, :], sample.e_I[np.newaxis, :], capture_trace=True
        )
    prob = float(out.probs.data[0])
    return {
        "id": sample.id,
        "prob_fake": prob,
        "label": "fake" if prob >= 0.5 else "real",
        "true_label": int(sample.label),
        "fact_view": _view_report(out.fact_view),
        "sentiment_view": _view_report(out.sentiment_view),
    }
