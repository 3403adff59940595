"""Stage 3: fuse the two standardized inconsistency vectors and classify."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .disentangle import binary_cross_entropy
from .errors import ConfigurationError
from .nn import Mlp

FAKE_THRESHOLD = 0.5  # prob >= threshold is labelled fake


@dataclass
class ViewVectors:
    V_fact: Tensor
    V_sent: Tensor


@dataclass
class LossWeights:
    lambda_fact: float = 0.075
    lambda_sent: float = 0.075

    def __post_init__(self):
        if not (0.0 <= self.lambda_fact < 1.0 and 0.0 <= self.lambda_sent < 1.0):
            raise ConfigurationError("loss weights must lie in [0, 1)")
        if self.lambda_fact + self.lambda_sent >= 1.0:
            raise ConfigurationError("loss weights must sum to less than 1")


@dataclass
class ConflictAttribution:
    pair: tuple[int, int]
    tension: float


@dataclass
class Prediction:
    prob_fake: float
    label: str  # "fake" | "real"
    fact_conflict: ConflictAttribution | None = None
    sentiment_conflict: ConflictAttribution | None = None

    def to_record(self, sample_id: str | None = None) -> dict:
        record = {
            "id": sample_id,
            "prob_fake": self.prob_fake,
            "label": self.label,
        }
        for name, conf in (
            ("fact", self.fact_conflict),
            ("sentiment", self.sentiment_conflict),
        ):
            record[f"{name}_conflict_pair"] = list(conf.pair) if conf else None
            record[f"{name}_conflict_tension"] = conf.tension if conf else None
        return record


def label_for(prob_fake: float) -> str:
    return "fake" if prob_fake >= FAKE_THRESHOLD else "real"


def fuse_views(views: ViewVectors) -> Tensor:
    """Concatenate fact-view then sentiment-view inconsistency vectors."""
    vf = ag.as_tensor(views.V_fact)
    vs = ag.as_tensor(views.V_sent)
    if vf.shape != vs.shape:
        raise ConfigurationError(
            f"view dims differ: {vf.shape} vs {vs.shape}"
        )
    return ag.concatenate([vf, vs], axis=-1)


def classify(classifier: Mlp, v_final: Tensor) -> Prediction:
    """Scalar sigmoid head on the fused views; label fake iff prob >= 0.5."""
    out = classifier(ag.as_tensor(v_final))
    if out.shape[-1] != 1:
        raise ConfigurationError("classifier must have a scalar output")
    prob = float(out.data.reshape(-1)[0])
    return Prediction(prob_fake=prob, label=label_for(prob))


def total_loss(l_final, l_fact, l_sent, weights: LossWeights) -> Tensor:
    """(1 - lf - ls) * L_final + lf * L_fact + ls * L_sent."""
    lf, ls = weights.lambda_fact, weights.lambda_sent
    return (
        (1.0 - lf - ls) * ag.as_tensor(l_final)
        + lf * ag.as_tensor(l_fact)
        + ls * ag.as_tensor(l_sent)
    )


def final_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    """BCE of the fake probability against the binary label."""
    return binary_cross_entropy(probs, np.asarray(labels, dtype=np.float64))
