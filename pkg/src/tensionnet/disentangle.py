"""Stage 1: project raw embeddings into fact and sentiment spaces.

Four independent projection MLPs (no weight sharing) map the text and image
embeddings into a shared-dimension fact space and sentiment space. Two
auxiliary heads supervise the spaces: a sigmoid object-presence head on the
image-side fact feature (BCE) and a polarity regressor on the text-side
sentiment feature (MSE).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigurationError, DataError
from .nn import Mlp, Rng, build_mlp

PROB_CLAMP = 1e-7


@dataclass
class RawEmbeddings:
    e_T: np.ndarray
    e_I: np.ndarray


@dataclass
class AuxTargets:
    e_Y: np.ndarray  # multi-hot object presence, entries in {0, 1}
    e_J: np.ndarray  # sentiment polarity, entries in [-1, 1]


@dataclass
class DisentangledFeatures:
    f_T_fact: Tensor
    f_I_fact: Tensor
    f_T_sent: Tensor
    f_I_sent: Tensor


class ProjectionHeads:
    """The four projection MLPs plus the two auxiliary supervision heads."""

    def __init__(self, d_text: int, d_image: int, d: int, K: int, p: int, rng: Rng):
        self.d_text, self.d_image, self.d, self.K, self.p = d_text, d_image, d, K, p
        self.proj_fact_text = build_mlp([d_text, d, d], rng=rng.child(1))
        self.proj_fact_image = build_mlp([d_image, d, d], rng=rng.child(2))
        self.proj_sent_text = build_mlp([d_text, d, d], rng=rng.child(3))
        self.proj_sent_image = build_mlp([d_image, d, d], rng=rng.child(4))
        self.yolo_head = build_mlp([d, K], output_activation="sigmoid", rng=rng.child(5))
        self.sentic_head = build_mlp([d, p], rng=rng.child(6))

    def named_mlps(self) -> dict[str, Mlp]:
        return {
            "proj_fact_text": self.proj_fact_text,
            "proj_fact_image": self.proj_fact_image,
            "proj_sent_text": self.proj_sent_text,
            "proj_sent_image": self.proj_sent_image,
            "yolo_head": self.yolo_head,
            "sentic_head": self.sentic_head,
        }

    def parameters(self) -> list[Tensor]:
        params = []
        for m in self.named_mlps().values():
            params.extend(m.parameters())
        return params


def project(heads: ProjectionHeads, raw: RawEmbeddings) -> DisentangledFeatures:
    """Run the four projections; accepts single vectors or batches."""
    e_T = ag.as_tensor(raw.e_T)
    e_I = ag.as_tensor(raw.e_I)
    if e_T.shape[-1] != heads.d_text:
        raise ConfigurationError(
            f"text embedding dim {e_T.shape[-1]} != configured {heads.d_text}"
        )
    if e_I.shape[-1] != heads.d_image:
        raise ConfigurationError(
            f"image embedding dim {e_I.shape[-1]} != configured {heads.d_image}"
        )
    return DisentangledFeatures(
        f_T_fact=heads.proj_fact_text(e_T),
        f_I_fact=heads.proj_fact_image(e_I),
        f_T_sent=heads.proj_sent_text(e_T),
        f_I_sent=heads.proj_sent_image(e_I),
    )


def binary_cross_entropy(probs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean BCE with probabilities clamped to [1e-7, 1 - 1e-7] before log."""
    targets = np.asarray(targets, dtype=np.float64)
    p = ag.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    losses = -(
        Tensor(targets) * ag.log(p) + Tensor(1.0 - targets) * ag.log(1.0 - p)
    )
    return losses.mean()


def fact_loss(heads: ProjectionHeads, feats: DisentangledFeatures,
              targets: AuxTargets) -> Tensor:
    """BCE between the object head on the image fact feature and e_Y."""
    e_Y = np.asarray(targets.e_Y, dtype=np.float64)
    if not np.all((e_Y == 0.0) | (e_Y == 1.0)):
        raise DataError("e_Y must be binary")
    probs = heads.yolo_head(feats.f_I_fact)
    return binary_cross_entropy(probs, e_Y)


def sentiment_loss(heads: ProjectionHeads, feats: DisentangledFeatures,
                   targets: AuxTargets) -> Tensor:
    """MSE between the polarity head on the text sentiment feature and e_J."""
    e_J = np.asarray(targets.e_J, dtype=np.float64)
    if np.any(np.abs(e_J) > 1.0):
        raise DataError("e_J entries must lie in [-1, 1]")
    pred = heads.sentic_head(feats.f_T_sent)
    return ag.square(pred - Tensor(e_J)).mean()
