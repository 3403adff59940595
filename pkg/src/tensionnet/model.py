"""The full pipeline: disentangle -> evolve per space -> extract -> judge.

Every stage works on a whole batch at once; feature spaces carry shape
(batch, n, d) with n = 2 (text feature, image feature) per space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import TrainConfig
from .disentangle import DisentangledFeatures, ProjectionHeads, RawEmbeddings, project
from .errors import NumericalError
from .evolution import (
    EvolutionUnit,
    batched_conflict_indices,
    compute_tension,
    evolve_step,
)
from .judgment import LossWeights, Prediction, final_loss, label_for, total_loss
from .nn import Mlp, Rng, build_mlp

# roles of the n=2 features inside each space
FEATURE_ROLES = ("text", "image")


@dataclass
class ViewResult:
    """Per-view evolution outcome for a batch."""

    vector: Tensor                       # (B, d_v) standardized inconsistency
    conflict_i: np.ndarray | None = None  # (B,)
    conflict_j: np.ndarray | None = None
    conflict_tension: np.ndarray | None = None
    trace_tensions: list[np.ndarray] = field(default_factory=list)  # (B, n, n) each
    trace_norms: list[np.ndarray] = field(default_factory=list)     # (B, n) each
    consensus_norm: np.ndarray | None = None


@dataclass
class ForwardResult:
    probs: Tensor  # (B,)
    feats: DisentangledFeatures
    fact_view: ViewResult
    sentiment_view: ViewResult


class ConflictConsensusModel:
    """Dual-space conflict/consensus fake-news classifier."""

    def __init__(self, config: TrainConfig, rng: Rng | None = None):
        self.config = config.validate()
        if rng is None:
            rng = Rng(config.seed)
        c = config
        self.heads = ProjectionHeads(c.d_text, c.d_image, c.d, c.K, c.p, rng.child(10))
        self.unit_fact = EvolutionUnit(
            g=build_mlp([c.d, c.d, c.d], rng=rng.child(11)),
            tau=c.tau, iterations=c.iterations,
        )
        self.unit_sent = EvolutionUnit(
            g=build_mlp([c.d, c.d, c.d], rng=rng.child(12)),
            tau=c.tau, iterations=c.iterations,
        )
        # single linear layer: the standardizer only mixes conflict against
        # consensus, all non-linear work happens in the evolution unit
        self.gstd_fact = build_mlp([3 * c.d, c.d_v], rng=rng.child(13))
        self.gstd_sent = build_mlp([3 * c.d, c.d_v], rng=rng.child(14))
        self.classifier = build_mlp(
            [2 * c.d_v, 2 * c.d_v, 1], output_activation="sigmoid", rng=rng.child(15)
        )

    # -- parameter bookkeeping ------------------------------------------------

    def named_mlps(self) -> dict[str, Mlp]:
        named = dict(self.heads.named_mlps())
        named["evolve_fact"] = self.unit_fact.g
        named["evolve_sent"] = self.unit_sent.g
        named["standardize_fact"] = self.gstd_fact
        named["standardize_sent"] = self.gstd_sent
        named["classifier"] = self.classifier
        return named

    def parameters(self) -> list[Tensor]:
        params = []
        for mlp in self.named_mlps().values():
            params.extend(mlp.parameters())
        return params

    # -- forward --------------------------------------------------------------

    def _run_view(self, f_text: Tensor, f_image: Tensor, unit: EvolutionUnit,
                  g_std: Mlp, disabled: bool, capture_trace: bool) -> ViewResult:
        c = self.config
        batch = f_text.shape[0]
        if disabled:
            return ViewResult(vector=Tensor(np.zeros((batch, c.d_v))))
        n, d = 2, c.d
        S = ag.concatenate(
            [f_text.reshape((batch, 1, d)), f_image.reshape((batch, 1, d))], axis=1
        )
        result = ViewResult(vector=None)  # filled below
        if capture_trace:
            result.trace_norms.append(np.linalg.norm(S.data, axis=-1))
        if c.no_evolution:
            tension = compute_tension(S)
            if capture_trace:
                result.trace_tensions.append(tension.scalar.data)
        else:
            tension = None
            for it in range(unit.iterations):
                S, tension = evolve_step(
                    S, unit,
                    tension_mode=c.tension_mode,
                    uniform_weights=c.no_tension_weighting,
                )
                if not np.all(np.isfinite(S.data)):
                    raise NumericalError(f"non-finite features at iteration {it}")
                if capture_trace:
                    result.trace_tensions.append(tension.scalar.data)
                    result.trace_norms.append(np.linalg.norm(S.data, axis=-1))
        idx_i, idx_j = batched_conflict_indices(tension.scalar.data)
        rows = np.arange(batch)
        if c.no_conflict:
            conflict = Tensor(np.zeros((batch, 2 * d)))
        else:
            conflict = ag.concatenate([S[rows, idx_i], S[rows, idx_j]], axis=-1)
        consensus = S.mean(axis=1)
        if capture_trace:
            result.consensus_norm = np.linalg.norm(consensus.data, axis=-1)
        if c.no_consensus:
            consensus = Tensor(np.zeros((batch, d)))
        result.vector = g_std(ag.concatenate([conflict, consensus], axis=-1))
        result.conflict_i = idx_i
        result.conflict_j = idx_j
        result.conflict_tension = tension.scalar.data[rows, idx_i, idx_j]
        return result

    def forward(self, e_T: np.ndarray, e_I: np.ndarray, *,
                capture_trace: bool = False) -> ForwardResult:
        feats = project(self.heads, RawEmbeddings(e_T=e_T, e_I=e_I))
        fact_view = self._run_view(
            feats.f_T_fact, feats.f_I_fact, self.unit_fact, self.gstd_fact,
            self.config.no_fact_view, capture_trace,
        )
        sent_view = self._run_view(
            feats.f_T_sent, feats.f_I_sent, self.unit_sent, self.gstd_sent,
            self.config.no_sentiment_view, capture_trace,
        )
        fused = ag.concatenate([fact_view.vector, sent_view.vector], axis=-1)
        logits = self.classifier(fused)
        probs = logits.reshape((logits.shape[0],))
        return ForwardResult(
            probs=probs, feats=feats, fact_view=fact_view, sentiment_view=sent_view
        )

    # -- objective ------------------------------------------------------------

    def loss(self, batch: dict) -> tuple[Tensor, dict]:
        """Total training loss for a batch of stacked arrays."""
        from .disentangle import AuxTargets, fact_loss, sentiment_loss

        c = self.config
        out = self.forward(batch["e_T"], batch["e_I"])
        l_final = final_loss(out.probs, batch["labels"])
        targets = AuxTargets(e_Y=batch["e_Y"], e_J=batch["e_J"])
        lam_f, lam_s = c.effective_lambda_fact, c.effective_lambda_sent
        l_fact = fact_loss(self.heads, out.feats, targets) if lam_f > 0 else Tensor(0.0)
        l_sent = (
            sentiment_loss(self.heads, out.feats, targets) if lam_s > 0 else Tensor(0.0)
        )
        total = total_loss(l_final, l_fact, l_sent, LossWeights(lam_f, lam_s))
        parts = {
            "final": float(l_final.data),
            "fact_aux": float(l_fact.data),
            "sentiment_aux": float(l_sent.data),
            "total": float(total.data),
        }
        return total, parts

    # -- inference ------------------------------------------------------------

    def predict_probs(self, e_T: np.ndarray, e_I: np.ndarray) -> np.ndarray:
        with ag.no_grad():
            return self.forward(e_T, e_I).probs.data

    def predict(self, e_T: np.ndarray, e_I: np.ndarray) -> list[Prediction]:
        from .judgment import ConflictAttribution

        with ag.no_grad():
            out = self.forward(e_T, e_I)
        preds = []
        for b, prob in enumerate(out.probs.data):
            def attribution(view: ViewResult):
                if view.conflict_i is None:
                    return None
                return ConflictAttribution(
                    pair=(int(view.conflict_i[b]), int(view.conflict_j[b])),
                    tension=float(view.conflict_tension[b]),
                )
            preds.append(
                Prediction(
                    prob_fake=float(prob),
                    label=label_for(float(prob)),
                    fact_conflict=attribution(out.fact_view),
                    sentiment_conflict=attribution(out.sentiment_view),
                )
            )
        return preds
