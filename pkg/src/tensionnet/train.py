"""Training loop with early stopping, evaluation, and the ablation runner."""
from __future__ import annotations

import numpy as np

from .config import ABLATION_FLAGS, TrainConfig
from .data import Dataset
from .errors import ConfigurationError, NumericalError
from .metrics import MetricsReport, compute_metrics
from .model import ConflictConsensusModel
from .nn import AdamOptimizer, Rng

# Table-style ablation variants: each maps a name to config switches.
ABLATION_VARIANTS: dict[str, dict] = {
    "no_fact_aux": {"no_fact_aux": True},
    "no_sentiment_aux": {"no_sentiment_aux": True},
    "no_both_aux": {"no_fact_aux": True, "no_sentiment_aux": True},
    "no_evolution": {"no_evolution": True},
    "no_tension_weighting": {"no_tension_weighting": True},
    "no_conflict": {"no_conflict": True},
    "no_consensus": {"no_consensus": True},
    "no_fact_view": {"no_fact_view": True},
    "no_sentiment_view": {"no_sentiment_view": True},
}


def effective_config_dict(config: TrainConfig) -> dict:
    """Config as actually applied: switched-off stages show their null values."""
    eff = config.to_dict()
    if config.no_evolution:
        eff["iterations"] = 0
    eff["lambda_fact"] = config.effective_lambda_fact
    eff["lambda_sent"] = config.effective_lambda_sent
    return eff


def _snapshot(params) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def _restore(params, snapshot):
    for p, data in zip(params, snapshot):
        p.data = data.copy()


def train(config: TrainConfig, dataset: Dataset) -> tuple[ConflictConsensusModel, list[dict]]:
    """Minimize the joint objective with mini-batch steps and early stopping.

    Early stopping monitors validation accuracy; the best-validation
    parameters are restored before returning. Deterministic given
    (config, seed, dataset).
    """
    config.validate()
    model = ConflictConsensusModel(config)
    history: list[dict] = []
    if config.max_epochs == 0:
        return model, history
    train_arrays = dataset.arrays("train")
    val_arrays = dataset.arrays("val")
    optimizer = AdamOptimizer(model.parameters(), learning_rate=config.learning_rate)
    shuffle_rng = Rng(config.seed).child(1000)
    n_train = len(train_arrays["labels"])

    best_acc = -1.0
    best_params = None
    epochs_since_best = 0
    for epoch in range(config.max_epochs):
        order = shuffle_rng.child(epoch).permutation(n_train)
        epoch_losses = []
        for start in range(0, n_train, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = {
                "e_T": train_arrays["e_T"][idx],
                "e_I": train_arrays["e_I"][idx],
                "e_Y": train_arrays["e_Y"][idx],
                "e_J": train_arrays["e_J"][idx],
                "labels": train_arrays["labels"][idx],
            }
            loss, parts = model.loss(batch)
            if not np.isfinite(parts["total"]):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}"
                )
            loss.backward()
            optimizer.step()
            epoch_losses.append(parts["total"])
        val_probs = model.predict_probs(val_arrays["e_T"], val_arrays["e_I"])
        val_acc = float(
            ((val_probs >= 0.5).astype(int) == val_arrays["labels"].astype(int)).mean()
        )
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(epoch_losses)),
                "val_accuracy": val_acc,
            }
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = _snapshot(model.parameters())
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.early_stop_patience:
                break
    if best_params is not None:
        _restore(model.parameters(), best_params)
    return model, history


def evaluate(model: ConflictConsensusModel, dataset: Dataset,
             split: str = "test") -> MetricsReport:
    arrays = dataset.arrays(split)
    probs = model.predict_probs(arrays["e_T"], arrays["e_I"])
    return compute_metrics(probs, arrays["labels"])


def run_ablation(config: TrainConfig, dataset: Dataset,
                 variants: list[str] | None = None,
                 split: str = "test") -> dict[str, dict]:
    """Train and evaluate the full model plus each requested variant."""
    for flag in ABLATION_FLAGS:
        if getattr(config, flag):
            raise ConfigurationError(
                f"base config for an ablation run must have {flag} unset"
            )
    if variants is None:
        variants = list(ABLATION_VARIANTS)
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ConfigurationError(f"unknown ablation variants: {unknown}")
    results: dict[str, dict] = {}
    for name, switches in [("full", {})] + [(v, ABLATION_VARIANTS[v]) for v in variants]:
        variant_config = config.replace(**switches)
        model, _ = train(variant_config, dataset)
        report = evaluate(model, dataset, split=split)
        results[name] = {
            "metrics": report.to_record(variant_config.config_hash()),
            "effective_config": effective_config_dict(variant_config),
        }
    return results


def format_ablation_table(results: dict[str, dict]) -> str:
    lines = [f"{'variant':<24} {'acc':>7} {'f1_fake':>8} {'f1_real':>8} {'auc':>7}"]
    for name, rec in results.items():
        m = rec["metrics"]
        auc = "n/a" if m["auc"] is None else f"{m['auc']:.4f}"
        lines.append(
            f"{name:<24} {m['accuracy']:>7.4f} {m['f1_fake']:>8.4f} "
            f"{m['f1_real']:>8.4f} {auc:>7}"
        )
    return "\n".join(lines)
