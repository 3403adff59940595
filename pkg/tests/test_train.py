import numpy as np
import pytest

from tensionnet.checkpoint import load_checkpoint, restore_optimizer, save_checkpoint
from tensionnet.config import TrainConfig, load_config
from tensionnet.data import SynthSpec, generate_synthetic, split_dataset
from tensionnet.errors import ConfigurationError, DataError
from tensionnet.explain import explain
from tensionnet.model import ConflictConsensusModel
from tensionnet.nn import AdamOptimizer
from tensionnet.train import (
    ABLATION_VARIANTS,
    effective_config_dict,
    evaluate,
    run_ablation,
    train,
)


def tiny_dataset(seed=0, n=80, conflict_strength=3.0):
    ds = generate_synthetic(
        SynthSpec(n_samples=n, d_text=8, d_image=8, K=4, p=2, seed=seed,
                  conflict_strength=conflict_strength))
    return split_dataset(ds, (0.6, 0.2, 0.2), seed=seed)


def tiny_train_config(**kw):
    defaults = dict(d_text=8, d_image=8, d=6, d_v=4, K=4, p=2, iterations=2,
                    max_epochs=3, batch_size=16, seed=0)
    defaults.update(kw)
    return TrainConfig(**defaults)


class TestTrain:
    def test_zero_epochs_returns_initialized_model(self):
        model, history = train(tiny_train_config(max_epochs=0), tiny_dataset())
        assert history == []
        fresh = ConflictConsensusModel(tiny_train_config(max_epochs=0))
        for a, b in zip(model.parameters(), fresh.parameters()):
            np.testing.assert_array_equal(a.data, b.data)

    def test_training_reduces_loss(self):
        ds = tiny_dataset()
        config = tiny_train_config(max_epochs=8)
        model, history = train(config, ds)
        assert history[-1]["train_loss"] < history[0]["train_loss"]

    def test_determinism(self):
        ds = tiny_dataset()
        config = tiny_train_config()
        a, hist_a = train(config, ds)
        b, hist_b = train(config, ds)
        assert hist_a == hist_b
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_early_stopping_cuts_epochs(self):
        ds = tiny_dataset()
        config = tiny_train_config(max_epochs=40, early_stop_patience=2)
        model, history = train(config, ds)
        assert len(history) < 40

    def test_best_validation_params_restored(self):
        ds = tiny_dataset()
        config = tiny_train_config(max_epochs=10, early_stop_patience=10)
        model, history = train(config, ds)
        best = max(h["val_accuracy"] for h in history)
        val = evaluate(model, ds, split="val")
        assert val.accuracy == pytest.approx(best, abs=1e-12)

    def test_history_schema(self):
        _, history = train(tiny_train_config(max_epochs=2,
                                             early_stop_patience=5),
                           tiny_dataset())
        assert [h["epoch"] for h in history] == [0, 1]
        for h in history:
            assert np.isfinite(h["train_loss"])
            assert 0.0 <= h["val_accuracy"] <= 1.0


class TestEvaluate:
    def test_report_counts_cover_split(self):
        ds = tiny_dataset()
        model, _ = train(tiny_train_config(), ds)
        report = evaluate(model, ds, split="test")
        assert report.tp + report.fp + report.tn + report.fn == len(ds.subset("test"))

    def test_missing_split_rejected(self):
        ds = generate_synthetic(SynthSpec(n_samples=10, d_text=8, d_image=8,
                                          K=4, p=2, seed=0))
        model = ConflictConsensusModel(tiny_train_config())
        with pytest.raises(DataError):
            evaluate(model, ds, split="test")


class TestRunAblation:
    def test_runs_requested_variants(self):
        ds = tiny_dataset()
        config = tiny_train_config(max_epochs=1)
        results = run_ablation(config, ds, variants=["no_conflict", "no_both_aux"])
        assert set(results) == {"full", "no_conflict", "no_both_aux"}
        for rec in results.values():
            assert 0.0 <= rec["metrics"]["accuracy"] <= 1.0

    def test_all_variants_by_default(self):
        ds = tiny_dataset(n=40)
        results = run_ablation(tiny_train_config(max_epochs=1), ds)
        assert set(results) == {"full"} | set(ABLATION_VARIANTS)

    def test_effective_config_reflects_switches(self):
        ds = tiny_dataset()
        config = tiny_train_config(max_epochs=1)
        results = run_ablation(config, ds, variants=["no_evolution", "no_both_aux"])
        assert results["no_evolution"]["effective_config"]["iterations"] == 0
        assert results["no_both_aux"]["effective_config"]["lambda_fact"] == 0.0
        assert results["full"]["effective_config"]["lambda_fact"] == 0.075

    def test_preflagged_base_config_rejected(self):
        ds = tiny_dataset()
        with pytest.raises(ConfigurationError):
            run_ablation(tiny_train_config(no_conflict=True), ds)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ConfigurationError):
            run_ablation(tiny_train_config(), tiny_dataset(), variants=["no_magic"])

    def test_exactly_nine_variants_defined(self):
        assert len(ABLATION_VARIANTS) == 9


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path):
        path = tmp_path / "model.ckpt"
        ds = tiny_dataset()
        model, history = train(tiny_train_config(), ds)
        save_checkpoint(str(path), model, step_count=len(history))
        loaded, doc = load_checkpoint(str(path))
        assert doc["step_count"] == len(history)
        for a, b in zip(model.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(a.data, b.data)
        arrays = ds.arrays("test")
        np.testing.assert_array_equal(
            model.predict_probs(arrays["e_T"], arrays["e_I"]),
            loaded.predict_probs(arrays["e_T"], arrays["e_I"]))

    def test_metrics_reproduce_bit_exactly(self, tmp_path):
        path = tmp_path / "model.ckpt"
        ds = tiny_dataset()
        model, _ = train(tiny_train_config(), ds)
        before = evaluate(model, ds, split="test")
        save_checkpoint(str(path), model)
        loaded, _ = load_checkpoint(str(path))
        after = evaluate(loaded, ds, split="test")
        assert before == after

    def test_optimizer_state_round_trips(self, tmp_path):
        path = tmp_path / "model.ckpt"
        config = tiny_train_config()
        model = ConflictConsensusModel(config)
        opt = AdamOptimizer(model.parameters(), learning_rate=0.01)
        batch_ds = tiny_dataset()
        batch = batch_ds.arrays("train")
        loss, _ = model.loss({k: batch[k][:8] for k in
                              ("e_T", "e_I", "e_Y", "e_J", "labels")})
        loss.backward()
        opt.step()
        save_checkpoint(str(path), model, optimizer=opt, step_count=1)
        loaded, doc = load_checkpoint(str(path))
        restored = restore_optimizer(doc, loaded)
        a, b = opt.state_dict(), restored.state_dict()
        assert a["step_count"] == b["step_count"]
        for ma, mb in zip(a["first_moment"], b["first_moment"]):
            np.testing.assert_array_equal(ma, mb)
        for va, vb in zip(a["second_moment"], b["second_moment"]):
            np.testing.assert_array_equal(va, vb)

    def test_format_guard(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(DataError):
            load_checkpoint(str(path))

    def test_config_round_trips_through_checkpoint(self, tmp_path):
        path = tmp_path / "model.ckpt"
        config = tiny_train_config(tau=2.5, no_conflict=True)
        save_checkpoint(str(path), ConflictConsensusModel(config))
        loaded, _ = load_checkpoint(str(path))
        assert loaded.config == config


class TestExplain:
    def test_report_structure(self):
        ds = tiny_dataset()
        model, _ = train(tiny_train_config(), ds)
        sample = ds.samples[0]
        report = explain(model, sample)
        assert report["id"] == sample.id
        assert report["true_label"] == sample.label
        assert (report["label"] == "fake") == (report["prob_fake"] >= 0.5)
        fact = report["fact_view"]
        assert fact["conflict_pair"] == [0, 1]
        assert fact["conflict_roles"] == ["text", "image"]
        assert len(fact["scalar_tensions"]) == 2  # one per iteration
        assert len(fact["feature_norms"]) == 3    # S^(0)..S^(2)
        assert fact["consensus_norm"] >= 0.0

    def test_homogeneous_sample_has_tiny_tension(self):
        # same embedding on both sides and equal projection heads means the
        # two features coincide, so every recorded tension is exactly zero
        config = tiny_train_config()
        model = ConflictConsensusModel(config)
        for src, dst in ((model.heads.proj_fact_text, model.heads.proj_fact_image),
                         (model.heads.proj_sent_text, model.heads.proj_sent_image)):
            for ls, ld in zip(src.layers, dst.layers):
                ld.weights.data = ls.weights.data.copy()
                ld.bias.data = ls.bias.data.copy()
        ds = tiny_dataset()
        sample = ds.samples[0]
        sample = type(sample)(id=sample.id, e_T=sample.e_T, e_I=sample.e_T.copy(),
                              e_Y=sample.e_Y, e_J=sample.e_J, label=sample.label)
        report = explain(model, sample)
        for step in report["fact_view"]["scalar_tensions"]:
            assert np.max(np.abs(step)) < 1e-20

    def test_disabled_view_reports_none(self):
        config = tiny_train_config(no_sentiment_view=True)
        model = ConflictConsensusModel(config)
        ds = tiny_dataset()
        report = explain(model, ds.samples[0])
        assert report["sentiment_view"] is None
        assert report["fact_view"] is not None

    def test_report_serializes(self):
        import json

        ds = tiny_dataset()
        model = ConflictConsensusModel(tiny_train_config())
        json.dumps(explain(model, ds.samples[3]))


class TestConfig:
    def test_defaults_validate(self):
        config = TrainConfig()
        assert config.validate() is config
        assert config.iterations == 4
        assert config.tau == 1.5
        assert config.lambda_fact == 0.075
        assert config.max_epochs == 50

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text(
            "# benchmark overrides\n"
            "d = 8\n"
            "tau = 2.0\n"
            "no_conflict = true\n"
            "learning_rate = 0.001\n")
        config = load_config(str(path))
        assert config.d == 8
        assert config.tau == 2.0
        assert config.no_conflict is True
        assert config.learning_rate == 0.001

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("momentum = 0.9\n")
        with pytest.raises(ConfigurationError):
            load_config(str(path))

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigurationError):
            load_config(str(path))

    def test_validation_errors(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(tau=0.0).validate()
        with pytest.raises(ConfigurationError):
            TrainConfig(iterations=0).validate()
        with pytest.raises(ConfigurationError):
            TrainConfig(lambda_fact=0.6, lambda_sent=0.5).validate()

    def test_config_hash_tracks_content(self):
        assert TrainConfig().config_hash() == TrainConfig().config_hash()
        assert TrainConfig().config_hash() != TrainConfig(d=8).config_hash()

    def test_effective_config_dict(self):
        config = TrainConfig(no_evolution=True, no_fact_aux=True)
        eff = effective_config_dict(config)
        assert eff["iterations"] == 0
        assert eff["lambda_fact"] == 0.0
        assert eff["lambda_sent"] == 0.075
