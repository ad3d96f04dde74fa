import json

import numpy as np
import pytest

from centerlab.cli import main as cli_main
from centerlab.harness import (METRICS_HEADER, ComparisonError, ConfigError,
                               DatasetSpec, ExperimentConfig, NumericAbort,
                               OptimizerSpec, Trainer, apply_overrides,
                               compare_runs, experiment_names,
                               named_experiment, run_experiment)
from centerlab.losses import LOSS_KINDS, LossConfig


def tiny_config(**loss_kw) -> ExperimentConfig:
    return ExperimentConfig(
        name="tiny",
        dataset=DatasetSpec(kind="blobs", n_per_class=10),
        loss=LossConfig(**loss_kw),
        optimizer=OptimizerSpec(lr=0.1, epochs=2, batch_mode="mini", batch_size=15),
        num_seeds=2,
        record_wall_time=False,
    )


class TestConfigSchema:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            ExperimentConfig.from_dict({"learning_rate": 0.1})

    def test_unknown_nested_key_reports_path(self):
        with pytest.raises(ConfigError, match=r"optimizer\.momentum"):
            ExperimentConfig.from_dict({"optimizer": {"momentum": 0.9}})

    def test_encoder_input_dim_must_match_dataset(self):
        with pytest.raises(ConfigError, match="encoder.dims"):
            ExperimentConfig.from_dict(
                {"dataset": {"kind": "gaussian", "dim": 3},
                 "augmentation": {"kind": "centered"}})

    def test_gaussian_data_rejects_class_augmentation(self):
        with pytest.raises(ConfigError, match="augmentation.kind"):
            ExperimentConfig.from_dict(
                {"dataset": {"kind": "gaussian", "dim": 2}})

    def test_contrastive_losses_need_class_augmentation(self):
        with pytest.raises(ConfigError, match="loss.kind"):
            ExperimentConfig.from_dict(
                {"loss": {"kind": "infonce"},
                 "augmentation": {"kind": "centered"}})

    def test_roundtrip_through_dict(self):
        cfg = tiny_config(kind="byol")
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_from_file_rejects_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            ExperimentConfig.from_file(path)


class TestOverrides:
    def test_dotted_path_override(self):
        cfg = apply_overrides(tiny_config(), {"optimizer.lr": 0.9,
                                              "loss.kind": "invariance"})
        assert cfg.optimizer.lr == 0.9
        assert cfg.loss.kind == "invariance"

    def test_unknown_override_path(self):
        with pytest.raises(ConfigError, match="optimizer.beta"):
            apply_overrides(tiny_config(), {"optimizer.beta": 0.5})

    def test_override_does_not_mutate_original(self):
        cfg = tiny_config()
        apply_overrides(cfg, {"optimizer.lr": 0.9})
        assert cfg.optimizer.lr == 0.1


class TestTrainer:
    @pytest.mark.parametrize("kind", LOSS_KINDS)
    def test_every_loss_kind_trains(self, kind):
        cfg = tiny_config(kind=kind)
        trainer = Trainer(cfg, seed=0)
        rng = np.random.default_rng(0)
        idx = np.arange(15)
        first = trainer.train_step(idx, rng)
        assert np.isfinite(first)
        assert trainer.state.step == 1

    def test_partners_stay_within_group(self):
        trainer = Trainer(tiny_config(), seed=0)
        rng = np.random.default_rng(1)
        idx = np.arange(trainer.augmented.n)
        partners = trainer._partners(idx, rng)
        np.testing.assert_array_equal(trainer.augmented.group[partners],
                                      trainer.augmented.group[idx])
        assert not np.any(partners == idx)

    def test_negatives_come_from_other_classes(self):
        trainer = Trainer(tiny_config(kind="triplet"), seed=0)
        rng = np.random.default_rng(2)
        idx = np.arange(trainer.augmented.n)
        negs = trainer._negatives(idx, rng)
        assert not np.any(trainer.augmented.labels[negs]
                          == trainer.augmented.labels[idx])

    def test_paired_variants_share_data_and_init(self):
        a = Trainer(tiny_config(kind="simsiam"), seed=3)
        b = Trainer(tiny_config(kind="simple"), seed=3)
        np.testing.assert_array_equal(a.dataset.points, b.dataset.points)
        for wa, wb in zip(a.state.encoder.weights, b.state.encoder.weights):
            np.testing.assert_array_equal(wa.values, wb.values)

    def test_diagnostics_tick_shapes(self):
        trainer = Trainer(tiny_config(), seed=0)
        report, knn, emb = trainer.diagnostics_tick(0)
        assert emb.shape == (trainer.augmented.n, 2)
        assert 0.0 <= knn <= 1.0
        assert report.delta_dist == 0.0  # first tick has no previous mean


class TestRunExperiment:
    def test_outputs_and_schema(self, tmp_path):
        cfg = tiny_config()
        result = run_experiment(cfg, tmp_path)
        assert len(result.seed_csvs) == 2
        text = result.seed_csvs[0].read_text().splitlines()
        assert text[0] == METRICS_HEADER
        # epochs=2, cadence=1 -> init tick + 2 epoch ticks
        assert len(text) == 1 + 3
        assert result.aggregate_csv.exists()
        assert all(p.exists() for p in result.checkpoints)
        agg = result.aggregate_csv.read_text().splitlines()
        assert agg[0].startswith("epoch,step,loss_mean,loss_std")

    def test_rerun_byte_identical(self, tmp_path):
        cfg = tiny_config()
        first = run_experiment(cfg, tmp_path / "a")
        second = run_experiment(cfg, tmp_path / "b")
        for p1, p2 in zip(first.seed_csvs, second.seed_csvs):
            assert p1.read_bytes() == p2.read_bytes()
        assert (first.aggregate_csv.read_bytes()
                == second.aggregate_csv.read_bytes())

    def test_numeric_abort_flags_final_row(self, tmp_path, monkeypatch):
        # inject a non-finite loss on the third step; the run must flush a
        # flagged final row and re-raise
        from centerlab import harness as H

        original = H.Trainer.train_step

        def poisoned(self, idx, rng):
            if self.state.step == 2:
                raise NumericAbort("non-finite loss injected for test")
            return original(self, idx, rng)

        monkeypatch.setattr(H.Trainer, "train_step", poisoned)
        cfg = tiny_config()
        with pytest.raises(NumericAbort):
            run_experiment(cfg, tmp_path)
        text = (tmp_path / "tiny" / "seed0.csv").read_text().splitlines()
        last = text[-1].split(",")
        assert last[1] == "-1"
        assert last[3] == "nan"

    def test_tick_callback_sees_every_tick(self, tmp_path):
        cfg = tiny_config()
        seen = []
        run_experiment(cfg, tmp_path,
                       tick_callback=lambda tr, ep, rep, emb: seen.append((tr.seed, ep)))
        assert seen == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]


class TestRegistry:
    def test_names_stable(self):
        assert experiment_names() == sorted(experiment_names())
        assert "s21-collapse-grid" in experiment_names()

    def test_all_registered_configs_validate(self):
        for name in experiment_names():
            for label, cfg in named_experiment(name):
                cfg.validate()

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            named_experiment("does-not-exist")


class TestCompareRuns:
    def _write(self, path, rows):
        path.write_text("epoch,step,loss\n"
                        + "\n".join(",".join(map(str, r)) for r in rows) + "\n")

    def test_final_stat_gt(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        self._write(a, [(0, 0, 1.0), (1, 3, 0.9)])
        self._write(b, [(0, 0, 1.0), (1, 3, 0.5)])
        res = compare_runs({"claims": [{"name": "a-beats-b", "file_a": a,
                                       "file_b": b, "column": "loss",
                                       "stat": "final", "op": "gt",
                                       "margin": 0.3}]})
        assert res == [{"name": "a-beats-b", "a": 0.9, "b": 0.5, "op": "gt",
                        "margin": 0.3, "passed": True}]

    def test_cadence_mismatch_rejected(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        self._write(a, [(0, 0, 1.0), (1, 3, 0.9)])
        self._write(b, [(0, 0, 1.0), (2, 6, 0.5)])
        with pytest.raises(ComparisonError, match="cadence"):
            compare_runs({"claims": [{"name": "x", "file_a": a, "file_b": b,
                                      "column": "loss", "stat": "final",
                                      "op": "gt"}]})

    def test_missing_fields_and_columns(self, tmp_path):
        a = tmp_path / "a.csv"
        self._write(a, [(0, 0, 1.0)])
        with pytest.raises(ComparisonError, match="missing"):
            compare_runs({"claims": [{"name": "x"}]})
        with pytest.raises(ComparisonError, match="accuracy"):
            compare_runs({"claims": [{"name": "x", "file_a": a, "file_b": a,
                                      "column": "accuracy", "stat": "final",
                                      "op": "ge"}]})

    def test_empty_claims_rejected(self):
        with pytest.raises(ComparisonError):
            compare_runs({"claims": []})


class TestCli:
    def _config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "name": "cli-tiny",
            "dataset": {"kind": "blobs", "n_per_class": 10},
            "optimizer": {"lr": 0.1, "epochs": 1, "batch_size": 15},
            "loss": {"kind": "invariance"},
            "num_seeds": 1,
            "record_wall_time": False,
        }))
        return path

    def test_list(self, capsys):
        assert cli_main(["list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == experiment_names()

    def test_run_writes_metrics(self, tmp_path, capsys):
        cfg = self._config_file(tmp_path)
        code = cli_main(["--out-dir", str(tmp_path / "runs"), "run", str(cfg)])
        assert code == 0
        assert (tmp_path / "runs" / "cli-tiny" / "seed0.csv").exists()

    def test_run_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"loss": {"kind": "vicreg"}}))
        assert cli_main(["run", str(path)]) == 2

    def test_missing_file_exits_2(self, capsys):
        assert cli_main(["run", "/nonexistent.json"]) == 2

    def test_named_with_override(self, tmp_path, capsys):
        code = cli_main(["--out-dir", str(tmp_path), "--quiet",
                         "named", "fig7-byol-momentum",
                         "--override", "optimizer.epochs=1",
                         "--override", "num_seeds=1",
                         "--override", "dataset.n_per_class=10",
                         "--override", "optimizer.batch_size=15"])
        assert code == 0
        assert (tmp_path / "fig7-byol-momentum" / "byol-momentum-0.5"
                / "seed0.csv").exists()

    def test_named_unknown_key_exits_2(self, capsys):
        assert cli_main(["named", "not-an-experiment"]) == 2

    def test_sweep_runs_grid(self, tmp_path, capsys):
        cfg = self._config_file(tmp_path)
        code = cli_main(["--out-dir", str(tmp_path / "runs"), "--quiet",
                         "sweep", str(cfg), "--grid", "optimizer.lr=0.1,0.2"])
        assert code == 0
        assert (tmp_path / "runs" / "cli-tiny-lr0.1" / "seed0.csv").exists()
        assert (tmp_path / "runs" / "cli-tiny-lr0.2" / "seed0.csv").exists()

    def test_compare_failure_exits_4(self, tmp_path, capsys):
        metrics = tmp_path / "m.csv"
        metrics.write_text("epoch,step,loss\n0,0,1.0\n")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"claims": [{
            "name": "self-gt-self", "file_a": str(metrics),
            "file_b": str(metrics), "column": "loss", "stat": "final",
            "op": "gt"}]}))
        assert cli_main(["compare", str(spec)]) == 4
        assert "FAIL" in capsys.readouterr().out
