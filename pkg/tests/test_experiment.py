import csv
import json
from importlib import resources

import numpy as np
import pytest

from conftest import make_dataset
from wlda.baselines import ClassicalLDA, mean_impute
from wlda.discriminant import fit
from wlda.experiment import (
    ConfigError,
    CellResult,
    ExperimentConfig,
    ExperimentReport,
    explain_command,
    render_csv,
    render_markdown,
    run_experiment,
    split_and_mask,
    write_experiment_outputs,
)

IRIS_CSV = str(resources.files("wlda") / "data" / "iris.csv")


def blobs(rng, n=40, p=3, offset=10.0):
    X = np.vstack([rng.normal(-offset, 1, size=(n, p)), rng.normal(offset, 1, size=(n, p))])
    return make_dataset(X, labels=np.repeat([1, 2], n))


def config(**kw):
    base = dict(data=IRIS_CSV, label="species", rates=(0.3,), repeats=2)
    base.update(kw)
    return ExperimentConfig(**base)


def fake_report(means_by_method, rate=0.15):
    cfg = config(rates=(rate,), methods=tuple(means_by_method), repeats=1)
    cells = [CellResult(m, rate, [v]) for m, v in means_by_method.items()]
    return ExperimentReport(cfg, cells, {})


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(rates=(1.0,)), dict(rates=()), dict(repeats=0), dict(methods=("mice",)), dict(scenario="both"), dict(test_fraction=1.0), dict(k=0)],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            config(**kw)


class TestSplitAndMask:
    def test_train_only_keeps_test_complete(self, iris):
        cfg = config(rates=(0.6,))
        for repeat in range(3):
            train, test = split_and_mask(iris, cfg, repeat, 0.6)
            assert test.mask.all()
            assert not train.mask.all()
            assert test.class_counts().tolist() == [10, 10, 10]

    def test_train_and_test_masks_both(self, iris):
        train, test = split_and_mask(iris, config(scenario="train_and_test"), 0, 0.3)
        assert not train.mask.all() and not test.mask.all()

    def test_split_shared_across_rates(self, iris):
        cfg = config()
        a, _ = split_and_mask(iris, cfg, 1, 0.15)
        b, _ = split_and_mask(iris, cfg, 1, 0.45)
        np.testing.assert_array_equal(a.values[a.mask & b.mask], b.values[a.mask & b.mask])


class TestRunExperiment:
    def test_rate_zero_wlda_equals_lda(self, iris):
        report = run_experiment(config(rates=(0.0,), repeats=3), data=iris)
        assert report.cell("wlda", 0.0).accuracies == report.cell("mean", 0.0).accuracies
        # independent check on one repeat
        train, test = split_and_mask(iris, report.config, 0, 0.0)
        lda = ClassicalLDA().fit(mean_impute(train).values, train.labels)
        assert report.cell("wlda", 0.0).accuracies[0] == np.mean(lda.predict(test.values) == test.labels)
        np.testing.assert_array_equal(fit(train).predict_dataset(test), lda.predict(test.values))

    def test_separable_blobs(self, rng):
        for scenario in ("train_only", "train_and_test"):
            report = run_experiment(config(rates=(0.15,), repeats=2, scenario=scenario), data=blobs(rng))
            for cell in report.cells:
                assert cell.accuracies == [1.0, 1.0], (scenario, cell.method)

    def test_aggregates(self, iris):
        report = run_experiment(config(repeats=3, methods=("wlda", "mean")), data=iris)
        for cell in report.cells:
            assert len(cell.accuracies) == 3
            assert cell.mean == pytest.approx(np.mean(cell.accuracies))
            assert cell.std == pytest.approx(np.std(cell.accuracies, ddof=1))

    def test_single_repeat_std_zero(self, iris):
        report = run_experiment(config(repeats=1, methods=("wlda",)), data=iris)
        assert report.cells[0].std == 0.0

    def test_failure_recorded(self, iris, monkeypatch):
        def broken(data, k=5):
            raise RuntimeError("boom")

        monkeypatch.setattr("wlda.experiment.knn_impute", broken)
        report = run_experiment(config(repeats=2, methods=("wlda", "knn")), data=iris)
        knn = report.cell("knn", 0.3)
        assert knn.mean is None and len(knn.failures) == 2
        assert "RuntimeError: boom" in knn.failures[0]["error"]
        assert len(report.cell("wlda", 0.3).accuracies) == 2
        assert "failed" in render_markdown(report)

    def test_unlabelled_rejected(self, iris):
        with pytest.raises(ConfigError):
            run_experiment(config(), data=make_dataset(iris.values))

    def test_deterministic_json(self, iris):
        cfg = config(repeats=2)
        assert run_experiment(cfg, data=iris).to_json() == run_experiment(cfg, data=iris).to_json()


class TestRendering:
    def test_one_by_one(self):
        md = render_markdown(fake_report({"wlda": 0.9}))
        body = [line for line in md.splitlines()[2:] if line]
        assert len(body) == 1 and body[0].count("|") == 3
        assert "**0.900 ± 0.000**" in body[0]

    def test_ties_all_bold(self):
        md = render_markdown(fake_report({"wlda": 0.9, "mean": 0.9, "knn": 0.8}))
        row = md.splitlines()[2]
        assert row.count("**") == 4
        assert "0.800 ± 0.000 |" in row and "**0.800" not in row

    def test_json_round_trip(self, iris):
        report = run_experiment(config(repeats=1), data=iris)
        back = ExperimentReport.from_dict(json.loads(report.to_json()))
        assert back.to_json() == report.to_json()
        assert back.config == report.config

    def test_wrong_schema(self):
        with pytest.raises(ValueError):
            ExperimentReport.from_dict({"schema": "other"})

    def test_csv(self):
        rows = list(csv.reader(render_csv(fake_report({"wlda": 0.9, "mean": 0.8})).splitlines()))
        assert rows[0][:4] == ["method", "rate", "mean", "std"]
        assert [r[0] for r in rows[1:]] == ["wlda", "mean"]

    def test_outputs(self, tmp_path, iris):
        report = run_experiment(config(repeats=1, methods=("wlda", "mean")), data=iris)
        paths = write_experiment_outputs(report, tmp_path, ["markdown_table", "json", "csv"])
        assert sorted(p.name for p in paths) == ["accuracy.svg", "report.csv", "report.json", "report.md"]


class TestExplain:
    def test_rate_zero_matches_truth(self, tmp_path, iris):
        explain_command(config(rates=(0.0,), methods=("wlda", "mean")), tmp_path, data=iris)
        sub = np.loadtxt(tmp_path / "rate_0.00" / "sub_wlda.csv", delimiter=",", skiprows=1, usecols=range(1, 5))
        assert np.abs(sub).max() <= 1e-8
        assert (tmp_path / "rate_0.00" / "corr_ground_truth.svg").exists()

    def test_boundary_rows(self, tmp_path, iris):
        rates = (0.15, 0.30, 0.45, 0.60, 0.75)
        explain_command(config(rates=rates, methods=("wlda",)), tmp_path, data=iris)
        with open(tmp_path / "boundaries.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:4] == ["missing_rate", "class_g", "class_h", "u0"]
        assert len(rows) == 1 + 15
        shap = np.loadtxt(tmp_path / "rate_0.15" / "mean_abs_shapley.csv", delimiter=",", skiprows=1, usecols=range(1, 5))
        assert shap.shape == (3, 4) and np.all(shap >= 0)

    def test_rerun_identical(self, tmp_path, iris):
        cfg = config(rates=(0.3,), methods=("wlda", "knn"))
        explain_command(cfg, tmp_path / "a", data=iris)
        explain_command(cfg, tmp_path / "b", data=iris)
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f

    def test_incomplete_data_rejected(self, tmp_path, iris):
        with pytest.raises(ConfigError):
            explain_command(config(), tmp_path, data=iris.with_mask(np.eye(150, 4, dtype=bool) | (np.arange(150) > 0)[:, None]))
