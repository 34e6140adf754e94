"""Benchmark harness: repeated MCAR experiments, reports and explanation artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from wlda import plotting
from wlda.baselines import ClassicalLDA, knn_impute, mean_impute, soft_impute
from wlda.dataset import MaskedDataset, MissingSpec, load_csv, simulate_mcar, stratified_split, write_mask_csv
from wlda.discriminant import WEIGHT_SCOPES, fit
from wlda.estimation import fit_params, pooled_scatter
from wlda.explain import CorrelationReport, mean_abs_shapley

log = logging.getLogger(__name__)

REPORT_SCHEMA = "wlda-experiment/1"
DEFAULT_RATES = (0.15, 0.30, 0.45, 0.60, 0.75)
METHODS = ("wlda", "mean", "knn", "soft")
METHOD_LABELS = {"wlda": "WLDA", "mean": "Mean+LDA", "knn": "KNNI+LDA", "soft": "Soft-Impute+LDA"}
SCENARIOS = ("train_only", "train_and_test")
# compared against in the literature but not implemented here
EXTERNAL_METHODS = ("MICE", "DIMV")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data: str
    label: Optional[str] = None
    rates: tuple[float, ...] = DEFAULT_RATES
    scenario: str = "train_only"
    repeats: int = 10
    methods: tuple[str, ...] = METHODS
    test_fraction: float = 0.2
    weight_scope: str = "train_only"
    seed: int = 0
    k: int = 5
    lam: Optional[float] = None
    missing_token: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.rates or any(not 0.0 <= r < 1.0 for r in self.rates):
            raise ConfigError(f"missing rates must lie in [0, 1): {self.rates}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.weight_scope not in WEIGHT_SCOPES:
            raise ConfigError(f"weight_scope must be one of {WEIGHT_SCOPES}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.seed < 0 or self.k < 1 or (self.lam is not None and self.lam < 0):
            raise ConfigError("seed must be >= 0, k >= 1 and lambda >= 0")

    def load(self) -> MaskedDataset:
        return load_csv(self.data, label_column=self.label, missing_token=self.missing_token)


@dataclass
class CellResult:
    method: str
    rate: float
    accuracies: list[float] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    @property
    def mean(self) -> Optional[float]:
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self) -> Optional[float]:
        if not self.accuracies:
            return None
        if len(self.accuracies) == 1:
            return 0.0
        return float(np.std(self.accuracies, ddof=1))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rate": self.rate,
            "mean": self.mean,
            "std": self.std,
            "accuracies": list(self.accuracies),
            "failed_repeats": list(self.failures),
        }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list[CellResult]
    metadata: dict

    def cell(self, method: str, rate: float) -> CellResult:
        for c in self.cells:
            if c.method == method and c.rate == rate:
                return c
        raise KeyError((method, rate))

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "config": asdict(self.config),
            "metadata": self.metadata,
            "results": [c.to_dict() for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        cfg = dict(d["config"])
        cfg["rates"] = tuple(cfg["rates"])
        cfg["methods"] = tuple(cfg["methods"])
        cells = [
            CellResult(r["method"], r["rate"], list(r["accuracies"]), list(r["failed_repeats"])) for r in d["results"]
        ]
        return cls(ExperimentConfig(**cfg), cells, d["metadata"])


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _rate_key(rate: float) -> int:
    return int(round(rate * 1_000_000))


def _stack(train: MaskedDataset, test: MaskedDataset) -> MaskedDataset:
    return MaskedDataset(
        np.vstack([train.values, test.values]),
        np.vstack([train.mask, test.mask]),
        None,
        train.feature_names,
    )


def impute(method: str, data: MaskedDataset, k: int = 5, lam: Optional[float] = None):
    if method == "mean":
        return mean_impute(data)
    if method == "knn":
        return knn_impute(data, k=k)
    if method == "soft":
        return soft_impute(data, lam=lam)
    raise ValueError(f"no imputer named {method!r}")


def evaluate_method(method: str, train: MaskedDataset, test: MaskedDataset, config: ExperimentConfig) -> float:
    """Fit ``method`` on ``train`` and return its accuracy on ``test``."""
    if method == "wlda":
        model = fit(train, config.weight_scope, [test.mask])
        predicted = model.predict_dataset(test)
    else:
        if test.mask.all():
            imputed = impute(method, train, config.k, config.lam)
            X_train, X_test = imputed.values, test.values
        else:
            # label-blind imputation of train and test together
            imputed = impute(method, _stack(train, test), config.k, config.lam)
            X_train, X_test = imputed.values[: train.n], imputed.values[train.n :]
        predicted = ClassicalLDA().fit(X_train, train.labels, train.n_classes).predict(X_test)
    return float(np.mean(predicted == test.labels))


def split_and_mask(data: MaskedDataset, config: ExperimentConfig, repeat: int, rate: float):
    """The (train, test) pair of one repeat at one rate, with missingness applied."""
    train, test = stratified_split(data, config.test_fraction, config.seed + repeat)
    key = _rate_key(rate)
    train = simulate_mcar(train, MissingSpec(rate, seed=derived_seed(config.seed, repeat, key, 0)))
    if config.scenario == "train_and_test":
        test = simulate_mcar(test, MissingSpec(rate, seed=derived_seed(config.seed, repeat, key, 1)))
    return train, test


def environment() -> dict:
    import matplotlib
    import scipy

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def run_experiment(config: ExperimentConfig, data: Optional[MaskedDataset] = None) -> ExperimentReport:
    if data is None:
        data = config.load()
    if data.labels is None:
        raise ConfigError("experiments need a label column")
    cells = {(m, r): CellResult(m, r) for r in config.rates for m in config.methods}
    for repeat in range(config.repeats):
        for rate in config.rates:
            train, test = split_and_mask(data, config, repeat, rate)
            for method in config.methods:
                cell = cells[(method, rate)]
                try:
                    cell.accuracies.append(evaluate_method(method, train, test, config))
                except Exception as exc:  # a failed repeat is reported, not fatal
                    log.warning("%s failed at rate %.2f, repeat %d: %s", method, rate, repeat, exc)
                    cell.failures.append({"repeat": repeat, "error": f"{type(exc).__name__}: {exc}"})
    metadata = {
        "std": "sample standard deviation over successful repeats (ddof=1); 0 for a single repeat",
        "split": "stratified; seed = base seed + repeat",
        "imputation": "train only when the test set is complete, else train and test stacked, label-blind",
        "external_methods_not_run": list(EXTERNAL_METHODS),
        "n_samples": data.n,
        "n_features": data.p,
        "class_names": list(data.class_names),
        "class_counts": data.class_counts().tolist(),
        "environment": environment(),
    }
    ordered = [cells[(m, r)] for r in config.rates for m in config.methods]
    return ExperimentReport(config, ordered, metadata)


def _cell_text(cell: CellResult) -> str:
    if cell.mean is None:
        return "failed"
    text = f"{cell.mean:.3f} ± {cell.std:.3f}"
    if cell.failures:
        text += f" ({len(cell.failures)} failed)"
    return text


def render_markdown(report: ExperimentReport) -> str:
    methods = report.config.methods
    lines = [
        "| Missing rate | " + " | ".join(METHOD_LABELS[m] for m in methods) + " |",
        "|---" * (len(methods) + 1) + "|",
    ]
    for rate in report.config.rates:
        row = [report.cell(m, rate) for m in methods]
        shown = [round(c.mean, 3) if c.mean is not None else None for c in row]
        best = max((s for s in shown if s is not None), default=None)
        texts = []
        for c, s in zip(row, shown):
            t = _cell_text(c)
            texts.append(f"**{t}**" if s is not None and s == best else t)
        lines.append(f"| {rate * 100:g}% | " + " | ".join(texts) + " |")
    return "\n".join(lines) + "\n"


def render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "rate", "mean", "std", "n_ok", "n_failed", "accuracies"])
    for c in report.cells:
        writer.writerow([
            c.method,
            repr(c.rate),
            "" if c.mean is None else repr(c.mean),
            "" if c.std is None else repr(c.std),
            len(c.accuracies),
            len(c.failures),
            ";".join(repr(a) for a in c.accuracies),
        ])
    return buf.getvalue()


RENDERERS = {"markdown_table": (render_markdown, "md"), "json": (ExperimentReport.to_json, "json"), "csv": (render_csv, "csv")}


def render_report(report: ExperimentReport, fmt: str, path) -> Path:
    if fmt not in RENDERERS:
        raise ConfigError(f"format must be one of {sorted(RENDERERS)}")
    render, _ = RENDERERS[fmt]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(report), encoding="utf-8")
    return path


def write_experiment_outputs(report: ExperimentReport, out_dir, formats: Sequence[str]) -> list[Path]:
    out_dir = Path(out_dir)
    written = [render_report(report, fmt, out_dir / f"report.{RENDERERS[fmt][1]}") for fmt in formats]
    curves = {
        METHOD_LABELS[m]: (
            [np.nan if report.cell(m, r).mean is None else report.cell(m, r).mean for r in report.config.rates],
            [np.nan if report.cell(m, r).std is None else report.cell(m, r).std for r in report.config.rates],
        )
        for m in report.config.methods
    }
    written.append(
        plotting.emit_accuracy_curves(
            report.config.rates, curves, out_dir / "accuracy.svg", title=f"Accuracy ({report.config.scenario})"
        )
    )
    return written


# --- explanation artifacts -------------------------------------------------


def estimated_covariance(method: str, data: MaskedDataset, k: int = 5, lam: Optional[float] = None) -> np.ndarray:
    """Pooled within-class covariance as each method would estimate it."""
    if method == "wlda":
        return fit_params(data).covariance
    return pooled_scatter(impute(method, data, k, lam).values, data.labels)


def boundary_rows(model, rate: float, mask=None) -> list[list]:
    """One row per class pair: rate, pair, normalised coefficients."""
    mask = np.ones(model.p, dtype=bool) if mask is None else mask
    names = model.params.class_names
    rows = []
    for g in range(1, model.n_classes + 1):
        for h in range(g + 1, model.n_classes + 1):
            b = model.boundary(g, h, mask)
            coef = [""] * model.p if b.normalized_u is None else [f"{c:.6f}" for c in b.normalized_u]
            rows.append([f"{rate:g}", names[g - 1], names[h - 1], f"{b.u0:.6f}", *coef])
    return rows


def explain_command(config: ExperimentConfig, out_dir, data: Optional[MaskedDataset] = None) -> Path:
    """Write correlation, boundary and Shapley artifacts for each missing rate."""
    if data is None:
        data = config.load()
    if data.labels is None or not data.mask.all():
        raise ConfigError("explain needs a complete labelled dataset (ground truth for the correlation diffs)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(data.feature_names)
    truth_cov = pooled_scatter(data.values, data.labels)
    methods = config.methods

    boundary_header = ["missing_rate", "class_g", "class_h", "u0", *names]
    boundary_table = []
    diff_summary = [["missing_rate", "method", "mean_abs_subtraction", "max_squared_error"]]

    for rate in config.rates:
        rdir = out_dir / f"rate_{rate:.2f}"
        rdir.mkdir(exist_ok=True)
        masked = simulate_mcar(data, MissingSpec(rate, seed=derived_seed(config.seed, _rate_key(rate), 2)))
        write_mask_csv(masked.mask, rdir / "mask.csv", names)

        corr_truth = CorrelationReport.from_covariances(truth_cov).estimated
        plotting.emit_heatmap(corr_truth, names, rdir / "corr_ground_truth.svg", "Ground truth", kind="correlation")
        _write_matrix(rdir / "corr_ground_truth.csv", corr_truth, names)
        for method in methods:
            report = CorrelationReport.from_covariances(estimated_covariance(method, masked, config.k, config.lam), truth_cov)
            label = METHOD_LABELS[method]
            plotting.emit_heatmap(report.estimated, names, rdir / f"corr_{method}.svg", label, kind="correlation")
            plotting.emit_heatmap(report.subtraction, names, rdir / f"sub_{method}.svg", f"{label}: truth - estimate", kind="signed")
            plotting.emit_heatmap(report.squared_error, names, rdir / f"sqerr_{method}.svg", f"{label}: squared error", kind="nonneg")
            _write_matrix(rdir / f"corr_{method}.csv", report.estimated, names)
            _write_matrix(rdir / f"sub_{method}.csv", report.subtraction, names)
            _write_matrix(rdir / f"sqerr_{method}.csv", report.squared_error, names)
            diff_summary.append([
                f"{rate:g}", method, repr(float(np.abs(report.subtraction).mean())), repr(float(report.squared_error.max()))
            ])

        model = fit(masked)
        boundary_table.extend(boundary_rows(model, rate))

        shap = mean_abs_shapley(model, masked)
        classes = list(model.params.class_names)
        _write_matrix(rdir / "mean_abs_shapley.csv", shap, names, row_names=classes)
        plotting.emit_bars(shap, names, rdir / "mean_abs_shapley.svg", f"Mean |Shapley|, rate {rate:g}", series=classes)

    _write_rows(out_dir / "boundaries.csv", [boundary_header, *boundary_table])
    _write_rows(out_dir / "correlation_diffs.csv", diff_summary)
    return out_dir


def _write_rows(path: Path, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _write_matrix(path: Path, M: np.ndarray, col_names, row_names=None) -> None:
    row_names = list(col_names) if row_names is None else list(row_names)
    rows = [["", *col_names]] + [[r, *(repr(float(v)) for v in row)] for r, row in zip(row_names, M)]
    _write_rows(path, rows)
