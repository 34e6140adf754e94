"""Masked tabular data: CSV ingestion, MCAR deletion and stratified splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset or its configuration is malformed."""


class CSVParseError(DatasetError):
    def __init__(self, row: int, column: str, cell: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {cell!r} as a number")
        self.row = row
        self.column = column


@dataclass(frozen=True)
class MaskedDataset:
    """Feature matrix with an explicit observation mask.

    ``values`` holds NaN wherever ``mask`` is False. ``labels`` are dense
    class ids ``1..G``; ``class_names[g - 1]`` is the original label of id ``g``.
    """

    values: np.ndarray
    mask: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DatasetError(f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes")
        if not np.all(np.isfinite(values[mask])):
            raise DatasetError("observed entries must be finite")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DatasetError("feature_names length does not match the number of columns")
        if len(set(names)) != len(names):
            raise DatasetError("feature_names contains duplicates")
        object.__setattr__(self, "feature_names", names)

        if self.labels is not None:
            labels = np.array(self.labels, dtype=int)
            if labels.shape != (values.shape[0],):
                raise DatasetError("labels must be a vector with one entry per row")
            n_classes = len(self.class_names) or (int(labels.max()) if labels.size else 0)
            if labels.size and (labels.min() < 1 or labels.max() > n_classes):
                raise DatasetError("labels must lie in 1..G")
            if n_classes < 2:
                raise DatasetError("labelled data needs at least two classes")
            class_names = tuple(self.class_names) or tuple(str(g) for g in range(1, n_classes + 1))
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
            object.__setattr__(self, "class_names", class_names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        self._require_labels()
        return np.bincount(self.labels, minlength=self.n_classes + 1)[1:]

    def subset(self, rows) -> "MaskedDataset":
        rows = np.asarray(rows)
        return MaskedDataset(
            self.values[rows],
            self.mask[rows],
            None if self.labels is None else self.labels[rows],
            self.feature_names,
            self.class_names,
        )

    def with_mask(self, mask: np.ndarray) -> "MaskedDataset":
        """Return a copy observing only entries where both masks are set."""
        mask = np.asarray(mask, dtype=bool) & self.mask
        return MaskedDataset(self.values, mask, self.labels, self.feature_names, self.class_names)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask, self.values, fill)

    def _require_labels(self):
        if self.labels is None:
            raise DatasetError("operation requires class labels")


@dataclass(frozen=True)
class MissingSpec:
    rate: float
    protect_first_row: bool = True
    protect_first_feature: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise DatasetError(f"missing rate must lie in [0, 1), got {self.rate}")
        if self.seed < 0:
            raise DatasetError("seed must be non-negative")


def _is_missing(cell: str, missing_token: str, accept_na: bool) -> bool:
    cell = cell.strip()
    if cell == "" or cell == missing_token:
        return True
    return accept_na and cell.lower() == "na"


def load_csv(
    path,
    label_column: Optional[str] = None,
    missing_token: str = "",
    accept_na: bool = False,
) -> MaskedDataset:
    """Read a headed CSV into a :class:`MaskedDataset`.

    Cells equal to ``missing_token`` (or empty) become unobserved; with
    ``accept_na`` the token ``NA`` is also treated as missing, in any case.
    Labels are mapped to ids ``1..G`` in order of first appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file, header row expected") from None
        rows = [r for r in reader if r]

    if label_column is not None and label_column not in header:
        raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
    label_idx = header.index(label_column) if label_column is not None else None
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    feature_names = [header[j] for j in feat_idx]

    n, p = len(rows), len(feat_idx)
    values = np.full((n, p), np.nan)
    mask = np.zeros((n, p), dtype=bool)
    class_ids: dict[str, int] = {}
    labels = np.zeros(n, dtype=int) if label_idx is not None else None

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        for out_j, j in enumerate(feat_idx):
            cell = row[j]
            if _is_missing(cell, missing_token, accept_na):
                continue
            try:
                v = float(cell)
            except ValueError:
                raise CSVParseError(i + 1, header[j], cell) from None
            if not np.isfinite(v):
                raise CSVParseError(i + 1, header[j], cell)
            values[i, out_j] = v
            mask[i, out_j] = True
        if labels is not None:
            name = row[label_idx].strip()
            if _is_missing(name, missing_token, accept_na):
                raise DatasetError(f"{path}: row {i + 1} has no label")
            labels[i] = class_ids.setdefault(name, len(class_ids) + 1)

    return MaskedDataset(values, mask, labels, tuple(feature_names), tuple(class_ids))


def write_csv(data: MaskedDataset, path, label_column: str = "label", missing_token: str = "") -> None:
    """Write ``data`` so that :func:`load_csv` recovers it exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(data.feature_names)
        if data.labels is not None:
            header.append(label_column)
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) if m else missing_token for v, m in zip(data.values[i], data.mask[i])]
            if data.labels is not None:
                row.append(data.class_names[data.labels[i] - 1])
            writer.writerow(row)


def write_mask_csv(mask: np.ndarray, path, feature_names: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(feature_names)
        writer.writerows(np.asarray(mask, dtype=int).tolist())


def load_iris() -> MaskedDataset:
    """The bundled Iris data (150 x 4, three classes of 50)."""
    with resources.as_file(resources.files("wlda") / "data" / "iris.csv") as path:
        return load_csv(path, label_column="species")


def simulate_mcar(data: MaskedDataset, spec: MissingSpec) -> MaskedDataset:
    """Delete exactly ``floor(rate * pool)`` eligible entries uniformly at random.

    The pool is every entry outside the protected first row and first
    feature (when those protections are on).
    """
    eligible = np.ones(data.mask.shape, dtype=bool)
    if spec.protect_first_row:
        eligible[0, :] = False
    if spec.protect_first_feature:
        eligible[:, 0] = False
    if not np.all(data.mask[eligible]):
        raise DatasetError("entries eligible for deletion must be fully observed")

    pool = np.flatnonzero(eligible)
    n_delete = int(np.floor(spec.rate * pool.size))
    if spec.rate > 0 and pool.size == 0:
        raise DatasetError("no entries are eligible for deletion")
    rng = np.random.default_rng(spec.seed)
    deleted = rng.choice(pool, size=n_delete, replace=False)

    mask = data.mask.copy()
    mask.flat[deleted] = False
    return data.with_mask(mask)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(data: MaskedDataset, test_fraction: float, seed: int) -> tuple[MaskedDataset, MaskedDataset]:
    """Split rows into (train, test), keeping class proportions.

    Each class contributes ``round(test_fraction * n_g)`` test rows, clamped
    to ``[1, n_g - 1]`` so both parts see every class.
    """
    data._require_labels()
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_rows = []
    for g in range(1, data.n_classes + 1):
        rows = np.flatnonzero(data.labels == g)
        if rows.size < 2:
            raise DatasetError(f"class {data.class_names[g - 1]!r} has {rows.size} sample(s); at least 2 needed to split")
        n_test = min(max(_round_half_up(test_fraction * rows.size), 1), rows.size - 1)
        test_rows.append(rng.permutation(rows)[:n_test])
    test = np.sort(np.concatenate(test_rows))
    train = np.setdiff1d(np.arange(data.n), test)
    return data.subset(train), data.subset(test)


def feature_missing_rates(*masks: np.ndarray) -> np.ndarray:
    """Fraction of unobserved entries per column, pooled over all masks."""
    masks = [np.asarray(m, dtype=bool) for m in masks]
    if not masks or sum(m.shape[0] for m in masks) == 0:
        raise DatasetError("no rows to compute missing rates from")
    p = masks[0].shape[1]
    if any(m.ndim != 2 or m.shape[1] != p for m in masks):
        raise DatasetError("all masks must have the same number of columns")
    stacked = np.vstack(masks)
    return (~stacked).sum(axis=0) / stacked.shape[0]
