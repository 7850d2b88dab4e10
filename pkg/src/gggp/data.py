"""CSV ingestion, NHANES-style row filtering and seeded splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

TARGET = "DXDTOPF"
FEATURES = ("RIAGENDR", "RIDAGEYR", "BMXWT", "BMXHT", "BMXLEG",
            "BMXARML", "BMXARMC", "BMXWAIST", "BMXHIP")
GENDER = "RIAGENDR"
AGE = "RIDAGEYR"
GENDER_CODES = {"male": 1.0, "female": 0.0}


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Numeric table with an explicit per-cell missing mask."""

    columns: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray
    target_column: str
    feature_columns: tuple[str, ...]

    def __post_init__(self):
        if self.target_column in self.feature_columns:
            raise DataError(f"target {self.target_column!r} is also listed as a feature")
        for name in (self.target_column, *self.feature_columns):
            if name not in self.columns:
                raise DataError(f"column {name!r} is not in the dataset")

    def __len__(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"column {name!r} is not in the dataset") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def take(self, rows) -> Dataset:
        rows = np.asarray(rows)
        return Dataset(self.columns, self.values[rows], self.missing[rows],
                       self.target_column, self.feature_columns)

    def features(self) -> np.ndarray:
        idx = [self.index(c) for c in self.feature_columns]
        return np.ascontiguousarray(self.values[:, idx])

    def target(self) -> np.ndarray:
        return self.column(self.target_column).copy()

    def with_target(self, target_column: str, feature_columns: Sequence[str] | None = None) -> Dataset:
        feats = tuple(self.feature_columns if feature_columns is None else feature_columns)
        return Dataset(self.columns, self.values, self.missing, target_column, feats)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    gender_filter: str = "all"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.gender_filter not in ("all", "male", "female"):
            raise DataError(f"gender_filter must be all, male or female, got {self.gender_filter!r}")


def load_csv(path: str | Path, target_column: str = TARGET,
             feature_columns: Sequence[str] = FEATURES,
             extra_columns: Sequence[str] = ()) -> Dataset:
    """Load the named columns; unparsable or empty cells are flagged missing.

    ``extra_columns`` are kept alongside the features (e.g. a pregnancy flag
    used only for filtering). Columns not named anywhere are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    wanted: list[str] = []
    for name in (*feature_columns, target_column, *extra_columns):
        if name not in wanted:
            wanted.append(name)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        absent = [c for c in wanted if c not in header]
        if absent:
            raise DataError(f"{path}: missing column(s) {', '.join(absent)}")
        pos = [header.index(c) for c in wanted]
        rows, flags = [], []
        for record in reader:
            if not record or all(not cell.strip() for cell in record):
                continue
            vals, miss = [], []
            for p in pos:
                cell = record[p].strip() if p < len(record) else ""
                try:
                    v = float(cell)
                    bad = not math.isfinite(v)
                except ValueError:
                    v, bad = 0.0, True
                vals.append(0.0 if bad else v)
                miss.append(bad)
            rows.append(vals)
            flags.append(miss)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(tuple(wanted), np.asarray(rows, dtype=np.float64),
                   np.asarray(flags, dtype=bool), target_column, tuple(feature_columns))


def nhanes_filter(d: Dataset, min_age: float | None = 18,
                  pregnancy_column: str | None = None) -> Dataset:
    """Drop minors, pregnant participants and rows missing any used column.

    Rows with a missing age are dropped too. A pregnancy value of 1 means
    pregnant; blank pregnancy cells are kept.
    """
    keep = np.ones(len(d), dtype=bool)
    if min_age is not None:
        age = d.index(AGE)
        # an unknown age cannot be shown to be adult
        keep &= ~d.missing[:, age] & (d.values[:, age] >= min_age)
    if pregnancy_column:
        preg = d.index(pregnancy_column)
        keep &= d.missing[:, preg] | (d.values[:, preg] != 1.0)
    used = [d.index(c) for c in (*d.feature_columns, d.target_column)]
    keep &= ~d.missing[:, used].any(axis=1)
    return d.take(np.flatnonzero(keep))


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Gender filter, then a seeded shuffle; the first ceil(f * n) rows train."""
    rows = np.arange(len(d))
    if spec.gender_filter != "all":
        g = d.column(GENDER)
        rows = rows[g == GENDER_CODES[spec.gender_filter]]
    n = rows.size
    if n == 0:
        raise DataError("no rows left to split")
    order = rows[np.random.default_rng(spec.seed).permutation(n)]
    n_train = math.ceil(spec.train_fraction * n - 1e-9)
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} rows at {spec.train_fraction} leaves one side empty")
    return d.take(order[:n_train]), d.take(order[n_train:])


def fixture_path() -> Path:
    """The bundled synthetic 200-row NHANES-shaped table."""
    return Path(str(resources.files("gggp") / "data" / "synthetic_nhanes.csv"))
