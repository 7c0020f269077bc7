"""Dataset container, normalization, shuffling, fold planning, CSV persistence.

All classifiers consume the same feature layout: one row per observation
window with columns (pdr, bpr, rss_dbm, cca_busy_ratio) and a binary label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

FEATURE_NAMES = ("pdr", "bpr", "rss_dbm", "cca_busy_ratio")
FEATURE_ARITY = len(FEATURE_NAMES)

CSV_HEADER = "pdr,bpr,rss_dbm,cca_busy_ratio,label"


@dataclass
class Dataset:
    """Ordered, labeled collection of feature vectors.

    features: (n, 4) float64 array, columns in FEATURE_NAMES order.
    labels:   (n,) array of {0, 1}.
    meta:     provenance map (generator config, seed, ...). Never affects math.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.features.ndim != 2 or self.features.shape[1] != FEATURE_ARITY:
            raise DataError(
                f"feature matrix must be (n, {FEATURE_ARITY}), got {self.features.shape}"
            )
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must be one per feature row")
        if self.features.shape[0] == 0:
            raise DataError("dataset is empty")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features must be finite")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.meta == other.meta
        )

    @property
    def samples(self) -> list:
        """Materialize rows as Sample values (see simkit.Sample)."""
        from .simkit import Sample

        return [
            Sample(
                pdr=float(r[0]),
                bpr=float(r[1]),
                rss_dbm=float(r[2]),
                cca_busy_ratio=float(r[3]),
                label=int(l),
            )
            for r, l in zip(self.features, self.labels)
        ]

    @classmethod
    def from_samples(cls, samples, meta: dict | None = None) -> "Dataset":
        feats = np.array(
            [[s.pdr, s.bpr, s.rss_dbm, s.cca_busy_ratio] for s in samples],
            dtype=np.float64,
        )
        labels = np.array([s.label for s in samples], dtype=np.uint8)
        return cls(feats, labels, meta or {})

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.features[idx], self.labels[idx], dict(self.meta))

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return len(self) - n1, n1


@dataclass(frozen=True)
class Scaler:
    """Per-feature z-score parameters fitted on training data only."""

    means: np.ndarray
    stddevs: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        feats = np.asarray(features, dtype=np.float64)
        if feats.shape[-1] != self.means.shape[0]:
            raise DataError(
                f"scaler arity {self.means.shape[0]} does not match data arity {feats.shape[-1]}"
            )
        return (feats - self.means) / self.stddevs

    def inverse_transform(self, features: np.ndarray) -> np.ndarray:
        feats = np.asarray(features, dtype=np.float64)
        if feats.shape[-1] != self.means.shape[0]:
            raise DataError("arity mismatch")
        return feats * self.stddevs + self.means

    @classmethod
    def identity(cls, arity: int = FEATURE_ARITY) -> "Scaler":
        return cls(np.zeros(arity), np.ones(arity))

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stddevs": self.stddevs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["means"], float), np.asarray(d["stddevs"], float))


def feature_vector(x) -> np.ndarray:
    """Accept a Sample or a bare length-4 vector and return float features."""
    if hasattr(x, "features") and callable(x.features):
        return np.asarray(x.features(), dtype=np.float64)
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (FEATURE_ARITY,):
        raise DataError(f"expected a length-{FEATURE_ARITY} feature vector")
    return v


def scaler_fit(d: Dataset) -> Scaler:
    """Fit z-score parameters. Zero-variance features get stddev 1."""
    means = d.features.mean(axis=0)
    stds = d.features.std(axis=0)
    stds = np.where(stds > 0.0, stds, 1.0)
    return Scaler(means, stds)


def scaler_apply(s: Scaler, d: Dataset) -> Dataset:
    return Dataset(s.transform(d.features), d.labels.copy(), dict(d.meta))


def shuffle(d: Dataset, seed: int) -> Dataset:
    """Seeded Fisher-Yates permutation of the rows; the sample multiset is preserved."""
    n = len(d)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    idx = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        idx[i], idx[j] = idx[j], idx[i]
    return d.subset(idx)


@dataclass(frozen=True)
class FoldPlan:
    """A k-fold partition: assignment[i] is the test fold of sample i."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if self.k < 2:
            raise DataError("k must be >= 2")
        if a.min() < 0 or a.max() >= self.k:
            raise DataError("fold assignment out of range")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def kfold_split(d: Dataset, k: int, seed: int, stratified: bool = True) -> FoldPlan:
    """Partition sample indices into k test folds, stratified by label by default.

    Per stratum, fold sizes differ by at most one; every index lands in
    exactly one test fold. Deterministic for a fixed seed.
    """
    n = len(d)
    if not 2 <= k <= n:
        raise DataError(f"k={k} out of range [2, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    assignment = np.empty(n, dtype=np.int64)
    if stratified:
        strata = [np.flatnonzero(d.labels == c) for c in np.unique(d.labels)]
    else:
        strata = [np.arange(n)]
    offset = 0
    for group in strata:
        perm = group[rng.permutation(len(group))]
        assignment[perm] = (np.arange(len(group)) + offset) % k
        offset += len(group)
    return FoldPlan(k, assignment)


def _format_value(x: float) -> str:
    return format(float(x), ".12g")


def csv_write(d: Dataset, path) -> None:
    """Write the fixed 5-column CSV (12 significant digits, LF newlines)."""
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for row, label in zip(d.features, d.labels):
            f.write(
                ",".join(_format_value(v) for v in row) + f",{int(label)}\n"
            )


def csv_read(path) -> Dataset:
    """Read a dataset CSV, validating header, cells, and labels.

    Errors carry the 1-based file line number of the offending row.
    """
    with open(path, "r", newline="") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}: no data (empty file)")
    if lines[0] != CSV_HEADER:
        raise DataError(f"{path}: malformed header {lines[0]!r}, expected {CSV_HEADER!r}")
    if len(lines) == 1:
        raise DataError(f"{path}: no data rows")
    n = len(lines) - 1
    feats = np.empty((n, FEATURE_ARITY), dtype=np.float64)
    labels = np.empty(n, dtype=np.uint8)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        cells = line.split(",")
        if len(cells) != FEATURE_ARITY + 1:
            raise DataError(f"{path}: line {lineno}: expected {FEATURE_ARITY + 1} cells")
        try:
            for j in range(FEATURE_ARITY):
                feats[i, j] = float(cells[j])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric cell") from None
        if cells[FEATURE_ARITY] not in ("0", "1"):
            raise DataError(
                f"{path}: line {lineno}: label {cells[FEATURE_ARITY]!r} not in {{0,1}}"
            )
        labels[i] = int(cells[FEATURE_ARITY])
    return Dataset(feats, labels, {"source": str(path)})
