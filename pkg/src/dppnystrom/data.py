"""Dataset ingestion, preprocessing, splitting and RBF kernel construction."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .streams import as_generator

N_FOURIER_COMPONENTS = 10
N_SUPER_CLUSTERS = 8
N_SUB_CLUSTERS = 3
SUPER_SCALE = 4.0
SUB_OFFSET = 1.5
CLUSTER_SPREAD = 0.3


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus targets, optionally with known noiseless targets.

    ``noiseless`` and ``noise_sd`` are populated by the synthetic generator,
    where the clean regression function is known exactly; loaded CSV data
    carries targets only.
    """

    features: np.ndarray
    targets: np.ndarray
    noiseless: np.ndarray | None = None
    noise_sd: float | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("features must be a nonempty 2-d matrix")
        if y.shape[0] != X.shape[0]:
            raise ValueError("targets length does not match feature rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        if self.noiseless is not None:
            z = np.asarray(self.noiseless, dtype=float).ravel()
            if z.shape[0] != X.shape[0] or not np.all(np.isfinite(z)):
                raise ValueError("noiseless targets malformed")
            object.__setattr__(self, "noiseless", z)
            if self.noise_sd is not None:
                if self.noise_sd < 0:
                    raise ValueError("noise_sd must be nonnegative")
                bound = 3.0 * self.noise_sd / np.sqrt(X.shape[0])
                drift = abs(float(np.mean(y - z)))
                if drift > bound + 1e-12:
                    raise ValueError(
                        "noise mean %.3e exceeds 3 sigma/sqrt(N) = %.3e" % (drift, bound)
                    )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def load_dataset(path, target_column) -> Dataset:
    """Load a numeric CSV with a header row.

    ``target_column`` selects the target by header name or zero-based
    column index; the remaining columns become features in file order.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError("dataset file not found: %s" % p)
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("no rows in %s" % p) from None
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError("no rows in %s" % p)
    if len(rows) < 2:
        raise ValueError("fewer than 2 rows in %s" % p)
    if isinstance(target_column, int):
        t = target_column
        if not 0 <= t < len(header):
            raise ValueError("target column index %d out of range" % t)
    else:
        try:
            t = header.index(str(target_column))
        except ValueError:
            raise ValueError("target column %r not in header %r" % (target_column, header)) from None
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError("row %d has %d cells, header has %d" % (i, len(row), len(header)))
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError("non-numeric value %r at (row %d, col %d)" % (cell, i, j)) from None
            if not np.isfinite(v):
                raise ValueError("non-finite value at (row %d, col %d)" % (i, j))
            data[i, j] = v
    features = np.delete(data, t, axis=1)
    if features.shape[1] == 0:
        raise ValueError("no feature columns besides the target")
    return Dataset(features=features, targets=data[:, t])


def standardize(ds: Dataset) -> Dataset:
    """Center each feature column and scale to unit sample std (ddof=1).

    Zero-variance columns map to all zeros. Targets are left untouched.
    """
    if ds.n < 2:
        raise ValueError("standardize needs at least 2 rows")
    mu = ds.features.mean(axis=0)
    sd = ds.features.std(axis=0, ddof=1)
    out = np.where(sd > 0, (ds.features - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    return Dataset(out, ds.targets, ds.noiseless, ds.noise_sd)


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive train/test split with a seed-determined shuffle."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly in (0, 1)")
    n_train = int(round(ds.n * train_fraction))
    if n_train < 1 or n_train > ds.n - 1:
        raise ValueError("split leaves an empty part (n=%d, fraction=%g)" % (ds.n, train_fraction))
    perm = as_generator(seed).permutation(ds.n)
    tr, te = perm[:n_train], perm[n_train:]

    def take(idx):
        z = ds.noiseless[idx] if ds.noiseless is not None else None
        return Dataset(ds.features[idx], ds.targets[idx], z, ds.noise_sd if z is not None else None)

    return take(tr), take(te)


def rbf_kernel(X, X2=None, sigma: float = 1.0) -> np.ndarray:
    """Gaussian kernel exp(-||x - x'||^2 / (2 sigma^2)).

    When ``X2`` is omitted (or is ``X`` itself) each pair is computed once,
    so the result is exactly symmetric with a unit diagonal.
    """
    if sigma <= 0:
        raise ValueError("bandwidth sigma must be positive")
    X = np.asarray(X, dtype=float)
    denom = 2.0 * sigma * sigma
    if X2 is None or X2 is X:
        d2 = squareform(pdist(X, metric="sqeuclidean"))
        return np.exp(-d2 / denom)
    X2 = np.asarray(X2, dtype=float)
    if X2.shape[1] != X.shape[1]:
        raise ValueError("feature dimensions differ: %d vs %d" % (X.shape[1], X2.shape[1]))
    return np.exp(-cdist(X, X2, metric="sqeuclidean") / denom)


def synthetic_regression(n: int, d: int, noise_sd: float, seed: int) -> Dataset:
    """Clustered features with a smooth random-cosine target and known noise.

    Features come from a seed-determined two-level Gaussian mixture (well
    separated super-clusters, each split into nearby sub-clusters), the
    multi-scale density structure typical of regression tables, so that
    landmark placement actually matters for kernel approximation. The
    clean target is a seed-determined mixture of ten cosine features with
    unit-scale weights; observed targets add isotropic Gaussian noise.
    """
    if n < 2 or d < 1 or noise_sd < 0:
        raise ValueError("need n >= 2, d >= 1, noise_sd >= 0")
    rng = as_generator(seed)
    supers = SUPER_SCALE * rng.standard_normal((N_SUPER_CLUSTERS, d))
    subs = supers[:, None, :] + SUB_OFFSET * rng.standard_normal(
        (N_SUPER_CLUSTERS, N_SUB_CLUSTERS, d)
    )
    centers = subs.reshape(N_SUPER_CLUSTERS * N_SUB_CLUSTERS, d)
    labels = rng.integers(0, centers.shape[0], n)
    X = centers[labels] + CLUSTER_SPREAD * rng.standard_normal((n, d))
    freqs = rng.standard_normal((N_FOURIER_COMPONENTS, d)) / np.sqrt(d)
    phases = rng.uniform(0.0, 2.0 * np.pi, N_FOURIER_COMPONENTS)
    weights = rng.standard_normal(N_FOURIER_COMPONENTS)
    z = np.cos(X @ freqs.T + phases) @ weights
    y = z + noise_sd * rng.standard_normal(n) if noise_sd > 0 else z.copy()
    return Dataset(X, y, z, noise_sd)
