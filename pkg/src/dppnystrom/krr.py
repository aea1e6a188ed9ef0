"""Kernel ridge regression, exact and Nystrom-approximated, with the
bias/variance risk decomposition and risk-ratio bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import as_psd_matrix, elementary_symmetric, kernel_array
from .nystrom import NystromApproximation, build_nystrom
from .sampling import subset_indices


@dataclass(frozen=True)
class KrrModel:
    """Fitted ridge coefficients; predictions are kernel-row dot products."""

    alpha: np.ndarray
    gamma: float
    kind: str

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).ravel()
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite coefficients")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class RiskReport:
    """Bias/variance split of the in-sample ridge risk under isotropic noise."""

    bias: float
    variance: float
    noise_variance: float

    def __post_init__(self):
        if self.bias < 0 or self.variance < 0 or self.noise_variance < 0:
            raise ValueError("risk components must be nonnegative")

    @property
    def risk(self) -> float:
        return self.bias + self.variance


def fit_exact(K, y, gamma: float) -> KrrModel:
    """Solve (K + N gamma I) alpha = y through a Cholesky factorization."""
    A = kernel_array(K)
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = A.shape[0]
    if y.size != n:
        raise ValueError("target length %d does not match kernel size %d" % (y.size, n))
    cf = scipy.linalg.cho_factor(A + n * gamma * np.eye(n), lower=True, check_finite=False)
    alpha = scipy.linalg.cho_solve(cf, y, check_finite=False)
    return KrrModel(alpha, gamma, "exact")


def fit_nystrom(approx: NystromApproximation, y, gamma: float) -> KrrModel:
    """Ridge solve against the factored approximation in O(N c^2) time.

    Uses the low-rank identity on approximation = F F^T so the dense matrix
    is never formed; a rank-zero core degenerates to the pure ridge solve
    alpha = y / (N gamma).
    """
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = approx.n
    if y.size != n:
        raise ValueError("target length %d does not match kernel size %d" % (y.size, n))
    F = approx.factor
    r = F.shape[1]
    ng = n * gamma
    if r == 0:
        return KrrModel(y / ng, gamma, "nystrom")
    G = F.T @ F + ng * np.eye(r)
    cf = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    alpha = (y - F @ scipy.linalg.cho_solve(cf, F.T @ y, check_finite=False)) / ng
    return KrrModel(alpha, gamma, "nystrom")


def predict(model: KrrModel, K_cross) -> np.ndarray:
    """Predictions K_cross @ alpha for kernel rows between new and training points."""
    Kc = np.asarray(K_cross, dtype=float)
    if Kc.ndim != 2 or Kc.shape[1] != model.n:
        raise ValueError("kernel cross block must have %d columns" % model.n)
    return Kc @ model.alpha


def predict_nystrom(approx: NystromApproximation, model: KrrModel, landmark_cross) -> np.ndarray:
    """Predictions through the approximated kernel (the Nystrom extension).

    ``landmark_cross`` holds kernel evaluations between the prediction
    points and the landmarks (M x c); passing ``approx.cross`` gives the
    in-sample predictions. Equivalent to ``predict`` with the approximated
    kernel rows, in O(M c) time.
    """
    feats = approx.extension_features(landmark_cross)
    return feats @ (approx.factor.T @ model.alpha)


def risk_decomposition(Kp, z, noise_variance: float, gamma: float) -> RiskReport:
    """Exact bias/variance of ridge predictions under isotropic noise.

    ``Kp`` is the kernel the estimator is built from (the exact kernel or a
    materialized approximation); ``z`` the noiseless targets. Bias is
    N gamma^2 z^T (Kp + N gamma I)^-2 z and variance
    sigma^2 tr(Kp^2 (Kp + N gamma I)^-2) / N, both evaluated spectrally.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    Km = as_psd_matrix(Kp)
    z = np.asarray(z, dtype=float).ravel()
    n = Km.n
    if z.size != n:
        raise ValueError("noiseless target length mismatch")
    w, U = Km.eigendecomposition()
    lam = np.clip(w, 0.0, None)
    shift = lam + n * gamma
    proj = U.T @ z
    bias = float(n * gamma**2 * np.sum((proj / shift) ** 2))
    variance = float(noise_variance / n * np.sum((lam / shift) ** 2))
    return RiskReport(bias, variance, noise_variance)


def krr_risk_ratio_bound(eigenvalues, c: int, gamma: float, n: int | None = None) -> float:
    """Bound on the determinant-weighted expected root risk ratio of the
    approximated ridge estimator: 1 + (c+1)/(N gamma) * e_{c+1}/e_c."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if n is None:
        n = lam.size
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not 1 <= c <= lam.size - 1:
        raise ValueError("need 1 <= c <= N - 1")
    table = elementary_symmetric(lam, c + 1)
    if table.log_value(c) == -np.inf:
        raise ValueError("kernel rank is below the landmark count c=%d" % c)
    return 1.0 + (c + 1) / (n * gamma) * table.ratio(c + 1, c)


def krr_bias_hp_bound(eigenvalues, c: int, gamma: float, delta: float, n: int | None = None) -> float:
    """Root bias-ratio bound holding with probability at least 1 - delta:
    1 + ((c+1) e_{c+1}/e_c + sqrt(8 c log(1/delta)) tr(K)) / (N gamma)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly in (0, 1)")
    lam = np.clip(np.asarray(eigenvalues, dtype=float).ravel(), 0.0, None)
    if n is None:
        n = lam.size
    base = krr_risk_ratio_bound(lam, c, gamma, n)
    trace = float(np.sum(lam))
    return base + math.sqrt(8.0 * c * math.log(1.0 / delta)) * trace / (n * gamma)


def nystrom_residual_trace(K, C) -> float:
    """Trace of K minus trace of its Nystrom approximation from columns C.

    Always lies in [0, tr(K)]; the empty landmark set leaves the full trace.
    """
    Km = as_psd_matrix(K)
    idx = subset_indices(C)
    if idx.size == 0:
        return Km.trace()
    from .sampling import LandmarkSet

    approx = build_nystrom(Km, LandmarkSet(idx, Km.n))
    return max(Km.trace() - approx.trace(), 0.0)


def grid_search_parameters(
    features,
    targets,
    sigmas,
    gammas,
    folds: int = 10,
    seed: int = 0,
) -> tuple[float, float, dict[tuple[float, float], float]]:
    """Small k-fold cross-validation helper for bandwidth/regularization.

    Returns the (sigma, gamma) pair with lowest mean validation MSE under
    exact ridge fits, plus the full score table.
    """
    from .data import rbf_kernel
    from .streams import as_generator

    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    n = X.shape[0]
    folds = min(folds, n)
    perm = as_generator(seed).permutation(n)
    parts = np.array_split(perm, folds)
    table: dict[tuple[float, float], float] = {}
    for sigma in sigmas:
        K_full = rbf_kernel(X, None, sigma)
        for gamma in gammas:
            errs = []
            for i in range(folds):
                val = parts[i]
                trn = np.concatenate([parts[j] for j in range(folds) if j != i])
                model = fit_exact(K_full[np.ix_(trn, trn)], y[trn], gamma)
                pred = predict(model, K_full[np.ix_(val, trn)])
                errs.append(float(np.mean((pred - y[val]) ** 2)))
            table[(float(sigma), float(gamma))] = float(np.mean(errs))
    best = min(table, key=table.get)
    return best[0], best[1], table
