"""Standard Nystrom approximation, error metrics and error-bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import CentroidLandmarks
from .linalg import PsdMatrix, as_psd_matrix, rank_k_truncation_error
from .sampling import LandmarkSet, subset_indices
from .streams import philox_stream

DENSE_RESIDUAL_MAX_N = 6000
POWER_ITER_TOL = 1e-6
POWER_ITER_MAX = 500


class MatrixKernelBackend:
    """Kernel access through a precomputed dense matrix (column landmarks)."""

    def __init__(self, K):
        self._K = as_psd_matrix(K)

    @property
    def n(self) -> int:
        return self._K.n

    @property
    def matrix(self) -> PsdMatrix:
        return self._K

    def cross(self, landmarks) -> np.ndarray:
        if isinstance(landmarks, CentroidLandmarks):
            raise TypeError("matrix backend cannot evaluate centroid landmarks")
        return self._K.data[:, subset_indices(landmarks)]

    def core(self, landmarks) -> np.ndarray:
        idx = subset_indices(landmarks)
        return self._K.data[np.ix_(idx, idx)]


class FunctionKernelBackend:
    """Kernel evaluated on demand between data rows and landmark points.

    ``kernel(A, B)`` must return the |A| x |B| kernel block. Supports both
    index landmarks (rows of the stored features) and centroid landmarks.
    """

    def __init__(self, features, kernel):
        self.features = np.asarray(features, dtype=float)
        self.kernel = kernel

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def _points(self, landmarks) -> np.ndarray:
        if isinstance(landmarks, CentroidLandmarks):
            return landmarks.centroids
        return self.features[subset_indices(landmarks)]

    def cross(self, landmarks) -> np.ndarray:
        return self.kernel(self.features, self._points(landmarks))

    def core(self, landmarks) -> np.ndarray:
        P = self._points(landmarks)
        return self.kernel(P, P)


def rbf_backend(features, sigma: float) -> FunctionKernelBackend:
    from .data import rbf_kernel

    return FunctionKernelBackend(features, lambda A, B: rbf_kernel(A, B, sigma))


@dataclass(frozen=True)
class NystromApproximation:
    """Factored Nystrom approximation K_cross pinv(K_core) K_cross^T.

    Never materializes the full matrix unless asked: ``factor`` is an
    (N, r) block with approximation = factor @ factor.T, where r is the
    numerical rank of the core submatrix. ``core_map`` sends kernel
    columns at the landmarks to that factor space, which also extends the
    approximated kernel to out-of-sample points.
    """

    cross: np.ndarray
    core: np.ndarray
    factor: np.ndarray
    core_map: np.ndarray
    landmarks: LandmarkSet | CentroidLandmarks
    pinv_tol: float

    @property
    def n(self) -> int:
        return self.cross.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the approximation to a vector in O(N r) time."""
        return self.factor @ (self.factor.T @ v)

    def materialize(self) -> np.ndarray:
        M = self.factor @ self.factor.T
        return 0.5 * (M + M.T)

    def trace(self) -> float:
        return float(np.sum(self.factor**2))

    def extension_features(self, cross_block: np.ndarray) -> np.ndarray:
        """Map kernel evaluations against the landmarks (M x c) into the
        factor space; inner products with ``factor`` rows reproduce the
        approximated kernel between new and training points."""
        return np.asarray(cross_block, dtype=float) @ self.core_map


def build_nystrom(kernel_backend, landmarks, pinv_tol: float = 1e-12) -> NystromApproximation:
    """Assemble the factored Nystrom approximation for a landmark set.

    ``kernel_backend`` may be a backend object, a PsdMatrix, or a dense
    kernel matrix. A singular core submatrix is handled by pseudoinverse
    truncation and never raises.
    """
    if not isinstance(kernel_backend, (MatrixKernelBackend, FunctionKernelBackend)):
        kernel_backend = MatrixKernelBackend(kernel_backend)
    card = landmarks.cardinality
    if card < 1:
        raise ValueError("need at least one landmark")
    cross = np.asarray(kernel_backend.cross(landmarks), dtype=float)
    core = np.asarray(kernel_backend.core(landmarks), dtype=float)
    core = 0.5 * (core + core.T)
    w, V = np.linalg.eigh(core)
    top = max(float(w.max()), 0.0)
    keep = w > pinv_tol * max(top, 1e-300)
    core_map = V[:, keep] / np.sqrt(w[keep])
    factor = cross @ core_map
    return NystromApproximation(cross, core, factor, core_map, landmarks, pinv_tol)


@dataclass(frozen=True)
class ErrorReport:
    """Nystrom residual norms, absolute and relative to the best rank-k error."""

    absolute_frobenius: float
    absolute_spectral: float
    relative_frobenius: float
    relative_spectral: float
    reference_rank: int

    def __post_init__(self):
        vals = (
            self.absolute_frobenius,
            self.absolute_spectral,
            self.relative_frobenius,
            self.relative_spectral,
        )
        if any((not np.isfinite(v)) or v < 0 for v in vals):
            raise ValueError("error values must be finite and nonnegative")


def _residual_norms_dense(K: np.ndarray, approx: NystromApproximation) -> tuple[float, float]:
    R = K - approx.materialize()
    fro = float(np.linalg.norm(R, "fro"))
    spec = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (R + R.T)))))
    return fro, spec


def _residual_norms_factored(K: np.ndarray, approx: NystromApproximation) -> tuple[float, float]:
    # Frobenius via the trace identity; spectral via power iteration on the
    # residual operator, never materializing an N x N residual.
    F = approx.factor
    KF = K @ F
    fro2 = float(np.sum(K**2)) - 2.0 * float(np.sum(F * KF)) + float(np.sum((F.T @ F) ** 2))
    fro = math.sqrt(max(fro2, 0.0))
    rng = philox_stream(0)
    v = rng.standard_normal(K.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_ITER_MAX):
        w = K @ v - F @ (F.T @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return fro, 0.0
        new_est = nw
        v = w / nw
        if abs(new_est - est) <= POWER_ITER_TOL * max(new_est, 1e-300):
            est = new_est
            break
        est = new_est
    return fro, float(est)


def relative_error(K, approx: NystromApproximation, k: int | None = None) -> ErrorReport:
    """Residual norms of an approximation, absolute and relative to the
    best rank-k truncation error of K.

    ``k`` defaults to the number of landmarks. Raises when the reference
    rank reaches or exceeds the numerical rank of K (zero denominator).
    Below ``DENSE_RESIDUAL_MAX_N`` the residual is materialized; above it
    the Frobenius norm uses trace identities and the spectral norm power
    iteration.
    """
    Km = as_psd_matrix(K)
    if k is None:
        k = approx.landmarks.cardinality
    if not 0 <= k <= Km.n:
        raise ValueError("reference rank k=%d outside [0, %d]" % (k, Km.n))
    eigs = Km.eigenvalues
    den_fro = rank_k_truncation_error(eigs, k, "frobenius")
    den_spec = rank_k_truncation_error(eigs, k, "spectral")
    top = max(float(eigs[0]), 0.0) if eigs.size else 0.0
    if den_spec <= 1e-12 * max(top, 1e-300):
        raise ValueError("reference rank %d reaches or exceeds the matrix rank" % k)
    if Km.n <= DENSE_RESIDUAL_MAX_N:
        fro, spec = _residual_norms_dense(Km.data, approx)
    else:
        fro, spec = _residual_norms_factored(Km.data, approx)
    return ErrorReport(
        absolute_frobenius=fro,
        absolute_spectral=spec,
        relative_frobenius=fro / den_fro,
        relative_spectral=spec / den_spec,
        reference_rank=k,
    )


def expected_error_bound(eigenvalues, c: int, k: int, norm: str = "frobenius") -> float:
    """Bound on the determinant-weighted expected relative error for size-c
    landmark sets against a rank-k reference.

    Frobenius: (c+1)/(c+1-k) * sqrt(N-k); spectral: (c+1)/(c+1-k) * (N-k).
    The bound depends on the spectrum only through its length.
    """
    n = np.asarray(eigenvalues, dtype=float).ravel().size
    if not 1 <= k <= c:
        raise ValueError("need c >= k >= 1, got c=%d, k=%d" % (c, k))
    factor = (c + 1) / (c + 1 - k)
    if norm == "frobenius":
        return float(factor * math.sqrt(n - k))
    if norm == "spectral":
        return float(factor * (n - k))
    raise ValueError("norm must be 'frobenius' or 'spectral', got %r" % (norm,))


def hp_error_bound(eigenvalues, c: int, k: int, delta: float, norm: str = "frobenius") -> float:
    """Relative-error bound holding with probability at least 1 - delta.

    Adds sqrt(8 c log(1/delta)) times the error's Lipschitz factor to the
    expectation bound. Raises when the spectrum is degenerate at the
    reference rank (infinite Lipschitz factor).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly in (0, 1)")
    lam = np.clip(np.asarray(eigenvalues, dtype=float).ravel(), 0.0, None)
    lam = np.sort(lam)[::-1]
    base = expected_error_bound(lam, c, k, norm)
    if norm == "frobenius":
        tail = float(np.sum(lam[k:] ** 2))
        if tail <= 0.0:
            raise ValueError("degenerate spectrum: zero tail energy beyond rank %d" % k)
        lipschitz = math.sqrt(float(np.sum(lam**2)) / tail)
    else:
        if lam[k] <= 0.0:
            raise ValueError("degenerate spectrum: eigenvalue %d is zero" % (k + 1))
        lipschitz = float(lam[0] / lam[k])
    return base + math.sqrt(8.0 * c * math.log(1.0 / delta)) * lipschitz


def esp_ratio_bound_check(eigenvalues, c: int, k: int) -> tuple[float, float]:
    """Pair (e_{c+1}/e_c, tail-sum bound) for a nonnegative spectrum.

    The first element never exceeds the second, which is
    sum_{i>k} lambda_i / (c + 1 - k).
    """
    from .linalg import elementary_symmetric

    lam = np.clip(np.asarray(eigenvalues, dtype=float).ravel(), 0.0, None)
    n = lam.size
    if not 1 <= k <= c or c + 1 > n:
        raise ValueError("need c >= k >= 1 and c + 1 <= N")
    table = elementary_symmetric(lam, c + 1)
    if table.log_value(c) == -np.inf:
        lhs = 0.0
    else:
        lhs = table.ratio(c + 1, c)
    lam = np.sort(lam)[::-1]
    rhs = float(np.sum(lam[k:]) / (c + 1 - k))
    return lhs, rhs
