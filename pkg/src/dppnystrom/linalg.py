"""Dense PSD linear algebra used throughout the package.

Covers eigendecompositions with a cached-PSD wrapper, jitter-escalating
Cholesky factorization, log-determinants of principal submatrices,
eigenvalue-truncated pseudoinverses, elementary symmetric polynomials in
log space, and the O(c^2) Cholesky swap update that drives the landmark
Gibbs chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

SYMMETRY_RTOL = 1e-12
PSD_EIG_RTOL = 1e-10

# Jitter policy for numerically singular factorizations: decades from
# 1e-12 * trace/c up to 1e-6 * trace/c, after an initial jitter-free try.
JITTER_START_RTOL = 1e-12
JITTER_MAX_RTOL = 1e-6


class SingularMatrixError(RuntimeError):
    """A factorization pivot was nonpositive (singular or indefinite input)."""


def kernel_array(K) -> np.ndarray:
    """Return the dense ndarray behind ``K`` (PsdMatrix or array-like)."""
    if isinstance(K, PsdMatrix):
        return K.data
    return np.asarray(K, dtype=float)


def _check_symmetric(K: np.ndarray) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("expected a square 2-d matrix, got shape %r" % (K.shape,))
    if K.size == 0:
        return
    scale = float(np.abs(K).max())
    asym = float(np.abs(K - K.T).max())
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError(
            "matrix is not symmetric: max |K_ij - K_ji| = %.3e exceeds "
            "tolerance %.3e" % (asym, SYMMETRY_RTOL * scale)
        )


class PsdMatrix:
    """Immutable dense symmetric PSD matrix with a cached eigendecomposition.

    Symmetry is validated at construction; positive semidefiniteness (up to
    ``PSD_EIG_RTOL`` relative tolerance) is validated the first time the
    eigendecomposition is computed. Instances are safe to share between
    threads: the data buffer is read-only and the lazy cache fill is
    idempotent.
    """

    def __init__(self, data, *, validate: bool = True):
        K = np.array(data, dtype=float)
        if validate:
            _check_symmetric(K)
            if not np.all(np.isfinite(K)):
                raise ValueError("matrix contains non-finite entries")
        K.setflags(write=False)
        self._data = K
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._data))

    def eigendecomposition(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and matching eigenvectors, cached."""
        if self._eig is None:
            w, U = np.linalg.eigh(self._data)
            w = w[::-1].copy()
            U = U[:, ::-1].copy()
            top = max(w[0], 0.0) if w.size else 0.0
            if w.size and w[-1] < -PSD_EIG_RTOL * max(top, 1e-300):
                raise ValueError(
                    "matrix is not positive semidefinite within tolerance: "
                    "min eigenvalue %.3e vs top %.3e" % (w[-1], top)
                )
            w.setflags(write=False)
            U.setflags(write=False)
            self._eig = (w, U)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigendecomposition()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eigendecomposition()[1]

    def __repr__(self) -> str:
        return "PsdMatrix(n=%d)" % self.n


def as_psd_matrix(K) -> PsdMatrix:
    return K if isinstance(K, PsdMatrix) else PsdMatrix(K)


def eigh(K) -> tuple[np.ndarray, np.ndarray]:
    """Full symmetric eigendecomposition with eigenvalues sorted descending."""
    return as_psd_matrix(K).eigendecomposition()


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular factor of a PSD (sub)matrix plus applied jitter.

    ``lower @ lower.T`` reconstructs ``M + jitter * I`` where the rows and
    columns of ``M`` follow ``order`` (ground-set indices; an identity
    range for standalone matrices).
    """

    lower: np.ndarray
    jitter: float
    order: np.ndarray

    @property
    def cardinality(self) -> int:
        return self.lower.shape[0]

    def logdet(self) -> float:
        if self.cardinality == 0:
            return 0.0
        return float(2.0 * np.sum(np.log(np.diag(self.lower))))


def cholesky_psd(M, *, order=None) -> CholFactor:
    """Cholesky-factor a PSD matrix, escalating jitter for singular inputs.

    Tries a jitter-free factorization first, then jitters in decades from
    ``1e-12 * trace(M)/c`` up to ``1e-6 * trace(M)/c``. Raises
    ``SingularMatrixError`` when even the maximum jitter fails, which
    signals an indefinite input.
    """
    A = kernel_array(M)
    _check_symmetric(A)
    c = A.shape[0]
    if order is None:
        order = np.arange(c, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    if c == 0:
        return CholFactor(np.zeros((0, 0)), 0.0, order)
    base = float(np.trace(A)) / c
    jitters = [0.0]
    if base > 0:
        j = JITTER_START_RTOL * base
        while j <= JITTER_MAX_RTOL * base * (1 + 1e-9):
            jitters.append(j)
            j *= 10.0
    for jit in jitters:
        try:
            L = np.linalg.cholesky(A + jit * np.eye(c) if jit else A)
        except np.linalg.LinAlgError:
            continue
        return CholFactor(L, jit, order)
    raise SingularMatrixError(
        "Cholesky failed even at maximum jitter %.3e; input looks indefinite"
        % (jitters[-1] if len(jitters) > 1 else 0.0)
    )


def logdet_submatrix(K, C) -> float:
    """log det of the principal submatrix K[C, C]; -inf when singular.

    The empty set returns 0 (determinant of the empty matrix is 1).
    """
    A = kernel_array(K)
    idx = np.asarray(getattr(C, "indices", C), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    if idx.min() < 0 or idx.max() >= A.shape[0]:
        raise IndexError("submatrix index out of range")
    try:
        L = np.linalg.cholesky(A[np.ix_(idx, idx)])
    except np.linalg.LinAlgError:
        return -np.inf
    return float(2.0 * np.sum(np.log(np.diag(L))))


def pinv_psd(M, rel_tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below ``rel_tol`` times the largest eigenvalue are treated
    as zero and inverted to zero.
    """
    A = kernel_array(M)
    _check_symmetric(A)
    if A.shape[0] == 0:
        return A.copy()
    w, U = np.linalg.eigh(A)
    top = max(float(w.max()), 0.0)
    inv = np.where(w > rel_tol * top, 1.0, 0.0)
    nz = w > rel_tol * top
    inv[nz] = 1.0 / w[nz]
    inv[~nz] = 0.0
    P = (U * inv) @ U.T
    return 0.5 * (P + P.T)


class ESPTable:
    """Elementary symmetric polynomials e_0..e_c of a nonnegative spectrum.

    Values are carried in log space so that spectra with huge entries or
    large ground sets never overflow. ``signs[j]`` is 1 where e_j > 0 and
    0 where e_j vanishes (j beyond the rank).
    """

    def __init__(self, log_values: np.ndarray):
        lv = np.asarray(log_values, dtype=float)
        lv.setflags(write=False)
        self.log_values = lv

    @property
    def order(self) -> int:
        return self.log_values.size - 1

    @property
    def signs(self) -> np.ndarray:
        return (self.log_values > -np.inf).astype(np.int8)

    def log_value(self, j: int) -> float:
        return float(self.log_values[j])

    def value(self, j: int) -> float:
        return float(np.exp(self.log_values[j]))

    def ratio(self, num: int, den: int) -> float:
        """e_num / e_den, computed stably in log space."""
        ld = self.log_values[den]
        if ld == -np.inf:
            raise ZeroDivisionError("elementary symmetric polynomial e_%d is zero" % den)
        ln = self.log_values[num]
        if ln == -np.inf:
            return 0.0
        return float(np.exp(ln - ld))

    def __repr__(self) -> str:
        return "ESPTable(order=%d)" % self.order


def elementary_symmetric(eigenvalues, c: int) -> ESPTable:
    """Compute e_0..e_c of the (clipped-at-zero) eigenvalues.

    Uses the stable two-term recurrence over eigenvalues, carried in log
    space. Negative eigenvalues within round-off are clipped to zero first
    so downstream probabilities can never go negative.
    """
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    n = lam.size
    if not 0 <= c <= n:
        raise ValueError("order c=%d outside [0, %d]" % (c, n))
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    log_e = np.full(c + 1, -np.inf)
    log_e[0] = 0.0
    for ll in log_lam:
        if ll == -np.inf:
            continue
        if c >= 1:
            log_e[1:] = np.logaddexp(log_e[1:], ll + log_e[:-1])
    return ESPTable(log_e)


def rank_k_truncation_error(eigenvalues, k: int, norm: str = "frobenius") -> float:
    """Best rank-k approximation error of a PSD spectrum in the given norm."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float).ravel(), 0.0, None)
    n = lam.size
    if not 0 <= k <= n:
        raise ValueError("rank k=%d outside [0, %d]" % (k, n))
    lam = np.sort(lam)[::-1]
    tail = lam[k:]
    if norm == "frobenius":
        return float(np.sqrt(np.sum(tail**2)))
    if norm == "spectral":
        return float(tail[0]) if tail.size else 0.0
    raise ValueError("norm must be 'frobenius' or 'spectral', got %r" % (norm,))


def _chol_update_inplace(L: np.ndarray, v: np.ndarray) -> None:
    # Rank-one update L L^T + v v^T via Givens-style sweeps; destroys v.
    m = L.shape[0]
    for i in range(m):
        r = math.hypot(L[i, i], v[i])
        c = r / L[i, i]
        s = v[i] / L[i, i]
        L[i, i] = r
        if i + 1 < m:
            L[i + 1 :, i] = (L[i + 1 :, i] + s * v[i + 1 :]) / c
            v[i + 1 :] = c * v[i + 1 :] - s * L[i + 1 :, i]


def chol_drop_index(f: CholFactor, position: int) -> CholFactor:
    """Remove one index from a factor in O((c - position)^2) time.

    Deleting row/column ``position`` of the factored matrix turns into a
    rank-one update of the trailing block of the factor.
    """
    c = f.cardinality
    if not 0 <= position < c:
        raise IndexError("position %d outside factor of size %d" % (position, c))
    L = np.delete(np.delete(f.lower, position, axis=0), position, axis=1)
    v = f.lower[position + 1 :, position].copy()
    if v.size:
        _chol_update_inplace(L[position:, position:], v)
    return CholFactor(L, f.jitter, np.delete(f.order, position))


def chol_append_index(f: CholFactor, K, new_index: int) -> CholFactor:
    """Append one ground-set index to a factor in O(c^2) time."""
    A = kernel_array(K)
    c = f.cardinality
    k_new = A[f.order, new_index] if c else np.zeros(0)
    if c:
        w = scipy.linalg.solve_triangular(f.lower, k_new, lower=True, check_finite=False)
    else:
        w = np.zeros(0)
    d = A[new_index, new_index] + f.jitter - float(w @ w)
    if d <= 0.0:
        raise SingularMatrixError(
            "appending index %d makes the factored submatrix singular" % new_index
        )
    L = np.zeros((c + 1, c + 1))
    L[:c, :c] = f.lower
    L[c, :c] = w
    L[c, c] = math.sqrt(d)
    return CholFactor(L, f.jitter, np.append(f.order, np.int64(new_index)))


def chol_swap_update(f: CholFactor, K, Y, y_in: int, y_out: int) -> CholFactor:
    """Refactor K over Y with ``y_in`` replaced by ``y_out`` in O(c^2) time.

    ``y_in`` must currently be in the factored set and ``y_out`` outside it.
    Raises ``SingularMatrixError`` when the swapped submatrix is singular,
    which callers translate into a -inf log-determinant.
    """
    positions = np.flatnonzero(f.order == y_in)
    if positions.size != 1:
        raise ValueError("y_in=%d is not in the factored set" % y_in)
    if np.any(f.order == y_out):
        raise ValueError("y_out=%d is already in the factored set" % y_out)
    dropped = chol_drop_index(f, int(positions[0]))
    return chol_append_index(dropped, K, y_out)
