"""Exact and Markov-chain sampling from cardinality-constrained DPPs.

A cardinality-c DPP over a PSD kernel K puts probability proportional to
det(K[C, C]) on every size-c index subset C. This module provides the
brute-force enumeration oracle, the eigendecomposition-based exact
sampler, a lazy swap-based Gibbs chain whose stationary distribution is
that DPP, and k-means++ seeding for chain initialization.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import expit, logsumexp

from .linalg import (
    CholFactor,
    SingularMatrixError,
    as_psd_matrix,
    chol_swap_update,
    cholesky_psd,
    kernel_array,
    logdet_submatrix,
)
from .streams import as_generator

ENUMERATION_GUARD = 1_000_000
RANK_RTOL = 1e-10
CACHE_CHECK_INTERVAL = 1000


class LandmarkSet:
    """Sorted, duplicate-free subset of ground-set indices."""

    __slots__ = ("_indices",)

    def __init__(self, indices, n: int | None = None):
        arr = np.asarray(indices, dtype=np.int64).ravel()
        srt = np.sort(arr)
        if srt.size and np.any(srt[1:] == srt[:-1]):
            raise ValueError("duplicate landmark indices")
        if srt.size and srt[0] < 0:
            raise ValueError("negative landmark index")
        if n is not None and srt.size and srt[-1] >= n:
            raise ValueError("landmark index %d outside ground set of size %d" % (srt[-1], n))
        srt.setflags(write=False)
        self._indices = srt

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    @property
    def cardinality(self) -> int:
        return self._indices.size

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(i) for i in self._indices)

    def __len__(self) -> int:
        return self._indices.size

    def __iter__(self):
        return iter(self._indices)

    def __eq__(self, other) -> bool:
        if isinstance(other, LandmarkSet):
            return self.as_tuple() == other.as_tuple()
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.as_tuple())

    def __repr__(self) -> str:
        return "LandmarkSet(%s)" % (list(self.as_tuple()),)


def subset_indices(C) -> np.ndarray:
    """Index array behind a LandmarkSet, tuple, list or ndarray."""
    return np.asarray(getattr(C, "indices", C), dtype=np.int64).ravel()


class SubsetDistribution:
    """Explicit probability table over fixed-cardinality subsets."""

    def __init__(self, probabilities: dict[tuple[int, ...], float], log_normalizer: float | None = None):
        total = float(sum(probabilities.values()))
        if any(p < 0 for p in probabilities.values()):
            raise ValueError("negative subset probability")
        if abs(total - 1.0) > 1e-12:
            raise ValueError("subset probabilities sum to %.15f, not 1" % total)
        self.probabilities = probabilities
        self.log_normalizer = log_normalizer

    def prob(self, subset) -> float:
        key = tuple(int(i) for i in np.sort(subset_indices(subset)))
        return self.probabilities.get(key, 0.0)

    def expectation(self, fn) -> float:
        """Probability-weighted mean of ``fn(subset_tuple)`` over the support."""
        return float(sum(p * fn(s) for s, p in self.probabilities.items() if p > 0))

    def marginals(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for s, p in self.probabilities.items():
            out[list(s)] += p
        return out

    def __len__(self) -> int:
        return len(self.probabilities)


def enumerate_cdpp(K, c: int) -> SubsetDistribution:
    """Exact size-c DPP by enumerating every subset determinant.

    Guarded to at most one million subsets; intended as a small-instance
    oracle for samplers and bound calculators.
    """
    Km = as_psd_matrix(K)
    n = Km.n
    if not 0 <= c <= n:
        raise ValueError("cardinality c=%d outside [0, %d]" % (c, n))
    count = math.comb(n, c)
    if count > ENUMERATION_GUARD:
        raise ValueError("C(%d, %d) = %d exceeds the enumeration guard" % (n, c, count))
    subsets = list(itertools.combinations(range(n), c))
    lds = np.empty(count)
    A = Km.data
    for i, S in enumerate(subsets):
        if c == 0:
            lds[i] = 0.0
            continue
        sign, ld = np.linalg.slogdet(A[np.ix_(S, S)])
        lds[i] = ld if sign > 0 else -np.inf
    lse = float(logsumexp(lds))
    if not np.isfinite(lse):
        raise ValueError("every size-%d subset has zero determinant" % c)
    probs = np.exp(lds - lse)
    probs /= probs.sum()
    return SubsetDistribution(dict(zip(subsets, probs.tolist())), log_normalizer=lse)


def _log_esp_prefix_table(log_lam: np.ndarray, c: int) -> np.ndarray:
    # E[j, i] = log of e_j over the first i entries of the spectrum.
    n = log_lam.size
    E = np.full((c + 1, n + 1), -np.inf)
    E[0, :] = 0.0
    for i in range(1, n + 1):
        ll = log_lam[i - 1]
        E[1:, i] = np.logaddexp(E[1:, i - 1], ll + E[:-1, i - 1])
    return E


def sample_cdpp_exact(K, c: int, rng=None) -> LandmarkSet:
    """Draw one exact size-c DPP sample via the eigendecomposition route.

    Phase one picks c eigenvectors with probability proportional to the
    product of their eigenvalues (through the elementary-symmetric-
    polynomial recurrence); phase two samples points sequentially while
    projecting the selected directions out.
    """
    Km = as_psd_matrix(K)
    rng = as_generator(rng)
    n = Km.n
    if not 1 <= c <= n:
        raise ValueError("cardinality c=%d outside [1, %d]" % (c, n))
    w, U = Km.eigendecomposition()
    lam = np.clip(w, 0.0, None)
    rank = int(np.sum(lam > RANK_RTOL * max(lam[0], 1e-300)))
    if c > rank:
        raise ValueError(
            "cardinality %d exceeds kernel rank %d; every size-%d subset has zero determinant"
            % (c, rank, c)
        )
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    E = _log_esp_prefix_table(log_lam, c)
    chosen_eigs = []
    j = c
    for i in range(n, 0, -1):
        if j == 0:
            break
        if log_lam[i - 1] == -np.inf:
            continue
        log_p = log_lam[i - 1] + E[j - 1, i - 1] - E[j, i]
        if rng.random() < math.exp(min(log_p, 0.0)):
            chosen_eigs.append(i - 1)
            j -= 1
    V = U[:, chosen_eigs].copy()
    picked = []
    for step in range(c):
        p = np.sum(V * V, axis=1)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        i = int(rng.choice(n, p=p))
        picked.append(i)
        if step == c - 1:
            break
        # Eliminate the direction that can explain e_i, then reorthonormalize.
        jpiv = int(np.argmax(np.abs(V[i, :])))
        col = V[:, jpiv] / V[i, jpiv]
        V = np.delete(V, jpiv, axis=1)
        V -= np.outer(col, V[i, :])
        V, _ = np.linalg.qr(V)
    return LandmarkSet(picked, n)


class GibbsState:
    """Mutable single-chain state for the swap Gibbs sampler.

    Holds the current landmark set, a Cholesky factor of the induced
    kernel submatrix (``None`` while the submatrix is singular), the
    cached log-determinant, the step counter and the chain's own RNG
    stream. One state belongs to exactly one chain.
    """

    __slots__ = ("landmarks", "factor", "logdet", "step", "rng")

    def __init__(self, landmarks: LandmarkSet, factor: CholFactor | None, logdet: float, rng, step: int = 0):
        self.landmarks = landmarks
        self.factor = factor
        self.logdet = logdet
        self.step = step
        self.rng = rng


def _zero_jitter_factor(K, idx: np.ndarray) -> tuple[CholFactor | None, float]:
    A = kernel_array(K)
    try:
        L = np.linalg.cholesky(A[np.ix_(idx, idx)])
    except np.linalg.LinAlgError:
        return None, -np.inf
    f = CholFactor(L, 0.0, idx.copy())
    return f, f.logdet()


def init_gibbs_state(K, landmarks: LandmarkSet, rng=None) -> GibbsState:
    Km = as_psd_matrix(K)
    factor, ld = _zero_jitter_factor(Km, landmarks.indices)
    return GibbsState(landmarks, factor, ld, as_generator(rng))


def jittered_logdet(K, idx) -> float:
    """Log-determinant under the escalating jitter policy; used to order
    otherwise singular submatrices."""
    idx = subset_indices(idx)
    A = kernel_array(K)
    try:
        return cholesky_psd(A[np.ix_(idx, idx)], order=idx).logdet()
    except SingularMatrixError:
        return -np.inf


def swap_acceptance(logdet_new: float, logdet_old: float, K=None, new_idx=None, old_idx=None) -> float:
    """Gibbs acceptance det_new / (det_new + det_old) from log-determinants.

    Singular proposals against nonsingular states are rejected outright and
    vice versa accepted outright; two singular sets are ordered by their
    jittered log-determinants.
    """
    new_fin = np.isfinite(logdet_new)
    old_fin = np.isfinite(logdet_old)
    if new_fin and old_fin:
        return float(expit(logdet_new - logdet_old))
    if not new_fin and old_fin:
        return 0.0
    if new_fin and not old_fin:
        return 1.0
    if K is None:
        return 0.5
    jn = jittered_logdet(K, new_idx)
    jo = jittered_logdet(K, old_idx)
    if np.isfinite(jn) or np.isfinite(jo):
        if not np.isfinite(jn):
            return 0.0
        if not np.isfinite(jo):
            return 1.0
        return float(expit(jn - jo))
    return 0.5


def swap_probability(K, Y, y_in: int, y_out: int) -> float:
    """Acceptance probability of swapping ``y_in`` out for ``y_out``,
    computed from scratch (the determinant-oracle route)."""
    cur = subset_indices(Y)
    if y_in not in cur:
        raise ValueError("y_in=%d not in the current set" % y_in)
    if y_out in cur:
        raise ValueError("y_out=%d already in the current set" % y_out)
    new = np.sort(np.where(cur == y_in, y_out, cur))
    return swap_acceptance(
        logdet_submatrix(K, new), logdet_submatrix(K, cur), K, new, cur
    )


def gibbs_swap_prob(K, state: GibbsState, y_in: int, y_out: int) -> float:
    """Acceptance probability from a live chain state, using its cached
    factorization for the O(c^2) route."""
    cur = state.landmarks.indices
    n = kernel_array(K).shape[0]
    if y_in not in cur:
        raise ValueError("y_in=%d not in the current set" % y_in)
    if y_out in cur or not 0 <= y_out < n:
        raise ValueError("y_out=%d is not outside the current set" % y_out)
    ld_new, _ = _candidate_logdet(state, K, y_in, y_out)
    new = np.sort(np.where(cur == y_in, y_out, cur))
    return swap_acceptance(ld_new, state.logdet, K, new, cur)


def _candidate_logdet(state: GibbsState, K, y_in: int, y_out: int):
    if state.factor is not None:
        try:
            f = chol_swap_update(state.factor, K, state.landmarks, y_in, y_out)
        except SingularMatrixError:
            return -np.inf, None
        return f.logdet(), f
    idx = np.sort(np.where(state.landmarks.indices == y_in, y_out, state.landmarks.indices))
    factor, ld = _zero_jitter_factor(K, idx)
    return ld, factor


def _kth_outside(sorted_idx: np.ndarray, k: int) -> int:
    # k-th smallest ground-set element not in the sorted index array.
    val = k
    for y in sorted_idx:
        if y <= val:
            val += 1
    return val


def gibbs_step(state: GibbsState, K, lazy: bool = True) -> GibbsState:
    """Advance the chain by one (lazy) swap step, mutating ``state``.

    With laziness enabled the chain holds still with probability one half;
    otherwise it draws a uniform member/non-member pair and swaps with the
    determinant-ratio acceptance probability.
    """
    Km = as_psd_matrix(K)
    rng = state.rng
    c = state.landmarks.cardinality
    n = Km.n
    if lazy and rng.random() < 0.5:
        state.step += 1
        return state
    cur = state.landmarks.indices
    y_in = int(cur[rng.integers(c)])
    y_out = _kth_outside(cur, int(rng.integers(n - c)))
    ld_new, factor_new = _candidate_logdet(state, Km, y_in, y_out)
    new_idx = np.sort(np.where(cur == y_in, y_out, cur))
    q = swap_acceptance(ld_new, state.logdet, Km, new_idx, cur)
    if rng.random() < q:
        state.landmarks = LandmarkSet(new_idx, n)
        state.factor = factor_new
        state.logdet = ld_new
    state.step += 1
    if state.landmarks.cardinality != c:
        raise AssertionError("chain cardinality changed")
    return state


def kmeanspp_init(X, c: int, rng=None) -> LandmarkSet:
    """k-means++ style D^2-weighted seeding over feature rows.

    Returns the chosen row indices; duplicates of already chosen points
    carry zero selection weight. When every remaining point duplicates a
    chosen one, the remaining seeds fall back to uniform draws so the
    result always has c distinct indices.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= c <= n:
        raise ValueError("need 1 <= c <= %d, got c=%d" % (n, c))
    rng = as_generator(rng)
    first = int(rng.integers(n))
    chosen = [first]
    d2 = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(c - 1):
        total = float(d2.sum())
        if total <= 0.0:
            remaining = np.setdiff1d(np.arange(n), np.array(chosen))
            nxt = int(rng.choice(remaining))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return LandmarkSet(chosen, n)


def gibbs_sample(
    K,
    c: int,
    iterations: int = 3000,
    *,
    init="uniform",
    features=None,
    rng=None,
    lazy: bool = True,
) -> LandmarkSet:
    """Run the swap Gibbs chain and return the final landmark set.

    ``init`` is ``"uniform"``, ``"kmeanspp"`` (requires ``features``), or an
    explicit LandmarkSet. The output is fully determined by the seed. The
    cached log-determinant is cross-checked against a fresh factorization
    every thousand steps.
    """
    Km = as_psd_matrix(K)
    n = Km.n
    if not 1 <= c < n:
        raise ValueError("need 1 <= c < %d, got c=%d" % (n, c))
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    rng = as_generator(rng)
    if isinstance(init, LandmarkSet):
        start = init
    elif init == "uniform":
        start = LandmarkSet(rng.choice(n, size=c, replace=False), n)
    elif init == "kmeanspp":
        if features is None:
            raise ValueError("kmeanspp initialization needs the feature matrix")
        start = kmeanspp_init(features, c, rng)
    else:
        raise ValueError("unknown initializer %r" % (init,))
    state = GibbsState(start, *_zero_jitter_factor(Km, start.indices), rng=rng)
    for _ in range(iterations):
        gibbs_step(state, Km, lazy=lazy)
        if state.step % CACHE_CHECK_INTERVAL == 0 and state.factor is not None:
            fresh = logdet_submatrix(Km, state.landmarks)
            if abs(fresh - state.logdet) > 1e-8 * max(1.0, abs(fresh)):
                raise AssertionError(
                    "cached log-determinant drifted: %.12g vs %.12g" % (state.logdet, fresh)
                )
    return state.landmarks


def lazy_transition_matrix(K, c: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Exact transition matrix of the lazy Gibbs step over all size-c subsets.

    Small-instance oracle: row/column order matches the returned subset
    list. Row sums are exactly one; together with ``enumerate_cdpp`` this
    verifies stationarity and detailed balance.
    """
    Km = as_psd_matrix(K)
    n = Km.n
    count = math.comb(n, c)
    if count > 20_000:
        raise ValueError("transition matrix with %d states is too large" % count)
    states = list(itertools.combinations(range(n), c))
    index = {s: i for i, s in enumerate(states)}
    lds = np.array([logdet_submatrix(Km, s) for s in states])
    P = np.zeros((count, count))
    base = 0.5 / (c * (n - c))
    for a, S in enumerate(states):
        inside = set(S)
        off = 0.0
        for y_in in S:
            for y_out in range(n):
                if y_out in inside:
                    continue
                T = tuple(sorted(inside - {y_in} | {y_out}))
                b = index[T]
                q = swap_acceptance(lds[b], lds[a], Km, np.array(T), np.array(S))
                P[a, b] += base * q
                off += base * q
        P[a, a] = 1.0 - off
    return states, P
