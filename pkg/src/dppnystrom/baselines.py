"""Competing landmark-selection strategies for Nystrom approximation.

Uniform sampling, exact and regularized leverage scores, diagonal-anchored
approximate leverage scores, residual-driven adaptive selection (full and
partial variants), and k-means centroids.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import eigh, kernel_array
from .sampling import LandmarkSet, gibbs_sample, kmeanspp_init
from .streams import as_generator

RESIDUAL_RTOL = 1e-12
TIE_RTOL = 1e-8


class RankExhaustedWarning(UserWarning):
    """Residual mass vanished before enough landmarks were selected."""


@dataclass(frozen=True)
class ScoreVector:
    """Nonnegative per-index sampling scores."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        if s.size == 0 or np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite and nonnegative")
        if s.sum() <= 0:
            raise ValueError("scores must not all be zero")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def total(self) -> float:
        return float(self.scores.sum())

    def __len__(self) -> int:
        return self.scores.size


@dataclass(frozen=True)
class CentroidLandmarks:
    """Landmark points that are cluster centroids rather than dataset rows."""

    centroids: np.ndarray
    wcss_trace: tuple[float, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or not np.all(np.isfinite(c)):
            raise ValueError("centroids must be a finite 2-d matrix")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def cardinality(self) -> int:
        return self.centroids.shape[0]


def uniform_landmarks(n: int, c: int, rng=None) -> LandmarkSet:
    """c indices uniformly without replacement."""
    if not 0 <= c <= n:
        raise ValueError("need 0 <= c <= %d, got c=%d" % (n, c))
    if c == 0:
        return LandmarkSet([], n)
    return LandmarkSet(as_generator(rng).choice(n, size=c, replace=False), n)


def _tie_blocks(w: np.ndarray) -> list[np.ndarray]:
    # Group indices of a descending spectrum into blocks of equal eigenvalues.
    scale = max(abs(float(w[0])), 1.0)
    blocks, start = [], 0
    for i in range(1, w.size + 1):
        if i == w.size or abs(w[i] - w[start]) > TIE_RTOL * scale:
            blocks.append(np.arange(start, i))
            start = i
    return blocks


def leverage_scores(K, k: int) -> ScoreVector:
    """Squared row norms of the top-k eigenvector block; scores sum to k.

    Degenerate eigenvalues are treated as one block whose leverage mass is
    shared uniformly, so the result does not depend on the arbitrary basis
    returned for a tied eigenspace.
    """
    w, U = eigh(K)
    n = w.size
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= %d, got k=%d" % (n, k))
    scores = np.zeros(n)
    slots = k
    for block in _tie_blocks(w):
        if slots == 0:
            break
        take = min(slots, block.size)
        mass = np.sum(U[:, block] ** 2, axis=1)
        scores += (take / block.size) * mass
        slots -= take
    return ScoreVector(scores)


def regularized_leverage_scores(K, gamma: float) -> ScoreVector:
    """Diagonal of K (K + N gamma I)^-1; sums to the effective dimension."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    w, U = eigh(K)
    n = w.size
    lam = np.clip(w, 0.0, None)
    weights = lam / (lam + n * gamma)
    return ScoreVector((U**2) @ weights)


def approx_leverage_scores(k_diag, kernel_rows, p: int, gamma: float = 0.0, rng=None) -> ScoreVector:
    """Leverage scores of a diagonal-anchored low-rank kernel surrogate.

    Draws ``p`` anchor columns with probability proportional to the kernel
    diagonal, builds the anchored low-rank reconstruction from those
    columns only, and returns its (regularized when ``gamma > 0``) leverage
    scores. The full kernel eigendecomposition is never formed;
    ``kernel_rows(anchor_indices)`` must return the corresponding kernel
    rows as a (p, N) block.
    """
    diag = np.asarray(k_diag, dtype=float).ravel()
    n = diag.size
    if not 1 <= p <= n:
        raise ValueError("need 1 <= p <= %d, got p=%d" % (n, p))
    anchors = sample_by_scores(ScoreVector(diag), p, rng)
    rows = np.asarray(kernel_rows(anchors.indices), dtype=float)
    if rows.shape != (p, n):
        raise ValueError("kernel_rows returned shape %r, expected (%d, %d)" % (rows.shape, p, n))
    W = rows[:, anchors.indices]
    wv, V = np.linalg.eigh(W)
    top = max(float(wv.max()), 0.0)
    keep = wv > RESIDUAL_RTOL * max(top, 1e-300)
    G = rows.T @ (V[:, keep] / np.sqrt(wv[keep]))
    U, sig, _ = np.linalg.svd(G, full_matrices=False)
    ev = sig**2
    if gamma > 0:
        weights = ev / (ev + n * gamma)
        return ScoreVector((U**2) @ weights)
    pos = ev > RESIDUAL_RTOL * max(float(ev.max()), 1e-300)
    return ScoreVector(np.sum(U[:, pos] ** 2, axis=1))


def sample_by_scores(scores, c: int, rng=None) -> LandmarkSet:
    """c distinct indices drawn sequentially proportional to remaining scores."""
    s = scores.scores if isinstance(scores, ScoreVector) else np.asarray(scores, dtype=float)
    n = s.size
    if np.any(s < 0):
        raise ValueError("scores must be nonnegative")
    if int(np.sum(s > 0)) < c:
        raise ValueError("fewer than c=%d strictly positive scores" % c)
    rng = as_generator(rng)
    w = s.astype(float).copy()
    out = []
    for _ in range(c):
        j = int(rng.choice(n, p=w / w.sum()))
        out.append(j)
        w[j] = 0.0
    return LandmarkSet(out, n)


class _AdaptiveSampler:
    """State machine for residual-driven selection, shared by the full and
    partial variants and exposed so tests can enumerate pick sequences.

    Scores start as squared kernel column norms. After each pick the chosen
    column is orthonormalized against the previously chosen ones; the full
    variant subtracts exact projections (touching the whole matrix each
    round), while the partial variant truncates the projection inner
    products to the rows of already chosen columns, keeping each round at
    O(N c) cost.
    """

    def __init__(self, K, partial: bool, max_picks: int | None = None):
        self.K = kernel_array(K)
        self.n = self.K.shape[0]
        self.partial = partial
        self.residual = np.einsum("ij,ij->j", self.K, self.K)
        self.scale = max(float(self.residual.max()), 1e-300)
        cap = self.n if max_picks is None else max_picks
        self._basis = np.empty((cap, self.n))
        self._rows = np.empty((cap, self.n))
        self._nbasis = 0
        self.chosen: list[int] = []

    def probabilities(self) -> np.ndarray | None:
        w = self.residual.copy()
        w[self.chosen] = 0.0
        w[w <= RESIDUAL_RTOL * self.scale] = 0.0
        total = w.sum()
        if total <= 0.0:
            return None
        return w / total

    def choose(self, j: int) -> None:
        self.chosen.append(int(j))
        self._rows[len(self.chosen) - 1] = self.K[j]
        q = self.K[:, j].copy()
        B = self._basis[: self._nbasis]
        if self._nbasis:
            q -= B.T @ (B @ q)
        norm = float(np.linalg.norm(q))
        if norm <= np.sqrt(RESIDUAL_RTOL * self.scale):
            self.residual[j] = 0.0
            return
        q /= norm
        self._basis[self._nbasis] = q
        self._nbasis += 1
        if self.partial:
            rows = np.asarray(self.chosen)
            ip = q[rows] @ self._rows[: len(self.chosen)]
        else:
            ip = q @ self.K
        self.residual = np.maximum(self.residual - ip**2, 0.0)


def _run_adaptive(K, c: int, rng, partial: bool) -> LandmarkSet:
    state = _AdaptiveSampler(K, partial, max_picks=c)
    n = state.n
    if not 0 <= c <= n:
        raise ValueError("need 0 <= c <= %d, got c=%d" % (n, c))
    rng = as_generator(rng)
    for _ in range(c):
        probs = state.probabilities()
        if probs is None:
            warnings.warn(
                "residual mass exhausted after %d picks; completing uniformly"
                % len(state.chosen),
                RankExhaustedWarning,
                stacklevel=3,
            )
            remaining = np.setdiff1d(np.arange(n), np.asarray(state.chosen, dtype=int))
            extra = rng.choice(remaining, size=c - len(state.chosen), replace=False)
            return LandmarkSet(state.chosen + [int(e) for e in np.atleast_1d(extra)], n)
        state.choose(int(rng.choice(n, p=probs)))
    return LandmarkSet(state.chosen, n)


def adaptive_full(K, c: int, rng=None) -> LandmarkSet:
    """Iterative selection proportional to exact residual column norms.

    Each round deflates the kernel by the chosen column, costing O(N^2) per
    round. Rank exhaustion before c picks triggers a RankExhaustedWarning
    and uniform completion.
    """
    return _run_adaptive(K, c, rng, partial=False)


def adaptive_partial(K, c: int, rng=None) -> LandmarkSet:
    """Adaptive selection with residual norms updated only against chosen
    columns, costing O(N c) per round instead of O(N^2)."""
    return _run_adaptive(K, c, rng, partial=True)


def kmeans_landmarks(X, c: int, max_iters: int = 100, rng=None) -> CentroidLandmarks:
    """Lloyd iterations from k-means++ seeds; returns the centroids.

    Empty clusters are re-seeded to the point farthest from its assigned
    centroid. The within-cluster sum of squares after each assignment is
    recorded on the result.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= c <= n:
        raise ValueError("need 1 <= c <= %d, got c=%d" % (n, c))
    rng = as_generator(rng)
    centroids = X[kmeanspp_init(X, c, rng).indices].copy()
    prev = None
    trace = []
    for _ in range(max_iters):
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), assign]
        for j in range(c):
            if not np.any(assign == j):
                far = int(np.argmax(point_d2))
                centroids[j] = X[far]
                assign[far] = j
                point_d2[far] = 0.0
        trace.append(float(point_d2.sum()))
        if prev is not None and np.array_equal(assign, prev):
            break
        for j in range(c):
            centroids[j] = X[assign == j].mean(axis=0)
        prev = assign
    return CentroidLandmarks(centroids, tuple(trace))


METHODS = (
    "kdpp",
    "unif",
    "lev",
    "reglev",
    "applev",
    "appreglev",
    "adapfull",
    "adappart",
    "kmeans",
)


def select_landmarks(
    method: str,
    K,
    c: int,
    rng=None,
    *,
    features=None,
    gamma: float = 0.1,
    gibbs_iterations: int = 3000,
    lazy: bool = True,
    leverage_rank: int | None = None,
    anchors: int | None = None,
):
    """Dispatch a landmark-selection strategy by name.

    Returns a LandmarkSet for index-based methods or CentroidLandmarks for
    ``kmeans``. The DPP chain initializes from k-means++ seeds whenever the
    feature matrix is available.
    """
    rng = as_generator(rng)
    A = kernel_array(K)
    n = A.shape[0]
    if method == "kdpp":
        init = "kmeanspp" if features is not None else "uniform"
        return gibbs_sample(
            K, c, gibbs_iterations, init=init, features=features, rng=rng, lazy=lazy
        )
    if method == "unif":
        return uniform_landmarks(n, c, rng)
    if method == "lev":
        return sample_by_scores(leverage_scores(K, leverage_rank or c), c, rng)
    if method == "reglev":
        return sample_by_scores(regularized_leverage_scores(K, gamma), c, rng)
    if method in ("applev", "appreglev"):
        p = anchors if anchors is not None else min(n, max(2 * c, c + 10))
        g = gamma if method == "appreglev" else 0.0
        scores = approx_leverage_scores(np.diag(A), lambda idx: A[idx], p, g, rng)
        return sample_by_scores(scores, c, rng)
    if method == "adapfull":
        return adaptive_full(K, c, rng)
    if method == "adappart":
        return adaptive_partial(K, c, rng)
    if method == "kmeans":
        if features is None:
            raise ValueError("kmeans landmarks need the feature matrix")
        return kmeans_landmarks(features, c, rng=rng)
    raise ValueError("unknown landmark method %r (known: %s)" % (method, ", ".join(METHODS)))
