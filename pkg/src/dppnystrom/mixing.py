"""Path-coupling diagnostics and empirical convergence measures for the
landmark Gibbs chain.

The contraction coefficient compares, for two chains whose states share
all but one element, the probability that a step drives them apart against
the probability that it makes them coalesce. Its worst case over shared
sets and differing elements plugs into the mixing-time bound; total
variation against the enumerated stationary distribution gives the
empirical picture.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from .linalg import as_psd_matrix, logdet_submatrix
from .sampling import (
    LandmarkSet,
    enumerate_cdpp,
    gibbs_step,
    init_gibbs_state,
    jittered_logdet,
    subset_indices,
)
from .streams import as_generator

TV_STATE_GUARD = 10_000
TV_REPLICA_FACTOR = 10


@dataclass(frozen=True)
class CouplingTerms:
    """Summed coupling probabilities for one (shared set, r, t) configuration.

    ``coalesce_outer`` sums, over elements outside both completed sets, the
    probability that both chains adopt the same outside element;
    ``coalesce_inner`` sums, over shared elements, the probability that both
    chains drop their differing element; ``divergence`` sums the absolute
    acceptance disagreement over neutral swaps.
    """

    coalesce_outer: float
    coalesce_inner: float
    divergence: float

    @property
    def alpha(self) -> float:
        return self.divergence - self.coalesce_outer - self.coalesce_inner


@dataclass(frozen=True)
class ContractionEstimate:
    """Contraction coefficient over sampled or exhaustively enumerated
    configurations, with the per-sample breakdown retained.

    ``alpha`` is the maximum of divergence - coalescence across the
    configurations seen; when ``exhaustive`` is false that maximum is a
    lower bound on the true coefficient.
    """

    alpha: float
    samples: int
    coalesce_outer_sums: np.ndarray
    coalesce_inner_sums: np.ndarray
    divergence_sums: np.ndarray
    exhaustive: bool

    def alpha_percentile(self, q: float = 95.0) -> float:
        vals = self.divergence_sums - self.coalesce_outer_sums - self.coalesce_inner_sums
        return float(np.percentile(vals, q))


@dataclass(frozen=True)
class MixingBound:
    """Mixing-time bound 2 c (N - c) log(c / eps) / (1 - alpha).

    Only defined for contraction coefficients below one; otherwise
    ``defined`` is false and ``tau`` is None.
    """

    epsilon: float
    alpha: float
    tau: float | None
    defined: bool


def _swap_logdet_batch(K: np.ndarray, kept: np.ndarray, outside: np.ndarray):
    """Log-determinants of K over ``kept`` plus each element of ``outside``.

    Factors K[kept, kept] once and reads every extension off a batched
    Schur complement; falls back to per-subset factorizations when the
    kept block is singular.
    """
    if kept.size == 0:
        with np.errstate(divide="ignore"):
            return 0.0, np.log(np.clip(K[outside, outside], 0.0, None))
    try:
        L = np.linalg.cholesky(K[np.ix_(kept, kept)])
    except np.linalg.LinAlgError:
        ld = np.array([logdet_submatrix(K, np.append(kept, u)) for u in outside])
        return -np.inf, ld
    base = float(2.0 * np.sum(np.log(np.diag(L))))
    W = scipy.linalg.solve_triangular(L, K[np.ix_(kept, outside)], lower=True, check_finite=False)
    schur = K[outside, outside] - np.sum(W * W, axis=0)
    out = np.full(outside.size, -np.inf)
    pos = schur > 0
    out[pos] = base + np.log(schur[pos])
    return base, out


def _acceptance_against(K, ld_new: np.ndarray, ld_cur: float, new_sets, cur_idx) -> np.ndarray:
    """Vectorized swap acceptance with the shared singularity policy."""
    q = np.empty(ld_new.size)
    cur_fin = np.isfinite(ld_cur)
    new_fin = np.isfinite(ld_new)
    both = new_fin & cur_fin
    q[both] = expit(ld_new[both] - ld_cur)
    q[~new_fin & cur_fin] = 0.0
    q[new_fin & ~cur_fin] = 1.0
    rest = ~new_fin & ~cur_fin
    if np.any(rest):
        jo = jittered_logdet(K, cur_idx)
        for i in np.flatnonzero(rest):
            jn = jittered_logdet(K, new_sets(i))
            if not np.isfinite(jn) and not np.isfinite(jo):
                q[i] = 0.5
            elif not np.isfinite(jn):
                q[i] = 0.0
            elif not np.isfinite(jo):
                q[i] = 1.0
            else:
                q[i] = float(expit(jn - jo))
    return q


def _chain_swap_table(K: np.ndarray, Km, X: np.ndarray, complement: np.ndarray) -> np.ndarray:
    """Q[v_pos, u_pos] = acceptance of swapping X[v_pos] out for
    complement[u_pos], from the state X."""
    ld_X = logdet_submatrix(K, X)
    Q = np.empty((X.size, complement.size))
    for vpos in range(X.size):
        kept = np.delete(X, vpos)
        _, ld_new = _swap_logdet_batch(K, kept, complement)
        Q[vpos] = _acceptance_against(
            Km, ld_new, ld_X, lambda i, kept=kept: np.append(kept, complement[i]), X
        )
    return Q


def coupling_terms(K, shared, r: int, t: int) -> CouplingTerms:
    """Coupling sums for the two chains completed from a shared (c-1)-set by
    ``r`` and ``t`` respectively."""
    Km = as_psd_matrix(K)
    A = Km.data
    S = subset_indices(shared)
    n = A.shape[0]
    if r == t or r in S or t in S or not (0 <= r < n and 0 <= t < n):
        raise ValueError("r and t must be distinct indices outside the shared set")
    R = np.sort(np.append(S, r))
    T = np.sort(np.append(S, t))
    outside = np.setdiff1d(np.arange(n), np.append(S, [r, t]))
    comp_R = np.setdiff1d(np.arange(n), R)
    comp_T = np.setdiff1d(np.arange(n), T)
    Q_R = _chain_swap_table(A, Km, R, comp_R)
    Q_T = _chain_swap_table(A, Km, T, comp_T)
    pos_r_in_R = int(np.searchsorted(R, r))
    pos_t_in_T = int(np.searchsorted(T, t))
    cols_R = np.searchsorted(comp_R, outside)
    cols_T = np.searchsorted(comp_T, outside)
    # Both chains adopt the same outside element u.
    coalesce_outer = float(
        np.sum(np.minimum(Q_R[pos_r_in_R, cols_R], Q_T[pos_t_in_T, cols_T]))
    )
    # Both chains drop a shared element: R swaps v for t, T swaps v for r.
    col_t_in_R = int(np.searchsorted(comp_R, t))
    col_r_in_T = int(np.searchsorted(comp_T, r))
    coalesce_inner = 0.0
    divergence = 0.0
    for v in S:
        vpos_R = int(np.searchsorted(R, v))
        vpos_T = int(np.searchsorted(T, v))
        coalesce_inner += min(Q_R[vpos_R, col_t_in_R], Q_T[vpos_T, col_r_in_T])
        divergence += float(
            np.sum(np.abs(Q_R[vpos_R, cols_R] - Q_T[vpos_T, cols_T]))
        )
    return CouplingTerms(coalesce_outer, coalesce_inner, divergence)


def estimate_alpha(K, c: int, n_samples: int = 1000, rng=None, exhaustive: bool = False) -> ContractionEstimate:
    """Contraction coefficient by subsampling configurations, or exactly.

    Subsampling draws uniform (shared set, r, t) triples and reports the
    maximum of divergence minus coalescence, a lower bound on the true
    coefficient; ``exhaustive=True`` sweeps every configuration instead
    (small ground sets only).
    """
    Km = as_psd_matrix(K)
    n = Km.n
    if not 1 <= c <= n - 1:
        raise ValueError("need 1 <= c <= N - 1 so the complement is nonempty")
    if not exhaustive and n_samples < 1:
        raise ValueError("n_samples must be positive")
    configs = []
    if exhaustive:
        for S in itertools.combinations(range(n), c - 1):
            rest = np.setdiff1d(np.arange(n), np.asarray(S, dtype=np.int64))
            for r, t in itertools.combinations(rest.tolist(), 2):
                configs.append((np.asarray(S, dtype=np.int64), r, t))
    else:
        rng = as_generator(rng)
        for _ in range(n_samples):
            S = np.sort(rng.choice(n, size=c - 1, replace=False)).astype(np.int64)
            rest = np.setdiff1d(np.arange(n), S)
            r, t = rng.choice(rest, size=2, replace=False)
            configs.append((S, int(r), int(t)))
    co = np.empty(len(configs))
    ci = np.empty(len(configs))
    dv = np.empty(len(configs))
    for i, (S, r, t) in enumerate(configs):
        terms = coupling_terms(Km, S, r, t)
        co[i], ci[i], dv[i] = terms.coalesce_outer, terms.coalesce_inner, terms.divergence
    alpha = float(np.max(dv - co - ci))
    return ContractionEstimate(alpha, len(configs), co, ci, dv, exhaustive)


def mixing_time_bound(alpha: float, c: int, n: int, epsilon: float) -> MixingBound:
    """Steps needed for worst-case total variation at most epsilon, when the
    contraction coefficient is below one."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly in (0, 1)")
    if alpha >= 1.0:
        return MixingBound(epsilon, alpha, None, False)
    tau = 2.0 * c * (n - c) * math.log(c / epsilon) / (1.0 - alpha)
    return MixingBound(epsilon, alpha, tau, True)


def _comb_table(n: int, c: int) -> np.ndarray:
    T = np.zeros((n + 1, c + 2), dtype=np.int64)
    T[:, 0] = 1
    for i in range(1, n + 1):
        for j in range(1, min(i, c + 1) + 1):
            T[i, j] = T[i - 1, j - 1] + T[i - 1, j]
    return T


def _rank_rows(Y: np.ndarray, comb: np.ndarray) -> np.ndarray:
    # Colexicographic subset rank, vectorized across rows of sorted Y.
    rank = np.zeros(Y.shape[0], dtype=np.int64)
    for j in range(Y.shape[1]):
        rank += comb[Y[:, j], j + 1]
    return rank


class _ReplicaEnsemble:
    """Vectorized bank of independent lazy Gibbs chains on a small ground set.

    Every subset is indexed by its colexicographic rank, and the target
    rank plus acceptance probability of every possible swap proposal are
    tabulated up front, so one step of all replicas is a pair of table
    gathers. Draws come from one counter-based stream; replicas are
    exchangeable and the run is fully determined by the seed.
    """

    def __init__(self, K, c: int, replicas: int, rng, lazy: bool = True):
        Km = as_psd_matrix(K)
        self.K = Km
        self.n = Km.n
        self.c = c
        self.count = math.comb(self.n, c)
        self.lazy = lazy
        self.rng = as_generator(rng)
        self.comb = _comb_table(self.n, c)
        A = Km.data
        self.logdets = np.empty(self.count)
        self.pi = np.zeros(self.count)
        subsets = np.empty((self.count, c), dtype=np.int64)
        dist = enumerate_cdpp(Km, c)
        for S, p in dist.probabilities.items():
            rk = sum(self.comb[s, i + 1] for i, s in enumerate(S))
            self.pi[rk] = p
            self.logdets[rk] = logdet_submatrix(A, np.asarray(S))
            subsets[rk] = S
        self._build_tables(subsets)
        self.replicas = replicas
        self.ranks: np.ndarray | None = None

    def _build_tables(self, subsets: np.ndarray) -> None:
        # target[s, pos, kout] and accept[s, pos, kout] for every state s,
        # member position pos, and complement slot kout
        M, c, n = self.count, self.c, self.n
        self.target = np.empty((M, c, n - c), dtype=np.int64)
        accept = np.empty((M, c, n - c))
        rows = np.arange(M)
        for kout in range(n - c):
            val = np.full(M, kout, dtype=np.int64)
            for j in range(c):
                val += subsets[:, j] <= val
            for pos in range(c):
                cand = subsets.copy()
                cand[rows, pos] = val
                cand.sort(axis=1)
                crk = _rank_rows(cand, self.comb)
                self.target[:, pos, kout] = crk
                ld_new = self.logdets[crk]
                ld_cur = self.logdets
                q = np.empty(M)
                new_fin = np.isfinite(ld_new)
                cur_fin = np.isfinite(ld_cur)
                both = new_fin & cur_fin
                q[both] = expit(ld_new[both] - ld_cur[both])
                q[~new_fin & cur_fin] = 0.0
                q[new_fin & ~cur_fin] = 1.0
                for i in np.flatnonzero(~new_fin & ~cur_fin):
                    jn = jittered_logdet(self.K, cand[i])
                    jo = jittered_logdet(self.K, subsets[i])
                    q[i] = 0.5 if (not np.isfinite(jn) and not np.isfinite(jo)) else float(expit(jn - jo))
                accept[:, pos, kout] = q
        self.accept = accept

    def start_from(self, Y0: LandmarkSet) -> None:
        rk = sum(self.comb[s, i + 1] for i, s in enumerate(Y0.indices))
        self.ranks = np.full(self.replicas, rk, dtype=np.int64)

    def step(self) -> None:
        R = self.replicas
        rng = self.rng
        active = rng.random(R) < 0.5 if self.lazy else np.ones(R, dtype=bool)
        pos = rng.integers(0, self.c, R)
        kout = rng.integers(0, self.n - self.c, R)
        flat = (self.ranks * self.c + pos) * (self.n - self.c) + kout
        q = self.accept.reshape(-1)[flat]
        accept = active & (rng.random(R) < q)
        self.ranks[accept] = self.target.reshape(-1)[flat[accept]]

    def tv(self) -> float:
        counts = np.bincount(self.ranks, minlength=self.count)
        return 0.5 * float(np.sum(np.abs(counts / self.replicas - self.pi)))


def tv_curve(K, c: int, steps, replicas: int, rng=None, start: LandmarkSet | None = None) -> list[tuple[int, float]]:
    """Total variation to the enumerated stationary distribution at several
    step counts along one ensemble run.

    Every replica starts from the same subset (uniformly drawn unless
    ``start`` is given), matching the worst-case deterministic-start notion
    of mixing time.
    """
    Km = as_psd_matrix(K)
    n = Km.n
    count = math.comb(n, c)
    if count > TV_STATE_GUARD:
        raise ValueError("C(%d, %d) = %d exceeds the enumeration guard" % (n, c, count))
    if replicas < TV_REPLICA_FACTOR * count:
        raise ValueError("need at least %d replicas for %d states" % (TV_REPLICA_FACTOR * count, count))
    steps = sorted(int(s) for s in steps)
    if steps and steps[0] < 0:
        raise ValueError("step counts must be nonnegative")
    rng = as_generator(rng)
    ens = _ReplicaEnsemble(Km, c, replicas, rng)
    if start is None:
        start = LandmarkSet(rng.choice(n, size=c, replace=False), n)
    ens.start_from(start)
    out = []
    done = 0
    for s in steps:
        for _ in range(s - done):
            ens.step()
        done = s
        out.append((s, ens.tv()))
    return out


def tv_to_stationary(K, c: int, t: int, replicas: int, rng=None, start: LandmarkSet | None = None) -> float:
    """Total variation between the time-t ensemble and the enumerated
    stationary distribution, from a shared uniformly drawn start."""
    return tv_curve(K, c, [t], replicas, rng=rng, start=start)[0][1]


def approximation_error_metrics(K, k: int | None = None, norms=("frobenius",)):
    """Metric callables mapping a landmark set to relative residual norms."""
    from .nystrom import build_nystrom, relative_error

    Km = as_psd_matrix(K)

    def make(norm):
        def metric(landmarks: LandmarkSet) -> float:
            report = relative_error(Km, build_nystrom(Km, landmarks), k)
            return report.relative_frobenius if norm == "frobenius" else report.relative_spectral

        return metric

    return {"rel_%s_error" % norm: make(norm) for norm in norms}


def krr_error_metrics(K_train, y_train, gamma: float, K_cross_test=None, y_test=None):
    """Metric callables for train (and optionally test) ridge MSE given a
    landmark set on the training kernel.

    Predictions go through the approximated kernel (the Nystrom
    extension), matching how the fitted system was built.
    """
    from .krr import fit_nystrom, predict_nystrom
    from .nystrom import build_nystrom

    Km = as_psd_matrix(K_train)
    y_train = np.asarray(y_train, dtype=float).ravel()

    def train_mse(landmarks: LandmarkSet) -> float:
        approx = build_nystrom(Km, landmarks)
        model = fit_nystrom(approx, y_train, gamma)
        return float(np.mean((predict_nystrom(approx, model, approx.cross) - y_train) ** 2))

    metrics = {"train_mse": train_mse}
    if K_cross_test is not None:
        Kc = np.asarray(K_cross_test, dtype=float)
        yt = np.asarray(y_test, dtype=float).ravel()

        def test_mse(landmarks: LandmarkSet) -> float:
            approx = build_nystrom(Km, landmarks)
            model = fit_nystrom(approx, y_train, gamma)
            block = Kc[:, landmarks.indices]
            return float(np.mean((predict_nystrom(approx, model, block) - yt) ** 2))

        metrics["test_mse"] = test_mse
    return metrics


def error_trace(
    K,
    c: int,
    iterations: int,
    stride: int = 1,
    metrics=None,
    rng=None,
    init="uniform",
    features=None,
    lazy: bool = True,
) -> list[tuple[int, dict[str, float]]]:
    """Run one Gibbs chain, evaluating the requested metrics every
    ``stride`` steps (step 0 included).

    ``metrics`` maps names to callables over the current landmark set and
    defaults to the relative Frobenius approximation error. Deterministic
    under a fixed seed.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    Km = as_psd_matrix(K)
    rng = as_generator(rng)
    if metrics is None:
        metrics = approximation_error_metrics(Km)
    if isinstance(init, LandmarkSet):
        start = init
    elif init == "uniform":
        start = LandmarkSet(rng.choice(Km.n, size=c, replace=False), Km.n)
    elif init == "kmeanspp":
        from .sampling import kmeanspp_init

        start = kmeanspp_init(features, c, rng)
    else:
        raise ValueError("unknown initializer %r" % (init,))
    state = init_gibbs_state(Km, start, rng)
    rows = [(0, {name: fn(state.landmarks) for name, fn in metrics.items()})]
    for step in range(1, iterations + 1):
        gibbs_step(state, Km, lazy=lazy)
        if step % stride == 0:
            rows.append((step, {name: fn(state.landmarks) for name, fn in metrics.items()}))
    return rows
