"""Shared test fixtures: random PSD instances and small brute-force oracles."""

import itertools
import math

import numpy as np


def random_psd(rng, n, rank=None, scale=1.0):
    """Dense random PSD matrix from a Gaussian factor; full rank by default."""
    r = rank if rank is not None else n
    A = rng.standard_normal((n, r))
    return scale * (A @ A.T)


def random_rbf_kernel(rng, n, d=3, sigma=None):
    X = rng.standard_normal((n, d))
    s = sigma if sigma is not None else math.sqrt(d)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2 * s * s)), X


def esp_bruteforce(lam, c):
    """Sum over all c-subsets of eigenvalue products (enumeration oracle)."""
    lam = np.asarray(lam, dtype=float)
    if c == 0:
        return 1.0
    return float(sum(math.prod(lam[list(S)]) for S in itertools.combinations(range(lam.size), c)))


def nystrom_dense(K, idx):
    """Materialized Nystrom approximation via the dense pseudoinverse."""
    idx = np.asarray(idx, dtype=int)
    return K[:, idx] @ np.linalg.pinv(K[np.ix_(idx, idx)], rcond=1e-12, hermitian=True) @ K[idx, :]
