"""scikit-learn compatible estimators wrapping the landmark machinery.

``DppNystroem`` is a transformer producing an approximate kernel feature
map from selected landmarks, interchangeable with other kernel
approximation transformers in pipelines. ``NystromKernelRidge`` is the
matching regressor that fits ridge coefficients against the factored
approximation.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import CentroidLandmarks, select_landmarks
from .data import rbf_kernel
from .krr import fit_nystrom, predict_nystrom
from .linalg import PsdMatrix
from .nystrom import build_nystrom, rbf_backend
from .streams import philox_stream


def _seed_from(random_state):
    if random_state is None:
        return None
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    raise ValueError("random_state must be an int or None")


class DppNystroem(TransformerMixin, BaseEstimator):
    """Approximate RBF kernel feature map from diverse landmarks.

    Fitting selects ``n_components`` landmark points (by default through
    the determinantal Gibbs chain seeded with k-means++) and factors the
    landmark kernel block; transforming maps data to features whose inner
    products reproduce the Nystrom approximation of the kernel.

    Parameters
    ----------
    n_components : int
        Number of landmarks.
    sigma : float
        RBF bandwidth; the kernel is exp(-||x - x'||^2 / (2 sigma^2)).
    method : str
        Landmark selection strategy: 'kdpp', 'unif', 'lev', 'reglev',
        'applev', 'appreglev', 'adapfull', 'adappart' or 'kmeans'.
    gamma : float
        Ridge level used by the regularized leverage-score strategies.
    gibbs_iterations : int
        Chain length for the 'kdpp' strategy.
    lazy : bool
        Keep the chain's hold-in-place coin (the analyzed variant); turn
        off to halve wall-clock per effective swap.
    pinv_tol : float
        Relative eigenvalue cutoff when pseudo-inverting the landmark block.
    random_state : int or None
        Seed for the selection stream; None draws fresh entropy.

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
        Landmark points.
    component_indices_ : ndarray or None
        Row indices of the landmarks ('kmeans' centroids have none).
    normalization_ : ndarray of shape (n_components, rank)
        Map from kernel columns to features.
    """

    def __init__(
        self,
        n_components: int = 50,
        sigma: float = 1.0,
        method: str = "kdpp",
        gamma: float = 0.1,
        gibbs_iterations: int = 3000,
        lazy: bool = True,
        pinv_tol: float = 1e-12,
        random_state=None,
    ):
        self.n_components = n_components
        self.sigma = sigma
        self.method = method
        self.gamma = gamma
        self.gibbs_iterations = gibbs_iterations
        self.lazy = lazy
        self.pinv_tol = pinv_tol
        self.random_state = random_state

    def _select(self, X):
        K = PsdMatrix(rbf_kernel(X, None, self.sigma), validate=False)
        rng = philox_stream(_seed_from(self.random_state))
        return select_landmarks(
            self.method,
            K,
            self.n_components,
            rng,
            features=X,
            gamma=self.gamma,
            gibbs_iterations=self.gibbs_iterations,
            lazy=self.lazy,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if not 1 <= self.n_components <= X.shape[0]:
            raise ValueError("n_components must lie in [1, n_samples]")
        landmarks = self._select(X)
        if isinstance(landmarks, CentroidLandmarks):
            points = landmarks.centroids
            self.component_indices_ = None
        else:
            points = X[landmarks.indices]
            self.component_indices_ = landmarks.indices.copy()
        core = rbf_kernel(points, None, self.sigma)
        w, V = np.linalg.eigh(0.5 * (core + core.T))
        keep = w > self.pinv_tol * max(float(w.max()), 1e-300)
        self.components_ = points
        self.normalization_ = V[:, keep] / np.sqrt(w[keep])
        self.landmarks_ = landmarks
        return self

    def transform(self, X):
        check_is_fitted(self, "normalization_")
        X = check_array(X, dtype=float)
        return rbf_kernel(X, self.components_, self.sigma) @ self.normalization_


class NystromKernelRidge(RegressorMixin, BaseEstimator):
    """Kernel ridge regression solved against a Nystrom approximation.

    The ridge system uses the factored landmark approximation (an
    O(N c^2) solve); predictions extend the approximated kernel to new
    points, so only kernel evaluations against the landmarks are needed
    at predict time.

    Parameters mirror ``DppNystroem`` plus the ridge level ``gamma``, which
    scales with the training size as in (K + N gamma I).
    """

    def __init__(
        self,
        n_components: int = 50,
        sigma: float = 1.0,
        gamma: float = 0.1,
        method: str = "kdpp",
        gibbs_iterations: int = 3000,
        lazy: bool = True,
        pinv_tol: float = 1e-12,
        random_state=None,
    ):
        self.n_components = n_components
        self.sigma = sigma
        self.gamma = gamma
        self.method = method
        self.gibbs_iterations = gibbs_iterations
        self.lazy = lazy
        self.pinv_tol = pinv_tol
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if not 1 <= self.n_components <= X.shape[0]:
            raise ValueError("n_components must lie in [1, n_samples]")
        K = PsdMatrix(rbf_kernel(X, None, self.sigma), validate=False)
        rng = philox_stream(_seed_from(self.random_state))
        landmarks = select_landmarks(
            self.method,
            K,
            self.n_components,
            rng,
            features=X,
            gamma=self.gamma,
            gibbs_iterations=self.gibbs_iterations,
            lazy=self.lazy,
        )
        backend = rbf_backend(X, self.sigma)
        approx = build_nystrom(backend, landmarks, self.pinv_tol)
        self.model_ = fit_nystrom(approx, y, self.gamma)
        if isinstance(landmarks, CentroidLandmarks):
            self.landmark_points_ = landmarks.centroids
        else:
            self.landmark_points_ = X[landmarks.indices]
        self.approx_ = approx
        self.landmarks_ = landmarks
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        block = rbf_kernel(X, self.landmark_points_, self.sigma)
        return predict_nystrom(self.approx_, self.model_, block)
