import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import Ridge
from sklearn.model_selection import GridSearchCV
from sklearn.pipeline import Pipeline

from dppnystrom import DppNystroem, NystromKernelRidge, rbf_kernel, synthetic_regression

from helpers import nystrom_dense


@pytest.fixture(scope="module")
def ds():
    return synthetic_regression(100, 3, 0.1, 0)


class TestDppNystroem:
    def test_feature_map_reproduces_approximation(self, ds):
        est = DppNystroem(n_components=12, sigma=1.5, gibbs_iterations=100, random_state=0)
        Phi = est.fit_transform(ds.features)
        K = rbf_kernel(ds.features, None, 1.5)
        ref = nystrom_dense(K, est.component_indices_)
        assert np.abs(Phi @ Phi.T - ref).max() <= 1e-8

    def test_transform_new_points(self, ds):
        est = DppNystroem(n_components=10, sigma=1.5, gibbs_iterations=50, random_state=1)
        est.fit(ds.features[:80])
        Phi = est.transform(ds.features[80:])
        assert Phi.shape == (20, est.normalization_.shape[1])

    def test_clone_and_params_roundtrip(self):
        est = DppNystroem(n_components=7, sigma=0.5, method="unif", random_state=3)
        params = est.get_params()
        assert params["n_components"] == 7 and params["method"] == "unif"
        c = clone(est)
        assert c.get_params() == params

    def test_random_state_determinism(self, ds):
        a = DppNystroem(n_components=8, gibbs_iterations=80, random_state=5).fit(ds.features)
        b = DppNystroem(n_components=8, gibbs_iterations=80, random_state=5).fit(ds.features)
        assert np.array_equal(a.component_indices_, b.component_indices_)

    def test_unfitted_transform_raises(self, ds):
        with pytest.raises(Exception):
            DppNystroem().transform(ds.features)

    def test_kmeans_method_has_no_indices(self, ds):
        est = DppNystroem(n_components=5, method="kmeans", random_state=0).fit(ds.features)
        assert est.component_indices_ is None
        assert est.components_.shape == (5, 3)

    def test_pipeline_composition(self, ds):
        pipe = Pipeline(
            [
                ("features", DppNystroem(n_components=15, sigma=1.5, gibbs_iterations=100, random_state=0)),
                ("ridge", Ridge(alpha=1.0)),
            ]
        )
        pipe.fit(ds.features, ds.targets)
        assert pipe.score(ds.features, ds.targets) > 0.3


class TestNystromKernelRidge:
    def test_fit_predict_shapes(self, ds):
        est = NystromKernelRidge(n_components=10, sigma=1.5, gamma=0.01, gibbs_iterations=50, random_state=0)
        est.fit(ds.features, ds.targets)
        out = est.predict(ds.features[:7])
        assert out.shape == (7,)

    def test_learns_smooth_target(self, ds):
        est = NystromKernelRidge(n_components=25, sigma=1.5, gamma=1e-3, gibbs_iterations=200, random_state=0)
        est.fit(ds.features, ds.targets)
        assert est.score(ds.features, ds.noiseless) > 0.7

    def test_grid_search_compatible(self, ds):
        gs = GridSearchCV(
            NystromKernelRidge(sigma=1.5, gibbs_iterations=30, random_state=0),
            {"n_components": [5, 15]},
            cv=2,
        )
        gs.fit(ds.features, ds.targets)
        assert gs.best_params_["n_components"] in (5, 15)

    def test_bad_n_components(self, ds):
        est = NystromKernelRidge(n_components=1000)
        with pytest.raises(ValueError):
            est.fit(ds.features, ds.targets)
