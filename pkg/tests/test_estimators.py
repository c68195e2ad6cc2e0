import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from graphlite.apps import als, pagerank
from graphlite.estimators import ALSFactorizer, CoEMLabeler, PageRank


def test_pagerank_estimator_matches_oracle():
    links = pagerank.random_links(40, 0.1, 5)
    est = PageRank(epsilon=1e-10, machines=2).fit(links, 40)
    assert np.max(np.abs(est.transform() - pagerank.power_iteration(40, links))) <= 1e-6
    assert est.transform([0, 1]).shape == (2,)
    assert clone(est).get_params()["machines"] == 2


def test_als_estimator_fit_predict():
    rows, _, _ = als.synthetic_ratings(12, 10, 3, 2)
    X = np.array([(u, m - 12) for u, m, _ in rows])
    y = np.array([r for _, _, r in rows])
    est = ALSFactorizer(lam=0.0, max_sweeps=30).fit(X, y)
    assert est.train_rmse_ <= 1e-3
    assert np.max(np.abs(est.predict(X) - y)) <= 1e-2
    with pytest.raises(NotFittedError):
        ALSFactorizer().predict(X)


def test_coem_estimator():
    est = CoEMLabeler().fit([(0, 0, 2), (1, 0, 1), (1, 1, 3), (2, 1, 1)], {0: 0, 2: 1}, 3, 2)
    assert list(est.predict()) == [0, 1, 1]
    assert np.allclose(est.phrase_dist_.sum(axis=1), 1.0)
