import numpy as np
import pytest
from sklearn.datasets import make_classification
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.utils.estimator_checks import parametrize_with_checks

from dssfn.estimator import DecentralizedSSFNClassifier, SSFNClassifier

SMALL = dict(layers=2, width_extra=20)


@parametrize_with_checks([
    SSFNClassifier(**SMALL),
    DecentralizedSSFNClassifier(nodes=2, degree=1, iters=20, gamma=0.2, **SMALL),
])
def test_sklearn_compatible(estimator, check):
    check(estimator)


def blobs(seed=0):
    return make_classification(n_samples=150, n_features=6, n_informative=4, n_classes=3, random_state=seed)


def test_string_labels_and_shapes():
    X, y = blobs()
    names = np.array(["ant", "bee", "cat"])[y]
    clf = SSFNClassifier(**SMALL).fit(X, names)
    assert list(clf.classes_) == ["ant", "bee", "cat"]
    assert clf.decision_function(X).shape == (150, 3)
    assert clf.transform(X).shape == (150, 26)
    assert clf.score(X, names) > 0.7
    assert len(clf.train_costs_) == 3


def test_binary_decision_sign():
    X, y = make_classification(n_samples=80, n_features=4, random_state=1)
    clf = SSFNClassifier(**SMALL).fit(X, y)
    d = clf.decision_function(X)
    assert d.shape == (80,)
    np.testing.assert_array_equal(clf.predict(X), clf.classes_[(d > 0).astype(int)])


def test_decentralized_matches_central_on_one_node():
    X, y = blobs(2)
    a = SSFNClassifier(solver="ridge", **SMALL).fit(X, y)
    b = DecentralizedSSFNClassifier(nodes=1, degree=0, iters=2, shuffle=False, **SMALL)
    b.set_params(solver="ridge").fit(X, y)
    # shards are contiguous copies, so BLAS may round differently than on the transposed input
    np.testing.assert_allclose(a.decision_function(X), b.decision_function(X), rtol=0, atol=1e-12)
    assert b.model_.messages_sent == 0


def test_decentralized_async_runs():
    X, y = blobs(3)
    clf = DecentralizedSSFNClassifier(nodes=4, degree=2, mode="async", iters=200, gamma=0.1, **SMALL).fit(X, y)
    assert clf.model_.activations == 3 * 200
    assert clf.score(X, y) > 0.7


def test_works_in_pipelines():
    X, y = blobs(4)
    scores = cross_val_score(make_pipeline(StandardScaler(), SSFNClassifier(normalize=False, **SMALL)), X, y, cv=3)
    assert scores.mean() > 0.6


def test_unfitted_and_feature_mismatch():
    X, y = blobs()
    with pytest.raises(NotFittedError):
        SSFNClassifier().predict(X)
    clf = SSFNClassifier(**SMALL).fit(X, y)
    with pytest.raises(ValueError, match="features"):
        clf.predict(X[:, :5])
