"""Scikit-learn estimator wrapper."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from attrid.data import GenConfig, generate_pair
from attrid.estimator import CrossDomainReid


def small_estimator(**overrides):
    base = dict(n_bs=8, id_pretrain_iters=5, joint_iters=5, adapt_iters=5,
                backbone_dims=(6, 4), iia_encoder_dims=(4,), seed=0)
    base.update(overrides)
    return CrossDomainReid(**base)


@pytest.fixture(scope="module")
def pair():
    return generate_pair(GenConfig(n_identities=8, images_per_id_per_camera=2,
                                   n_cameras=2, m=4, input_dim=8, seed=0))


def test_get_params_round_trip():
    est = small_estimator(lambda2=3.0)
    params = est.get_params()
    assert params["lambda2"] == 3.0
    assert params["mode"] == "tj-aidl"
    twin = clone(est)
    assert twin.get_params() == params


def test_set_params():
    est = small_estimator()
    est.set_params(mode="id-only", lr=0.01)
    assert est.mode == "id-only" and est.lr == 0.01


def test_unfitted_estimator_raises():
    est = small_estimator()
    with pytest.raises(NotFittedError):
        est.transform(None)


def test_fit_requires_labelled_source(pair):
    source, target = pair
    est = small_estimator()
    with pytest.raises(ValueError):
        est.fit(source.unlabelled_view(), target)


def test_fit_transform_predict(pair):
    source, target = pair
    est = small_estimator().fit(source, target)
    feats = est.transform(target)
    assert feats.shape == (len(target), 4)
    preds = est.predict(target)
    assert preds.shape == (len(target), 4)
    assert set(np.unique(preds)) <= {0, 1}
    proba = est.predict_proba(target)
    assert np.all((proba > 0.0) & (proba < 1.0))
    np.testing.assert_array_equal(preds, (proba > 0.5).astype(np.int64))


def test_score_is_rank1(pair):
    source, target = pair
    est = small_estimator().fit(source, target)
    assert 0.0 <= est.score(target) <= 1.0


def test_fit_is_deterministic(pair):
    source, target = pair
    a = small_estimator(seed=4).fit(source, target)
    b = small_estimator(seed=4).fit(source, target)
    np.testing.assert_array_equal(a.transform(target), b.transform(target))


def test_modes_change_feature_dim(pair):
    source, target = pair
    ind = small_estimator(mode="independent").fit(source, target)
    assert ind.transform(target).shape[1] == 8  # both branches concatenated
