import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rulegrad.errors import ContractError
from rulegrad.evaluate import evaluate, harmonic_mean, mca
from rulegrad.vse import VseParams


def test_mca_is_class_balanced():
    labels = np.array([0] * 99 + [1])
    preds = np.array([0] * 99 + [0])
    assert mca(preds, labels, [0, 1]) == 0.5


def test_mca_extremes():
    labels = np.array([0, 1, 1, 2])
    assert mca(labels, labels, [0, 1, 2]) == 1.0
    assert mca((labels + 1) % 3, labels, [0, 1, 2]) == 0.0


def test_mca_skips_absent_classes_and_validates():
    assert mca([0, 1], [0, 0], [0, 1, 5]) == 0.5
    with pytest.raises(ContractError):
        mca([0], [3], [0, 1])
    with pytest.raises(ContractError):
        mca([], [], [0, 1])


def test_harmonic_mean_examples():
    assert harmonic_mean(0.6, 0.3) == pytest.approx(0.4, abs=1e-15)
    assert harmonic_mean(0.0, 0.8) == 0.0 and harmonic_mean(0.8, 0.0) == 0.0
    assert harmonic_mean(0.37, 0.37) == pytest.approx(0.37, abs=1e-15)


ACC = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))


@given(ACC, ACC)
def test_harmonic_mean_bounds(s, u):
    hm = harmonic_mean(s, u)
    assert hm <= (s + u) / 2 + 1e-15
    assert (hm == 0) == (s == 0 or u == 0)


def test_mca_invariant_to_duplicating_every_sample(rng):
    labels = rng.integers(0, 5, size=60)
    preds = rng.integers(0, 5, size=60)
    assert mca(preds, labels, range(5)) == pytest.approx(
        mca(np.tile(preds, 3), np.tile(labels, 3), range(5)), abs=1e-15)


def test_evaluate_is_deterministic_and_bounded(small_dataset):
    ds = small_dataset
    p = VseParams.init(ds.train_x.shape[1], ds.class_emb.shape[1], 16, seed=0)
    a, b = evaluate(ds, p), evaluate(ds, p)
    assert a == b
    for v in (a.mca_t, a.mca_s_g, a.mca_t_g, a.hm):
        assert 0.0 <= v <= 1.0
    assert a.hm == pytest.approx(harmonic_mean(a.mca_s_g, a.mca_t_g), abs=1e-12)
    assert set(a.as_dict()) == {"mca_t", "mca_s_g", "mca_t_g", "hm", "per_class"}
