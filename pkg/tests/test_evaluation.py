import csv
import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drisce.errors import ShapeMismatch, ZeroTruth
from drisce.estimators import AlsConfig
from drisce.evaluation import (
    CSV_COLUMNS,
    ESTIMATORS,
    CascadeSet,
    NmseReport,
    cascade,
    check_all,
    check_identifiability,
    nmse,
    nmse_db,
    run_monte_carlo,
    trial_rng,
    write_csv,
)
from drisce.protocol import ChannelSet, SystemDims, gen_channels

from conftest import cmat


def test_cascade_products(rng):
    ch = ChannelSet(cmat(rng, 5, 2), cmat(rng, 3, 2), cmat(rng, 4, 5), cmat(rng, 4, 3), cmat(rng, 3, 5))
    c = cascade(ch)
    np.testing.assert_allclose(c.p1, ch.h1 @ ch.g1)
    np.testing.assert_allclose(c.p2, ch.h2 @ ch.g2)
    np.testing.assert_allclose(c.p3, ch.h2 @ ch.t @ ch.g1)


def test_cascade_shape_mismatch(rng):
    ch = ChannelSet(cmat(rng, 5, 2), cmat(rng, 3, 2), cmat(rng, 4, 6), cmat(rng, 4, 3), cmat(rng, 3, 5))
    with pytest.raises(ShapeMismatch):
        cascade(ch)


def _cs(rng):
    return CascadeSet(cmat(rng, 4, 2), cmat(rng, 4, 2), cmat(rng, 4, 2))


def test_nmse_identities(rng):
    truth = _cs(rng)
    assert nmse(truth, truth) == (0.0, 0.0, 0.0)
    zero = CascadeSet(*(np.zeros((4, 2)),) * 3)
    assert nmse(zero, truth) == pytest.approx((1.0, 1.0, 1.0))
    eps = 1e-3
    pert = CascadeSet(*(p * (1 + eps) for p in (truth.p1, truth.p2, truth.p3)))
    assert nmse(pert, truth) == pytest.approx((eps**2,) * 3, rel=1e-6)


def test_nmse_zero_truth(rng):
    with pytest.raises(ZeroTruth):
        nmse(_cs(rng), CascadeSet(*(np.zeros((4, 2)),) * 3))


def test_identifiability_full_training_passes_all():
    v = check_all(SystemDims(4, 2, 30, 20, 30, 20, 2))
    assert all(x.satisfied for x in v.verdicts.values())


def test_identifiability_reduced_training():
    v = check_all(SystemDims(4, 2, 30, 20, 25, 15, 2))
    assert not v["ckraft"].satisfied
    assert v["ckraft"].failed == ["I >= M_S1", "J >= M_S2"]
    assert v["cals"].satisfied
    assert check_identifiability(v.dims, "cals_random").satisfied


def test_identifiability_single_frame_fails_all():
    dims = SimpleNamespace(m_bs=4, m_ue=2, m_s1=30, m_s2=20, i_frames=1, j_frames=20, k_pilots=2)
    for name, verdict in check_all(dims).verdicts.items():
        assert not verdict.satisfied, name
        assert "I >= 2" in verdict.failed


def test_identifiability_unknown_estimator():
    with pytest.raises(KeyError):
        check_identifiability(SystemDims(4, 2, 8, 6, 8, 6, 2), "svd")


def _brute(d, family):
    i, j = d.i_frames, d.j_frames
    ok = d.k_pilots >= d.m_ue and i >= 2 and j >= 2
    ok &= i * d.m_ue >= d.m_s1 and j * d.m_bs >= d.m_s2
    if family == "ckraft":
        return ok and i >= d.m_s1 and j >= d.m_s2
    if family == "cals":
        return ok and i * (j + 1) * d.m_bs >= d.m_s1 and j * (i + 1) * d.m_ue >= d.m_s2
    return ok and i * d.m_bs >= d.m_s1 and j * d.m_ue >= d.m_s2


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 8), st.integers(1, 8), st.integers(1, 40), st.integers(1, 40),
    st.integers(1, 40), st.integers(1, 40), st.integers(1, 8),
)
def test_identifiability_matches_inequalities(m_bs, m_ue, m_s1, m_s2, i, j, k):
    d = SimpleNamespace(m_bs=m_bs, m_ue=m_ue, m_s1=m_s1, m_s2=m_s2, i_frames=i, j_frames=j, k_pilots=k)
    for family in ("ckraft", "cals", "baseline_uncoupled"):
        assert check_identifiability(d, family).satisfied == _brute(d, family)


def test_trial_rng_independent_streams():
    a = trial_rng(0, 0, 0).standard_normal(4)
    b = trial_rng(0, 0, 1).standard_normal(4)
    c = trial_rng(0, 0, 0).standard_normal(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, c)


def test_monte_carlo_noise_free_limit(small_dims):
    rep = run_monte_carlo(small_dims, [200.0], 5, "ckraft", seed=1)
    assert np.all(rep.median() <= 1e-15)
    assert rep.failures == [0]


def test_monte_carlo_same_data_across_estimators(small_dims):
    a = run_monte_carlo(small_dims, [10.0], 3, "ckraft", seed=2)
    b = run_monte_carlo(small_dims, [10.0], 3, "cals_ckraft_init", AlsConfig(t_max=3), seed=2)
    np.testing.assert_array_equal(a.den, b.den)


def test_monte_carlo_deterministic(small_dims):
    cfg = AlsConfig(t_max=3)
    a = run_monte_carlo(small_dims, [0.0, 20.0], 3, "cals_random", cfg, seed=5)
    b = run_monte_carlo(small_dims, [0.0, 20.0], 3, "cals_random", cfg, seed=5)
    assert write_csv([a]) == write_csv([b])


def test_monte_carlo_nmse_decreases_with_snr(small_dims):
    rep = run_monte_carlo(small_dims, [0.0, 10.0, 20.0, 30.0], 30, "ckraft", seed=0)
    med = rep.median()
    assert np.all(np.diff(med, axis=0) < 0)


def test_monte_carlo_rejects_bad_arguments(small_dims):
    with pytest.raises(ValueError):
        run_monte_carlo(small_dims, [0.0], 0, "ckraft")
    with pytest.raises(ValueError):
        run_monte_carlo(small_dims, [0.0], 1, "music")


def test_report_statistics_and_failures(small_dims):
    num = np.array([[[1.0, 2.0, 3.0], [np.nan] * 3, [3.0, 2.0, 1.0]]])
    den = np.array([[[2.0, 2.0, 2.0], [np.nan] * 3, [2.0, 4.0, 2.0]]])
    rep = NmseReport("ckraft", small_dims, [5.0], 3, 0, num, den, [1])
    np.testing.assert_allclose(rep.mean(), [[1.0, 4 / 6, 1.0]])
    np.testing.assert_allclose(rep.median(), [[1.0, 0.75, 1.0]])
    assert rep.metadata()["failures"] == [1]
    rows = list(csv.DictReader(io.StringIO(write_csv([rep]))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 6
    assert {r["failures"] for r in rows} == {"1"}
    assert float(rows[0]["value"]) == 1.0


def test_csv_covers_every_estimator(small_dims):
    reps = [run_monte_carlo(small_dims, [30.0], 2, e, AlsConfig(t_max=2)) for e in ESTIMATORS]
    rows = list(csv.DictReader(io.StringIO(write_csv(reps))))
    assert len(rows) == len(ESTIMATORS) * 3 * 2
    assert {r["estimator"] for r in rows} == set(ESTIMATORS)
    assert all(math.isfinite(float(r["value"])) for r in rows)


def test_nmse_db():
    np.testing.assert_allclose(nmse_db([1.0, 0.1, 1e-3]), [0.0, -10.0, -30.0])
    assert nmse_db(0.0) == -np.inf


def test_gen_channels_accepts_generator(small_dims):
    a = gen_channels(small_dims, np.random.default_rng(3))
    b = gen_channels(small_dims, np.random.default_rng(3))
    np.testing.assert_array_equal(a.h1, b.h1)
