import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import chisquare

from precip_postproc.distributions import CsgdParams, GtcndParams, csgd_cdf, gtcnd_sample
from precip_postproc.errors import DomainError
from precip_postproc.fitting.quantiles import QuantileForecast, default_levels
from precip_postproc.verification import (
    RankHistogram,
    censor_mask,
    crpss_map,
    exceedance_prob,
    jpz_rejection_map,
    jpz_test,
    observation_rank,
    observation_ranks,
    rank_histogram,
    roc_auc_per_point,
    roc_curve,
)
from precip_postproc.verification.ranks import jpz_contrasts


# ranks
def test_rank_extremes():
    q = QuantileForecast(default_levels(), np.linspace(1.0, 10.0, 107))
    rng = np.random.default_rng(0)
    assert observation_rank(q, 0.0, rng) == 1
    assert observation_rank(q, 20.0, rng) == 108
    assert observation_rank(q, 5.0, rng) == 1 + int(np.sum(q.values < 5.0))


def test_rank_ties_are_uniform():
    ranks = observation_ranks(np.zeros(107), np.zeros(100_000), np.random.default_rng(1))
    assert ranks.min() == 1 and ranks.max() == 108
    counts = np.bincount(ranks, minlength=109)[1:]
    assert chisquare(counts).pvalue > 1e-3


def test_ranks_are_seeded():
    values = np.zeros((4, 4, 107))
    a = observation_ranks(values, np.zeros((4, 4)), np.random.default_rng(2))
    b = observation_ranks(values, np.zeros((4, 4)), np.random.default_rng(2))
    assert_array_equal(a, b)


test_data = [(1, 0), (6, 0), (7, 1), (108, 17)]


@pytest.mark.parametrize("rank, cls", test_data)
def test_rank_classes(rank, cls):
    h = rank_histogram([rank])
    assert h.counts[cls] == 1
    assert h.n_total == 1 and h.n_classes == 18


def test_rank_histogram_counts():
    ranks = np.random.default_rng(3).integers(1, 109, 5400)
    h = rank_histogram(ranks)
    assert h.n_total == 5400
    assert np.all(np.abs(h.counts - 300) < 80)


test_data = [([0], 108, 18), ([109], 108, 18), ([1], 108, 17)]


@pytest.mark.parametrize("ranks, n_ranks, n_classes", test_data)
def test_rank_histogram_errors(ranks, n_ranks, n_classes):
    with pytest.raises(DomainError):
        rank_histogram(ranks, n_ranks, n_classes)


def test_histogram_merge():
    a = rank_histogram([1, 2, 108])
    b = rank_histogram([50])
    assert a.merge(b).n_total == 4
    with pytest.raises(DomainError):
        a.merge(rank_histogram([1], 18, 18))


# flatness test
def test_jpz_contrasts_are_orthonormal():
    c = jpz_contrasts(18)
    assert_allclose(c.T @ c, np.eye(3), atol=1e-12)
    assert_allclose(c.sum(axis=0), 0.0, atol=1e-12)


def test_jpz_flat_histogram():
    result = jpz_test(RankHistogram(np.full(18, 10), 108))
    assert_allclose([result.bias, result.dispersion, result.wave], 0.0, atol=1e-20)
    assert not result.reject_flatness
    assert result.adjusted_p_values == (1.0, 1.0, 1.0)


def test_jpz_type_one_error():
    rng = np.random.default_rng(4)
    counts = rng.multinomial(540, np.full(18, 1 / 18), size=10_000)
    rate = np.mean([jpz_test(RankHistogram(c, 108)).reject_flatness for c in counts])
    assert 0.04 <= rate <= 0.06


def test_jpz_detects_underdispersion():
    centered = np.arange(18) - 8.5
    counts = np.round(20 + 4.0 * centered**2).astype(int)
    result = jpz_test(RankHistogram(counts, 108))
    assert result.reject_flatness
    assert result.adjusted_p_values[1] < 0.05
    assert result.dispersion > max(result.bias, result.wave)


def test_jpz_detects_bias():
    counts = np.linspace(60, 5, 18).round().astype(int)
    result = jpz_test(RankHistogram(counts, 108))
    assert result.reject_flatness
    assert result.bias > result.dispersion


def test_jpz_guards():
    with pytest.raises(DomainError):
        jpz_test(RankHistogram(np.full(18, 2), 108))
    with pytest.raises(DomainError):
        jpz_test(RankHistogram(np.full(18, 10), 108), alpha=1.5)


def test_jpz_rejection_map_on_calibrated_forecasts():
    rng = np.random.default_rng(5)
    ranks = rng.integers(1, 109, (400, 3, 4))
    reject = jpz_rejection_map(ranks)
    assert reject.shape == (3, 4)
    assert reject.sum() <= 3


def calibrated_rejection_rate(seed, n_histograms, n_ranks=1000, chunk=500):
    rng = np.random.default_rng(seed)
    p = GtcndParams(0.0, 2.0, 1.5)
    q = QuantileForecast.from_distribution(p)
    rejected = 0
    for start in range(0, n_histograms, chunk):
        n = min(chunk, n_histograms - start)
        ranks = observation_ranks(q.values, gtcnd_sample(p, rng, size=(n_ranks, n)), rng)
        rejected += sum(jpz_test(rank_histogram(ranks[:, j])).reject_flatness for j in range(n))
    return rejected / n_histograms


def test_calibrated_forecast_ranks_pass():
    assert calibrated_rejection_rate(6, 400) <= 0.09


@pytest.mark.slow
def test_calibrated_forecast_rejection_rate():
    assert 0.04 <= calibrated_rejection_rate(7, 10_000) <= 0.06


# exceedance
def test_exceedance_gtcnd():
    p = GtcndParams(0.35, 1.0, 2.0)
    assert_allclose(exceedance_prob(p, 0.0), 0.65)
    assert exceedance_prob(p, 1e3) < 1e-12


def test_exceedance_of_quantile_forecast_matches_distribution():
    p = CsgdParams(1.2, 3.0, -0.8)
    q = QuantileForecast.from_distribution(p)
    for t in (0.5, 2.0, 5.0, 10.0):
        assert abs(exceedance_prob(q, t) - (1.0 - csgd_cdf(p, t))) < 0.02


def test_exceedance_of_ensemble():
    members = np.array([[0.0, 1.0, 3.0, 6.0]])
    assert_allclose(exceedance_prob(members, np.array([2.0])), [0.5])


def test_exceedance_rejects_negative_threshold():
    with pytest.raises(DomainError):
        exceedance_prob(GtcndParams(0.1, 1.0, 1.0), -1.0)


# ROC
def test_roc_perfect_separation():
    curve = roc_curve([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0])
    assert curve.auc == 1.0
    points = set(zip(curve.false_alarm_rate, curve.hit_rate))
    assert (0.0, 1.0) in points


def test_roc_probs_equal_events():
    events = np.array([0, 1, 1, 0, 1])
    curve = roc_curve(events.astype(float), events)
    assert (0.0, 1.0) in set(zip(curve.false_alarm_rate, curve.hit_rate))


def test_roc_uninformative_probs():
    rng = np.random.default_rng(7)
    curve = roc_curve(rng.random(10_000), rng.integers(0, 2, 10_000))
    assert abs(curve.auc - 0.5) < 0.02


def test_roc_endpoints_and_monotonicity():
    rng = np.random.default_rng(8)
    events = rng.integers(0, 2, 500)
    probs = np.clip(0.3 * events + rng.random(500) * 0.8, 0.0, 1.0).round(2)
    curve = roc_curve(probs, events)
    assert (curve.false_alarm_rate[0], curve.hit_rate[0]) == (0.0, 0.0)
    assert (curve.false_alarm_rate[-1], curve.hit_rate[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.false_alarm_rate) >= 0.0)
    assert np.all(np.diff(curve.hit_rate) >= 0.0)
    assert 0.5 < curve.auc <= 1.0


def test_roc_auc_invariant_under_increasing_transform():
    rng = np.random.default_rng(9)
    events = rng.integers(0, 2, 300)
    probs = rng.random(300) * (0.5 + 0.5 * events)
    assert_allclose(roc_curve(probs**3, events).auc, roc_curve(probs, events).auc, rtol=1e-14)


test_data = [
    ([0.1, 0.2], [1, 1]),
    ([0.1, 0.2], [0, 0]),
    ([0.1, 0.2, 0.3], [0, 1]),
    ([0.1, 0.2], [0, 2]),
]


@pytest.mark.parametrize("probs, events", test_data)
def test_roc_errors(probs, events):
    with pytest.raises(DomainError):
        roc_curve(probs, events)


def test_roc_auc_per_point():
    probs = np.zeros((4, 1, 2))
    events = np.zeros((4, 1, 2), dtype=int)
    events[:2, 0, 0] = 1
    probs[:2, 0, 0] = 0.9
    auc = roc_auc_per_point(probs, events)
    assert auc[0, 0] == 1.0
    assert np.isnan(auc[0, 1])


# skill maps
def test_censor_mask():
    land = np.ones((8, 8))
    land[:, 5] = 0.0
    mask = censor_mask(land, 2)
    expected = np.zeros((8, 8), dtype=bool)
    expected[2:6, 2:6] = True
    expected[:, 5] = False
    assert_array_equal(mask, expected)
    assert not censor_mask(np.ones((4, 4)), 2).any()
    with pytest.raises(DomainError):
        censor_mask(land, -1)


def test_crpss_equal_scores():
    s = np.random.default_rng(10).uniform(0.1, 1.0, (3, 4))
    result = crpss_map(s, s)
    assert_array_equal(result.skill, 0.0)
    assert result.masked_skill == 0.0
    assert result.n_points == 12


def test_crpss_single_point_mask():
    rng = np.random.default_rng(11)
    s, ref = rng.uniform(0.1, 1.0, (2, 3, 4))
    mask = np.zeros((3, 4), dtype=bool)
    mask[1, 2] = True
    result = crpss_map(s, ref, mask)
    assert_allclose(result.masked_skill, 1.0 - s[1, 2] / ref[1, 2])
    assert_allclose(result.masked_skill, result.skill[1, 2])


def test_crpss_averages_days_before_ratio():
    daily = np.array([[[1.0]], [[3.0]]])
    ref = np.array([[[4.0]], [[4.0]]])
    result = crpss_map(daily, ref)
    assert_allclose(result.skill[0, 0], 0.5)
    assert result.mean_score == 2.0


def test_crpss_zero_reference_is_undefined():
    result = crpss_map(np.ones((2, 2)), np.zeros((2, 2)))
    assert np.isnan(result.skill).all()
    assert np.isnan(result.masked_skill)


def test_crpss_shape_errors():
    with pytest.raises(DomainError):
        crpss_map(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(DomainError):
        crpss_map(np.ones((2, 2)), np.ones((2, 2)), np.ones((3, 3), dtype=bool))
