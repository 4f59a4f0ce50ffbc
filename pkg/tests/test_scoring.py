import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from precip_postproc.distributions import (
    CsgdParams,
    GtcndParams,
    csgd_point_mass,
    family_cdf,
    family_quantile,
    gtcnd_sample,
)
from precip_postproc.errors import DomainError, QuadratureError
from precip_postproc.fitting.quantiles import QuantileForecast, default_levels
from precip_postproc.scoring import (
    brier_exceedance,
    crps_csgd,
    crps_ensemble_fair,
    crps_ensemble_nrg,
    crps_from_quantiles,
    crps_gtcnd,
    crps_numeric,
    crps_parametric,
    crps_quantile_integral,
    crps_threshold_integral,
    pinball,
    skill_score,
    summarize,
)


def oracle(p, y):
    return crps_numeric(
        lambda z: float(family_cdf(p, z)),
        y,
        quantile=lambda a: float(family_quantile(p, a)),
        # quantile marks let the quadrature find narrow wet parts
        points=[0.0, *(float(family_quantile(p, a)) for a in (0.5, 0.9, 0.999))],
        support_min=0.0,
    )


def random_case(rng, family):
    if family == "gtcnd":
        sigma = math.exp(rng.uniform(math.log(1e-3), math.log(5.0)))
        p = GtcndParams(rng.uniform(0.0, 0.9), rng.uniform(-40.0, 8.0) * sigma, sigma)
    else:
        p = CsgdParams(rng.uniform(0.5, 6.0), rng.uniform(0.3, 5.0), -rng.uniform(0.1, 4.0))
    kind = rng.integers(3)
    if kind == 0:
        y = 0.0
    elif kind == 1:
        y = float(family_quantile(p, rng.uniform(0.01, 0.99)))
    else:
        y = rng.uniform(0.0, 40.0)
    return p, y


# closed forms on simple cases
test_data = [
    (GtcndParams(1.0, 0.0, 1.0), 0.0, 0.0),
    (GtcndParams(1.0, 0.0, 1.0), 2.0, 2.0),
    (GtcndParams(0.0, 10.0, 1.0), 10.0, (math.sqrt(2.0) - 1.0) / math.sqrt(math.pi)),
]


@pytest.mark.parametrize("p, y, expected", test_data)
def test_crps_gtcnd_examples(p, y, expected):
    assert_allclose(crps_gtcnd(p, y), expected, rtol=1e-9, atol=1e-14)


test_data = [
    (GtcndParams(0.2, -5.0, 0.5), 0.5),
    (GtcndParams(0.2, -2.0, 0.05), 0.5),
    (GtcndParams(0.2, -3.0, 0.5), 0.0),
    (GtcndParams(0.2, -1.0, 0.05), 2.0),
    (GtcndParams(0.5, -1.0, 1e-3), 2.0),
    (GtcndParams(0.0, -40.0, 1.0), 0.01),
]


@pytest.mark.parametrize("p, y", test_data)
def test_crps_gtcnd_deep_truncation(p, y):
    expected = oracle(p, y)
    value = crps_gtcnd(p, y)
    assert np.isfinite(value) and value > 0.0
    assert abs(value - expected) <= 1e-8 * (1.0 + expected)


def test_crps_gtcnd_underflowing_normalizer():
    # Φ(mu/sigma) underflows to 0 in double precision
    p = GtcndParams(0.3, -50.0, 1.0)
    assert_allclose(crps_gtcnd(p, 0.0), oracle(p, 0.0), rtol=1e-6)
    assert_allclose(crps_gtcnd(p, 3.0), oracle(p, 3.0), rtol=1e-8)


def test_crps_numeric_point_forecasts():
    assert_allclose(crps_numeric(lambda z: 1.0 if z >= 2.0 else 0.0, 5.0, points=[2.0]), 3.0, rtol=1e-9)
    p = GtcndParams(1.0, 0.0, 1.0)
    assert_allclose(oracle(p, 2.0), 2.0, rtol=1e-9)


def test_crps_numeric_rejects_bad_arguments():
    with pytest.raises(DomainError):
        crps_numeric(lambda z: 0.5, 0.0, tol=0.0)
    with pytest.raises(DomainError):
        crps_numeric(lambda z: 0.5, math.inf)


def test_crps_numeric_reports_unreachable_bracket():
    with pytest.raises(QuadratureError) as info:
        crps_numeric(lambda z: 0.5, 0.0)
    assert info.value.requested > 0.0


def test_crps_csgd_deep_censoring():
    p = CsgdParams(1.0, 0.1, -10.0)
    assert csgd_point_mass(p) > 1.0 - 1e-12
    assert crps_csgd(p, 0.0) < 1e-12


def test_crps_csgd_exponential_limit():
    p = CsgdParams(1.0, 1.0, -1e-10)
    for y in (0.0, 0.3, 1.0, 4.0):
        exponential = y + 2.0 * math.exp(-y) - 1.5
        assert_allclose(crps_csgd(p, y), exponential, rtol=1e-7, atol=1e-9)
        assert_allclose(oracle(p, y), exponential, rtol=1e-7, atol=1e-9)


def test_crps_is_vectorized_over_grids():
    rng = np.random.default_rng(0)
    p = GtcndParams(rng.uniform(0, 0.5, (4, 5)), rng.uniform(0, 3, (4, 5)), rng.uniform(0.5, 2, (4, 5)))
    y = rng.uniform(0, 5, (4, 5))
    grid = crps_parametric(p, y)
    assert grid.shape == (4, 5)
    assert_allclose(grid[2, 3], crps_gtcnd(p[2, 3], y[2, 3]), rtol=1e-14)


@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_closed_form_matches_oracle(family):
    rng = np.random.default_rng(1 if family == "gtcnd" else 2)
    for _ in range(200):
        p, y = random_case(rng, family)
        expected = oracle(p, y)
        assert abs(crps_parametric(p, y) - expected) <= 1e-6 * (1.0 + expected), (p, y)


@pytest.mark.slow
@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_closed_form_matches_oracle_full_sweep(family):
    rng = np.random.default_rng(11 if family == "gtcnd" else 12)
    for _ in range(1000):
        p, y = random_case(rng, family)
        expected = oracle(p, y)
        assert abs(crps_parametric(p, y) - expected) <= 1e-6 * (1.0 + expected), (p, y)


def kernel_crps(p, y):
    """E|X − y| − ½E|X − X'| with both expectations integrated from the cdf."""
    F = lambda z: float(family_cdf(p, z))
    hi = float(family_quantile(p, 1.0 - 1e-12)) + 1.0
    below, _ = quad(F, 0.0, y, limit=200) if y > 0.0 else (0.0, 0.0)
    above, _ = quad(lambda z: 1.0 - F(z), y, max(hi, y + 1.0), limit=200)
    spread, _ = quad(lambda z: F(z) * (1.0 - F(z)), 0.0, hi, limit=200)
    return below + above - spread


def representations(p, y):
    hi = max(y, float(family_quantile(p, 1.0 - 1e-10))) + 1.0
    threshold = crps_threshold_integral(lambda t: family_cdf(p, t), y, np.linspace(0.0, hi, 40001))
    dry = float(family_cdf(p, 0.0))
    pinball_form = crps_quantile_integral(lambda a: float(family_quantile(p, a)), y, break_levels=[dry, float(family_cdf(p, y))], tol=1e-7)
    return threshold, pinball_form, kernel_crps(p, y)


@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_representation_equivalence(family):
    rng = np.random.default_rng(3 if family == "gtcnd" else 4)
    for _ in range(25):
        p, y = random_case(rng, family)
        closed = float(crps_parametric(p, y))
        for value in representations(p, y):
            assert abs(value - closed) <= 1e-4 * max(closed, 1e-3), (p, y, value, closed)


@pytest.mark.slow
@pytest.mark.parametrize("family", ["gtcnd", "csgd"])
def test_representation_equivalence_full(family):
    rng = np.random.default_rng(13 if family == "gtcnd" else 14)
    for _ in range(100):
        p, y = random_case(rng, family)
        closed = float(crps_parametric(p, y))
        for value in representations(p, y):
            assert abs(value - closed) <= 1e-4 * max(closed, 1e-3), (p, y, value, closed)


# ensembles
test_data = [
    ([0.0, 2.0], 1.0, 0.0, 0.5),
    ([3.0, 3.0, 3.0], 1.0, 2.0, 2.0),
    ([1.0, 4.0, 2.0, 8.0], 3.0, 2.25 - 46.0 / 24.0, 2.25 - 46.0 / 32.0),
]


@pytest.mark.parametrize("members, y, fair, nrg", test_data)
def test_ensemble_estimators(members, y, fair, nrg):
    assert_allclose(crps_ensemble_fair(members, y), fair, atol=1e-14)
    assert_allclose(crps_ensemble_nrg(members, y), nrg, atol=1e-14)


def test_single_member_ensemble():
    assert_allclose(crps_ensemble_nrg([2.5], 1.0), 1.5)
    with pytest.raises(DomainError):
        crps_ensemble_fair([2.5], 1.0)


def test_fair_estimator_is_unbiased():
    rng = np.random.default_rng(5)
    p = GtcndParams(0.3, 1.5, 2.0)
    y = 2.2
    members = gtcnd_sample(p, rng, size=(10_000, 20))
    fair = crps_ensemble_fair(members, np.full(10_000, y))
    nrg = crps_ensemble_nrg(members, np.full(10_000, y))
    se = fair.std(ddof=1) / math.sqrt(fair.size)
    assert abs(fair.mean() - crps_gtcnd(p, y)) <= 3.0 * se
    assert np.all(fair <= nrg + 1e-15)


def test_large_ensemble_fair_close_to_closed_form():
    rng = np.random.default_rng(6)
    p = GtcndParams(0.2, 2.0, 1.0)
    y = 1.0
    values = crps_ensemble_fair(gtcnd_sample(p, rng, size=(200, 1000)), np.full(200, y))
    assert abs(values.mean() / crps_gtcnd(p, y) - 1.0) < 0.02


# pinball and quantile forecasts
test_data = [
    (2.0, 2.0, 0.3, 0.0),
    (1.0, 4.0, 0.5, 3.0),
    (5.0, 4.0, 0.5, 1.0),
    (1.0, 3.0, 0.9, 3.6),
]


@pytest.mark.parametrize("q, y, alpha, expected", test_data)
def test_pinball(q, y, alpha, expected):
    assert_allclose(pinball(q, y, alpha), expected, rtol=1e-14)


def test_crps_from_quantiles_degenerate():
    levels = default_levels()
    assert crps_from_quantiles(QuantileForecast(levels, np.full(107, 3.0)), 3.0) == 0.0
    assert_allclose(crps_from_quantiles(QuantileForecast([0.5], [1.0]), 4.0), 3.0)


def test_crps_from_quantiles_approximates_closed_form():
    rng = np.random.default_rng(7)
    levels = default_levels()
    ratios = []
    for _ in range(50):
        p = GtcndParams(rng.uniform(0.0, 0.6), rng.uniform(0.0, 5.0), rng.uniform(0.5, 3.0))
        y = float(gtcnd_sample(p, rng))
        q = QuantileForecast.from_distribution(p, levels)
        ratios.append(crps_from_quantiles(q, y) / crps_gtcnd(p, y))
    assert abs(np.mean(ratios) - 1.0) < 0.02


def test_quantile_forecast_rejects_decreasing_values():
    with pytest.raises(DomainError):
        QuantileForecast([0.25, 0.5, 0.75], [1.0, 0.5, 2.0])


# skill and aggregation
test_data = [
    (0.4, 0.4, 0.0),
    (0.0, 0.7, 1.0),
    (0.28492, 0.3725, 0.2351),
]


@pytest.mark.parametrize("s, ref, expected", test_data)
def test_skill_score(s, ref, expected):
    assert_allclose(skill_score(s, ref), expected, atol=5e-5)


def test_skill_score_zero_reference_is_nan():
    assert math.isnan(skill_score(0.1, 0.0))
    out = skill_score(np.array([0.1, 0.2]), np.array([0.0, 0.4]))
    assert math.isnan(out[0]) and out[1] == 0.5


test_data = [(1.0, 0.0, 1.0, 0.0), (0.5, 3.0, 1.0, 0.25), (0.5, 0.0, 1.0, 0.25), (0.2, 5.0, 1.0, 0.04)]


@pytest.mark.parametrize("F, y, t, expected", test_data)
def test_brier_exceedance(F, y, t, expected):
    assert_allclose(brier_exceedance(F, y, t), expected)


def test_summarize_uses_mask():
    scores = np.arange(12.0).reshape(3, 4)
    mask = np.zeros((3, 4), dtype=bool)
    mask[1] = True
    summary = summarize(scores, mask)
    assert summary.n == 4
    assert summary.mean_score == 5.5
    assert_allclose(summary.per_point, [4.0, 5.0, 6.0, 7.0])
    with pytest.raises(DomainError):
        summarize(scores, np.zeros((3, 4), dtype=bool))
