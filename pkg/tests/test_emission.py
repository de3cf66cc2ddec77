from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from ggsim.algebra import p_success
from ggsim.emission import (
    EmissionModel,
    EmptyWindowError,
    adaptive_expected_success,
    alpha_of_time,
    click_time_pdf,
    click_time_sample,
    fidelity_of_alpha,
    log_tan_alpha,
    naive_window_closed_form,
    naive_window_mass,
    sample_event,
)

RATIOS = [1.0, 1.05, 1.1, 1.2, 1.5]


def test_model_validation():
    for bad in ({"kappa1": 0}, {"rate_ratio": 0.9}, {"window": 0}, {"sector_prob": 0}):
        with pytest.raises(ValueError):
            EmissionModel(**bad)


def test_identical_cavities_stay_balanced():
    m = EmissionModel(rate_ratio=1.0)
    assert np.allclose(alpha_of_time(m, np.linspace(0, 20, 50)), math.pi / 4)


def test_crossing_time():
    m = EmissionModel(rate_ratio=1.1)
    assert math.isclose(m.crossing_time, math.log(1.1) / 0.1)
    assert math.isclose(m.crossing_time, 0.9531, abs_tol=1e-4)
    assert math.isclose(alpha_of_time(m, m.crossing_time), math.pi / 4, abs_tol=1e-14)


def test_alpha_at_zero():
    a0 = alpha_of_time(EmissionModel(rate_ratio=1.1), 0.0)
    assert math.isclose(a0, math.atan(math.sqrt(1 / 1.1)), abs_tol=1e-14)
    assert math.isclose(a0, 0.76158, abs_tol=1e-5)


def test_alpha_monotone_single_crossing():
    m = EmissionModel(rate_ratio=1.2)
    a = alpha_of_time(m, np.linspace(0, 200, 2001))
    assert np.all(np.diff(a) > 0)
    assert np.count_nonzero(np.diff(np.sign(a - math.pi / 4))) == 1


def test_log_tan_is_linear_and_extremes_finite():
    m = EmissionModel(rate_ratio=1.5)
    u = log_tan_alpha(m, np.array([0.0, 1.0, 2.0]))
    assert math.isclose(u[2] - u[1], u[1] - u[0])
    assert 0 < alpha_of_time(m, 1e5) <= math.pi / 2
    with pytest.raises(ValueError):
        alpha_of_time(m, -1.0)


@pytest.mark.parametrize("ratio", RATIOS)
def test_pdf_normalized(ratio):
    m = EmissionModel(rate_ratio=ratio)
    total, _ = integrate.quad(lambda t: click_time_pdf(m, t), 0, np.inf)
    assert math.isclose(total, 1.0, rel_tol=1e-10)


def test_pdf_identical_and_mean():
    m = EmissionModel(rate_ratio=1.0)
    assert math.isclose(click_time_pdf(m, 0.7), math.exp(-0.7))
    m = EmissionModel(rate_ratio=1.1)
    mean, _ = integrate.quad(lambda t: t * click_time_pdf(m, t), 0, np.inf)
    assert math.isclose(mean, 0.5 * (1 + 1 / 1.1), rel_tol=1e-10)
    assert math.isclose(mean, 0.9545, abs_tol=1e-4)


def test_finite_window_pdf():
    m = EmissionModel(rate_ratio=1.3, window=2.0)
    total, _ = integrate.quad(lambda t: click_time_pdf(m, t), 0, 2.0)
    assert math.isclose(total, 1.0, rel_tol=1e-10)
    assert click_time_pdf(m, 2.5) == 0.0
    assert click_time_sample(m, np.random.default_rng(0), 10_000).max() <= 2.0


@pytest.mark.parametrize("model", [EmissionModel(rate_ratio=1.1), EmissionModel(rate_ratio=1.5, window=3.0)])
def test_sampler_chi_square(model):
    rng = np.random.default_rng(20240601)
    t = click_time_sample(model, rng, 1_000_000)
    k1, k2 = model.kappa1, model.kappa2
    cdf = lambda x: (1 - 0.5 * (np.exp(-k1 * x) + np.exp(-k2 * x))) / model.window_mass()  # noqa: E731
    upper = model.window if math.isfinite(model.window) else 1e3
    # 50 equiprobable bins
    edges = [0.0] + [optimize.brentq(lambda x, q=q: cdf(x) - q, 0, upper) for q in np.arange(1, 50) / 50] + [upper]
    observed, _ = np.histogram(t, bins=edges)
    expected = np.full(50, len(t) / 50)
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_sample_event_consistent():
    m = EmissionModel(rate_ratio=1.1)
    ev = sample_event(m, np.random.default_rng(1))
    assert ev.time >= 0 and ev.detector in (0, 1)
    assert ev.alpha == alpha_of_time(m, ev.time)


@pytest.mark.parametrize("alpha, expected", [(math.pi / 4, 1.0), (0.0, 0.5), (math.pi / 8, 0.853553)])
def test_fidelity_examples(alpha, expected):
    assert math.isclose(fidelity_of_alpha(alpha), expected, abs_tol=1e-6)


def test_fidelity_symmetric():
    a = np.linspace(0, math.pi / 2, 31)
    assert np.allclose(fidelity_of_alpha(a), fidelity_of_alpha(math.pi / 2 - a))


def test_naive_identical_cavities():
    assert naive_window_mass(EmissionModel(rate_ratio=1.0), 1e-5)[2] == 0.5


@pytest.mark.parametrize("ratio, expected", [(1.1, 0.048912), (1.05, 0.096420), (1.2, 0.025438), (1.5, 0.011246)])
def test_naive_values(ratio, expected):
    m = EmissionModel(rate_ratio=ratio)
    lo, hi, rate = naive_window_mass(m, 1e-5)
    assert lo < m.crossing_time < hi
    assert math.isclose(rate, expected, abs_tol=1e-6)
    assert np.allclose(naive_window_closed_form(m, 1e-5), (lo, hi, rate), rtol=1e-8)


def test_naive_edges_meet_cutoff():
    m = EmissionModel(rate_ratio=1.1)
    lo, hi, _ = naive_window_mass(m, 1e-5)
    for t in (lo, hi):
        assert math.isclose(fidelity_of_alpha(alpha_of_time(m, t)), 1 - 1e-5, abs_tol=1e-12)


def test_naive_monotone_and_limit():
    m = EmissionModel(rate_ratio=1.1)
    rates = [naive_window_mass(m, e)[2] for e in (1e-7, 1e-5, 1e-3, 1e-1, 0.3, 0.499999)]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert math.isclose(rates[-1], 0.5, abs_tol=1e-3)


def test_naive_empty_and_invalid():
    with pytest.raises(EmptyWindowError):
        naive_window_mass(EmissionModel(rate_ratio=1.1), 1e-18)
    with pytest.raises(ValueError):
        naive_window_mass(EmissionModel(rate_ratio=1.1), 0.6)


@pytest.mark.parametrize("ratio, expected", [(1.0, 0.25), (1.1, 0.249436), (1.05, 0.249851), (1.2, 0.247965), (1.5, 0.240574)])
def test_adaptive_values(ratio, expected):
    assert math.isclose(adaptive_expected_success(EmissionModel(rate_ratio=ratio)), expected, abs_tol=1e-6)


def test_adaptive_matches_direct_expectation():
    # independent check: E[p_s] from the mixture in u-space with a plain grid rule
    m = EmissionModel(rate_ratio=1.3)
    t = np.linspace(0, 400, 400_001)
    f = click_time_pdf(m, t) * p_success(alpha_of_time(m, t))
    assert math.isclose(0.5 * integrate.simpson(f, x=t), adaptive_expected_success(m), rel_tol=1e-8)


def test_adaptive_beats_naive_and_vanishes():
    # identical cavities are excluded: every click is ideal there, so naive keeps 0.5
    for r in RATIOS[1:]:
        m = EmissionModel(rate_ratio=r)
        assert adaptive_expected_success(m) >= naive_window_mass(m, 1e-5)[2]
    assert adaptive_expected_success(EmissionModel(rate_ratio=1e4)) < 1e-2
