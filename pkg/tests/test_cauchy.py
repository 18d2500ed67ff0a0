import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CASES
from mgtlab.cauchy import (
    InitialDataSpec,
    SPHERE_AREA,
    evolve_norm_series,
    fit_decay_exponent,
    fit_power_law,
    log_grid,
    mode_squares,
    radial_quadrature,
    regularity_loss_exponent,
    regularity_loss_experiment,
    sample_initial_data,
    theorem_exponent,
)
from mgtlab.model import ModelParams, ModelVariant, ObservableKind, Regime, default_kind

WINDOW = (1e2, 1e4)
LONG_TIMES = np.concatenate([[0.0], np.logspace(1, 4, 31)])


def _data(profile="gaussian", variant=ModelVariant.FOURIER, regime=Regime.TAU_LESS_BETA, **kw):
    spec = InitialDataSpec(profile=profile, kind=default_kind(variant, regime), **kw)
    return sample_initial_data(spec, log_grid())


def test_gaussian_data():
    d = _data()
    assert d.tail_exponent == math.inf
    assert all(d.finite_norms.values())
    assert np.all(np.isfinite(d.v0_hat.components))


def test_algebraic_data_norms():
    d = sample_initial_data(InitialDataSpec(profile="algebraic", tail_exponent=3.0, sobolev_order=2.0), log_grid())
    assert d.finite_norms["H^2"] and d.finite_norms["L1"]
    r = d.xi_grid[d.xi_grid > 10]
    amp = np.sqrt(d.v0_hat.squared_norm[d.xi_grid > 10])
    np.testing.assert_allclose(amp, (1 + r) ** -3.0, rtol=1e-2)
    with pytest.raises(ValueError):
        sample_initial_data(InitialDataSpec(profile="algebraic", tail_exponent=2.5, sobolev_order=2.0), log_grid())


def test_data_validation():
    with pytest.raises(ValueError):
        sample_initial_data(InitialDataSpec(profile="sinc"), log_grid())
    with pytest.raises(ValueError):
        sample_initial_data(InitialDataSpec(), np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        sample_initial_data(InitialDataSpec(dim=4), log_grid())


def test_bump_has_no_low_frequency_part():
    p, v, r = CASES["cattaneo-lt"]
    d = _data("bump", v, r)
    s = evolve_norm_series(p, v, d, 0, np.array([0.0, 1.0, 10.0]))
    assert np.all(s.low == 0)
    assert np.all(s.high > 0)


def test_initial_norm_matches_closed_form():
    # omega_1 int_0^inf exp(-2 r^2) dr = sqrt(pi / 2)
    p, v, r = CASES["fourier-lt"]
    s = evolve_norm_series(p, v, _data(), 0, np.array([0.0]))
    assert s.values[0] == pytest.approx(math.sqrt(math.pi / 2), rel=1e-4)
    # k = 1, N = 3: 4 pi int r^4 exp(-2 r^2) dr = 4 pi * 3 sqrt(pi/2) / 32
    d3 = sample_initial_data(InitialDataSpec(dim=3), log_grid())
    s3 = evolve_norm_series(p, v, d3, 1, np.array([0.0]))
    assert s3.values[0] == pytest.approx(4 * math.pi * 3 * math.sqrt(math.pi / 2) / 32, rel=1e-4)


@given(st.sampled_from([1, 2, 3]), st.floats(0, 2))
def test_quadrature_of_power_exponential(dim, k):
    xi = log_grid(1e-3, 1e2, 96)
    sq = np.exp(-xi)[None, :]
    p = 2 * k + dim
    exact = SPHERE_AREA[dim] * math.gamma(p)
    assert radial_quadrature(xi, sq, k, dim)[0] == pytest.approx(exact, rel=1e-4)


def test_identity_at_time_zero(case):
    p, v, r = case
    d = _data(variant=v, regime=r)
    s = evolve_norm_series(p, v, d, 0, np.array([0.0, 1.0]))
    fine = d.refined()
    expected = radial_quadrature(fine.xi_grid, fine.v0_hat.squared_norm[None, :], 0, 1)[0]
    assert s.values[0] == pytest.approx(expected, rel=1e-12)
    assert s.low[0] + s.high[0] == pytest.approx(s.values[0], rel=1e-12)


def test_quadrature_converges(case):
    p, v, r = case
    s = evolve_norm_series(p, v, _data(variant=v, regime=r), 0, LONG_TIMES)
    assert s.converged and s.quad_error < 1e-3
    assert np.all(s.values > 0)
    assert len(s.to_rows()) == LONG_TIMES.size


def test_fourier_high_frequency_part_is_exponential():
    p, v, r = CASES["fourier-lt"]
    s = evolve_norm_series(p, v, _data(), 0, np.array([0.0, 10.0, 20.0, 40.0]))
    logs = np.log(s.high)
    slopes = np.diff(logs) / np.diff(s.times)
    assert np.all(slopes < -0.1)


def test_two_dimensional_gradient_slope():
    p, v, r = CASES["fourier-lt"]
    d = sample_initial_data(InitialDataSpec(dim=2), log_grid())
    fit = fit_decay_exponent(evolve_norm_series(p, v, d, 1, LONG_TIMES), WINDOW)
    assert fit.slope == pytest.approx(-1.0, abs=0.1)
    assert fit.power_law


def test_slope_drops_with_derivative_order():
    p, v, r = CASES["fourier-lt"]
    d = _data()
    sq = mode_squares(p, v, d.refined(), LONG_TIMES)
    s0 = fit_decay_exponent(evolve_norm_series(p, v, d, 0, LONG_TIMES, sq=sq), WINDOW).slope
    s1 = fit_decay_exponent(evolve_norm_series(p, v, d, 1, LONG_TIMES, sq=sq), WINDOW).slope
    assert s1 <= s0 - 0.4


def test_theorem_consistency(case):
    p, v, r = case
    s = evolve_norm_series(p, v, _data(variant=v, regime=r), 0, LONG_TIMES)
    fit = fit_decay_exponent(s, WINDOW)
    assert fit.slope <= theorem_exponent(v, r, 1, 0) + 0.05


@pytest.mark.parametrize("eta", [1e-2, 1e-3])
def test_vanishing_damping_limit(eta):
    d = _data()
    times = np.array([0.0, 1.0, 10.0, 100.0, 1000.0])
    ref = evolve_norm_series(ModelParams(tau=0.5, beta=1.0), ModelVariant.NO_HEAT, d, 0, times)
    s = evolve_norm_series(ModelParams(tau=0.5, beta=1.0, eta=eta), ModelVariant.FOURIER, d, 0, times)
    assert np.all(np.abs(s.values - ref.values) / ref.values < 5 * eta)


def test_worker_count_does_not_change_results():
    p, v, r = CASES["cattaneo-eq"]
    d = _data(variant=v, regime=r)
    times = np.array([0.0, 1.0, 100.0])
    np.testing.assert_array_equal(mode_squares(p, v, d, times, workers=1), mode_squares(p, v, d, times, workers=3))


def test_kind_must_match_variant():
    p, v, r = CASES["fourier-lt"]
    d = _data(variant=ModelVariant.CATTANEO)
    with pytest.raises(ValueError):
        evolve_norm_series(p, v, d, 0, np.array([0.0]))


def test_power_law_fit():
    t = np.logspace(0, 4, 60)
    fit = fit_power_law(t, 3 * (1 + t) ** -0.7, WINDOW)
    assert fit.slope == pytest.approx(-0.7, abs=1e-10)
    assert fit.power_law
    bad = fit_power_law(t, np.exp(-t / 1e3) * (1 + t) ** -0.7, WINDOW)
    assert not bad.power_law
    with pytest.raises(ValueError):
        fit_power_law(t, (1 + t) ** -0.7, (1e2, 1e3))
    with pytest.raises(ValueError):
        fit_power_law(t, (1 + t) ** -0.7, (1e3, 1e6))


def test_exponent_tables():
    assert theorem_exponent(ModelVariant.FOURIER, Regime.TAU_LESS_BETA, 1, 0) == -0.25
    assert theorem_exponent(ModelVariant.FOURIER, Regime.TAU_EQUALS_BETA, 1, 0) == -0.125
    assert theorem_exponent(ModelVariant.FOURIER, Regime.TAU_LESS_BETA, 2, 1) == -1.0
    assert regularity_loss_exponent(Regime.TAU_LESS_BETA, 2) == -1.0
    assert regularity_loss_exponent(Regime.TAU_EQUALS_BETA, 3) == -1.0
    with pytest.raises(ValueError):
        theorem_exponent(ModelVariant.FOURIER, Regime.TAU_GREATER_BETA, 1, 0)


def test_regularity_loss_tail_preconditions():
    fp = CASES["fourier-lt"][0]
    cp = CASES["cattaneo-lt"][0]
    grid = log_grid(1e-3, 3e3, 48)
    smooth = sample_initial_data(InitialDataSpec(profile="algebraic", tail_exponent=5.0), grid)
    with pytest.raises(ValueError):
        regularity_loss_experiment(fp, cp, smooth, 0, 2, WINDOW, 50.0)
    rough = sample_initial_data(InitialDataSpec(profile="algebraic", tail_exponent=2.0), grid)
    with pytest.raises(ValueError):
        regularity_loss_experiment(fp, cp, rough, 0, 2, WINDOW, 50.0)
    with pytest.raises(ValueError):
        regularity_loss_experiment(fp, cp, _data(), 0, 2, WINDOW, 50.0)


def test_regularity_loss_with_critical_tail():
    fp = CASES["fourier-lt"][0]
    cp = CASES["cattaneo-lt"][0]
    data = sample_initial_data(InitialDataSpec(profile="algebraic", tail_exponent=2.6), log_grid(1e-3, 3e3, 48))
    rep = regularity_loss_experiment(fp, cp, data, 0, 2, WINDOW, 1145.0)
    assert rep.method == "algebraic-tail"
    assert rep.fourier_exponential
    assert rep.theorem_consistent
    assert rep.cattaneo_fit.slope == pytest.approx(-1.05, abs=0.1)
    assert rep.to_dict()["cattaneo_regime"] == Regime.TAU_LESS_BETA.value
