import math

import numpy as np
import pytest
from scipy.linalg import expm

from mgtlab.dynamics import (
    ModePropagator,
    fitted_decay_rate,
    log_time_grid,
    propagate,
    propagate_mode,
    transverse_flux_factor,
)
from mgtlab.model import (
    Generator,
    ModelParams,
    ModelVariant,
    ModeState,
    ObservableKind,
    Regime,
    build_generator,
    mode_energy,
    observable,
)


def test_transverse_flux_factor_examples():
    assert transverse_flux_factor(0.3, 0.0) == 1.0
    assert transverse_flux_factor(0.2, 0.2 * math.log(2)) == pytest.approx(0.5)
    assert transverse_flux_factor(0.2, 1.0) == pytest.approx(math.exp(-5))
    assert transverse_flux_factor(0.2, 1.0) == pytest.approx(6.7379e-3, rel=1e-4)
    with pytest.raises(ValueError):
        transverse_flux_factor(0.0, 1.0)
    with pytest.raises(ValueError):
        transverse_flux_factor(0.2, -1.0)


def test_zero_state_stays_zero():
    p = ModelParams(tau=0.5, beta=1, eta=0.3)
    traj = propagate(p, ModelVariant.FOURIER, 1.0, ModeState.zeros(ModelVariant.FOURIER), np.linspace(0, 5, 11))
    assert not np.any(traj.values)


def test_marginal_mode_does_not_decay():
    p = ModelParams(tau=1, beta=1)
    times = np.linspace(0, 200, 4001)
    traj = propagate(p, ModelVariant.NO_HEAT, 1.0, ModeState(1, 0, 0, 0), times)
    v = observable(p, ModelVariant.NO_HEAT, 1.0, traj.states, ObservableKind.W_F).squared_norm
    assert np.max(v) < 10 * v[0] + 10
    tail = v[times > 150]
    assert np.max(tail) > 0.1 * np.max(v)


def test_matches_expm_oracle():
    p = ModelParams(tau=0.5, beta=1, eta=0.3)
    gen = build_generator(p, ModelVariant.FOURIER, 1.0)
    u0 = np.ones(4, dtype=complex)
    traj = propagate_mode(gen, ModeState.from_vector(u0), [0.0, 1.0])
    ref = expm(np.asarray(gen.entries)) @ u0
    assert np.linalg.norm(traj.values[-1] - ref) / np.linalg.norm(ref) < 1e-8
    assert traj.method == "eig" and not traj.degraded


def test_semigroup_property(rng):
    for _ in range(50):
        variant = [ModelVariant.FOURIER, ModelVariant.CATTANEO][rng.integers(2)]
        p = ModelParams(tau=rng.uniform(0.1, 2), beta=rng.uniform(0.1, 2), eta=rng.uniform(0.05, 1),
                        tau0=rng.uniform(0.05, 1) if variant is ModelVariant.CATTANEO else 0.0)
        xi = 10 ** rng.uniform(-1, 1)
        t1, t2 = sorted(rng.uniform(0.1, 3, 2))
        u0 = ModeState.from_vector(rng.standard_normal(variant.size) + 1j * rng.standard_normal(variant.size))
        gen = build_generator(p, variant, xi)
        full = propagate_mode(gen, u0, [0, t2]).values[-1]
        mid = propagate_mode(gen, u0, [0, t1]).values[-1]
        two = propagate_mode(gen, ModeState.from_vector(mid), [0, t2 - t1]).values[-1]
        assert np.linalg.norm(full - two) <= 1e-7 * max(np.linalg.norm(full), 1e-300) + 1e-12 * np.linalg.norm(u0.vector)


def test_decay_rate_matches_spectrum(rng):
    checked = 0
    while checked < 20:
        p = ModelParams(tau=rng.uniform(0.2, 1), beta=rng.uniform(1.1, 2), eta=rng.uniform(0.1, 1))
        xi = 10 ** rng.uniform(-0.5, 0.5)
        gen = build_generator(p, ModelVariant.FOURIER, xi)
        lam = np.linalg.eigvals(np.asarray(gen.entries))
        re = np.sort(np.unique(np.round(lam.real, 12)))[::-1]
        if re.size > 1 and re[0] - re[1] < 1e-3:
            continue
        rate = -float(np.max(lam.real))
        times = np.linspace(0, 30 / rate, 3000)
        u0 = ModeState.from_vector(rng.standard_normal(4) + 0j)
        traj = propagate_mode(gen, u0, times)
        fitted = fitted_decay_rate(times, np.linalg.norm(traj.values, axis=1))
        assert fitted == pytest.approx(rate, rel=0.02)
        checked += 1


@pytest.mark.parametrize("variant,params", [
    (ModelVariant.FOURIER, ModelParams(tau=0.5, beta=1, eta=0.3)),
    (ModelVariant.FOURIER, ModelParams(tau=1, beta=1, eta=0.3)),
    (ModelVariant.CATTANEO, ModelParams(tau=0.5, beta=1, eta=0.3, tau0=0.2)),
    (ModelVariant.CATTANEO, ModelParams(tau=1, beta=1, eta=0.3, tau0=0.2)),
])
def test_energy_nonincreasing(variant, params, rng):
    regime = Regime.TAU_EQUALS_BETA if params.tau == params.beta else Regime.TAU_LESS_BETA
    for xi in (0.1, 1.0, 10.0):
        u0 = ModeState.from_vector(rng.standard_normal(variant.size) + 1j * rng.standard_normal(variant.size),
                                   1.0 if variant is ModelVariant.CATTANEO else 0.0)
        traj = propagate(params, variant, xi, u0, log_time_grid(100.0))
        e = mode_energy(params, variant, regime, xi, traj.states)
        assert np.all(np.diff(e) <= 1e-9 * e[0])


def test_defective_generator_uses_fallback():
    jordan = np.array([[-1.0, 1.0, 0, 0], [0, -1.0, 0, 0], [0, 0, -2.0, 0], [0, 0, 0, -3.0]])
    gen = Generator(1.0, jordan, ModelVariant.FOURIER)
    assert not ModePropagator(gen).diagonalizable
    u0 = ModeState.from_vector(np.ones(4))
    times = np.linspace(0, 2, 21)
    traj = propagate_mode(gen, u0, times)
    assert traj.method == "rk"
    ref = np.array([expm(jordan * t) @ np.ones(4) for t in times])
    np.testing.assert_allclose(traj.values, ref, atol=1e-8)
    long = propagate_mode(gen, u0, [0.0, 1e6])
    assert long.method == "expm"


def test_near_double_root_still_accurate():
    # eta = 1/2 makes the large-|xi| heat pair collide
    p = ModelParams(tau=0.5, beta=1, eta=0.5)
    gen = build_generator(p, ModelVariant.FOURIER, 300.0)
    traj = propagate_mode(gen, ModeState.from_vector(np.ones(4)), np.linspace(0, 1e-3, 5))
    assert not traj.degraded


def test_time_validation():
    gen = build_generator(ModelParams(tau=0.5, beta=1, eta=0.3), ModelVariant.FOURIER, 1.0)
    u0 = ModeState.from_vector(np.ones(4))
    with pytest.raises(ValueError):
        propagate_mode(gen, u0, [0.5, 1.0])
    with pytest.raises(ValueError):
        propagate_mode(gen, u0, [0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        propagate_mode(gen, ModeState.from_vector(np.ones(5)), [0.0, 1.0])
    with pytest.raises(ValueError):
        propagate_mode(gen, u0, [0.0, 1.0], tol=0)


def test_transverse_flux_propagated():
    p = ModelParams(tau=0.5, beta=1, eta=0.3, tau0=0.2)
    u0 = ModeState.from_vector(np.zeros(5), qperp_sq=2.0)
    traj = propagate(p, ModelVariant.CATTANEO, 1.0, u0, [0.0, 0.1, 1.0])
    np.testing.assert_allclose(traj.qperp_sq, 2.0 * np.exp(-2 * np.array([0, 0.1, 1.0]) / 0.2))


def test_log_time_grid():
    g = log_time_grid(1e3)
    assert g[0] == 0 and g[1] == pytest.approx(1e-2) and g[-1] == pytest.approx(1e3)
    assert np.all(np.diff(g) > 0)
