import numpy as np
import pytest
from hypothesis import given, strategies as st

from mgtlab.model import (
    ModelParams,
    ModelVariant,
    ModeState,
    ObservableKind,
    Regime,
    build_generator,
    check_variant,
    classify_regime,
    default_kind,
    energy_matrix,
    energy_rate,
    equivalence_constants,
    hermitian_matrix,
    mode_energy,
    observable,
    observable_matrix,
)

pos = st.floats(0.05, 5.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(tau=0, beta=1)
    with pytest.raises(ValueError):
        ModelParams(tau=1, beta=1, eta=-0.1)
    with pytest.raises(ValueError):
        ModelParams(tau=1, beta=1, dim=4)
    with pytest.raises(ValueError):
        ModelParams(tau=float("nan"), beta=1)
    assert ModelParams(tau=1, beta=2).with_(eta=0.3).eta == 0.3


def test_variant_consistency():
    check_variant(ModelParams(tau=1, beta=2), ModelVariant.NO_HEAT)
    with pytest.raises(ValueError):
        check_variant(ModelParams(tau=1, beta=2), ModelVariant.FOURIER)
    with pytest.raises(ValueError):
        check_variant(ModelParams(tau=1, beta=2, eta=0.1), ModelVariant.CATTANEO)
    check_variant(ModelParams(tau=1, beta=2, eta=0.1, tau0=0.3), ModelVariant.CATTANEO)


def test_regime_classification():
    assert classify_regime(ModelParams(tau=0.5, beta=1)) is Regime.TAU_LESS_BETA
    assert classify_regime(ModelParams(tau=1, beta=1)) is Regime.TAU_EQUALS_BETA
    assert classify_regime(ModelParams(tau=1.5, beta=1)) is Regime.TAU_GREATER_BETA
    assert classify_regime(ModelParams(tau=1 + 1e-9, beta=1), tie_tol=1e-6) is Regime.TAU_EQUALS_BETA


def test_generator_rows_hand_checked():
    p = ModelParams(tau=0.5, beta=2.0, eta=0.3, a=1.5, gamma=2.0, kappa=0.7)
    psi = np.asarray(build_generator(p, ModelVariant.FOURIER, 2.0).entries)
    r2 = 4.0
    expected = np.array([
        [0, 1, 0, 0],
        [0, 0, 1, 0],
        [-2.25 * r2 / 0.5, -2.25 * 2.0 * r2 / 0.5, -1 / 0.5, 0.3 * r2 / 0.5],
        [0, -0.3 * r2, -0.5 * 0.3 * r2, -2.0 * 0.7 * r2],
    ])
    np.testing.assert_allclose(psi, expected)
    pc = p.with_(tau0=0.4)
    psc = np.asarray(build_generator(pc, ModelVariant.CATTANEO, 2.0).entries)
    assert psc[3, 4] == pytest.approx(-1j * 2.0 * 2.0)
    assert psc[4, 3] == pytest.approx(-1j * 0.7 * 2.0 / 0.4)
    assert psc[4, 4] == pytest.approx(-1 / 0.4)
    assert psc[3, 3] == 0


def test_invariant_direction_at_tau_equals_beta():
    # (-tau, 1, -1/tau, 0) is an eigenvector with eigenvalue -1/tau, invisible to W observables
    p = ModelParams(tau=0.8, beta=0.8, eta=0.4)
    psi = np.asarray(build_generator(p, ModelVariant.FOURIER, 1.7).entries)
    d = np.array([-0.8, 1.0, -1 / 0.8, 0.0])
    np.testing.assert_allclose(psi @ d, -d / 0.8, atol=1e-12)
    t = observable_matrix(p, ModelVariant.FOURIER, 1.7, ObservableKind.W_F)
    np.testing.assert_allclose(t @ d, 0, atol=1e-12)
    assert mode_energy(p, ModelVariant.FOURIER, Regime.TAU_EQUALS_BETA, 1.7, ModeState.from_vector(d)) == pytest.approx(0)


def test_observable_includes_transverse_flux():
    p = ModelParams(tau=0.5, beta=1, eta=0.5, tau0=0.2)
    s = ModeState(0, 0, 0, 0, 0, qperp_sq=4.0)
    o = observable(p, ModelVariant.CATTANEO, 1.0, s, ObservableKind.V_C)
    assert o.squared_norm == pytest.approx(4.0)
    assert o.components.shape == (6,)


def _random_state(rng, n, qperp=0.0):
    return ModeState.from_vector(rng.standard_normal(n) + 1j * rng.standard_normal(n), qperp)


@given(tau=pos, gap=st.floats(0.0, 3.0), eta=st.floats(0.0, 2.0), xi=st.floats(0.01, 20.0), seed=st.integers(0, 999))
def test_energy_rate_matches_generator(tau, gap, eta, xi, seed):
    # dE/dt = 2 Re(U^H G Psi U) equals the stated dissipation
    beta = tau + gap
    p = ModelParams(tau=tau, beta=beta, eta=eta, gamma=1.3, kappa=0.6)
    variant = ModelVariant.FOURIER if eta > 0 else ModelVariant.NO_HEAT
    regime = Regime.TAU_EQUALS_BETA if gap == 0 else Regime.TAU_LESS_BETA
    g = energy_matrix(p, variant, regime, xi)
    psi = np.asarray(build_generator(p, variant, xi).entries)
    u = _random_state(np.random.default_rng(seed), 4)
    x = u.vector
    lhs = 2 * np.real(x.conj() @ g @ psi @ x)
    rhs = energy_rate(p, variant, regime, xi, u)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * (1 + abs(rhs)) * (1 + xi**2))


@given(tau=pos, gap=st.floats(0.0, 3.0), eta=st.floats(0.05, 2.0), tau0=pos, xi=st.floats(0.01, 20.0),
       seed=st.integers(0, 999))
def test_cattaneo_energy_rate_matches_generator(tau, gap, eta, tau0, xi, seed):
    p = ModelParams(tau=tau, beta=tau + gap, eta=eta, tau0=tau0, gamma=0.7, kappa=1.9)
    regime = Regime.TAU_EQUALS_BETA if gap == 0 else Regime.TAU_LESS_BETA
    g = energy_matrix(p, ModelVariant.CATTANEO, regime, xi)
    psi = np.asarray(build_generator(p, ModelVariant.CATTANEO, xi).entries)
    u = _random_state(np.random.default_rng(seed), 5)
    x = u.vector
    lhs = 2 * np.real(x.conj() @ g @ psi @ x)
    rhs = energy_rate(p, ModelVariant.CATTANEO, regime, xi, u)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * (1 + xi**2) * np.sum(np.abs(x) ** 2))


def test_hermitian_matrix_recovers_known_matrix(rng):
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    p = a + a.conj().T
    form = lambda x: np.real(np.einsum("mi,ij,mj->m", x.conj(), p, x))
    np.testing.assert_allclose(hermitian_matrix(form, 4), p, atol=1e-12)


@pytest.mark.parametrize("variant,regime,params", [
    (ModelVariant.FOURIER, Regime.TAU_LESS_BETA, ModelParams(tau=0.5, beta=1, eta=0.3)),
    (ModelVariant.FOURIER, Regime.TAU_EQUALS_BETA, ModelParams(tau=1, beta=1, eta=0.3)),
    (ModelVariant.CATTANEO, Regime.TAU_LESS_BETA, ModelParams(tau=0.5, beta=1, eta=0.3, tau0=0.2)),
    (ModelVariant.CATTANEO, Regime.TAU_EQUALS_BETA, ModelParams(tau=1, beta=1, eta=0.3, tau0=0.2)),
])
def test_equivalence_constants_sandwich(variant, regime, params, rng):
    kind = default_kind(variant, regime)
    for xi in (0.1, 1.0, 10.0):
        c1, c2 = equivalence_constants(params, variant, regime, xi)
        assert 0 < c1 <= c2
        for _ in range(50):
            s = _random_state(rng, variant.size, float(rng.exponential()) if variant.size == 5 else 0.0)
            e = mode_energy(params, variant, regime, xi, s)
            v2 = observable(params, variant, xi, s, kind).squared_norm
            assert c1 * v2 * (1 - 1e-10) <= e <= c2 * v2 * (1 + 1e-10)


def test_energy_rejects_tau_above_beta():
    with pytest.raises(ValueError):
        mode_energy(ModelParams(tau=2, beta=1), ModelVariant.NO_HEAT, Regime.TAU_GREATER_BETA, 1.0,
                    ModeState.zeros(ModelVariant.NO_HEAT))


def test_state_shape_checks():
    with pytest.raises(ValueError):
        ModeState.from_vector(np.zeros(3))
    with pytest.raises(ValueError):
        ModeState.from_vector(np.zeros(4), qperp_sq=1.0)
    with pytest.raises(ValueError):
        mode_energy(ModelParams(tau=0.5, beta=1, eta=0.2, tau0=0.1), ModelVariant.CATTANEO, Regime.TAU_LESS_BETA,
                    1.0, ModeState.zeros(ModelVariant.FOURIER))


def test_generator_examples():
    psi = np.asarray(build_generator(ModelParams(tau=1, beta=2, eta=0.5), ModelVariant.FOURIER, 1.0).entries)
    np.testing.assert_allclose(psi[2], [-1, -2, -1, 0.5])
    np.testing.assert_allclose(psi[3], [0, -0.5, -0.5, -1])
    psi0 = np.asarray(build_generator(ModelParams(tau=0.4, beta=2, eta=0.5), ModelVariant.FOURIER, 0.0).entries)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(psi0).real), [-2.5, 0, 0, 0], atol=1e-12)
    assert np.all(np.isreal(psi0))


def test_cattaneo_generator_matches_char_poly_by_determinants():
    # independent oracle: fit det(l I - Psi) sampled at 6 points
    from mgtlab.spectral import char_poly

    p = ModelParams(tau=0.5, beta=1, eta=0.3, tau0=0.2)
    psi = np.asarray(build_generator(p, ModelVariant.CATTANEO, 2.0).entries)
    lams = np.array([-2.0, -1.0, 0.0, 0.5, 1.0, 3.0])
    dets = np.array([np.linalg.det(l * np.eye(5) - psi) for l in lams])
    fitted = np.real(np.polyfit(lams, dets, 5))
    np.testing.assert_allclose(fitted, char_poly(p, ModelVariant.CATTANEO, 2.0).coeffs, rtol=1e-10, atol=1e-10)
    off = psi[3, 4], psi[4, 3]
    assert all(z.real == 0 and z.imag != 0 for z in off)


def test_observable_examples():
    p = ModelParams(tau=1, beta=2, eta=0.5)
    s = ModeState(0, 0, 0, 1)
    assert observable(p, ModelVariant.FOURIER, 3.0, s, ObservableKind.V_F).squared_norm == pytest.approx(1)
    s = ModeState(1, 1, 0, 0)
    assert observable(p, ModelVariant.FOURIER, 1.0, s, ObservableKind.V_F).squared_norm == pytest.approx(6)
    tau = 0.7
    s = ModeState(0, 1, 0, 0)
    w = observable(ModelParams(tau=tau, beta=tau, eta=0.5), ModelVariant.FOURIER, 1.0, s, ObservableKind.W_F)
    assert w.squared_norm == pytest.approx(1 + tau**2)
    assert w.components.shape == (3,)


def test_energy_examples():
    s = ModeState(0, 1, 0, 0)
    assert mode_energy(ModelParams(tau=1, beta=1, eta=0.3), ModelVariant.FOURIER, Regime.TAU_EQUALS_BETA, 1.0,
                       s) == pytest.approx(1)
    assert mode_energy(ModelParams(tau=0.5, beta=1, eta=0.3), ModelVariant.FOURIER, Regime.TAU_LESS_BETA, 2.0,
                       s) == pytest.approx(1.5)
    assert mode_energy(ModelParams(tau=0.5, beta=1, eta=0.3), ModelVariant.FOURIER, Regime.TAU_LESS_BETA, 2.0,
                       ModeState.zeros(ModelVariant.FOURIER)) == 0
