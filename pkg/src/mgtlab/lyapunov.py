"""Auxiliary functionals, assembled Lyapunov functionals and pointwise decay envelopes.

Four cases are covered: Fourier or Cattaneo heat law, each with ``tau < beta``
or ``tau = beta``.  For every case a Lyapunov functional ``L`` is a weighted sum
of the energy and a few auxiliary functionals, with weights chosen so that

    dL/dt <= -c rho(|xi|) L   and   g3 w(|xi|) E <= L <= g4 w(|xi|) E,

where ``rho`` is the case's decay envelope and ``w`` its energy weight.

The weights come from the inequality chains of the energy method with Young
constants ``C = M^2 / (4 eps)``.  They are then certified: on a grid of
``|xi|`` the quadratic forms of ``L`` and ``dL/dt`` are built in extended
precision and their generalized eigenvalues checked.  Extended precision is
needed because at large ``|xi|`` the energy term dominates the auxiliary
terms by many orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy.linalg import expm

from .dynamics import Trajectory, fitted_decay_rate, propagate_mode, transverse_flux_factor
from .model import (
    ModelParams,
    ModelVariant,
    ModeState,
    ObservableKind,
    Regime,
    _check_xi,
    build_generator,
    check_state,
    check_variant,
    classify_regime,
    default_kind,
    energy_rate,
    mode_energy,
    observable,
    observable_matrix,
)


class CaseId(str, Enum):
    FOURIER_LT = "fourier-tau-lt-beta"
    FOURIER_EQ = "fourier-tau-eq-beta"
    CATTANEO_LT = "cattaneo-tau-lt-beta"
    CATTANEO_EQ = "cattaneo-tau-eq-beta"

    @property
    def cattaneo(self) -> bool:
        return self in (CaseId.CATTANEO_LT, CaseId.CATTANEO_EQ)

    @property
    def regime(self) -> Regime:
        return Regime.TAU_EQUALS_BETA if self in (CaseId.FOURIER_EQ, CaseId.CATTANEO_EQ) else Regime.TAU_LESS_BETA


def case_for(variant: ModelVariant, regime: Regime) -> CaseId:
    variant, regime = ModelVariant(variant), Regime(regime)
    if regime is Regime.TAU_GREATER_BETA:
        raise ValueError("no Lyapunov functional is available for tau > beta")
    if variant is ModelVariant.CATTANEO:
        return CaseId.CATTANEO_EQ if regime is Regime.TAU_EQUALS_BETA else CaseId.CATTANEO_LT
    return CaseId.FOURIER_EQ if regime is Regime.TAU_EQUALS_BETA else CaseId.FOURIER_LT


# ---------------------------------------------------------------------------
# Envelopes


@dataclass(frozen=True)
class DecayEnvelope:
    """Rational envelope ``rho(r) = num(r^2) / den(r^2)``.

    ``num`` and ``den`` are polynomial coefficients in ``s = r^2`` in
    ascending order; the low/high powers are read off algebraically.
    """

    case: CaseId
    num: Tuple[float, ...]
    den: Tuple[float, ...]

    def rho(self, xi_abs):
        s = np.asarray(xi_abs, dtype=float) ** 2
        out = np.polynomial.polynomial.polyval(s, self.num) / np.polynomial.polynomial.polyval(s, self.den)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = rho

    @staticmethod
    def _lowest(c):
        return next(i for i, x in enumerate(c) if x != 0)

    @staticmethod
    def _highest(c):
        return max(i for i, x in enumerate(c) if x != 0)

    @property
    def low_power(self) -> int:
        return 2 * (self._lowest(self.num) - self._lowest(self.den))

    @property
    def high_power(self) -> int:
        return 2 * (self._highest(self.num) - self._highest(self.den))


_ENVELOPES = {
    # r^2/(1+r^2)
    CaseId.FOURIER_LT: ((0.0, 1.0), (1.0, 1.0)),
    # r^4/(1+r^2+r^4)
    CaseId.FOURIER_EQ: ((0.0, 0.0, 1.0), (1.0, 1.0, 1.0)),
    # r^2/(1+r^2+r^4)
    CaseId.CATTANEO_LT: ((0.0, 1.0), (1.0, 1.0, 1.0)),
    # r^4/((1+r^2)^2 (1+r^2+r^4+r^6))
    CaseId.CATTANEO_EQ: ((0.0, 0.0, 1.0),
                         tuple(np.polynomial.polynomial.polymul((1.0, 2.0, 1.0), (1.0, 1.0, 1.0, 1.0)))),
}


def envelope(case: CaseId) -> DecayEnvelope:
    case = CaseId(case)
    num, den = _ENVELOPES[case]
    return DecayEnvelope(case, tuple(num), tuple(den))


def energy_weight(case: CaseId, xi_abs):
    """Weight ``w`` with ``L ~ w E``: 1, 1+r^2+r^4 (twice) or 1+r^2+r^4+r^6."""
    s = np.asarray(xi_abs, dtype=float) ** 2
    case = CaseId(case)
    if case is CaseId.FOURIER_LT:
        return np.ones_like(s) if np.ndim(s) else 1.0
    if case is CaseId.CATTANEO_EQ:
        return 1 + s + s * s + s**3
    return 1 + s + s * s


# ---------------------------------------------------------------------------
# Functionals (numpy route: evaluate on amplitudes)

_CASE_FUNCTIONALS = {
    CaseId.FOURIER_LT: ("E", "F1", "F2"),
    CaseId.FOURIER_EQ: ("E", "F1", "F3"),
    CaseId.CATTANEO_LT: ("E", "F1", "F2", "F3c", "F4c"),
    CaseId.CATTANEO_EQ: ("E", "F1", "F3t", "F4t"),
}


def aux_functionals(variant: ModelVariant, regime: Regime, params: ModelParams, xi_abs: float,
                    state: ModeState) -> Dict[str, np.ndarray]:
    """Energy and auxiliary functionals of the case ``(variant, regime)``.

    With ``X = v + tau w``, ``Y = u + tau v`` and ``<i xi a, q> = i r a conj(q_par)``:

    ``F1 = Re(conj(Y) X)``, ``F2 = -tau Re(conj(v) X)``, ``F3 = Re(conj(theta) X)``,
    ``F3c = tau0 Re(i r theta conj(q)) + eta tau0 r^2 Re(i r Y conj(q))``,
    ``F4c = kappa r^2 F1 + F3c``,
    ``F3t = r^2 (F3 - (tau0/kappa) Re(i r Y conj(q)))``,
    ``F4t = F3c - eta tau0 r^2 Re(i r Y conj(q)) = tau0 Re(i r theta conj(q))``.
    """
    variant = ModelVariant(variant)
    case = case_for(variant, regime)
    check_state(state, variant)
    r = _check_xi(xi_abs)
    p = params
    u, v, w, th = (np.asarray(x, dtype=complex) for x in (state.u_hat, state.v_hat, state.w_hat, state.theta_hat))
    x = v + p.tau * w
    y = u + p.tau * v
    out: Dict[str, np.ndarray] = {"E": mode_energy(p, variant, case.regime, r, state)}
    out["F1"] = np.real(np.conj(y) * x)
    if "F2" in _CASE_FUNCTIONALS[case]:
        out["F2"] = -p.tau * np.real(np.conj(v) * x)
    if case is CaseId.FOURIER_EQ:
        out["F3"] = np.real(np.conj(th) * x)
    if case.cattaneo:
        qbar = np.conj(np.asarray(state.qpar_hat, dtype=complex))
        theta_q = np.real(1j * r * th * qbar)
        disp_q = np.real(1j * r * y * qbar)
        if case is CaseId.CATTANEO_LT:
            out["F3c"] = p.tau0 * theta_q + p.eta * p.tau0 * r * r * disp_q
            out["F4c"] = p.kappa * r * r * out["F1"] + out["F3c"]
        else:
            out["F3t"] = r * r * (np.real(np.conj(th) * x) - p.tau0 / p.kappa * disp_q)
            out["F4t"] = p.tau0 * theta_q
    return out


def _case_weights(case: CaseId, weights: Dict[str, float], r: float) -> Dict[str, float]:
    """Coefficient of each functional in ``L`` at ``|xi| = r``."""
    s = r * r
    if case is CaseId.FOURIER_LT:
        rho = s / (1 + s)
        return {"E": weights["gamma0"], "F1": rho, "F2": weights["gamma1"] * rho}
    if case is CaseId.FOURIER_EQ:
        return {"E": weights["gamma0"] * (1 + s + s * s), "F1": s * s, "F3": weights["gamma1"] * s}
    if case is CaseId.CATTANEO_LT:
        return {"E": weights["gamma0"] * (1 + s + s * s), "F2": s, "F4c": weights["gamma1"]}
    return {
        "E": weights["N0"] * (1 + s + s * s + s**3),
        "F1": weights["N1"] * s * s / (1 + s) ** 2,
        "F3t": weights["N2"] / (1 + s) ** 2,
        "F4t": weights["N3"] * s / (1 + s),
    }


# ---------------------------------------------------------------------------
# Recipes


class CoefficientSelectionError(ValueError):
    """No admissible coefficients, or the certificate failed after tightening."""

    def __init__(self, message: str, xi_abs: Optional[float] = None, state: Optional[np.ndarray] = None):
        super().__init__(message)
        self.xi_abs = xi_abs
        self.state = state


@dataclass(frozen=True)
class YoungBound:
    """``|M a b| <= eps a^2 + C b^2`` with ``C = M^2 / (4 eps)``."""

    term: str
    m: float
    eps: float

    @property
    def c(self) -> float:
        return self.m**2 / (4 * self.eps)


@dataclass(frozen=True, eq=False)
class FunctionalRecipe:
    """Coefficients of one Lyapunov functional plus its certificate.

    ``rate_constant`` is half the smallest certified value of
    ``-(dL/dt) / (rho L)`` over the probe grid; ``gamma3``/``gamma4`` bound
    ``L / (w E)`` on the same grid.
    """

    case: CaseId
    params: ModelParams
    epsilons: Dict[str, float]
    weights: Dict[str, float]
    young: List[YoungBound]
    derivation: List[str]
    rate_constant: float = float("nan")
    gamma3: float = float("nan")
    gamma4: float = float("nan")
    tightenings: int = 0
    probe_xi: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "params": self.params.to_dict(),
            "epsilons": dict(self.epsilons),
            "weights": dict(self.weights),
            "young": [{"term": y.term, "M": y.m, "eps": y.eps, "C": y.c} for y in self.young],
            "derivation": list(self.derivation),
            "rate_constant": self.rate_constant,
            "gamma3": self.gamma3,
            "gamma4": self.gamma4,
            "tightenings": self.tightenings,
        }


class _Chain:
    def __init__(self):
        self.log: List[str] = []
        self.young: List[YoungBound] = []

    def require(self, ok: bool, text: str):
        if not ok:
            raise CoefficientSelectionError(f"constraint violated: {text}")
        self.log.append(text)

    def bound(self, term: str, m: float, eps: float) -> float:
        y = YoungBound(term, m, eps)
        self.young.append(y)
        self.log.append(f"Young {term}: M={m:.6g}, eps={eps:.6g}, C=M^2/(4 eps)={y.c:.6g}")
        return y.c


def _chain_fourier_lt(p: ModelParams, ch: _Chain):
    gap = p.beta - p.tau
    eps0 = eps1 = eps3 = 0.5
    gamma1 = 2.0 / (1 - eps1)
    eps2 = (1 - eps0) / (2 * gamma1)
    ch.require(0 < eps0 < 1 and 0 < eps1 < 1, f"eps0={eps0} and eps1={eps1} lie in (0, 1)")
    ch.require(gamma1 > 1 / (1 - eps1), f"gamma1={gamma1:.6g} > 1/(1-eps1)={1 / (1 - eps1):.6g}")
    ch.require(gamma1 * eps2 < 1 - eps0, f"gamma1*eps2={gamma1 * eps2:.6g} < 1-eps0={1 - eps0:.6g}")
    # F1: r^2 (beta-tau)|v||Y| and eta r^2 |theta||Y| share eps0 r^2 |Y|^2
    c_v1 = ch.bound("F1: (beta-tau) r^2 v.Y", gap, eps0 / 2)
    c_th1 = ch.bound("F1: eta r^2 theta.Y", p.eta, eps0 / 2)
    # F2: tau r^2 |Y||v|, |X||v|, eta tau r^2 |theta||v|
    c_y2 = ch.bound("F2: tau r^2 Y.v", p.tau, eps2)
    c_x2 = ch.bound("F2: X.v", 1.0, eps1)
    c_th2 = ch.bound("F2: eta tau r^2 theta.v", p.eta * p.tau, eps3)
    c2 = max(c_x2, p.tau * gap + c_y2 + c_th2)
    ch.log.append(f"C2 = max(C[X.v], tau(beta-tau) + C[Y.v] + C[theta.v]) = {c2:.6g}")
    need = max((c_v1 + gamma1 * c2) / gap, c_th1 + gamma1 * eps3)
    gamma0 = 2 * need
    ch.require(gamma0 > need, f"gamma0={gamma0:.6g} > max((C_v + gamma1 C2)/(beta-tau), C_theta + gamma1 eps3)={need:.6g}")
    return {"eps0": eps0, "eps1": eps1, "eps2": eps2, "eps3": eps3}, {"gamma0": gamma0, "gamma1": gamma1}, "gamma0"


def _chain_fourier_eq(p: ModelParams, ch: _Chain):
    eps0 = 0.5
    ch.require(p.eta > 0, "eta > 0 (needed for eps1 < eta)")
    eps1 = p.eta / 2
    gamma1 = 2.0 / (p.eta - eps1)
    eps2 = (1 - eps0) / (2 * gamma1)
    ch.require(0 < eps1 < p.eta, f"0 < eps1={eps1:.6g} < eta={p.eta:.6g}")
    ch.require(gamma1 > 1 / (p.eta - eps1), f"gamma1={gamma1:.6g} > 1/(eta-eps1)={1 / (p.eta - eps1):.6g}")
    ch.require(eps2 < (1 - eps0) / gamma1, f"eps2={eps2:.6g} < (1-eps0)/gamma1={(1 - eps0) / gamma1:.6g}")
    c1 = ch.bound("F1: eta r^2 theta.Y", p.eta, eps0)
    c3x = ch.bound("F3: r^2 theta.X", 1.0, eps1)
    c3y = ch.bound("F3: r^2 theta.Y", 1.0, eps2)
    need = max(c1, gamma1 * (p.eta + c3x), gamma1 * c3y)
    gamma0 = 2 * need
    ch.require(gamma0 > need, f"gamma0={gamma0:.6g} > max(C1, gamma1 (eta + C3x), gamma1 C3y)={need:.6g}")
    return {"eps0": eps0, "eps1": eps1, "eps2": eps2}, {"gamma0": gamma0, "gamma1": gamma1}, "gamma0"


def _chain_cattaneo_lt(p: ModelParams, ch: _Chain):
    gap = p.beta - p.tau
    k = p.kappa
    eps1 = 0.5
    eps3 = eps4 = k / 2
    gamma1 = (1 - eps1) / (2 * k)
    eps0 = gamma1 * (k - eps3) / 2
    eps2 = gamma1 * (k - eps4) / 2
    ch.require(0 < eps1 < 1, f"eps1={eps1} in (0, 1)")
    ch.require(0 < eps3 < k and 0 < eps4 < k, f"eps3={eps3:.6g}, eps4={eps4:.6g} in (0, kappa)")
    ch.require(gamma1 < (1 - eps1) / k, f"gamma1={gamma1:.6g} < (1-eps1)/kappa={(1 - eps1) / k:.6g}")
    ch.require(eps0 < gamma1 * (k - eps3), f"eps0={eps0:.6g} < gamma1 (kappa-eps3)={gamma1 * (k - eps3):.6g}")
    ch.require(eps2 < gamma1 * (k - eps4), f"eps2={eps2:.6g} < gamma1 (kappa-eps4)={gamma1 * (k - eps4):.6g}")
    c_y2 = ch.bound("F2: tau r^2 Y.v", p.tau, eps2)
    c_x2 = ch.bound("F2: X.v", 1.0, eps1)
    c_th2 = ch.bound("F2: eta tau r^2 theta.v", p.eta * p.tau, eps0)
    c_f2 = max(c_x2, p.tau * gap + c_y2, c_y2 + c_th2)
    ch.log.append(f"C_F2 = max over powers of r^2 (1+r^2+r^4) = {c_f2:.6g}")
    c_q = ch.bound("F4c: r theta.q", 1.0, eps3)
    c_yq = ch.bound("F4c: eta r^3 Y.q", p.eta, eps4 / 2)
    c_vy = ch.bound("F4c: kappa (beta-tau) r^4 v.Y", k * gap, eps4 / 2)
    need_v = (c_f2 + gamma1 * c_vy) / gap
    need_q = gamma1 * max(c_q, p.tau0 * k + c_yq)
    need = max(need_v, need_q)
    gamma0 = 2 * need
    ch.require(gamma0 > need, f"gamma0={gamma0:.6g} > max((C_F2 + gamma1 C_vY)/(beta-tau), gamma1 max(C_q, tau0 kappa + C_Yq))={need:.6g}")
    eps = {"eps0": eps0, "eps1": eps1, "eps2": eps2, "eps3": eps3, "eps4": eps4}
    return eps, {"gamma0": gamma0, "gamma1": gamma1}, "gamma0"


def _chain_cattaneo_eq(p: ModelParams, ch: _Chain):
    k = p.kappa
    ch.require(p.eta > 0, "eta > 0 (needed for eps1 < eta)")
    eps0 = 0.5
    eps1 = p.eta / 2
    eps3 = k / 2
    n1 = 1.0
    n2 = 2 * n1 / (p.eta - eps1)
    eps2 = (1 - eps0) * n1 / (2 * n2)
    n3 = 2 * max(n2 * p.eta, p.eta**2 * n1 / (4 * eps0)) / (k - eps3)
    eps4 = (n2 * (p.eta - eps1) - n1) / (2 * n3)
    ch.require(0 < eps1 < p.eta, f"0 < eps1={eps1:.6g} < eta")
    ch.require(n2 > n1 / (p.eta - eps1), f"N2={n2:.6g} > N1/(eta-eps1)={n1 / (p.eta - eps1):.6g}")
    ch.require(eps2 < (1 - eps0) * n1 / n2, f"eps2={eps2:.6g} < (1-eps0) N1/N2")
    ch.require(n3 * (k - eps3) > max(n2 * p.eta, p.eta**2 * n1 / (4 * eps0)),
               f"N3 (kappa-eps3)={n3 * (k - eps3):.6g} > max(N2 eta, N1 C(eps0))")
    ch.require(0 < eps4 < (n2 * (p.eta - eps1) - n1) / n3, f"0 < eps4={eps4:.6g} < (N2 (eta-eps1) - N1)/N3")
    ch.bound("F1: eta r^2 theta.Y", p.eta, eps0)
    c_xq = ch.bound("F3t: (kappa - tau0/kappa) r^3 X.q", abs(k - p.tau0 / k), eps1)
    c_yq = ch.bound("F3t: r^3/kappa Y.q", 1.0 / k, eps2)
    c_tq = ch.bound("F4t: r theta.q", 1.0, eps3)
    c_xq4 = ch.bound("F4t: eta tau0 r^3 X.q", p.eta * p.tau0, eps4)
    lam = n2 * max(c_xq, c_yq) + n3 * max(p.tau0 * k, c_tq, c_xq4)
    ch.log.append(f"Lambda = N2 max(C_Xq, C_Yq) + N3 max(tau0 kappa, C_thq, C_Xq4) = {lam:.6g}")
    n0 = 2 * lam
    ch.require(n0 > lam, f"N0={n0:.6g} > Lambda={lam:.6g}")
    eps = {"eps0": eps0, "eps1": eps1, "eps2": eps2, "eps3": eps3, "eps4": eps4}
    return eps, {"N0": n0, "N1": n1, "N2": n2, "N3": n3}, "N0"


_CHAINS = {
    CaseId.FOURIER_LT: _chain_fourier_lt,
    CaseId.FOURIER_EQ: _chain_fourier_eq,
    CaseId.CATTANEO_LT: _chain_cattaneo_lt,
    CaseId.CATTANEO_EQ: _chain_cattaneo_eq,
}


def _variant_of(case: CaseId, params: ModelParams) -> ModelVariant:
    if case.cattaneo:
        return ModelVariant.CATTANEO
    return ModelVariant.FOURIER if params.eta > 0 else ModelVariant.NO_HEAT


# ---------------------------------------------------------------------------
# Extended-precision certificate (second route: explicit quadratic-form matrices)


def _mp_generator(p: ModelParams, variant: ModelVariant, r):
    mp = mpmath.mp
    n = variant.size
    tau, beta, eta, a2 = mp.mpf(p.tau), mp.mpf(p.beta), mp.mpf(p.eta), mp.mpf(p.a) ** 2
    r2 = r * r
    m = mp.matrix(n, n)
    m[0, 1] = 1
    m[1, 2] = 1
    m[2, 0] = -a2 * r2 / tau
    m[2, 1] = -a2 * beta * r2 / tau
    m[2, 2] = -1 / tau
    m[2, 3] = eta * r2 / tau
    m[3, 1] = -eta * r2
    m[3, 2] = -tau * eta * r2
    if variant is ModelVariant.CATTANEO:
        tau0 = mp.mpf(p.tau0)
        m[3, 4] = -1j * mp.mpf(p.gamma) * r
        m[4, 3] = -1j * mp.mpf(p.kappa) * r / tau0
        m[4, 4] = -1 / tau0
    else:
        m[3, 3] = -mp.mpf(p.gamma) * mp.mpf(p.kappa) * r2
    return m


def _outer(f, g, c=1):
    """Hermitian matrix of ``Re(c conj(f.U) (g.U))``."""
    mp = mpmath.mp
    n = len(f)
    h = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            h[i, j] = (c * mp.conj(f[i]) * g[j] + mp.conj(c) * mp.conj(g[i]) * f[j]) / 2
    return h


def _mp_functional_matrices(case: CaseId, p: ModelParams, r) -> Dict[str, object]:
    mp = mpmath.mp
    variant = _variant_of(case, p)
    n = variant.size
    tau = mp.mpf(p.tau)

    def e(i):
        return [mp.mpf(1) if j == i else mp.mpf(0) for j in range(n)]

    ev, eth = e(1), e(3)
    ex = [a + tau * b for a, b in zip(e(1), e(2))]
    ey = [a + tau * b for a, b in zip(e(0), e(1))]
    r2 = r * r
    mats = {}
    energy = _outer(ex, ex) + r2 * mp.mpf(p.a) ** 2 * _outer(ey, ey) + _outer(eth, eth)
    if case.regime is Regime.TAU_LESS_BETA:
        energy += mp.mpf(p.a) ** 2 * tau * (mp.mpf(p.beta) - tau) * r2 * _outer(ev, ev)
    if case.cattaneo:
        eq = e(4)
        energy += mp.mpf(p.gamma) / mp.mpf(p.kappa) * mp.mpf(p.tau0) * _outer(eq, eq)
    mats["E"] = energy / 2
    mats["F1"] = _outer(ey, ex)
    mats["F2"] = -tau * _outer(ev, ex)
    mats["F3"] = _outer(eth, ex)
    if case.cattaneo:
        tau0, eta, kappa = mp.mpf(p.tau0), mp.mpf(p.eta), mp.mpf(p.kappa)
        theta_q = _outer(eq, eth, 1j * r)
        disp_q = _outer(eq, ey, 1j * r)
        mats["F3c"] = tau0 * theta_q + eta * tau0 * r2 * disp_q
        mats["F4c"] = kappa * r2 * mats["F1"] + mats["F3c"]
        mats["F3t"] = r2 * (mats["F3"] - tau0 / kappa * disp_q)
        mats["F4t"] = tau0 * theta_q
    return mats


def _mp_lyapunov_matrix(case: CaseId, weights: Dict[str, float], p: ModelParams, r):
    mats = _mp_functional_matrices(case, p, r)
    coef = _case_weights(case, {k: mpmath.mpf(v) for k, v in weights.items()}, r)
    total = None
    for name, c in coef.items():
        term = c * mats[name]
        total = term if total is None else total + term
    return total


def _mp_energy_coordinates(case: CaseId, p: ModelParams, r):
    """``K`` with ``U = K z`` and ``E = |z|^2`` on the part of state space the energy sees."""
    mp = mpmath.mp
    variant = _variant_of(case, p)
    kind = default_kind(variant, case.regime)
    tau = mp.mpf(p.tau)
    n = variant.size
    rows = []

    def e(i):
        return [mp.mpf(1) if j == i else mp.mpf(0) for j in range(n)]

    rows.append(([a + tau * b for a, b in zip(e(1), e(2))], mp.mpf(1)))
    rows.append(([r * (a + tau * b) for a, b in zip(e(0), e(1))], mp.mpf(p.a) ** 2))
    if kind.has_velocity:
        rows.append(([r * x for x in e(1)], mp.mpf(p.a) ** 2 * tau * (mp.mpf(p.beta) - tau)))
    rows.append((e(3), mp.mpf(1)))
    if case.cattaneo:
        rows.append((e(4), mp.mpf(p.gamma) / mp.mpf(p.kappa) * mp.mpf(p.tau0)))
    t = mp.matrix([row for row, _ in rows])
    d = mp.diag([mp.sqrt(wt / 2) for _, wt in rows])
    tpinv = t.H * mp.inverse(t * t.H)
    return tpinv * mp.inverse(d), d * t


def _hermitian_eigvals(a):
    a = (a + a.H) / 2
    return sorted(float(mpmath.re(x)) for x in mpmath.eigh(a, eigvals_only=True))


@dataclass(frozen=True)
class CertificatePoint:
    xi_abs: float
    gamma3: float
    gamma4: float
    rate: float  # min of -(dL/dt)/(rho L)
    worst_direction: Optional[np.ndarray] = None


def certify_point(case: CaseId, weights: Dict[str, float], params: ModelParams, xi_abs: float,
                  dps: int = 50) -> CertificatePoint:
    """Extended-precision equivalence and decay constants at one ``|xi| > 0``."""
    case = CaseId(case)
    if not xi_abs > 0:
        raise ValueError("certificates are computed at |xi| > 0")
    with mpmath.workdps(dps):
        mp = mpmath.mp
        r = mp.mpf(float(xi_abs))
        variant = _variant_of(case, params)
        lmat = _mp_lyapunov_matrix(case, weights, params, r)
        psi = _mp_generator(params, variant, r)
        k, _ = _mp_energy_coordinates(case, params, r)
        pz = k.H * lmat * k
        qfull = psi.H * lmat + lmat * psi
        qz = k.H * qfull * k
        w = mp.mpf(float(energy_weight(case, float(xi_abs))))
        eig_p = _hermitian_eigvals(pz)
        g3, g4 = eig_p[0] / float(w), eig_p[-1] / float(w)
        rho = mp.mpf(float(envelope(case).rho(float(xi_abs))))
        if eig_p[0] <= 0:
            return CertificatePoint(float(xi_abs), g3, g4, -math.inf, None)
        chol = mp.cholesky((pz + pz.H) / 2)
        ci = mp.inverse(chol)
        m = ci * (-qz) * ci.H
        m = (m + m.H) / 2
        evals, evecs = mp.eigh(m)
        idx = min(range(len(evals)), key=lambda i: evals[i])
        rate = float(mpmath.re(evals[idx]) / rho)
        direction = None
        if rate <= 0:
            z = ci.H * evecs[:, idx]
            u = k * z
            direction = np.array([complex(u[i]) for i in range(u.rows)])
        return CertificatePoint(float(xi_abs), g3, g4, rate, direction)


def default_probe_grid(points: int = 25, lo: float = 1e-3, hi: float = 1e3) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


@dataclass(frozen=True)
class Certificate:
    points: List[CertificatePoint]

    @property
    def rate(self) -> float:
        return min(p.rate for p in self.points)

    @property
    def gamma3(self) -> float:
        return min(p.gamma3 for p in self.points)

    @property
    def gamma4(self) -> float:
        return max(p.gamma4 for p in self.points)

    @property
    def ok(self) -> bool:
        return self.gamma3 > 0 and self.rate > 0

    def worst(self) -> CertificatePoint:
        return min(self.points, key=lambda p: (p.gamma3 > 0, p.rate))


def certify(case: CaseId, weights: Dict[str, float], params: ModelParams,
            probe_xi: Sequence[float]) -> Certificate:
    return Certificate([certify_point(case, weights, params, float(r)) for r in probe_xi])


def select_coefficients(params: ModelParams, variant: ModelVariant, regime: Optional[Regime] = None,
                        probe_xi: Optional[Sequence[float]] = None, max_tightening: int = 8,
                        probe_trajectories: int = 8, seed: int = 0) -> FunctionalRecipe:
    """Choose Young parameters and weights for the case, then certify them.

    The constraint chain fixes the small parameters first and the energy weight
    last (twice its lower bound).  The result is checked on ``probe_xi`` in
    extended precision and on a few random trajectories; on failure the energy
    weight is doubled, at most ``max_tightening`` times.
    """
    variant = ModelVariant(variant)
    regime = classify_regime(params) if regime is None else Regime(regime)
    case = case_for(variant, regime)
    if case.cattaneo != (variant is ModelVariant.CATTANEO):
        raise CoefficientSelectionError("variant does not match the case")
    if case.regime is Regime.TAU_EQUALS_BETA:
        if params.tau != params.beta:
            raise CoefficientSelectionError("the tau = beta functional needs tau == beta")
        if params.eta <= 0:
            raise CoefficientSelectionError("tau = beta needs eta > 0: no eps1 with 0 < eps1 < eta exists")
    elif not params.tau < params.beta:
        raise CoefficientSelectionError("the tau < beta functional needs tau < beta")
    if not params.is_normalized(variant):
        raise CoefficientSelectionError("the constraint chains assume a = 1 and gamma = kappa (= 1 for Fourier)")
    if variant is not ModelVariant.NO_HEAT:
        check_variant(params, variant)

    chain = _Chain()
    eps, weights, free = _CHAINS[case](params, chain)
    probe = tuple(float(r) for r in (default_probe_grid() if probe_xi is None else probe_xi))
    rng = np.random.default_rng(seed)
    tightenings = 0
    while True:
        cert = certify(case, weights, params, probe)
        traj_ok = True
        bad_traj = None
        if cert.ok and probe_trajectories:
            trial = FunctionalRecipe(case, params, eps, dict(weights), chain.young, list(chain.log),
                                     rate_constant=0.5 * cert.rate)
            for _ in range(probe_trajectories):
                xi = float(10 ** rng.uniform(-2, 2))
                traj = probe_trajectory(trial, xi, rng)
                rep = check_monotonicity(trial, traj, params)
                if not rep.passed:
                    traj_ok, bad_traj = False, (xi, traj.values[0])
                    break
        if cert.ok and traj_ok:
            break
        if tightenings >= max_tightening:
            worst = cert.worst()
            if bad_traj is not None and cert.ok:
                raise CoefficientSelectionError("monotonicity failed on a probe trajectory after tightening",
                                                bad_traj[0], bad_traj[1])
            raise CoefficientSelectionError(
                f"certificate failed after {tightenings} tightenings at |xi|={worst.xi_abs:.4g} "
                f"(gamma3={worst.gamma3:.3g}, rate={worst.rate:.3g})", worst.xi_abs, worst.worst_direction)
        weights[free] *= 2
        tightenings += 1
        chain.log.append(f"tightened: {free} doubled to {weights[free]:.6g}")
    chain.log.append(f"certified on {len(probe)} probe |xi| in [{min(probe):.3g}, {max(probe):.3g}]: "
                     f"gamma3={cert.gamma3:.6g}, gamma4={cert.gamma4:.6g}, min rate={cert.rate:.6g}")
    return FunctionalRecipe(case, params, eps, dict(weights), chain.young, chain.log,
                            rate_constant=0.5 * cert.rate, gamma3=cert.gamma3, gamma4=cert.gamma4,
                            tightenings=tightenings, probe_xi=probe)


# ---------------------------------------------------------------------------
# Evaluation along trajectories


def lyapunov_value(recipe: FunctionalRecipe, params: ModelParams, xi_abs: float, state: ModeState):
    """Assemble the weighted sum defining ``L`` for the recipe's case."""
    case = recipe.case
    variant = _variant_of(case, params)
    funcs = aux_functionals(variant, case.regime, params, xi_abs, state)
    total = 0.0
    for name, c in _case_weights(case, recipe.weights, float(xi_abs)).items():
        if name in funcs:
            total = total + c * funcs[name]
        else:
            raise ValueError(f"functional {name} missing for case {case.value}")
    return total


def _stencil_states(traj: Trajectory, params: ModelParams, offsets: Sequence[float]) -> List[ModeState]:
    """States at ``t_i + h`` for every sample ``t_i`` and offset ``h`` (exact propagation)."""
    entries = np.asarray(traj.generator.entries)
    out = []
    for h in offsets:
        phi = expm(entries * h)
        vals = traj.values @ phi.T
        if vals.shape[-1] == 5:
            qperp = traj.qperp_sq * math.exp(-2 * h / params.tau0)
            out.append(ModeState.from_vector(vals, qperp))
        else:
            out.append(ModeState.from_vector(vals))
    return out


def _stencil_step(traj: Trajectory) -> float:
    lam = np.linalg.eigvals(np.asarray(traj.generator.entries))
    return 1e-3 / max(1.0, float(np.max(np.abs(lam))))


def _richardson(fn: Callable[[ModeState], np.ndarray], states: List[ModeState], h: float) -> np.ndarray:
    """Five-point centered derivative from states at offsets (-2h, -h, h, 2h)."""
    m2, m1, p1, p2 = (np.asarray(fn(s)) for s in states)
    return (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h)


@dataclass(frozen=True)
class MonotonicityReport:
    case: CaseId
    xi_abs: float
    max_dldt: float          # max of (dL/dt)/L(0), centered differences
    max_dldt_exact: float    # same, exact directional derivative along Psi U
    max_margin: float        # max of (dL/dt + c rho L)/L(0)
    min_value: float         # min of L/L(0)
    rate_constant: float
    rho: float
    sampling_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return (self.sampling_ok and self.max_dldt <= self.tol and self.max_dldt_exact <= self.tol
                and self.max_margin <= self.tol and self.min_value >= -self.tol)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("xi_abs", "max_dldt", "max_dldt_exact", "max_margin", "min_value",
                                            "rate_constant", "rho", "sampling_ok", "tol")}
        d["case"] = self.case.value
        d["passed"] = self.passed
        return d


def sampling_ok(traj: Trajectory, per_period: int = 8) -> bool:
    """At least ``per_period`` samples per fastest oscillation period."""
    if traj.times.size < 3:
        return False
    imag = float(np.max(np.abs(np.linalg.eigvals(np.asarray(traj.generator.entries)).imag)))
    if imag == 0:
        return True
    return float(np.max(np.diff(traj.times))) <= 2 * math.pi / imag / per_period * (1 + 1e-9)


def check_monotonicity(recipe: FunctionalRecipe, trajectory: Trajectory, params: ModelParams,
                       tol: float = 1e-8) -> MonotonicityReport:
    """Check ``dL/dt <= tol L(0)`` and ``dL/dt <= -c rho L + tol L(0)`` along a trajectory.

    ``dL/dt`` is a five-point centered difference on a refined stencil around
    every sample (states there are obtained by exact propagation); the exact
    directional derivative ``DL(U)[Psi U]`` is reported alongside.
    """
    traj = trajectory
    xi = traj.xi_abs
    rho = envelope(recipe.case).rho(xi)
    ok = sampling_ok(traj)
    values = lyapunov_value(recipe, params, xi, traj.states)
    l0 = float(values[0])
    if l0 == 0.0 or not np.any(traj.values):
        return MonotonicityReport(recipe.case, xi, 0.0, 0.0, 0.0, 0.0, recipe.rate_constant, rho, ok, tol)
    h = _stencil_step(traj)
    stencil = _stencil_states(traj, params, (-2 * h, -h, h, 2 * h))

    def lv(s):
        return lyapunov_value(recipe, params, xi, s)

    dldt = _richardson(lv, stencil, h)
    # exact: L is quadratic, so (L(U + d V) - L(U - d V)) / (4 d) = Re(U^H P V) * 2 / 2 for V = Psi U
    entries = np.asarray(traj.generator.entries)
    vel = traj.values @ entries.T
    d = h
    plus = ModeState.from_vector(traj.values + d * vel)
    minus = ModeState.from_vector(traj.values - d * vel)
    exact = (np.asarray(lv(plus)) - np.asarray(lv(minus))) / (4 * d) * 2
    if traj.values.shape[-1] == 5:
        # the transverse flux contributes w E-weight * d/dt (tau0 |q_perp|^2 / 2) = -w |q_perp|^2
        coef = _case_weights(recipe.case, recipe.weights, xi)["E"]
        exact = exact - coef * params.gamma / params.kappa * traj.qperp_sq
    c = recipe.rate_constant if math.isfinite(recipe.rate_constant) else 0.0
    margin = dldt + c * rho * values
    return MonotonicityReport(recipe.case, xi, float(np.max(dldt) / l0), float(np.max(exact) / l0),
                              float(np.max(margin) / l0), float(np.min(values) / l0), c, rho, ok, tol)


@dataclass(frozen=True)
class EnergyIdentityReport:
    xi_abs: float
    max_residual: float   # max |dE/dt - rhs| / E(0)
    worst_time: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def check_energy_identity(variant: ModelVariant, regime: Regime, trajectory: Trajectory, params: ModelParams,
                          tol: float = 1e-6) -> EnergyIdentityReport:
    """Compare a refined centered difference of the energy with the dissipation identity."""
    traj = trajectory
    xi = traj.xi_abs
    states = traj.states
    e0 = float(np.asarray(mode_energy(params, variant, regime, xi, states))[0])
    if e0 == 0.0:
        return EnergyIdentityReport(xi, 0.0, 0.0, tol)
    h = _stencil_step(traj)
    stencil = _stencil_states(traj, params, (-2 * h, -h, h, 2 * h))
    dedt = _richardson(lambda s: mode_energy(params, variant, regime, xi, s), stencil, h)
    rhs = np.asarray(energy_rate(params, variant, regime, xi, states))
    res = np.abs(dedt - rhs) / e0
    i = int(np.argmax(res))
    return EnergyIdentityReport(xi, float(res[i]), float(traj.times[i]), tol)


def probe_trajectory(recipe: FunctionalRecipe, xi_abs: float, rng: np.random.Generator,
                     samples: int = 64) -> Trajectory:
    """Random initial state at ``|xi|``, sampled densely enough for the monotonicity check."""
    params = recipe.params
    variant = _variant_of(recipe.case, params)
    gen = build_generator(params, variant, xi_abs)
    lam = np.linalg.eigvals(np.asarray(gen.entries))
    imag = float(np.max(np.abs(lam.imag)))
    dt = 2 * math.pi / imag / 16 if imag > 0 else 0.1
    dt = min(dt, 0.5 / max(1e-12, float(np.max(np.abs(lam.real)))), 1.0)
    times = dt * np.arange(samples)
    u0 = random_state(variant, rng)
    return propagate_mode(gen, u0, times, params=params)


def random_state(variant: ModelVariant, rng: np.random.Generator, transverse: bool = True) -> ModeState:
    """Standard complex Gaussian amplitudes (plus a transverse flux for Cattaneo)."""
    n = ModelVariant(variant).size
    vec = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    qperp = float(rng.exponential()) if (n == 5 and transverse) else 0.0
    return ModeState.from_vector(vec, qperp)


# ---------------------------------------------------------------------------
# Pointwise decay


@dataclass(frozen=True)
class DecayFit:
    xi_abs: float
    rate: float          # fitted decay rate of |V|^2
    c: float             # rate / rho
    C: float             # max_t |V(t)|^2 e^{c rho t} / |V(0)|^2
    rho: float
    eigen_rate: float    # -2 max Re(lambda) over modes visible in the observable


def visible_decay_rate(params: ModelParams, variant: ModelVariant, xi_abs: float, kind: ObservableKind) -> float:
    """``-2 max Re(lambda)`` over eigenmodes with a nonzero observable image."""
    gen = build_generator(params, variant, xi_abs)
    lam, vec = np.linalg.eig(np.asarray(gen.entries))
    t = observable_matrix(params, variant, xi_abs, kind)
    seen = np.linalg.norm(t @ vec, axis=0) > 1e-8 * np.linalg.norm(vec, axis=0)
    return float(-2 * np.max(lam.real[seen]))


def decay_trajectory(params: ModelParams, variant: ModelVariant, xi_abs: float, u0: ModeState,
                     kind: ObservableKind, decades: float = 6.0, samples: int = 800) -> Trajectory:
    """Uniformly sampled trajectory long enough for ``|V|^2`` to drop by ``10^-decades``."""
    rate = visible_decay_rate(params, variant, xi_abs, kind)
    if not rate > 0:
        raise ValueError("the observable does not decay at this |xi|")
    t_end = decades * math.log(10) / rate
    gen = build_generator(params, variant, xi_abs)
    return propagate_mode(gen, u0, np.linspace(0.0, t_end, samples), params=params)


def pointwise_decay_fit(trajectory: Trajectory, env: DecayEnvelope, params: ModelParams,
                        variant: ModelVariant, kind: Optional[ObservableKind] = None) -> DecayFit:
    """Fit ``|V(t)|^2 <= C exp(-c rho t) |V(0)|^2`` on one trajectory.

    The rate is fitted to an upper envelope of ``log |V|^2`` (peaks rather
    than raw samples, so oscillations do not bias it); ``C`` is the smallest
    constant making the bound hold at every sample.
    """
    variant = ModelVariant(variant)
    kind = default_kind(variant, env.case.regime) if kind is None else ObservableKind(kind)
    xi = trajectory.xi_abs
    sq = np.asarray(observable(params, variant, xi, trajectory.states, kind).squared_norm)
    if sq[0] == 0:
        raise ValueError("zero initial observable")
    rate = fitted_decay_rate(trajectory.times, sq / sq[0])
    rho = env.rho(xi)
    c = rate / rho
    with np.errstate(over="ignore"):
        bound = np.log(sq / sq[0], where=sq > 0, out=np.full(sq.shape, -np.inf)) + c * rho * trajectory.times
    big_c = float(np.exp(np.max(bound)))
    return DecayFit(xi, rate, c, big_c, rho, visible_decay_rate(params, variant, xi, kind))
