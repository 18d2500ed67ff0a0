"""Characteristic polynomials, roots, Routh-Hurwitz verdicts and eigenvalue asymptotics.

The characteristic polynomial of ``Psi(|xi|)`` has real coefficients (the
``i|xi|`` factors of the Cattaneo coupling appear squared).  Closed forms
below keep the coefficients ``a``, ``gamma``, ``kappa`` general::

    Fourier  tau l^4 + (gk tau r^2 + 1) l^3 + (a^2 beta r^2 + eta^2 tau r^4 + gk r^2) l^2
             + (a^2 beta gk r^4 + a^2 r^2 + eta^2 r^4) l + a^2 gk r^4

with ``gk = gamma kappa``; the Cattaneo quintic is in :func:`raw_coefficients`.

Asymptotic expansions of the eigenvalue real parts are available for
``|xi| -> 0`` and ``|xi| -> oo`` under the normalizations ``a = 1`` and
``gamma = kappa = 1`` (Fourier) or ``gamma = kappa`` (Cattaneo), and can be
checked against extended-precision roots on a geometric ladder of ``|xi|``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import mpmath
import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import ModelParams, ModelVariant, Regime, _check_xi, check_variant, classify_regime


class RootFindingError(RuntimeError):
    """Raised when polished roots still leave a large backward error."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CharPoly:
    """Monic characteristic polynomial of ``Psi(|xi|)``.

    ``coeffs`` are in descending powers with ``coeffs[0] == 1``; the raw
    polynomial (leading coefficient ``tau`` or ``tau tau0``) is
    ``lead_scale * coeffs``.  ``normalized`` records whether the parameters sit
    at the normalizations under which the closed forms are usually quoted.
    """

    degree: int
    coeffs: np.ndarray
    xi_abs: float
    lead_scale: float
    normalized: bool = True
    is_real: bool = True

    @property
    def raw(self) -> np.ndarray:
        return self.lead_scale * self.coeffs

    def __call__(self, lam):
        return np.polyval(self.coeffs, lam)


def raw_coefficients(params: ModelParams, variant: ModelVariant, r, one=1.0) -> list:
    """Descending coefficients of ``lead * det(l I - Psi)``.

    Only ring operations are used, so ``r`` (and ``one``) may be ``mpmath``
    numbers for extended-precision work.
    """
    variant = ModelVariant(variant)
    tau, beta, eta = one * params.tau, one * params.beta, one * params.eta
    a2 = one * params.a**2
    gk = one * params.gamma * params.kappa
    r2 = r * r
    r4 = r2 * r2
    e2 = eta * eta
    if variant is not ModelVariant.CATTANEO:
        return [
            tau,
            gk * tau * r2 + 1,
            a2 * beta * r2 + e2 * tau * r4 + gk * r2,
            a2 * beta * gk * r4 + a2 * r2 + e2 * r4,
            a2 * gk * r4,
        ]
    tau0 = one * params.tau0
    tt = tau * tau0
    return [
        tt,
        tau + tau0,
        a2 * beta * r2 * tau0 + e2 * r4 * tt + gk * r2 * tau + 1,
        a2 * beta * r2 + a2 * r2 * tau0 + e2 * r4 * tau + e2 * r4 * tau0 + gk * r2,
        a2 * beta * gk * r4 + a2 * r2 + e2 * r4,
        a2 * gk * r4,
    ]


def char_poly(params: ModelParams, variant: ModelVariant, xi_abs: float) -> CharPoly:
    """Characteristic polynomial of ``Psi(|xi|)`` in monic form."""
    variant = ModelVariant(variant)
    check_variant(params, variant)
    r = _check_xi(xi_abs)
    raw = np.array(raw_coefficients(params, variant, r), dtype=float)
    lead = raw[0]
    return CharPoly(
        degree=raw.size - 1,
        coeffs=raw / lead,
        xi_abs=r,
        lead_scale=float(lead),
        normalized=params.is_normalized(variant),
    )


def _relative_residual(coeffs: np.ndarray, lam: complex) -> float:
    mag = np.polyval(np.abs(coeffs), abs(lam))
    return float(abs(np.polyval(coeffs, lam)) / mag) if mag > 0 else 0.0


def poly_roots(p: CharPoly, tol: float = 1e-10) -> np.ndarray:
    """Roots (with multiplicity) via a companion-matrix eigensolve plus one Newton step.

    The acceptance test is the relative backward error
    ``|p(l)| / sum_k |c_k| |l|^k <= tol``, which reduces to ``|p(l)| <= tol``
    times the coefficient scale for roots of modulus at most one.
    """
    coeffs = np.asarray(p.coeffs, dtype=complex if not p.is_real else float)
    n = coeffs.size - 1
    if n < 1:
        raise ValueError("a constant polynomial has no roots")
    if coeffs[0] != 1:
        raise ValueError("poly_roots expects a monic polynomial")
    companion = np.zeros((n, n), dtype=coeffs.dtype)
    companion[0, :] = -coeffs[1:]
    companion[np.arange(1, n), np.arange(n - 1)] = 1.0
    roots = np.linalg.eigvals(companion).astype(complex)
    deriv = np.polyder(coeffs)
    polished = roots.copy()
    for i, lam in enumerate(roots):
        d = np.polyval(deriv, lam)
        if d == 0:
            continue
        cand = lam - np.polyval(coeffs, lam) / d
        if np.isfinite(cand) and abs(np.polyval(coeffs, cand)) < abs(np.polyval(coeffs, lam)):
            polished[i] = cand
    worst = max(_relative_residual(coeffs, lam) for lam in polished)
    if worst > tol:
        raise RootFindingError("companion roots did not converge", worst)
    if p.is_real:
        polished = np.where(np.abs(polished.imag) <= 1e-14 * np.maximum(1.0, np.abs(polished)),
                            polished.real + 0j, polished)
    order = np.lexsort((polished.imag, polished.real))
    return polished[order]


def hurwitz_matrix(raw: Sequence[float]) -> np.ndarray:
    """Hurwitz matrix ``H[i, j] = a_{2i - j}`` (1-based) of ``a_0 l^n + ... + a_n``."""
    a = np.asarray(raw, dtype=float)
    n = a.size - 1
    h = np.zeros((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            k = 2 * i - j
            if 0 <= k <= n:
                h[i - 1, j - 1] = a[k]
    return h


def hurwitz_minors(p: CharPoly) -> np.ndarray:
    """Leading principal minors ``A_1..A_n`` of the raw polynomial's Hurwitz matrix."""
    raw = np.asarray(p.raw)
    if np.iscomplexobj(raw) and np.any(raw.imag != 0):
        raise ValueError("Hurwitz minors need real coefficients")
    raw = np.real(raw)
    if raw[0] <= 0:
        raise ValueError("Hurwitz minors need a positive leading coefficient")
    h = hurwitz_matrix(raw)
    return np.array([np.linalg.det(h[:k, :k]) for k in range(1, h.shape[0] + 1)])


def minors_eta_zero(params: ModelParams, xi_abs: float) -> np.ndarray:
    """Closed-form Hurwitz minors of the no-heat quartic (a = gamma = kappa = 1).

    ``A1 = 1 + tau r^2``, ``A2 = r^2 (tau r^2 + beta - tau + 1)``,
    ``A3 = r^4 (beta - tau)(tau r^4 + (beta + 1) r^2 + 1)``, ``A4 = r^4 A3``.
    """
    tau, beta = params.tau, params.beta
    r2 = float(xi_abs) ** 2
    a3 = r2 * r2 * (beta - tau) * (tau * r2 * r2 + (beta + 1) * r2 + 1)
    return np.array([1 + tau * r2, r2 * (tau * r2 + beta - tau + 1), a3, r2 * r2 * a3])


class Verdict(str, Enum):
    STABLE = "Stable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityVerdict:
    """Routh-Hurwitz verdict with the root-based witness ``max Re(l)``."""

    verdict: Verdict
    minors: np.ndarray
    witness: float
    roots: np.ndarray
    consistent: bool


def minor_scales(raw: Sequence[float]) -> np.ndarray:
    """Sum of the magnitudes of the terms of each leading Hurwitz minor.

    This is the permanent of ``|H_k|``; a minor far below it is zero up to
    cancellation, whatever the overall size of the coefficients.
    """
    h = np.abs(hurwitz_matrix(raw))
    out = []
    for k in range(1, h.shape[0] + 1):
        sub = h[:k, :k]
        out.append(sum(np.prod(sub[np.arange(k), perm]) for perm in itertools.permutations(range(k))))
    return np.array(out, dtype=float)


def verdict_from_minors(minors: np.ndarray, raw: np.ndarray, band: float = 1e-10) -> Verdict:
    """Stable if all minors exceed the marginal band, Unstable if one is below ``-band``.

    The band for ``A_k`` is ``band`` times the size of its terms
    (:func:`minor_scales`), so it is invariant under rescaling ``|xi|``.
    """
    bands = band * minor_scales(raw)
    if np.any(minors < -bands):
        return Verdict.UNSTABLE
    if np.any(np.abs(minors) <= bands):
        return Verdict.MARGINAL
    return Verdict.STABLE


def rh_verdict(params: ModelParams, variant: ModelVariant, xi_abs: float, band: float = 1e-10) -> StabilityVerdict:
    """Routh-Hurwitz verdict at one ``|xi|``, cross-checked with the numeric roots."""
    p = char_poly(params, variant, xi_abs)
    minors = hurwitz_minors(p)
    roots = poly_roots(p)
    witness = float(np.max(roots.real))
    if p.xi_abs == 0.0:
        verdict = Verdict.MARGINAL
    else:
        verdict = verdict_from_minors(minors, p.raw, band)
    root_tol = 1e-7 * max(1.0, float(np.max(np.abs(roots))))
    if verdict is Verdict.STABLE:
        consistent = witness < 0
    elif verdict is Verdict.UNSTABLE:
        consistent = witness > 0
    else:
        consistent = abs(witness) <= root_tol
    return StabilityVerdict(verdict, minors, witness, roots, bool(consistent))


# ---------------------------------------------------------------------------
# Asymptotic expansions


class Limit(str, Enum):
    SMALL_XI = "small"
    LARGE_XI = "large"


@dataclass(frozen=True)
class Branch:
    """Leading behaviour ``Re l ~ coefficient * |xi|^power`` with remainder ``O(|xi|^remainder)``."""

    name: str
    coefficient: float
    power: int
    remainder: int
    multiplicity: int = 1


@dataclass(frozen=True)
class EigenExpansion:
    limit: Limit
    variant: ModelVariant
    regime: Regime
    branches: List[Branch]
    side_data: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def degree(self) -> int:
        return sum(b.multiplicity for b in self.branches)


def _require_normalized(params: ModelParams, variant: ModelVariant) -> None:
    if not params.is_normalized(variant):
        raise ValueError("closed-form expansions assume a = 1 and gamma = kappa (= 1 for Fourier)")


def _expansion_case(params: ModelParams, variant: ModelVariant, regime: Optional[Regime]):
    variant = ModelVariant(variant)
    check_variant(params, variant)
    regime = classify_regime(params) if regime is None else Regime(regime)
    if regime is Regime.TAU_GREATER_BETA:
        raise ValueError("no eigenvalue expansion is available for tau > beta")
    if regime is Regime.TAU_EQUALS_BETA and params.tau != params.beta:
        raise ValueError("the tau = beta expansion needs tau == beta")
    if regime is Regime.TAU_LESS_BETA and params.tau >= params.beta:
        raise ValueError("the tau < beta expansion needs tau < beta")
    _require_normalized(params, variant)
    return variant, regime


def expansion_small_xi(params: ModelParams, variant: ModelVariant, regime: Optional[Regime] = None) -> EigenExpansion:
    """Leading real parts of the eigenvalues as ``|xi| -> 0``."""
    variant, regime = _expansion_case(params, variant, regime)
    p = params
    heat = -p.kappa**2 if variant is ModelVariant.CATTANEO else -1.0
    if regime is Regime.TAU_LESS_BETA:
        slow = Branch("lambda1,2", -(p.beta - p.tau) / 2, 2, 3, 2)
    else:
        if p.eta <= 0:
            raise ValueError("the tau = beta expansion needs eta > 0")
        factor = p.kappa**2 if variant is ModelVariant.CATTANEO else 1.0
        slow = Branch("lambda1,2", -p.eta**2 * factor / 2, 4, 5, 2)
    branches = [slow, Branch("lambda3", heat, 2, 3), Branch("lambda4", -1.0 / p.tau, 0, 2)]
    if variant is ModelVariant.CATTANEO:
        branches.append(Branch("lambda5", -1.0 / p.tau0, 0, 2))
    return EigenExpansion(Limit.SMALL_XI, variant, regime, branches)


@dataclass(frozen=True)
class SigmaRoots:
    """Roots of ``tau eta^2 tau0 s^3 + eta^2 (tau0 + tau) s^2 + (eta^2 + beta kappa^2) s + kappa^2``."""

    roots: np.ndarray
    real_root: float
    real_root_in_interval: bool
    all_negative: bool


def sigma_cubic(params: ModelParams) -> SigmaRoots:
    """Limits of the three fast Cattaneo eigenvalues as ``|xi| -> oo``.

    The real root is bracketed in ``(-1/tau - 1/tau0, 0)``; its location is
    checked, and for tau <= beta all three real parts should be negative.
    """
    p = params
    if p.eta <= 0 or p.tau0 <= 0:
        raise ValueError("sigma_cubic needs eta > 0 and tau0 > 0")
    coeffs = np.array([
        p.tau * p.eta**2 * p.tau0,
        p.eta**2 * (p.tau0 + p.tau),
        p.eta**2 + p.beta * p.kappa**2,
        p.kappa**2,
    ])
    monic = CharPoly(3, coeffs / coeffs[0], math.inf, coeffs[0])
    roots = poly_roots(monic, tol=1e-12)
    real_idx = int(np.argmin(np.abs(roots.imag)))
    real_root = float(roots[real_idx].real)
    lo = -1.0 / p.tau - 1.0 / p.tau0
    return SigmaRoots(
        roots=roots,
        real_root=real_root,
        real_root_in_interval=bool(lo < real_root < 0),
        all_negative=bool(np.all(roots.real < 0)),
    )


def expansion_large_xi(params: ModelParams, variant: ModelVariant, regime: Optional[Regime] = None) -> EigenExpansion:
    """Leading real parts of the eigenvalues as ``|xi| -> oo``."""
    variant, regime = _expansion_case(params, variant, regime)
    p = params
    if p.eta <= 0:
        raise ValueError("large-|xi| expansions need eta > 0")
    side = {}
    branches: List[Branch] = []
    if variant is not ModelVariant.CATTANEO:
        disc = 1 - 4 * p.eta**2
        root = cmath.sqrt(disc)
        if regime is Regime.TAU_LESS_BETA:
            s = math.sqrt((p.beta + p.eta**2) ** 2 - 4 * p.tau * p.eta**2)
            c1 = -(p.beta + p.eta**2 - s) / (2 * p.tau * p.eta**2)
            c2 = -(p.beta + p.eta**2 + s) / (2 * p.tau * p.eta**2)
        else:
            c1, c2 = -1.0 / p.tau, -1.0 / p.eta**2
        branches = [
            Branch("lambda1", c1, 0, -1),
            Branch("lambda2", c2, 0, -1),
            Branch("lambda3", -((1 - root) / 2).real, 2, 1),
            Branch("lambda4", -((1 + root) / 2).real, 2, 1),
        ]
        side["discriminant"] = disc
        degenerate = abs(disc) < 1e-3
        return EigenExpansion(Limit.LARGE_XI, variant, regime, branches, side, degenerate)

    if regime is Regime.TAU_LESS_BETA:
        slow = -((p.beta - p.tau) * p.tau0**2 + p.kappa**2 * p.tau**2) / (2 * p.tau**2 * p.eta**2 * p.tau0**2)
        sig = sigma_cubic(p)
        sigmas = list(sig.roots)
        side["sigma"] = sig
    else:
        slow = -p.kappa**2 / (2 * p.eta**2 * p.tau0**2)
        inner = cmath.sqrt(p.eta**2 - 4 * p.kappa**2 * p.tau0)
        sigmas = [
            complex(-1.0 / p.tau),
            -(p.eta + inner) / (2 * p.eta * p.tau0),
            -(p.eta - inner) / (2 * p.eta * p.tau0),
        ]
        side["sigma"] = sigmas
    branches = [Branch("lambda1,2", slow, -2, -3, 2)]
    for j, s in enumerate(sigmas, start=3):
        branches.append(Branch(f"lambda{j}", float(np.real(s)), 0, -1))
    return EigenExpansion(Limit.LARGE_XI, variant, regime, branches, side)


# ---------------------------------------------------------------------------
# Ladder verification


@dataclass(frozen=True)
class BranchCheck:
    name: str
    stated_order: int
    measured_slope: float
    exact: bool
    coefficient: float
    measured_coefficient: float
    coefficient_error: float
    order_ok: bool
    coefficient_ok: bool

    @property
    def passed(self) -> bool:
        return self.order_ok and self.coefficient_ok


@dataclass(frozen=True)
class ExpansionReport:
    limit: Limit
    ladder: np.ndarray
    branches: List[BranchCheck]
    crossings: List[float]
    degenerate: bool

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.branches) and not self.crossings


def default_ladder(limit: Limit, points: int = 12) -> np.ndarray:
    """Geometric ladder ``2^-4 .. 2^-15`` (small) or ``2^4 .. 2^15`` (large)."""
    k = np.arange(4, 4 + points, dtype=float)
    return 2.0 ** (-k) if Limit(limit) is Limit.SMALL_XI else 2.0**k


def _mp_roots(params: ModelParams, variant: ModelVariant, r: float, dps: int) -> list:
    with mpmath.workdps(dps):
        coeffs = raw_coefficients(params, variant, mpmath.mpf(r), mpmath.mpf(1))
        roots = mpmath.polyroots(coeffs, maxsteps=400, extraprec=4 * dps)
        return [mpmath.mpc(z) for z in roots]


def _assign(predicted: np.ndarray, real_parts: np.ndarray):
    """Slot -> root index, matching signed magnitudes on a log scale."""
    cost = np.empty((predicted.size, real_parts.size))
    for s, pr in enumerate(predicted):
        for j, re in enumerate(real_parts):
            if pr == 0 or re == 0 or np.sign(pr) != np.sign(re):
                cost[s, j] = 1e6 + abs(re - pr)
            else:
                cost[s, j] = abs(math.log(abs(re)) - math.log(abs(pr)))
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(predicted.size, dtype=int)
    assignment[rows] = cols
    return assignment, cost


def verify_expansion(expansion: EigenExpansion, params: ModelParams, variant: ModelVariant,
                     xi_ladder: Optional[Sequence[float]] = None, dps: int = 60,
                     slope_slack: float = 0.2, coefficient_rtol: float = 0.01) -> ExpansionReport:
    """Compare predicted leading real parts with extended-precision roots.

    For every branch, the remainder ``|Re l_numeric - c |xi|^p|`` is fitted
    against ``|xi|`` on a log-log scale.  A remainder stated as ``O(|xi|^q)``
    means the fitted slope is at least ``q - slack`` as ``|xi| -> 0`` and at
    most ``q + slack`` as ``|xi| -> oo``.  The leading coefficient is
    compared at the most asymptotic ladder point.
    """
    variant = ModelVariant(variant)
    limit = expansion.limit
    ladder = np.array(default_ladder(limit) if xi_ladder is None else xi_ladder, dtype=float)
    if ladder.size < 3 or np.any(ladder <= 0):
        raise ValueError("the ladder needs at least three positive |xi| values")
    # walk from the most asymptotic point outwards
    order = np.argsort(ladder)
    if limit is Limit.LARGE_XI:
        order = order[::-1]
    ladder = ladder[order]

    slots = []
    for b_idx, b in enumerate(expansion.branches):
        slots.extend([b_idx] * b.multiplicity)
    if len(slots) != len(raw_coefficients(params, variant, 1.0)) - 1:
        raise ValueError("branch count does not match the polynomial degree")

    slack = slope_slack + (0.5 if expansion.degenerate else 0.0)
    remainders = np.zeros((len(expansion.branches), ladder.size))
    measured_re = np.zeros((len(slots), ladder.size))
    crossings: List[float] = []
    previous = None
    with mpmath.workdps(dps):
        for i, r in enumerate(ladder):
            roots = _mp_roots(params, variant, float(r), dps)
            re_float = np.array([float(z.real) for z in roots])
            preds = np.array([expansion.branches[b].coefficient * r ** expansion.branches[b].power for b in slots])
            assignment, cost = _assign(preds, re_float)
            for s, b_idx in enumerate(slots):
                br = expansion.branches[b_idx]
                pred = mpmath.mpf(br.coefficient) * mpmath.mpf(r) ** br.power
                rem = abs(roots[assignment[s]].real - pred)
                remainders[b_idx, i] = max(remainders[b_idx, i], float(rem))
                measured_re[s, i] = re_float[assignment[s]]
            if previous is not None:
                # continuation: the log-magnitude of each slot should move by about power * log(step)
                step = math.log(r / ladder[i - 1])
                for s, b_idx in enumerate(slots):
                    expected = expansion.branches[b_idx].power * step
                    moved = math.log(abs(measured_re[s, i])) - math.log(abs(previous[s]))
                    if abs(moved - expected) > 0.5 + abs(step):
                        crossings.append(float(r))
                        break
            previous = measured_re[:, i]

    checks: List[BranchCheck] = []
    floor = 10.0 ** (-(dps - 15))
    logr = np.log(ladder)
    for b_idx, br in enumerate(expansion.branches):
        rem = remainders[b_idx]
        scale = np.abs(br.coefficient) * ladder ** br.power
        exact = bool(np.all(rem <= floor * np.maximum(1.0, scale)))
        if exact:
            slope = math.inf if limit is Limit.SMALL_XI else -math.inf
            order_ok = True
        else:
            good = rem > 0
            slope = float(np.polyfit(logr[good], np.log(rem[good]), 1)[0])
            if limit is Limit.SMALL_XI:
                order_ok = slope >= br.remainder - slack
            else:
                order_ok = slope <= br.remainder + slack
        slot_idx = [s for s, b in enumerate(slots) if b == b_idx]
        end = ladder[0]
        measured = float(np.mean(measured_re[slot_idx, 0])) / end ** br.power
        err = abs(measured - br.coefficient) / abs(br.coefficient) if br.coefficient != 0 else abs(measured)
        checks.append(BranchCheck(br.name, br.remainder, slope, exact, br.coefficient, measured, err,
                                  bool(order_ok), bool(err <= coefficient_rtol)))
    return ExpansionReport(limit, ladder, checks, sorted(set(crossings)), expansion.degenerate)
