"""Sobolev norms of radially symmetric Cauchy-problem solutions and their decay exponents.

Because the generator depends on ``|xi|`` alone, a radially symmetric initial
observable ``V0(xi) = f(|xi|) d`` evolves mode by mode, and Plancherel turns

    ||grad^k V(t)||^2 = omega_N int r^{2k+N-1} |V(r, t)|^2 dr

into a one-dimensional quadrature.  The quadrature is the trapezoid rule in
``log r`` plus a cap ``[0, r_min]`` on which ``|V|^2`` is taken constant.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import propagate_mode, transverse_flux_factor
from .model import (
    ModelParams,
    ModelVariant,
    ModeState,
    ObservableKind,
    ObservableVector,
    Regime,
    _check_kind,
    build_generator,
    classify_regime,
    default_kind,
    observable,
    observable_matrix,
)

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
CONVERGENCE_RTOL = 1e-3
# per-mode accuracy relative to |U0|: at |xi| ~ 1e3 and t ~ 1e4 fast phases |lambda| t ~ 1e8
# cost about eps |lambda| t digits in any double-precision route
MODE_TOL = 1e-4


def log_grid(xi_min: float = 1e-3, xi_max: float = 1e2, per_decade: int = 96) -> np.ndarray:
    """Log-spaced ``|xi|`` grid including both ends."""
    if not (xi_max > xi_min > 0):
        raise ValueError("need xi_max > xi_min > 0")
    n = int(round(per_decade * math.log10(xi_max / xi_min))) + 1
    return np.logspace(math.log10(xi_min), math.log10(xi_max), n)


# ---------------------------------------------------------------------------
# Initial data


@dataclass(frozen=True)
class InitialDataSpec:
    """Radial profile ``f`` of the initial observable ``V0 = f(|xi|) d``.

    ``profile`` is ``"gaussian"`` (``exp(-r^2)``), ``"algebraic"``
    (``(1 + r)^-a`` with ``a = tail_exponent``) or ``"bump"`` (smooth, supported
    in ``support``).  ``direction`` is the unit vector ``d`` in observable
    space; by default all components get equal weight.  ``sobolev_order``
    names the ``H^s`` norm that must be finite.
    """

    profile: str = "gaussian"
    tail_exponent: Optional[float] = None
    support: Tuple[float, float] = (2.0, 4.0)
    dim: int = 1
    kind: ObservableKind = ObservableKind.V_F
    direction: Optional[Tuple[complex, ...]] = None
    sobolev_order: float = 0.0


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Sampled radial initial data.

    ``v0_hat.components`` has shape ``(len(xi_grid), m)``; for Cattaneo kinds
    the last column is the transverse heat flux amplitude.
    """

    xi_grid: np.ndarray
    v0_hat: ObservableVector
    dim: int
    tail_exponent: Optional[float]
    profile: str
    finite_norms: Dict[str, bool] = field(default_factory=dict)
    spec: Optional[InitialDataSpec] = None

    @property
    def kind(self) -> ObservableKind:
        return self.v0_hat.kind

    def refined(self) -> "SpectralData":
        """Same data on the grid with geometric midpoints inserted."""
        if self.spec is None:
            raise ValueError("refinement needs the generating InitialDataSpec")
        x = self.xi_grid
        fine = np.empty(2 * x.size - 1)
        fine[0::2] = x
        fine[1::2] = np.sqrt(x[1:] * x[:-1])
        return sample_initial_data(replace(self.spec, kind=self.kind), fine)


def observable_size(kind: ObservableKind) -> int:
    kind = ObservableKind(kind)
    return 3 + int(kind.has_velocity) + 2 * int(kind.cattaneo)


def bump(r, lo: float, hi: float) -> np.ndarray:
    """``exp(1 - w^2 / ((r-lo)(hi-r)))`` on ``(lo, hi)``, zero outside; peak value 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > lo) & (r < hi)
    half = (hi - lo) / 2
    ri = r[inside]
    out[inside] = np.exp(1.0 - half * half / ((ri - lo) * (hi - ri)))
    return out


def radial_profile(spec: InitialDataSpec, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if spec.profile == "gaussian":
        return np.exp(-r * r)
    if spec.profile == "algebraic":
        return (1.0 + r) ** (-float(spec.tail_exponent))
    if spec.profile == "bump":
        return bump(r, *spec.support)
    raise ValueError(f"unknown profile {spec.profile!r}")


def sample_initial_data(spec: InitialDataSpec, xi_grid) -> SpectralData:
    """Sample ``V0`` on ``xi_grid`` and record which norms of the data are finite.

    For an algebraic tail ``(1+r)^-a`` in ``N`` dimensions, ``a > N`` bounds the
    ``L^1`` proxy and ``a > s + N/2`` makes the ``H^s`` norm finite.
    """
    xi = np.asarray(xi_grid, dtype=float)
    if xi.ndim != 1 or xi.size < 2 or np.any(np.diff(xi) <= 0) or xi[0] <= 0:
        raise ValueError("xi_grid must be positive and strictly increasing")
    if spec.dim not in SPHERE_AREA:
        raise ValueError("dim must be 1, 2 or 3")
    kind = ObservableKind(spec.kind)
    m = observable_size(kind)
    d = np.ones(m, dtype=complex) if spec.direction is None else np.asarray(spec.direction, dtype=complex)
    if d.shape != (m,) or not np.linalg.norm(d) > 0:
        raise ValueError(f"direction must be a nonzero vector of length {m}")
    d = d / np.linalg.norm(d)
    n, s = spec.dim, spec.sobolev_order
    if spec.profile == "algebraic":
        a = spec.tail_exponent
        if a is None or not a > 0:
            raise ValueError("algebraic profile needs a positive tail_exponent")
        finite = {"L1": a > n, f"H^{s:g}": a > s + n / 2}
        if not finite[f"H^{s:g}"]:
            raise ValueError(f"tail exponent {a} gives an infinite H^{s:g} norm in {n} dimensions (need a > {s + n / 2})")
        tail = float(a)
    elif spec.profile in ("gaussian", "bump"):
        if spec.profile == "bump" and not (0 < spec.support[0] < spec.support[1]):
            raise ValueError("bump support must satisfy 0 < lo < hi")
        finite = {"L1": True, f"H^{s:g}": True}
        tail = math.inf if spec.profile == "gaussian" else None
    else:
        raise ValueError(f"unknown profile {spec.profile!r}")
    f = radial_profile(spec, xi)
    comps = f[:, None] * d[None, :]
    return SpectralData(xi, ObservableVector(kind, comps, f * f), n, tail, spec.profile, finite, spec)


# ---------------------------------------------------------------------------
# Mode evolution and quadrature


def _mode_squares(params: ModelParams, variant: ModelVariant, kind: ObservableKind, xi: float,
                  v0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``|V(xi, t)|^2`` for one mode whose initial observable is ``v0``."""
    if not np.any(v0):
        return np.zeros(times.size)
    t = observable_matrix(params, variant, xi, kind)
    mech = v0[: t.shape[0]]
    u0 = np.linalg.lstsq(t, mech, rcond=None)[0]
    qperp = float(abs(v0[-1]) ** 2) if kind.cattaneo else 0.0
    gen = build_generator(params, variant, xi)
    traj = propagate_mode(gen, ModeState.from_vector(u0, qperp), times, tol=MODE_TOL, params=params)
    if traj.degraded:
        raise RuntimeError(f"mode propagation at |xi|={xi:.4g} is inaccurate ({traj.accuracy:.2e})")
    return np.asarray(observable(params, variant, xi, traj.states, kind).squared_norm, dtype=float)


def _mode_chunk(args):
    params, variant, kind, xis, v0s, times = args
    return [_mode_squares(params, variant, kind, x, v, times) for x, v in zip(xis, v0s)]


def mode_squares(params: ModelParams, variant: ModelVariant, data: SpectralData, times,
                 workers: int = 1) -> np.ndarray:
    """``|V(xi_j, t_i)|^2`` as an array of shape ``(len(times), len(xi_grid))``."""
    variant = ModelVariant(variant)
    kind = _check_kind(variant, data.kind)
    times = np.asarray(times, dtype=float)
    comps = data.v0_hat.components
    xs = data.xi_grid
    if workers <= 1:
        cols = _mode_chunk((params, variant, kind, xs, comps, times))
    else:
        chunks = np.array_split(np.arange(xs.size), workers)
        jobs = [(params, variant, kind, xs[c], comps[c], times) for c in chunks if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cols = [col for part in pool.map(_mode_chunk, jobs) for col in part]
    return np.array(cols).T


def radial_quadrature(xi: np.ndarray, sq: np.ndarray, k: float, dim: int, mask=None) -> np.ndarray:
    """``omega_N int r^{2k+N-1} sq dr`` over the grid (rows of ``sq`` are times).

    The cap ``[0, xi[0]]`` is added with ``sq`` frozen at its first value when
    the mask includes the first grid point.
    """
    p = 2 * k + dim
    logr = np.log(xi)
    g = sq * xi**p
    if mask is not None:
        g = np.where(mask, g, 0.0)
    body = np.sum((g[..., 1:] + g[..., :-1]) * np.diff(logr) / 2, axis=-1)
    cap = sq[..., 0] * xi[0] ** p / p
    if mask is not None and not mask[0]:
        cap = 0.0 * cap
    return SPHERE_AREA[dim] * (body + cap)


@dataclass(frozen=True, eq=False)
class NormSeries:
    """``||grad^k V(t)||^2`` with its low- (``|xi| <= 1``) and high-frequency parts."""

    k: float
    times: np.ndarray
    values: np.ndarray
    low: np.ndarray
    high: np.ndarray
    quad_error: float
    converged: bool

    def to_rows(self):
        return [(t, math.sqrt(max(v, 0.0)), lo, hi) for t, v, lo, hi in zip(self.times, self.values, self.low, self.high)]


def evolve_norm_series(params: ModelParams, variant: ModelVariant, data: SpectralData, k: float, times,
                       workers: int = 1, sq: Optional[np.ndarray] = None) -> NormSeries:
    """Propagate every grid mode and integrate the ``k``-th Sobolev weight.

    ``data`` should carry its generating spec: the series is then also
    computed on the grid refined 2x, the refined values are returned and the
    relative change is the quadrature error (converged below ``1e-3``).
    ``sq`` may supply precomputed mode squares on the refined grid.
    """
    variant = ModelVariant(variant)
    times = np.asarray(times, dtype=float)
    fine = data.refined() if data.spec is not None else data
    if sq is None:
        sq = mode_squares(params, variant, fine, times, workers)
    xi = fine.xi_grid
    low_mask = xi <= 1.0
    low = radial_quadrature(xi, sq, k, data.dim, low_mask)
    high = radial_quadrature(xi, sq, k, data.dim, ~low_mask)
    total = low + high
    if fine is data:
        idx = np.arange(0, xi.size, 2)
        if idx[-1] != xi.size - 1:
            idx = np.append(idx, xi.size - 1)
    else:
        idx = np.arange(0, xi.size, 2)
    coarse = radial_quadrature(xi[idx], sq[:, idx], k, data.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(total > 0, np.abs(total - coarse) / total, 0.0)
    err = float(np.max(rel)) if rel.size else 0.0
    return NormSeries(k, times, total, low, high, err, err < CONVERGENCE_RTOL)


# ---------------------------------------------------------------------------
# Decay exponents


@dataclass(frozen=True)
class DecayExponentFit:
    """Slope of ``log ||V||`` against ``log(1 + t)`` on a window."""

    slope: float
    stderr: float
    residual: float
    window: Tuple[float, float]
    points: int
    power_law: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("slope", "stderr", "residual", "window", "points", "power_law")}


def fit_power_law(times, norms, window: Tuple[float, float], residual_limit: float = 0.05) -> DecayExponentFit:
    """Least-squares slope of ``log norms`` vs ``log(1 + t)`` over ``window``."""
    lo, hi = window
    if not (0 < lo < hi) or hi < 100 * lo * (1 - 1e-12):
        raise ValueError("fit window must span at least two decades")
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if sel.sum() < 4:
        raise ValueError("fewer than four samples in the fit window")
    if t[sel].min() > lo * 1.5 or t[sel].max() < hi / 1.5:
        raise ValueError("fit window is not covered by the sampled times")
    if np.any(y[sel] <= 0):
        raise ValueError("norms must be positive in the fit window")
    x = np.log1p(t[sel])
    ly = np.log(y[sel])
    coef, cov = np.polyfit(x, ly, 1, cov=True)
    resid = float(np.max(np.abs(ly - np.polyval(coef, x))))
    return DecayExponentFit(float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), resid, (lo, hi),
                            int(sel.sum()), resid <= residual_limit)


def fit_decay_exponent(series: NormSeries, window: Tuple[float, float], part: str = "total",
                       residual_limit: float = 0.05) -> DecayExponentFit:
    """Fit the decay exponent of ``||grad^k V||`` (half the squared-norm slope).

    ``part`` selects the full norm, its low-frequency part or its high-frequency part.
    """
    vals = {"total": series.values, "low": series.low, "high": series.high}[part]
    return fit_power_law(series.times, np.sqrt(np.maximum(vals, 0.0)), window, residual_limit)


def theorem_exponent(variant: ModelVariant, regime: Regime, dim: int, k: float) -> float:
    """Guaranteed exponent of ``||grad^k V||``: ``-N/4 - k/2`` (tau < beta) or ``-N/8 - k/4`` (tau = beta)."""
    regime = Regime(regime)
    if regime is Regime.TAU_LESS_BETA:
        return -dim / 4 - k / 2
    if regime is Regime.TAU_EQUALS_BETA:
        return -dim / 8 - k / 4
    raise ValueError("no decay for tau > beta")


def regularity_loss_exponent(regime: Regime, ell: float) -> float:
    """High-frequency exponent of the Cattaneo estimates: ``-ell/2`` (tau < beta) or ``-ell/3`` (tau = beta)."""
    regime = Regime(regime)
    if regime is Regime.TAU_LESS_BETA:
        return -ell / 2
    if regime is Regime.TAU_EQUALS_BETA:
        return -ell / 3
    raise ValueError("no decay for tau > beta")


# ---------------------------------------------------------------------------
# Regularity loss


@dataclass(frozen=True, eq=False)
class WorstCaseSeries:
    """``sup_s ||grad^k V_high(t; b_s)||^2 / ||grad^{k+ell} b_s||^2`` over dilated bumps ``b_s``."""

    times: np.ndarray
    ratio: np.ndarray
    scales: np.ndarray
    argmax_scale: np.ndarray

    @property
    def norm_ratio(self) -> np.ndarray:
        return np.sqrt(self.ratio)

    @property
    def saturated(self) -> bool:
        """True when the supremum sits at the largest scale, so the grid of scales is too short."""
        return bool(np.any(self.argmax_scale[1:] >= self.scales[-1]))


def dilated_bump_ratio(params: ModelParams, variant: ModelVariant, kind: ObservableKind, k: float, ell: float,
                       times, support: Tuple[float, float] = (2.0, 4.0), scales=None, dim: int = 1,
                       direction=None, points_per_bump: int = 48) -> WorstCaseSeries:
    """Worst-case high-frequency decay over the dilations ``b_s(r) = b(r / s)`` of a bump.

    For each scale ``s >= 1`` the bump supported in ``[s lo, s hi]`` is
    propagated and the ratio of the ``k``-norm at time ``t`` to the
    ``(k+ell)``-norm of the data is formed; its supremum over ``s`` is the
    smoothing constant of the high-frequency estimate.
    """
    variant = ModelVariant(variant)
    kind = _check_kind(variant, kind)
    times = np.asarray(times, dtype=float)
    lo, hi = support
    scales = np.logspace(0, 2.5, 51) if scales is None else np.asarray(scales, dtype=float)
    if np.any(scales * lo < 1.0):
        raise ValueError("dilated bumps must stay in |xi| >= 1")
    m = observable_size(kind)
    d = np.ones(m, dtype=complex) if direction is None else np.asarray(direction, dtype=complex)
    d = d / np.linalg.norm(d)
    best = np.zeros(times.size)
    arg = np.zeros(times.size)
    u = np.linspace(lo, hi, points_per_bump + 2)[1:-1]
    for s in scales:
        r = s * u
        f = bump(r, s * lo, s * hi)
        sq = np.array([_mode_squares(params, variant, kind, x, fx * d, times) for x, fx in zip(r, f)]).T
        num = trapezoid(sq * r ** (2 * k + dim - 1), r, axis=-1)
        den = trapezoid(f * f * r ** (2 * (k + ell) + dim - 1), r)
        ratio = num / den
        better = ratio > best
        best = np.where(better, ratio, best)
        arg = np.where(better, s, arg)
    return WorstCaseSeries(times, best, scales, arg)


@dataclass(frozen=True)
class RegularityLossReport:
    """Outcome of one regularity-loss experiment.

    ``method`` is ``"dilated-bump"`` (the Cattaneo slope is that of the worst
    case over dilations of the bump, normalized by the ``(k+ell)``-norm) or
    ``"algebraic-tail"`` (the slope of the high-frequency part for data with a
    critical algebraic tail).  ``cattaneo_fixed_ratio`` is the high-frequency
    part of the undilated data at the end of the window over its initial value.
    """

    k: float
    ell: float
    method: str
    fourier_ratio: float
    fourier_time: float
    cattaneo_fit: DecayExponentFit
    cattaneo_reference: float
    cattaneo_regime: Regime
    cattaneo_fixed_ratio: float
    comparison_exponent: float

    @property
    def fourier_exponential(self) -> bool:
        return self.fourier_ratio < math.exp(-10)

    @property
    def theorem_consistent(self) -> bool:
        return self.cattaneo_fit.slope <= self.cattaneo_reference + 0.1

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ell": self.ell,
            "method": self.method,
            "fourier_ratio": self.fourier_ratio,
            "fourier_time": self.fourier_time,
            "fourier_exponential": self.fourier_exponential,
            "cattaneo_fit": self.cattaneo_fit.to_dict(),
            "cattaneo_reference": self.cattaneo_reference,
            "cattaneo_regime": self.cattaneo_regime.value,
            "cattaneo_fixed_ratio": self.cattaneo_fixed_ratio,
            "comparison_exponent": self.comparison_exponent,
            "theorem_consistent": self.theorem_consistent,
        }


def regularity_loss_experiment(fourier_params: ModelParams, cattaneo_params: ModelParams, data: SpectralData,
                               k: float, ell: float, window: Tuple[float, float], fourier_time: float,
                               times=None, scales=None) -> RegularityLossReport:
    """Contrast exponential (Fourier) and polynomial (Cattaneo) high-frequency decay.

    The Fourier model's high-frequency part of ``data`` must fall below
    ``exp(-10)`` of its initial value by ``fourier_time``.  For the Cattaneo
    model the high-frequency ``k``-norm slope is fitted on ``window``:

    * bump data: a single compactly supported spectrum decays exponentially,
      so the slope is that of ``sup_s ||grad^k V(t; b_s)|| / ||grad^{k+ell} b_s||``
      over dilations ``b_s`` of the bump;
    * algebraic data ``(1+r)^-a`` with ``k + ell + N/2 < a <= k + ell + 1 + N/2``
      (finite ``(k+ell)``-norm, infinite ``(k+ell+1)``-norm): the slope of the
      high-frequency part itself.
    """
    k, ell = float(k), float(ell)
    if data.profile == "algebraic":
        a, n = data.tail_exponent, data.dim
        if not a > k + ell + n / 2:
            raise ValueError(f"the (k+ell)-norm of the data is infinite (need a > {k + ell + n / 2})")
        if a > k + ell + 1 + n / 2:
            raise ValueError(f"the (k+ell+1)-norm of the data is finite (need a <= {k + ell + 1 + n / 2})")
        method = "algebraic-tail"
    elif data.profile == "bump":
        method = "dilated-bump"
    else:
        raise ValueError("regularity-loss data must be a bump or an algebraic tail")
    fdata = _rekind(data, ObservableKind.V_F)
    fs = evolve_norm_series(fourier_params, ModelVariant.FOURIER, fdata, k, np.array([0.0, fourier_time]))
    f_ratio = float(fs.high[-1] / fs.high[0]) if fs.high[0] > 0 else 0.0

    c_regime = classify_regime(cattaneo_params)
    c_kind = default_kind(ModelVariant.CATTANEO, c_regime)
    cdata = _rekind(data, c_kind)
    if times is None:
        times = np.concatenate([[0.0], np.logspace(math.log10(window[0]) - 0.5, math.log10(window[1]), 36)])
    times = np.asarray(times, dtype=float)
    cs = evolve_norm_series(cattaneo_params, ModelVariant.CATTANEO, cdata, k, times)
    fixed = float(cs.high[-1] / cs.high[0]) if cs.high[0] > 0 else 0.0
    if method == "dilated-bump":
        spec = data.spec if data.spec is not None else InitialDataSpec(profile="bump")
        worst = dilated_bump_ratio(cattaneo_params, ModelVariant.CATTANEO, c_kind, k, ell, times,
                                   support=spec.support, scales=scales, dim=data.dim)
        if worst.saturated:
            raise RuntimeError("worst-case scale reached the largest dilation; extend the scales")
        fit = fit_power_law(times, worst.norm_ratio, window)
    else:
        fit = fit_decay_exponent(cs, window, part="high")
    return RegularityLossReport(k, ell, method, f_ratio, float(fourier_time), fit,
                                regularity_loss_exponent(c_regime, ell), c_regime, fixed, -ell / 2)


def _rekind(data: SpectralData, kind: ObservableKind) -> SpectralData:
    """Same radial profile with equal weights over the components of ``kind``."""
    if data.kind is ObservableKind(kind):
        return data
    f = np.sqrt(np.asarray(data.v0_hat.squared_norm, dtype=float))
    m = observable_size(kind)
    comps = f[:, None] * (np.ones(m) / math.sqrt(m))[None, :]
    spec = replace(data.spec, kind=ObservableKind(kind), direction=None) if data.spec is not None else None
    return SpectralData(data.xi_grid, ObservableVector(ObservableKind(kind), comps.astype(complex), f * f),
                        data.dim, data.tail_exponent, data.profile, dict(data.finite_norms), spec)
