"""Exact propagation of single Fourier modes, ``U(t) = exp(t Psi) U0``.

The primary route diagonalizes ``Psi`` once and applies ``exp(l t)`` per
eigenvalue, which is exact up to rounding for any set of sample times.  When
the eigenvector matrix is ill-conditioned (a near-defective spectrum, e.g.
colliding roots) the mode is integrated with an embedded Runge-Kutta pair, or
with scaling-and-squaring matrix exponentials if the problem is too stiff for
an explicit integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .model import Generator, ModelParams, ModelVariant, ModeState, build_generator

EIGVEC_COND_LIMIT = 1e8
# max |lambda| * T above which explicit RK is too slow; expm is used instead
RK_STIFFNESS_LIMIT = 1e5


def transverse_flux_factor(tau0: float, t) -> np.ndarray:
    """Amplitude factor ``exp(-t / tau0)`` of the decoupled transverse heat flux.

    Squared magnitudes decay with the square of this factor.
    """
    if not tau0 > 0:
        raise ValueError(f"tau0 must be positive, got {tau0!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    out = np.exp(-t / tau0)
    return float(out) if out.ndim == 0 else out


def log_time_grid(t_max: float, t_min: float = 1e-2, per_decade: int = 64) -> np.ndarray:
    """``0`` followed by log-spaced times in ``[t_min, t_max]``."""
    if not (t_max > t_min > 0):
        raise ValueError("need t_max > t_min > 0")
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    return np.concatenate([[0.0], np.logspace(math.log10(t_min), math.log10(t_max), n)])


class ModePropagator:
    """Cached eigendecomposition of one generator."""

    def __init__(self, gen: Generator):
        entries = np.asarray(gen.entries)
        if not np.all(np.isfinite(entries)):
            raise ValueError("generator has non-finite entries")
        self.gen = gen
        self.eigvals, self.eigvecs = np.linalg.eig(entries)
        self.cond = float(np.linalg.cond(self.eigvecs))
        self.diagonalizable = self.cond <= EIGVEC_COND_LIMIT

    def apply(self, u0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """States at ``times`` for one or several initial vectors (last axis = components)."""
        coeff = np.linalg.solve(self.eigvecs, np.asarray(u0, dtype=complex).T).T
        phase = np.exp(np.multiply.outer(np.asarray(times, dtype=float), self.eigvals))
        if coeff.ndim == 1:
            return (phase * coeff) @ self.eigvecs.T
        return np.einsum("tk,bk,jk->btj", phase, coeff, self.eigvecs)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of one mode.

    ``values[i]`` is the state vector at ``times[i]``; ``qperp_sq[i]`` the
    squared transverse flux (zero outside the Cattaneo variant).
    """

    xi_abs: float
    times: np.ndarray
    values: np.ndarray
    qperp_sq: np.ndarray
    generator: Generator
    method: str
    accuracy: float
    tol: float

    @property
    def degraded(self) -> bool:
        return not self.accuracy <= self.tol

    @property
    def states(self) -> ModeState:
        return ModeState.from_vector(self.values, self.qperp_sq if self.values.shape[-1] == 5 else 0.0)

    def state(self, i: int) -> ModeState:
        return self.states[i]

    def __len__(self) -> int:
        return self.times.size


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if times[0] != 0.0:
        raise ValueError("times must start at 0")
    if np.any(np.diff(times) <= 0) or not np.all(np.isfinite(times)):
        raise ValueError("times must be finite and strictly increasing")
    return times


def _expm_states(entries: np.ndarray, u0: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.array([expm(entries * t) @ u0 for t in times])


def propagate_mode(gen: Generator, u0: ModeState, times, tol: float = 1e-8,
                   params: Optional[ModelParams] = None) -> Trajectory:
    """Propagate ``u0`` under ``gen`` and sample at ``times`` (starting at 0).

    ``params`` supplies ``tau0`` for the transverse heat flux of Cattaneo
    states; it is only needed when ``u0.qperp_sq`` is nonzero.
    The accuracy estimate is the deviation from a scaling-and-squaring
    ``expm`` at the last sample time, relative to ``|u0|``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    times = _check_times(times)
    entries = np.asarray(gen.entries)
    x0 = np.asarray(u0.vector, dtype=complex)
    if x0.shape != (gen.size,):
        raise ValueError(f"initial state has shape {x0.shape}, generator is {gen.size}x{gen.size}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state has non-finite entries")
    qperp0 = float(np.asarray(u0.qperp_sq)) if u0.qperp_sq is not None else 0.0
    if gen.size == 5:
        if qperp0 > 0 and params is None:
            raise ValueError("params (for tau0) are needed to propagate a transverse heat flux")
        qperp = qperp0 * transverse_flux_factor(params.tau0, times) ** 2 if qperp0 > 0 else np.zeros_like(times)
    else:
        qperp = np.zeros_like(times)

    norm0 = float(np.linalg.norm(x0))
    if norm0 == 0.0:
        values = np.zeros((times.size, gen.size), dtype=complex)
        return Trajectory(gen.xi_abs, times, values, qperp, gen, "eig", 0.0, tol)

    prop = ModePropagator(gen)
    if prop.diagonalizable:
        values = prop.apply(x0, times)
        method = "eig"
    else:
        stiffness = float(np.max(np.abs(prop.eigvals))) * times[-1]
        if stiffness <= RK_STIFFNESS_LIMIT and times[-1] > 0:
            sol = solve_ivp(lambda _t, y: entries @ y, (0.0, times[-1]), x0, method="DOP853",
                            t_eval=times, rtol=tol * 1e-2, atol=tol * 1e-3 * norm0)
            if not sol.success:
                raise RuntimeError(f"Runge-Kutta fallback failed: {sol.message}")
            values = sol.y.T
            method = "rk"
        else:
            values = _expm_states(entries, x0, times)
            method = "expm"
    reference = expm(entries * times[-1]) @ x0
    accuracy = float(np.linalg.norm(values[-1] - reference) / norm0)
    return Trajectory(gen.xi_abs, times, values, qperp, gen, method, accuracy, tol)


def propagate(params: ModelParams, variant: ModelVariant, xi_abs: float, u0: ModeState, times,
              tol: float = 1e-8) -> Trajectory:
    """Convenience wrapper: build the generator and propagate."""
    gen = build_generator(params, variant, xi_abs)
    return propagate_mode(gen, u0, times, tol, params)


def fitted_decay_rate(times: np.ndarray, values: np.ndarray, floor: float = 1e-280) -> float:
    """Exponential decay rate of an upper envelope of ``values`` (positive = decaying).

    ``values`` is a nonnegative series (e.g. ``|U(t)|``).  Oscillations are
    removed by taking the running maximum from the right, then a line is
    fitted to the log of that envelope over the second half of the window.
    """
    times = np.asarray(times, dtype=float)
    vals = np.asarray(values, dtype=float)
    env = np.maximum.accumulate(vals[::-1])[::-1]
    keep = env > floor
    t, env = times[keep], env[keep]
    if t.size < 4:
        raise ValueError("not enough positive samples to fit a decay rate")
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    slope = np.polyfit(t[half], np.log(env[half]), 1)[0]
    return float(-slope)
