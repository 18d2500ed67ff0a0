"""Parameters, per-mode states, generator matrices, observables and energies.

After a Fourier transform in space, the SLS/MGT equation coupled to heat
conduction becomes, for every frequency vector xi, a small linear ODE system
``dU/dt = Psi(|xi|) U``.  The state is ``U = (u, v, w, theta)`` with
``v = u_t`` and ``w = u_tt``; the Cattaneo law adds the longitudinal heat-flux
amplitude ``q_par = (xi . q) / |xi|``.  The transverse part of the heat flux
decouples (it only relaxes, ``tau0 q_perp' + q_perp = 0``) and is carried as
a nonnegative squared magnitude ``qperp_sq`` next to the 5-component state.

Everything here broadcasts: the components of a :class:`ModeState` may be
scalars or equally shaped arrays (for instance a whole trajectory).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

ArrayLike = Union[complex, float, np.ndarray]


class ModelVariant(str, Enum):
    """Which heat law (if any) is coupled to the viscoelastic equation."""

    NO_HEAT = "noheat"
    FOURIER = "fourier"
    CATTANEO = "cattaneo"

    @property
    def size(self) -> int:
        return 5 if self is ModelVariant.CATTANEO else 4


class Regime(str, Enum):
    """Position of the relaxation time relative to the viscoelastic damping."""

    TAU_LESS_BETA = "tau-lt-beta"
    TAU_EQUALS_BETA = "tau-eq-beta"
    TAU_GREATER_BETA = "tau-gt-beta"


class ObservableKind(str, Enum):
    """The four observable vectors whose norms the decay theorems control.

    ``V_F``/``V_C`` are used when tau < beta and contain ``|xi| v``;
    ``W_F``/``W_C`` are used when tau = beta and drop that component.
    """

    V_F = "V_F"
    W_F = "W_F"
    V_C = "V_C"
    W_C = "W_C"

    @property
    def cattaneo(self) -> bool:
        return self in (ObservableKind.V_C, ObservableKind.W_C)

    @property
    def has_velocity(self) -> bool:
        return self in (ObservableKind.V_F, ObservableKind.V_C)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the coupled system.

    Attributes
    ----------
    tau : float
        Relaxation time of the viscoelastic equation, > 0.
    beta : float
        Viscoelastic damping, > 0.
    eta : float
        Thermal coupling strength, >= 0.
    a : float
        Wave speed, > 0.
    gamma, kappa : float
        Heat-flux divergence and temperature-gradient coefficients, > 0.
    tau0 : float
        Heat-flux relaxation time (0 for the Fourier law), >= 0.
    dim : int
        Space dimension N in {1, 2, 3}.
    """

    tau: float
    beta: float
    eta: float = 0.0
    a: float = 1.0
    gamma: float = 1.0
    kappa: float = 1.0
    tau0: float = 0.0
    dim: int = 1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "dim":
                if isinstance(value, bool) or int(value) != value or value not in (1, 2, 3):
                    raise ValueError(f"dim must be 1, 2 or 3, got {value!r}")
                object.__setattr__(self, "dim", int(value))
                continue
            try:
                value = float(value)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{f.name} must be a real number, got {value!r}") from exc
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, value)
        for name in ("tau", "beta", "a", "gamma", "kappa"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("eta", "tau0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def is_normalized(self, variant: ModelVariant) -> bool:
        """True under the normalizations used by the closed-form formulas.

        Fourier/no-heat: ``a = 1`` and ``gamma = kappa = 1``.
        Cattaneo: ``a = 1`` and ``gamma = kappa``.
        """
        if self.a != 1.0:
            return False
        if variant is ModelVariant.CATTANEO:
            return self.gamma == self.kappa
        return self.gamma == 1.0 and self.kappa == 1.0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def check_variant(params: ModelParams, variant: ModelVariant) -> None:
    """Raise ``ValueError`` if ``params`` is inconsistent with ``variant``."""
    variant = ModelVariant(variant)
    if variant is ModelVariant.NO_HEAT:
        if params.eta != 0.0 or params.tau0 != 0.0:
            raise ValueError("the no-heat variant needs eta = 0 and tau0 = 0")
    elif variant is ModelVariant.FOURIER:
        if params.tau0 != 0.0:
            raise ValueError("the Fourier variant needs tau0 = 0")
        if params.eta <= 0.0:
            raise ValueError("the Fourier variant needs eta > 0 (use the no-heat variant for eta = 0)")
    else:
        if params.tau0 <= 0.0:
            raise ValueError("the Cattaneo variant needs tau0 > 0")
        if params.eta <= 0.0:
            raise ValueError("the Cattaneo variant needs eta > 0")


def classify_regime(params: ModelParams, tie_tol: float = 0.0) -> Regime:
    """Compare tau with beta; ``|tau - beta| <= tie_tol`` counts as equality."""
    diff = params.tau - params.beta
    if abs(diff) <= tie_tol:
        return Regime.TAU_EQUALS_BETA
    return Regime.TAU_LESS_BETA if diff < 0 else Regime.TAU_GREATER_BETA


@dataclass(frozen=True)
class ModeState:
    """Fourier amplitudes of one mode.

    ``qpar_hat`` is ``None`` for the 4-component variants.  ``qperp_sq`` is the
    squared modulus of the transverse heat flux (Cattaneo only).
    """

    u_hat: ArrayLike
    v_hat: ArrayLike
    w_hat: ArrayLike
    theta_hat: ArrayLike
    qpar_hat: Optional[ArrayLike] = None
    qperp_sq: ArrayLike = 0.0

    @property
    def size(self) -> int:
        return 4 if self.qpar_hat is None else 5

    @property
    def vector(self) -> np.ndarray:
        parts = [self.u_hat, self.v_hat, self.w_hat, self.theta_hat]
        if self.qpar_hat is not None:
            parts.append(self.qpar_hat)
        return np.stack(np.broadcast_arrays(*[np.asarray(p, dtype=complex) for p in parts]), axis=-1)

    @classmethod
    def from_vector(cls, vec, qperp_sq: ArrayLike = 0.0) -> "ModeState":
        vec = np.asarray(vec, dtype=complex)
        n = vec.shape[-1]
        if n not in (4, 5):
            raise ValueError(f"a mode state has 4 or 5 components, got {n}")
        if n == 4 and np.any(np.asarray(qperp_sq) != 0):
            raise ValueError("a transverse heat flux needs the 5-component Cattaneo state")
        if np.any(np.asarray(qperp_sq) < 0):
            raise ValueError("qperp_sq must be nonnegative")
        q = vec[..., 4] if n == 5 else None
        return cls(vec[..., 0], vec[..., 1], vec[..., 2], vec[..., 3], q, qperp_sq)

    @classmethod
    def zeros(cls, variant: ModelVariant) -> "ModeState":
        return cls.from_vector(np.zeros(ModelVariant(variant).size, dtype=complex))

    def __getitem__(self, index) -> "ModeState":
        q = None if self.qpar_hat is None else np.asarray(self.qpar_hat)[index]
        qperp = np.broadcast_to(np.asarray(self.qperp_sq, dtype=float), np.shape(self.u_hat))
        return ModeState(
            np.asarray(self.u_hat)[index],
            np.asarray(self.v_hat)[index],
            np.asarray(self.w_hat)[index],
            np.asarray(self.theta_hat)[index],
            q,
            qperp[index],
        )


def check_state(state: ModeState, variant: ModelVariant) -> None:
    variant = ModelVariant(variant)
    if state.size != variant.size:
        raise ValueError(f"{variant.value} states have {variant.size} components, got {state.size}")


@dataclass(frozen=True, eq=False)
class Generator:
    """Per-mode generator ``Psi(|xi|)`` with ``dU/dt = Psi U``."""

    xi_abs: float
    entries: np.ndarray
    variant: ModelVariant

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _check_xi(xi_abs) -> float:
    xi = float(xi_abs)
    if not math.isfinite(xi) or xi < 0:
        raise ValueError(f"|xi| must be a finite nonnegative number, got {xi_abs!r}")
    return xi


def build_generator(params: ModelParams, variant: ModelVariant, xi_abs: float) -> Generator:
    """Assemble ``Psi(|xi|)`` for the given variant.

    Rows for the 4-component variants::

        u' = v
        v' = w
        w' = (-a^2 r^2 u - a^2 beta r^2 v - w + eta r^2 theta) / tau
        theta' = -eta r^2 v - tau eta r^2 w - gamma kappa r^2 theta

    With the Cattaneo law the temperature row becomes
    ``theta' = -eta r^2 (v + tau w) - i gamma r q_par`` and
    ``tau0 q_par' = -q_par - i kappa r theta``.
    """
    variant = ModelVariant(variant)
    check_variant(params, variant)
    r = _check_xi(xi_abs)
    r2 = r * r
    p = params
    n = variant.size
    m = np.zeros((n, n), dtype=complex)
    m[0, 1] = 1.0
    m[1, 2] = 1.0
    m[2, 0] = -p.a**2 * r2 / p.tau
    m[2, 1] = -p.a**2 * p.beta * r2 / p.tau
    m[2, 2] = -1.0 / p.tau
    m[2, 3] = p.eta * r2 / p.tau
    m[3, 1] = -p.eta * r2
    m[3, 2] = -p.tau * p.eta * r2
    if variant is ModelVariant.CATTANEO:
        m[3, 4] = -1j * p.gamma * r
        m[4, 3] = -1j * p.kappa * r / p.tau0
        m[4, 4] = -1.0 / p.tau0
    else:
        m[3, 3] = -p.gamma * p.kappa * r2
    m.setflags(write=False)
    return Generator(r, m, variant)


def default_kind(variant: ModelVariant, regime: Regime) -> ObservableKind:
    """Observable controlled by the decay theorem for ``(variant, regime)``."""
    cattaneo = ModelVariant(variant) is ModelVariant.CATTANEO
    if Regime(regime) is Regime.TAU_EQUALS_BETA:
        return ObservableKind.W_C if cattaneo else ObservableKind.W_F
    return ObservableKind.V_C if cattaneo else ObservableKind.V_F


def _check_kind(variant: ModelVariant, kind: ObservableKind) -> ObservableKind:
    kind = ObservableKind(kind)
    if kind.cattaneo != (ModelVariant(variant) is ModelVariant.CATTANEO):
        raise ValueError(f"observable {kind.value} does not match the {ModelVariant(variant).value} variant")
    return kind


def observable_matrix(params: ModelParams, variant: ModelVariant, xi_abs: float, kind: ObservableKind) -> np.ndarray:
    """Linear map from the state vector to the observable components.

    Rows: ``v + tau w``, ``r (u + tau v)``, ``r v`` (V kinds only), ``theta``,
    ``q_par`` (Cattaneo only).  The transverse flux is not part of the map.
    """
    variant = ModelVariant(variant)
    kind = _check_kind(variant, kind)
    r = _check_xi(xi_abs)
    n = variant.size
    tau = params.tau
    rows = [np.eye(n)[1] + tau * np.eye(n)[2], r * (np.eye(n)[0] + tau * np.eye(n)[1])]
    if kind.has_velocity:
        rows.append(r * np.eye(n)[1])
    rows.append(np.eye(n)[3])
    if variant is ModelVariant.CATTANEO:
        rows.append(np.eye(n)[4])
    return np.array(rows, dtype=complex)


@dataclass(frozen=True)
class ObservableVector:
    """Observable components of a mode and their squared norm."""

    kind: ObservableKind
    components: np.ndarray
    squared_norm: ArrayLike


def observable(params: ModelParams, variant: ModelVariant, xi_abs: float, state: ModeState,
               kind: ObservableKind) -> ObservableVector:
    """Evaluate ``V_F``, ``W_F``, ``V_C`` or ``W_C`` on a mode state.

    For Cattaneo kinds the last component is ``sqrt(qperp_sq)`` so that the
    squared norm contains the full ``|q|^2``.
    """
    variant = ModelVariant(variant)
    check_state(state, variant)
    t = observable_matrix(params, variant, xi_abs, kind)
    comps = state.vector @ t.T
    if variant is ModelVariant.CATTANEO:
        perp = np.sqrt(np.asarray(state.qperp_sq, dtype=float)) + 0j
        perp = np.broadcast_to(perp, comps.shape[:-1])
        comps = np.concatenate([comps, perp[..., None]], axis=-1)
    sq = np.sum(np.abs(comps) ** 2, axis=-1)
    return ObservableVector(ObservableKind(kind), comps, sq)


def mode_energy(params: ModelParams, variant: ModelVariant, regime: Regime, xi_abs: float,
                state: ModeState) -> ArrayLike:
    """Per-mode energy.

    ``E = 1/2 (|v + tau w|^2 + a^2 r^2 |u + tau v|^2 + a^2 tau (beta - tau) r^2 |v|^2
    + |theta|^2 + (gamma/kappa) tau0 |q|^2)``, the ``(beta - tau)`` term being
    dropped for ``Regime.TAU_EQUALS_BETA``.  The flux weight ``gamma/kappa``
    makes the coupling terms cancel in ``dE/dt``; it equals 1 when gamma = kappa.
    """
    variant = ModelVariant(variant)
    regime = Regime(regime)
    check_state(state, variant)
    if regime is Regime.TAU_GREATER_BETA or params.tau > params.beta:
        raise ValueError("the energy is not sign-definite for tau > beta")
    r = _check_xi(xi_abs)
    p = params
    u, v, w, th = (np.asarray(x) for x in (state.u_hat, state.v_hat, state.w_hat, state.theta_hat))
    e = np.abs(v + p.tau * w) ** 2 + p.a**2 * r * r * np.abs(u + p.tau * v) ** 2 + np.abs(th) ** 2
    if regime is Regime.TAU_LESS_BETA:
        e = e + p.a**2 * p.tau * (p.beta - p.tau) * r * r * np.abs(v) ** 2
    if variant is ModelVariant.CATTANEO:
        q2 = np.abs(np.asarray(state.qpar_hat)) ** 2 + np.asarray(state.qperp_sq, dtype=float)
        e = e + p.gamma / p.kappa * p.tau0 * q2
    return 0.5 * e


def energy_rate(params: ModelParams, variant: ModelVariant, regime: Regime, xi_abs: float,
                state: ModeState) -> ArrayLike:
    """Right-hand side of the energy identity, ``dE/dt`` along the flow.

    ``-a^2 (beta - tau) r^2 |v|^2 - gamma kappa r^2 |theta|^2`` for the Fourier
    law and ``-a^2 (beta - tau) r^2 |v|^2 - (gamma/kappa) |q|^2`` for Cattaneo.
    """
    variant = ModelVariant(variant)
    regime = Regime(regime)
    check_state(state, variant)
    r = _check_xi(xi_abs)
    p = params
    rate = np.zeros(np.shape(state.u_hat))
    if regime is Regime.TAU_LESS_BETA:
        rate = rate - p.a**2 * (p.beta - p.tau) * r * r * np.abs(np.asarray(state.v_hat)) ** 2
    if variant is ModelVariant.CATTANEO:
        q2 = np.abs(np.asarray(state.qpar_hat)) ** 2 + np.asarray(state.qperp_sq, dtype=float)
        rate = rate - p.gamma / p.kappa * q2
    else:
        rate = rate - p.gamma * p.kappa * r * r * np.abs(np.asarray(state.theta_hat)) ** 2
    return rate


def hermitian_matrix(form: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Recover ``P`` with ``form(x) = x^H P x`` from a real quadratic form.

    ``form`` receives a batch of vectors (shape ``(m, n)``) and returns ``m``
    values.  Uses polarization on ``e_j``, ``e_j + e_k`` and ``e_j + i e_k``.
    """
    eye = np.eye(n, dtype=complex)
    probes = [eye[j] for j in range(n)]
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        probes.append(eye[j] + eye[k])
        probes.append(eye[j] + 1j * eye[k])
    values = np.asarray(form(np.array(probes)), dtype=float)
    diag = values[:n]
    mat = np.diag(diag).astype(complex)
    for idx, (j, k) in enumerate(pairs):
        s = values[n + 2 * idx]
        t = values[n + 2 * idx + 1]
        mat[j, k] = 0.5 * (s - diag[j] - diag[k]) - 0.5j * (t - diag[j] - diag[k])
        mat[k, j] = np.conj(mat[j, k])
    return mat


def energy_matrix(params: ModelParams, variant: ModelVariant, regime: Regime, xi_abs: float) -> np.ndarray:
    """Hermitian ``G`` with ``mode_energy = U^H G U`` (transverse flux excluded)."""
    variant = ModelVariant(variant)
    return hermitian_matrix(
        lambda x: mode_energy(params, variant, regime, xi_abs, ModeState.from_vector(x)), variant.size
    )


def _range_basis(t: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    u, s, _ = np.linalg.svd(t)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, : int(np.sum(s > rtol * s[0]))]


def equivalence_constants(params: ModelParams, variant: ModelVariant, regime: Regime, xi_abs: float,
                          kind: Optional[ObservableKind] = None) -> tuple:
    """Constants ``c1 <= c2`` with ``c1 |V|^2 <= E <= c2 |V|^2`` at this ``|xi|``.

    They are the extreme eigenvalues of the Gram matrix of the energy written
    in observable coordinates.  The energy must vanish on states the observable
    cannot see (true for the pairings returned by :func:`default_kind`).
    """
    variant = ModelVariant(variant)
    regime = Regime(regime)
    kind = default_kind(variant, regime) if kind is None else _check_kind(variant, kind)
    t = observable_matrix(params, variant, xi_abs, kind)
    g = energy_matrix(params, variant, regime, xi_abs)
    t_pinv = np.linalg.pinv(t)
    null = np.eye(t.shape[1]) - t_pinv @ t
    leak = np.linalg.norm(null.conj().T @ g @ null)
    if leak > 1e-10 * max(1.0, np.linalg.norm(g)):
        raise ValueError(f"the energy is not a function of the {ObservableKind(kind).value} components")
    b = _range_basis(t)
    gram = b.conj().T @ t_pinv.conj().T @ g @ t_pinv @ b
    eig = list(np.linalg.eigvalsh(0.5 * (gram + gram.conj().T)))
    if variant is ModelVariant.CATTANEO:
        eig.append(0.5 * params.gamma / params.kappa * params.tau0)
    return float(min(eig)), float(max(eig))
