"""Per-frequency analysis of the standard-linear-solid (MGT) equation with heat conduction.

Submodules
----------
model
    Parameters, variants, mode states, generator matrices, observables, energies.
spectral
    Characteristic polynomials, roots, Routh-Hurwitz verdicts, eigenvalue expansions.
dynamics
    Exact propagation of single Fourier modes.
lyapunov
    Auxiliary functionals, assembled Lyapunov functionals and decay envelopes.
cauchy
    Plancherel reconstruction of Sobolev norms and decay-exponent fits.
cli
    Command-line front end.
"""

from .model import (
    ModelParams,
    ModelVariant,
    ModeState,
    Generator,
    ObservableKind,
    ObservableVector,
    Regime,
    build_generator,
    classify_regime,
    equivalence_constants,
    mode_energy,
    observable,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "ModelVariant",
    "ModeState",
    "Generator",
    "ObservableKind",
    "ObservableVector",
    "Regime",
    "build_generator",
    "classify_regime",
    "equivalence_constants",
    "mode_energy",
    "observable",
]
