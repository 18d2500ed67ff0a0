"""Command-line front end: ``mgtlab <experiment> [--config FILE] [--key value ...]``.

Every experiment writes ``<experiment>-<hash>.csv`` and/or ``.json`` into the
output directory plus ``manifest-<hash>.json`` recording the validated
configuration and library versions.  The hash covers the configuration
without output location and worker count, so reruns overwrite identical
files.  Exit status: 0 success, 1 invalid configuration, 2 numerical failure
(a diagnostic JSON is written next to the artifacts).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .cauchy import (
    InitialDataSpec,
    evolve_norm_series,
    fit_decay_exponent,
    log_grid,
    regularity_loss_experiment,
    sample_initial_data,
    theorem_exponent,
)
from .lyapunov import (
    CoefficientSelectionError,
    check_energy_identity,
    case_for,
    check_monotonicity,
    decay_trajectory,
    envelope,
    pointwise_decay_fit,
    probe_trajectory,
    random_state,
    select_coefficients,
)
from .dynamics import propagate
from .model import ModelParams, ModelVariant, Regime, check_variant, classify_regime, default_kind, observable
from .spectral import Limit, RootFindingError, Verdict, expansion_large_xi, expansion_small_xi, rh_verdict, verify_expansion

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("simulate", "stability-map", "eig-expand", "lyapunov-check", "decay-fit", "regloss")
MAX_CELLS = 10**6
STABILITY_COLUMNS = ["tau", "beta", "eta", "tau0", "xi", "A1", "A2", "A3", "A4", "A5", "max_re_root", "verdict",
                     "decay_rate", "error"]


class ConfigError(ValueError):
    """Invalid configuration (exit status 1)."""


# ---------------------------------------------------------------------------
# Configuration

# key -> (type, default); "floats" accepts a number, a list or "lo:hi:n"
_KEYS: Dict[str, tuple] = {
    "experiment": (str, None),
    "variant": (str, "fourier"),
    "regime": (str, None),
    "tau": ("floats", [0.5]),
    "beta": ("floats", [1.0]),
    "eta": ("floats", [0.0]),
    "tau0": ("floats", [0.0]),
    "a": (float, 1.0),
    "gamma": (float, 1.0),
    "kappa": (float, 1.0),
    "xi": ("floats", [1.0]),
    "tmax": (float, 100.0),
    "samples": (int, 2001),
    "N": (int, 1),
    "k": ("floats", [0.0]),
    "ell": (float, 2.0),
    "profile": (str, "gaussian"),
    "tail_exponent": (float, None),
    "support": ("floats", [2.0, 4.0]),
    "window": ("floats", [1e2, 1e4]),
    "limit": (str, "both"),
    "probes": (int, 200),
    "fit_decay": (bool, False),
    "seed": (int, 0),
    "workers": (int, None),
    "output": (str, "mgtlab-out"),
    "tol": (float, 1e-6),
}
_RANGE_ALIASES = {"tau_range": "tau", "beta_range": "beta", "eta_range": "eta", "xi_range": "xi"}
_NOT_HASHED = ("output", "workers")


def parse_floats(value: Any) -> List[float]:
    """Number, list of numbers, comma list or ``lo:hi:n`` (inclusive linspace)."""
    if isinstance(value, bool):
        raise ConfigError(f"expected numbers, got {value!r}")
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(parse_floats(v))
        return out
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return []
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range must be lo:hi:n, got {value!r}")
            try:
                lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ConfigError(f"bad range {value!r}") from exc
            if n < 0:
                raise ConfigError("range count must be nonnegative")
            return [float(x) for x in np.linspace(lo, hi, n)]
        try:
            return [float(x) for x in text.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad number list {value!r}") from exc
    raise ConfigError(f"expected numbers, got {value!r}")


def _coerce(key: str, value: Any):
    kind, _ = _KEYS[key]
    if value is None:
        return None
    if kind == "floats":
        vals = parse_floats(value)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"{key} must be finite")
        return vals
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{key} must be a boolean, got {value!r}")
    if kind is int:
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be an integer")
        try:
            f = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from exc
        if f != int(f):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(f)
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be a number")
        try:
            f = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be a number, got {value!r}") from exc
        if not math.isfinite(f):
            raise ConfigError(f"{key} must be finite")
        return f
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one run."""

    values: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    @property
    def variant(self) -> ModelVariant:
        return ModelVariant(self.values["variant"])

    def hashed(self) -> Dict[str, Any]:
        return {k: v for k, v in sorted(self.values.items()) if k not in _NOT_HASHED}

    def digest(self) -> str:
        blob = json.dumps(self.hashed(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def params(self, tau=None, beta=None, eta=None, tau0=None) -> ModelParams:
        v = self.values
        return ModelParams(tau=v["tau"][0] if tau is None else tau, beta=v["beta"][0] if beta is None else beta,
                           eta=v["eta"][0] if eta is None else eta, a=v["a"], gamma=v["gamma"], kappa=v["kappa"],
                           tau0=v["tau0"][0] if tau0 is None else tau0, dim=v["N"])

    @property
    def workers(self) -> int:
        return self.values["workers"]


def load_config_file(path: str) -> Dict[str, Any]:
    p = Path(path)
    try:
        text = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a table/object")
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if key == "params" and isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def build_config(raw: Dict[str, Any], experiment: Optional[str] = None) -> RunConfig:
    """Validate raw key/value pairs (unknown keys rejected) and fill defaults."""
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        key = _RANGE_ALIASES.get(key, key)
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)
    if experiment is not None:
        if values.get("experiment") not in (None, experiment):
            raise ConfigError(f"config names experiment {values['experiment']!r}, command is {experiment!r}")
        values["experiment"] = experiment
    given = set(values)
    for key, (_, default) in _KEYS.items():
        values.setdefault(key, default)
    try:
        variant = ModelVariant(values["variant"])
    except ValueError as exc:
        raise ConfigError(f"unknown variant {values['variant']!r}") from exc
    # heat-law defaults so that a bare variant name gives a valid model
    if "eta" not in given and variant is not ModelVariant.NO_HEAT:
        values["eta"] = [0.5]
    if "tau0" not in given and variant is ModelVariant.CATTANEO:
        values["tau0"] = [0.2]
    if values["regime"] == Regime.TAU_EQUALS_BETA.value and "tau" not in given:
        values["tau"] = list(values["beta"])
    if values["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    if values["regime"] is not None:
        try:
            Regime(values["regime"])
        except ValueError as exc:
            raise ConfigError(f"unknown regime {values['regime']!r}") from exc
    if values["workers"] is None:
        env = os.environ.get("MGT_WORKERS", "1")
        try:
            values["workers"] = int(env)
        except ValueError as exc:
            raise ConfigError(f"MGT_WORKERS must be an integer, got {env!r}") from exc
    if values["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if values["N"] not in (1, 2, 3):
        raise ConfigError("N must be 1, 2 or 3")
    if values["samples"] < 2:
        raise ConfigError("samples must be >= 2")
    if values["probes"] < 0:
        raise ConfigError("probes must be >= 0")
    if values["limit"] not in ("small", "large", "both"):
        raise ConfigError("limit must be small, large or both")
    if values["profile"] not in ("gaussian", "algebraic", "bump"):
        raise ConfigError("profile must be gaussian, algebraic or bump")
    if len(values["window"]) != 2 or len(values["support"]) != 2:
        raise ConfigError("window and support take two numbers")
    if not values["tmax"] > 0 or not values["tol"] > 0:
        raise ConfigError("tmax and tol must be positive")
    if any(x < 0 for x in values["xi"]):
        raise ConfigError("xi must be nonnegative")
    if values["experiment"] != "stability-map":
        for key in ("tau", "beta", "eta", "tau0"):
            if len(values[key]) != 1:
                raise ConfigError(f"{key} takes a single value outside stability-map")
    cells = len(values["tau"]) * len(values["beta"]) * len(values["eta"]) * len(values["tau0"]) * len(values["xi"])
    if cells > MAX_CELLS:
        raise ConfigError(f"grid has {cells} cells, limit is {MAX_CELLS}")
    cfg = RunConfig(values)
    if values["experiment"] != "stability-map":
        try:
            p = cfg.params()
            check_variant(p, variant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if values["regime"] is not None and classify_regime(p) is not Regime(values["regime"]):
            raise ConfigError(f"regime {values['regime']} does not match tau={p.tau}, beta={p.beta}")
    else:
        for tau in values["tau"]:
            for beta in values["beta"]:
                for eta in values["eta"]:
                    for tau0 in values["tau0"]:
                        try:
                            check_variant(cfg.params(tau, beta, eta, tau0), variant)
                        except ValueError as exc:
                            raise ConfigError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# Output


def fmt(x) -> str:
    """17 significant digits for floats; other values as text."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Artifacts:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg["output"])
        self.stem = f"{cfg.experiment}-{cfg.digest()}"
        self.files: List[str] = []

    def write(self, suffix: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{self.stem}{suffix}"
        path.write_text(text, newline="")
        self.files.append(path.name)
        return path

    def manifest(self, status: str) -> Path:
        import mpmath
        import scipy

        data = {
            "experiment": self.cfg.experiment,
            "hash": self.cfg.digest(),
            "config": self.cfg.values,
            "status": status,
            "artifacts": self.files,
            "versions": {"mgtlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "mpmath": mpmath.__version__},
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"manifest-{self.cfg.digest()}.json"
        path.write_text(json_text(data))
        return path


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Experiments


def _regime(cfg: RunConfig, params: ModelParams) -> Regime:
    return Regime(cfg["regime"]) if cfg["regime"] else classify_regime(params)


def run_simulate(cfg: RunConfig, out: Artifacts) -> dict:
    params = cfg.params()
    variant = cfg.variant
    regime = _regime(cfg, params)
    rng = np.random.default_rng(cfg["seed"])
    xi = cfg["xi"][0]
    u0 = random_state(variant, rng)
    times = np.linspace(0.0, cfg["tmax"], cfg["samples"])
    traj = propagate(params, variant, xi, u0, times)
    states = traj.states
    header = ["t"] + [f"{c}_{part}" for c in ("u", "v", "w", "theta", "q")[: variant.size] for part in ("re", "im")]
    kind = default_kind(variant, regime if regime is not Regime.TAU_GREATER_BETA else Regime.TAU_LESS_BETA)
    obs = observable(params, variant, xi, states, kind).squared_norm
    header.append("obs_sq")
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for z in traj.values[i]:
            row += [z.real, z.imag]
        row.append(float(obs[i]))
        rows.append(row)
    out.write(".csv", csv_text(header, rows))
    report = {"xi": xi, "method": traj.method, "accuracy": traj.accuracy, "regime": regime}
    if regime is not Regime.TAU_GREATER_BETA:
        ident = check_energy_identity(variant, regime, traj, params, tol=cfg["tol"])
        report["energy_identity"] = {"max_residual": ident.max_residual, "worst_time": ident.worst_time,
                                     "tol": ident.tol, "passed": ident.passed}
    out.write(".json", json_text(report))
    return report


def _stability_cell(args):
    variant, params, xi, fit = args
    row = {"tau": params.tau, "beta": params.beta, "eta": params.eta, "tau0": params.tau0, "xi": xi}
    try:
        v = rh_verdict(params, variant, xi)
        minors = list(v.minors) + [None] * (5 - len(v.minors))
        row.update({f"A{i + 1}": m for i, m in enumerate(minors)})
        row["max_re_root"] = v.witness
        row["verdict"] = v.verdict.value
        if fit and v.verdict is Verdict.STABLE and xi > 0:
            regime = classify_regime(params)
            if regime is not Regime.TAU_GREATER_BETA:
                kind = default_kind(variant, regime)
                traj = decay_trajectory(params, variant, xi, random_state(variant, np.random.default_rng(0)), kind)
                row["decay_rate"] = pointwise_decay_fit(traj, envelope(case_for(variant, regime)), params,
                                                        variant, kind).rate
    except Exception as exc:  # recorded inline; a sweep never aborts on one cell
        row["error"] = f"{type(exc).__name__}: {exc}"
    return [row.get(c) for c in STABILITY_COLUMNS]


def sweep(cfg: RunConfig) -> List[list]:
    """One row per (tau, beta, eta, tau0, xi) cell in lexicographic order."""
    variant = cfg.variant
    cells = []
    for tau in cfg["tau"]:
        for beta in cfg["beta"]:
            for eta in cfg["eta"]:
                for tau0 in cfg["tau0"]:
                    p = cfg.params(tau, beta, eta, tau0)
                    for xi in cfg["xi"]:
                        cells.append((variant, p, xi, cfg["fit_decay"]))
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunk = max(1, len(cells) // (4 * cfg.workers))
            return list(pool.map(_stability_cell, cells, chunksize=chunk))
    return [_stability_cell(c) for c in cells]


def run_stability_map(cfg: RunConfig, out: Artifacts) -> dict:
    rows = sweep(cfg)
    out.write(".csv", csv_text(STABILITY_COLUMNS, rows))
    counts: Dict[str, int] = {}
    for r in rows:
        key = r[STABILITY_COLUMNS.index("verdict")] or "error"
        counts[key] = counts.get(key, 0) + 1
    return {"cells": len(rows), "verdicts": counts}


def run_eig_expand(cfg: RunConfig, out: Artifacts) -> dict:
    params = cfg.params()
    variant = cfg.variant
    regime = _regime(cfg, params)
    limits = [Limit.SMALL_XI, Limit.LARGE_XI] if cfg["limit"] == "both" else [Limit(cfg["limit"])]
    report = {}
    for lim in limits:
        exp = (expansion_small_xi if lim is Limit.SMALL_XI else expansion_large_xi)(params, variant, regime)
        rep = verify_expansion(exp, params, variant)
        report[lim.value] = {
            "passed": rep.passed,
            "degenerate": rep.degenerate,
            "crossings": rep.crossings,
            "ladder": rep.ladder,
            "branches": [{"name": b.name, "stated_order": b.stated_order, "measured_slope": b.measured_slope,
                          "coefficient": b.coefficient, "measured_coefficient": b.measured_coefficient,
                          "coefficient_error": b.coefficient_error, "passed": b.passed} for b in rep.branches],
        }
    out.write(".json", json_text(report))
    return report


def run_lyapunov_check(cfg: RunConfig, out: Artifacts) -> dict:
    params = cfg.params()
    variant = cfg.variant
    regime = _regime(cfg, params)
    recipe = select_coefficients(params, variant, regime)
    rng = np.random.default_rng(cfg["seed"])
    worst = None
    failures = []
    for _ in range(cfg["probes"]):
        xi = float(10 ** rng.uniform(-2, 2))
        traj = probe_trajectory(recipe, xi, rng)
        rep = check_monotonicity(recipe, traj, params)
        if worst is None or rep.max_dldt > worst.max_dldt:
            worst = rep
        if not rep.passed:
            failures.append(rep.to_dict())
    report = {"recipe": recipe.to_dict(), "probes": cfg["probes"], "failures": failures,
              "worst": worst.to_dict() if worst else None, "passed": not failures}
    out.write(".json", json_text(report))
    if failures:
        raise NumericalFailure("monotonicity failed on probe trajectories", report)
    return report


def run_decay_fit(cfg: RunConfig, out: Artifacts) -> dict:
    params = cfg.params()
    variant = cfg.variant
    regime = _regime(cfg, params)
    kind = default_kind(variant, regime)
    lo, hi = cfg["window"]
    spec = InitialDataSpec(profile=cfg["profile"], tail_exponent=cfg["tail_exponent"],
                           support=tuple(cfg["support"]), dim=cfg["N"], kind=kind)
    data = sample_initial_data(spec, log_grid())
    times = np.concatenate([[0.0], np.logspace(math.log10(lo) - 1, math.log10(hi), 61)])
    fits = []
    rows = []
    for k in cfg["k"]:
        series = evolve_norm_series(params, variant, data, k, times, workers=cfg.workers)
        fit = fit_decay_exponent(series, (lo, hi))
        fits.append({"k": k, "fit": fit.to_dict(), "theorem_slope": theorem_exponent(variant, regime, cfg["N"], k),
                     "quad_error": series.quad_error, "converged": series.converged})
        rows += [(k,) + r for r in series.to_rows()]
    out.write(".csv", csv_text(["k", "t", "norm", "L1_part", "L2_part"], rows))
    report = {"variant": variant, "regime": regime, "N": cfg["N"], "fits": fits}
    out.write(".json", json_text(report))
    return report


def run_regloss(cfg: RunConfig, out: Artifacts) -> dict:
    cparams = cfg.params()
    if cfg.variant is not ModelVariant.CATTANEO:
        raise ConfigError("regloss compares against the Cattaneo variant; pass --variant cattaneo")
    # Fourier comparator: same tau < beta mechanics with the normalized heat law
    tau = cparams.tau if cparams.tau < cparams.beta else cparams.beta / 2
    fparams = ModelParams(tau=tau, beta=cparams.beta, eta=cparams.eta, dim=cparams.dim)
    recipe = select_coefficients(fparams, ModelVariant.FOURIER, Regime.TAU_LESS_BETA)
    spec = InitialDataSpec(profile=cfg["profile"] if cfg["profile"] != "gaussian" else "bump",
                           tail_exponent=cfg["tail_exponent"], support=tuple(cfg["support"]), dim=cfg["N"],
                           sobolev_order=cfg["k"][0] + cfg["ell"])
    grid = log_grid(1e-3, 3e3, 48) if spec.profile == "algebraic" else log_grid()
    data = sample_initial_data(spec, grid)
    rep = regularity_loss_experiment(fparams, cparams, data, cfg["k"][0], cfg["ell"], tuple(cfg["window"]),
                                     50.0 / recipe.rate_constant)
    report = rep.to_dict()
    report["fourier_params"] = fparams.to_dict()
    out.write(".json", json_text(report))
    return report


_RUNNERS = {
    "simulate": run_simulate,
    "stability-map": run_stability_map,
    "eig-expand": run_eig_expand,
    "lyapunov-check": run_lyapunov_check,
    "decay-fit": run_decay_fit,
    "regloss": run_regloss,
}


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, diagnostic: Optional[dict] = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


def run(cfg: RunConfig) -> int:
    """Run one validated configuration; returns the exit status."""
    out = Artifacts(cfg)
    try:
        _RUNNERS[cfg.experiment](cfg, out)
    except ConfigError as exc:
        _progress(f"invalid configuration: {exc}")
        return 1
    except (NumericalFailure, CoefficientSelectionError, RootFindingError, RuntimeError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "config": cfg.values}
        if isinstance(exc, NumericalFailure):
            diag["details"] = exc.diagnostic
        if isinstance(exc, CoefficientSelectionError):
            diag["xi"] = exc.xi_abs
            diag["state"] = None if exc.state is None else [complex(z) for z in exc.state]
        path = out.write("-error.json", json_text(diag))
        out.manifest("numerical-failure")
        _progress(f"numerical failure: {exc} (diagnostics in {path})")
        return 2
    out.manifest("ok")
    _progress(f"wrote {', '.join(out.files)} to {out.dir}")
    return 0


def _overrides(tokens: Sequence[str]) -> Dict[str, Any]:
    """``--key value`` pairs (``--key=value`` too); a bare ``--flag`` means true."""
    out: Dict[str, Any] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        elif i + 1 < len(tokens) and not (tokens[i + 1].startswith("--") and not _is_number(tokens[i + 1])):
            value = tokens[i + 1]
            i += 2
        else:
            value = "true"
            i += 1
        out[key] = value
    return out


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="mgtlab", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="TOML or JSON configuration file")
    parser.add_argument("--version", action="version", version=f"mgtlab {__version__}")
    args, rest = parser.parse_known_args(argv)
    try:
        raw = load_config_file(args.config) if args.config else {}
        raw.update(_overrides(rest))
        cfg = build_config(raw, args.experiment)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
