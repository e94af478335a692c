"""Run configuration: a sectioned INI file parsed with ``configparser``.

Every key is typed and validated; unknown sections or keys are errors so that
a typo never silently falls back to a default. See ``docs/config.md``.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .field import Box, LinearField, LorenzField, PolynomialField, VectorField
from .flow import IntegratorConfig
from .hyperbolicity.config import AnalysisConfig, default_grid
from .poincare import PoincareConfig


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _vec3(s: str) -> tuple:
    v = tuple(_float(t) for t in s.replace(",", " ").split())
    if len(v) != 3:
        raise ValueError("need 3 numbers")
    return v


def _floats(s: str) -> tuple:
    return tuple(_float(t) for t in s.replace(",", " ").split())


def _points(s: str) -> tuple:
    return tuple(_vec3(p) for p in s.split(";") if p.strip())


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _matrix(s: str) -> tuple:
    rows = [_floats(r) for r in s.split(";") if r.strip()]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ValueError("need 3 rows of 3 numbers separated by ';'")
    return tuple(rows)


def _terms(s: str) -> tuple:
    """``coef:i,j,k`` tokens separated by whitespace, e.g. ``-10:1,0,0 10:0,1,0``."""
    out = []
    for tok in s.split():
        coef, _, powers = tok.partition(":")
        p = tuple(int(v) for v in powers.split(","))
        if len(p) != 3:
            raise ValueError(f"bad monomial {tok!r}")
        out.append((_float(coef), p))
    return tuple(out)


# section -> key -> parser
SCHEMA = {
    "field": {"kind": str, "sigma": _float, "rho": _float, "beta": _float, "matrix": _matrix,
              "dx": _terms, "dy": _terms, "dz": _terms, "box_lo": _vec3, "box_hi": _vec3},
    "integrator": {"rel_tol": _float, "abs_tol": _float, "max_step": _float, "max_steps": int,
                   "escape_radius": _float},
    "poincare": {"frame_eps": _float, "beta_sec": _float, "tau_max": _float, "s_max": _float,
                 "beta0": _float, "r0_factor": _float, "tube_factor": _float, "crossing_tol": _float},
    "analysis": {"seed": _vec3, "transient": _float, "n_samples": int, "spacing": _float,
                 "split_T": _float, "k_pow": int, "dir_tol": _float, "angle_floor": _float,
                 "gap_tol": _float, "T_grid": _floats, "T_grid_step": _float, "T_grid_max": _float,
                 "pass_threshold": _float, "chart_eps": _float, "exclusion_factor": _float,
                 "sep_threshold": _float, "notconv_limit": _float, "samples": _points,
                 "rescaled": _bool},
    "orbit": {"x0": _vec3, "duration": _float, "dt": _float, "jacobian": _bool},
    "cocycle": {"x0": _vec3, "dt": _float, "steps": int},
    "blowup": {"singularity": int, "direction": str, "t": _floats, "radii": _floats, "limit_tol": _float,
               "chart_eps": _float},
    "pliss": {"tau0": _float, "gamma": _float, "blocks": int},
    "lyapunov": {"x0": _vec3, "T_total": _float, "renorm_dt": _float},
    "output": {"dir": str, "details": _bool},
    "run": {"random_seed": int},
}

DEFAULTS = {
    "orbit": {"duration": 10.0, "dt": 0.01, "jacobian": False},
    "cocycle": {"dt": 0.05, "steps": 20},
    "blowup": {"singularity": -1, "direction": "unstable", "t": (0.25, 0.5),
               "radii": (1e-2, 1e-3, 1e-4, 1e-5), "limit_tol": 1e-6},
    "pliss": {"tau0": 1.0, "gamma": 1.05},
    "lyapunov": {"T_total": 200.0, "renorm_dt": 0.5},
    "output": {"dir": ".", "details": False},
    "run": {"random_seed": 0},
}


@dataclass
class RunConfig:
    field: VectorField
    analysis: AnalysisConfig
    sections: dict  # parsed values of the run-specific sections, defaults filled in
    source: Optional[str] = None
    raw: dict = field(default_factory=dict)

    @property
    def integrator(self) -> IntegratorConfig:
        return self.analysis.integrator

    @property
    def poincare(self) -> PoincareConfig:
        return self.analysis.poincare

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def resolved(self) -> dict:
        """Everything that determines results; worker count is left out on purpose."""
        a = self.analysis
        return {
            "field": {"kind": self.field.kind, **self.field.params(),
                      "box_lo": list(self.field.box.lo), "box_hi": list(self.field.box.hi)},
            "integrator": {"rel_tol": a.integrator.rel_tol, "abs_tol": a.integrator.abs_tol,
                           "max_step": a.integrator.max_step, "max_steps": a.integrator.max_steps,
                           "escape_radius": a.integrator.escape_for(self.field)},
            "poincare": {k: getattr(a.poincare, k) for k in SCHEMA["poincare"]},
            "analysis": {
                "seed": list(a.seed), "transient": a.transient, "n_samples": a.n_samples,
                "spacing": a.spacing, "split_T": a.split_T, "k_pow": a.k_pow, "dir_tol": a.dir_tol,
                "angle_floor": a.angle_floor, "gap_tol": a.gap_tol, "T_grid": list(a.grid),
                "pass_threshold": a.pass_threshold, "chart_eps": a.eps_for(self.field.box.diagonal),
                "exclusion_factor": a.exclusion_factor, "sep_threshold": a.sep_threshold,
                "notconv_limit": a.notconv_limit,
                "samples": [list(p) for p in self.sections.get("analysis", {}).get("samples", ())] or None,
                "rescaled": self.sections.get("analysis", {}).get("rescaled", True),
            },
            **{k: {kk: (list(vv) if isinstance(vv, tuple) else vv) for kk, vv in sorted(v.items())}
               for k, v in sorted(self.sections.items()) if k not in ("analysis", "output")},
        }


def _parse_sections(parser: configparser.ConfigParser) -> dict:
    out = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        vals = {}
        for key, text in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                vals[key] = SCHEMA[sec][key](text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None
        out[sec] = vals
    return out


def _build_field(sec: dict) -> VectorField:
    kind = sec.get("kind", "lorenz")
    box = None
    if "box_lo" in sec or "box_hi" in sec:
        if not ("box_lo" in sec and "box_hi" in sec):
            raise ConfigError("box_lo and box_hi must be given together")
        if any(a >= b for a, b in zip(sec["box_lo"], sec["box_hi"])):
            raise ConfigError("box_lo must be below box_hi componentwise")
        box = Box(sec["box_lo"], sec["box_hi"])
    extra = {} if box is None else {"box": box}
    allowed = {"lorenz": {"sigma", "rho", "beta"}, "linear": {"matrix"}, "polynomial": {"dx", "dy", "dz"}}
    if kind not in allowed:
        raise ConfigError(f"unknown field kind {kind!r}")
    stray = set(sec) - allowed[kind] - {"kind", "box_lo", "box_hi"}
    if stray:
        raise ConfigError(f"keys {sorted(stray)} do not apply to a {kind} field")
    try:
        if kind == "lorenz":
            return LorenzField(**{k: sec[k] for k in ("sigma", "rho", "beta") if k in sec}, **extra)
        if kind == "linear":
            if "matrix" not in sec:
                raise ConfigError("linear field needs 'matrix'")
            return LinearField(np.array(sec["matrix"]), **extra)
        if not all(k in sec for k in ("dx", "dy", "dz")):
            raise ConfigError("polynomial field needs dx, dy and dz")
        return PolynomialField((sec["dx"], sec["dy"], sec["dz"]), **extra)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_analysis(secs: dict) -> AnalysisConfig:
    try:
        icfg = IntegratorConfig(**secs.get("integrator", {}))
        pcfg = PoincareConfig(integrator=icfg, **secs.get("poincare", {}))
        a = dict(secs.get("analysis", {}))
        a.pop("samples", None)
        a.pop("rescaled", None)
        step = a.pop("T_grid_step", None)
        stop = a.pop("T_grid_max", None)
        if "T_grid" in a and (step is not None or stop is not None):
            raise ConfigError("give either T_grid or T_grid_step/T_grid_max")
        if step is not None or stop is not None:
            a["T_grid"] = default_grid(step or 0.25, stop or 10.0)
        for k in ("transient", "exclusion_factor", "notconv_limit"):
            if k in a and a[k] < 0:
                raise ConfigError(f"{k} must be non-negative")
        if "chart_eps" in a and not a["chart_eps"] > 0:
            raise ConfigError("chart_eps must be positive")
        if a.get("n_samples", 1) < 1:
            raise ConfigError("n_samples must be >= 1")
        for k, v in secs.get("poincare", {}).items():
            if not v > 0:
                raise ConfigError(f"[poincare] {k} must be positive")
        return AnalysisConfig(poincare=pcfg, **a)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str, jobs: int = 1) -> RunConfig:
    """Parse and validate ``path``; raises ``ConfigError`` on any problem."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive (T_grid)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    secs = _parse_sections(parser)
    f = _build_field(secs.get("field", {}))
    analysis = replace(_build_analysis(secs), jobs=max(1, int(jobs)))
    sections = {}
    for name, defaults in DEFAULTS.items():
        sections[name] = {**defaults, **secs.get(name, {})}
    sections["analysis"] = {k: secs.get("analysis", {})[k] for k in ("samples", "rescaled")
                            if k in secs.get("analysis", {})}
    _check_run_sections(sections)
    return RunConfig(f, analysis, sections, source=os.path.abspath(path), raw=secs)


def _check_run_sections(s: dict) -> None:
    def positive(sec, key):
        v = s[sec].get(key)
        if v is not None and not v > 0:
            raise ConfigError(f"[{sec}] {key} must be positive")

    for sec, key in (("orbit", "dt"), ("orbit", "duration"), ("cocycle", "dt"), ("cocycle", "steps"),
                     ("pliss", "tau0"), ("lyapunov", "T_total"), ("lyapunov", "renorm_dt"),
                     ("blowup", "limit_tol"), ("blowup", "chart_eps")):
        positive(sec, key)
    if not s["pliss"]["gamma"] > 1:
        raise ConfigError("[pliss] gamma must exceed 1")
    r = s["blowup"]["radii"]
    if not r or min(r) <= 0 or any(b >= a for a, b in zip(r, r[1:])):
        raise ConfigError("[blowup] radii must be positive and strictly decreasing")
