"""Scenario files: one YAML document per experiment.

Key tree (defaults in brackets)::

    name: str
    pipeline: coeffs | dissipativity | spectrum | evolve-linear | evolve-nonlinear | probe
    seed: int [0]
    time_budget: seconds [600]
    potential:  {gamma}
    weight:     {family: polynomial | stretched | gaussian, k, r, s}   [polynomial, k=10]
    cutoff:     {M [0], R [1]}
    grid:       {L [8], N [16]}
    space:      {dim: 0 | 1 | 3 [0], Nx [1]}
    initial:    {family: zero | cubic | anisotropic | random | maxwellian,
                 amplitude [1e-3], temperatures [[1.5, 0.75, 0.75]], x_mode [0]}
    evolve:     {t_end, dt, integrator, splitting, record_every, norms, moment_budget, blowup_factor}
    linear:     {tag: B | Lambda [Lambda]}
    fit:        {column [norm_Lp], window [null]}
    spectrum:   {tag [L], xi [[0, 0, 0]], weight: none | gaussian [gaussian]}
    dissipativity: {p [2], lam [half the abscissa], delta [1], which [phi], part [2], radius [40]}
    probe:      {kind: bilinear | aux [bilinear], samples [16], grids [[16, 24]], L [5], slab [false]}
    output:     {dir [out/<name>]}

Every validation error names the offending dotted key.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ..dynamics import EvolveConfig
from ..errors import ValidationError
from ..grids import SpatialGrid, VelocityGrid
from ..kernels import CutoffSpec, ModelSpec, WeightSpec

PIPELINES = ("coeffs", "dissipativity", "spectrum", "evolve-linear", "evolve-nonlinear", "probe")
INITIAL_FAMILIES = ("zero", "cubic", "anisotropic", "random", "maxwellian")
SCENARIO_DIR = Path(__file__).with_name("scenarios")

DEFAULTS = {
    "name": None,
    "pipeline": None,
    "seed": 0,
    "time_budget": 600.0,
    "potential": {"gamma": None},
    "weight": {"family": "polynomial", "k": 10.0, "r": None, "s": None},
    "cutoff": {"M": 0.0, "R": 1.0},
    "grid": {"L": 8.0, "N": 16},
    "space": {"dim": 0, "Nx": 1},
    "initial": {"family": "zero", "amplitude": 1e-3, "temperatures": [1.5, 0.75, 0.75], "x_mode": 0},
    "evolve": {"t_end": 1.0, "dt": "auto", "integrator": "rk4", "splitting": "strang", "record_every": 1,
               "norms": ["Lp"], "moment_budget": 1e-7, "blowup_factor": 1e6},
    "linear": {"tag": "Lambda"},
    "fit": {"column": "norm_Lp", "window": None},
    "spectrum": {"tag": "L", "xi": [0.0, 0.0, 0.0], "weight": "gaussian"},
    "dissipativity": {"p": 2.0, "lam": None, "delta": 1.0, "which": "phi", "part": 2, "radius": 40.0},
    "probe": {"kind": "bilinear", "samples": 16, "grids": [16, 24], "L": 5.0, "slab": False},
    "output": {"dir": None},
}


def _merge(base, new, prefix=""):
    out = copy.deepcopy(base)
    for k, v in (new or {}).items():
        key = f"{prefix}{k}"
        if k not in base:
            raise ValidationError(f"unknown key {key!r}", key=key)
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ValidationError("expected a mapping", key=key)
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def parse_override(text):
    """``"a.b=value"`` -> ``("a.b", value)`` with the value parsed as YAML."""
    if "=" not in text:
        raise ValidationError(f"override {text!r} is not of the form key=value", key="override")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        key, val = parse_override(item) if isinstance(item, str) else item
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError("cannot override inside a scalar", key=key)
        node[parts[-1]] = val
    return raw


@dataclass
class Scenario:
    """A validated experiment description (see the module docstring for keys)."""

    name: str
    pipeline: str
    model: ModelSpec
    vgrid: VelocityGrid
    space: SpatialGrid
    initial: dict
    evolve: EvolveConfig
    seed: int
    time_budget: float
    output_dir: Path
    raw: dict

    def section(self, name) -> dict:
        return self.raw[name]


def _rekey(key, fn, *args):
    """Call ``fn`` and re-raise validation errors under the scenario key."""
    try:
        return fn(*args)
    except ValidationError as err:
        msg = str(err).split(": ", 1)[-1] if err.key else str(err)
        raise ValidationError(msg, key=key) from err
    except (TypeError, ValueError) as err:
        raise ValidationError(str(err), key=key) from err


def _weight(w):
    fam = w["family"]
    if fam == "polynomial":
        return WeightSpec.polynomial(w["k"])
    if fam == "stretched":
        return WeightSpec.stretched(w["r"], w["s"])
    if fam == "gaussian":
        return WeightSpec.gaussian(w["r"])
    raise ValidationError(f"unknown weight family {fam!r}", key="weight.family")


def _number(val, key, kind=float):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"expected a number, got {val!r}", key=key)
    return kind(val)


def build_scenario(raw: dict, base_dir=None) -> Scenario:
    """Validate a raw key tree (already merged with overrides)."""
    cfg = _merge(DEFAULTS, raw)
    if not cfg["name"]:
        raise ValidationError("scenario needs a name", key="name")
    if cfg["pipeline"] not in PIPELINES:
        raise ValidationError(f"pipeline must be one of {PIPELINES}", key="pipeline")
    if cfg["potential"]["gamma"] is None:
        raise ValidationError("gamma is required", key="potential.gamma")
    gamma = _number(cfg["potential"]["gamma"], "potential.gamma")
    weight = _rekey("weight", _weight, cfg["weight"])
    cutoff = _rekey("cutoff", lambda c: CutoffSpec(_number(c["M"], "cutoff.M"), _number(c["R"], "cutoff.R")),
                    cfg["cutoff"])
    model = _rekey("potential.gamma", ModelSpec, gamma, weight, cutoff)
    g = cfg["grid"]
    vgrid = _rekey("grid", VelocityGrid, _number(g["L"], "grid.L"), _number(g["N"], "grid.N", int))
    s = cfg["space"]
    space = _rekey("space", SpatialGrid, _number(s["dim"], "space.dim", int), _number(s["Nx"], "space.Nx", int))
    ini = cfg["initial"]
    if ini["family"] not in INITIAL_FAMILIES:
        raise ValidationError(f"family must be one of {INITIAL_FAMILIES}", key="initial.family")
    _number(ini["amplitude"], "initial.amplitude")
    temps = np.asarray(ini["temperatures"], dtype=float)
    if temps.shape != (3,) or np.any(temps <= 0):
        raise ValidationError("temperatures must be three positive numbers", key="initial.temperatures")
    if int(ini["x_mode"]) < 0 or (int(ini["x_mode"]) > 0 and space.dim == 0):
        raise ValidationError("x_mode needs dim >= 1 and must be non-negative", key="initial.x_mode")
    ev = dict(cfg["evolve"])
    ev["norms"] = tuple(ev["norms"])
    evolve = EvolveConfig(**ev)  # raises with evolve.* keys
    if cfg["linear"]["tag"] not in ("B", "Lambda"):
        raise ValidationError("tag must be B or Lambda", key="linear.tag")
    if cfg["probe"]["kind"] not in ("bilinear", "aux"):
        raise ValidationError("kind must be bilinear or aux", key="probe.kind")
    if cfg["spectrum"]["weight"] not in ("none", "gaussian"):
        raise ValidationError("weight must be none or gaussian", key="spectrum.weight")
    if len(cfg["spectrum"]["xi"]) != 3:
        raise ValidationError("xi needs three components", key="spectrum.xi")
    win = cfg["fit"]["window"]
    if win is not None and (len(win) != 2 or not win[0] < win[1]):
        raise ValidationError("window must be [t_a, t_b] with t_a < t_b", key="fit.window")
    out = cfg["output"]["dir"] or f"out/{cfg['name']}"
    out = Path(out)
    if base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out
    return Scenario(cfg["name"], cfg["pipeline"], model, vgrid, space, ini, evolve,
                    _number(cfg["seed"], "seed", int), _number(cfg["time_budget"], "time_budget"), out, cfg)


def resolve_path(path) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    bundled = SCENARIO_DIR / f"{path}.yaml"
    if bundled.exists():
        return bundled
    raise ValidationError(f"no scenario file {path!r}", key="scenario")


def load_scenario(path, overrides=(), output_dir=None) -> Scenario:
    """Read, override and validate a scenario file (or a bundled scenario name)."""
    p = resolve_path(path)
    try:
        raw = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as err:
        raise ValidationError(f"cannot parse {p}: {err}", key="scenario") from err
    if not isinstance(raw, dict):
        raise ValidationError("scenario must be a mapping", key="scenario")
    raw = apply_overrides(raw, overrides)
    if output_dir is not None:
        raw.setdefault("output", {})["dir"] = str(output_dir)
    return build_scenario(raw)


def bundled_scenarios():
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))
