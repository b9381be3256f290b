"""Scenario pipelines: each one writes CSV artifacts and a ``summary.json``.

CSV files carry no timestamps or timings, so a rerun with the same
scenario and seed reproduces them byte for byte.  Wall times go to the
summary only.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from ..coefficients import mollify_coefficients
from ..dynamics import evolve_linear, evolve_nonlinear, stability_inequality_monitor
from ..errors import BlowUp, MomentDrift
from ..functionals import FUNCTIONALS, abscissa, asymptotic_ratio, find_cutoff, verify_cutoff
from ..grids import DistributionField
from ..linearized import assemble_operator, project_pi0_array, spectral_report
from ..probes import probe_aux_bounds, probe_bilinear, random_state
from .config import Scenario
from .fit import fit_trajectory

log = logging.getLogger(__name__)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def write_summary(out: Path, summary: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")


# ------------------------------------------------------- initial states
def initial_field(sc: Scenario) -> DistributionField:
    """Initial perturbation ``f0`` named by ``initial.family``.

    ``cubic``: ``amplitude (v1^3 mu - Pi_0 v1^3 mu)``.
    ``anisotropic``: bi-temperature Gaussian minus ``mu``, projected.
    ``random``: a seeded ensemble state times ``mu``-scale, projected.
    ``maxwellian``: ``amplitude mu`` (a null direction, not projected).
    A positive ``x_mode`` multiplies the velocity profile by ``cos(2 pi k x_1)``.
    """
    vg, space, ini = sc.vgrid, sc.space, sc.initial
    X = vg.mesh
    mu = vg.maxwellian()
    amp = float(ini["amplitude"])
    fam = ini["family"]
    if fam == "zero":
        prof = np.zeros(vg.shape)
    elif fam == "maxwellian":
        prof = amp * mu
    else:
        if fam == "cubic":
            prof = X[0] ** 3 * mu
        elif fam == "anisotropic":
            T = np.asarray(ini["temperatures"], dtype=float)
            G = np.exp(-sum(X[i] ** 2 / (2 * T[i]) for i in range(3))) / np.sqrt((2 * np.pi) ** 3 * T.prod())
            prof = G - mu
        else:
            st = random_state(np.random.default_rng(sc.seed))
            prof = st.sample(vg) * np.sqrt(mu)
        prof = prof - project_pi0_array(prof, vg)
        if fam != "anisotropic":
            prof = amp * prof
    k = int(ini["x_mode"])
    if space.dim == 0:
        vals = prof
    else:
        x = space.nodes()
        shape = (-1,) + (1,) * (space.dim - 1 + 3)
        modes = np.cos(2 * np.pi * k * x).reshape(shape) if k else np.ones(shape)
        vals = np.broadcast_to(modes * prof, space.shape + vg.shape).copy()
    return DistributionField(space, vg, vals)


# ------------------------------------------------------------ pipelines
def run_coeffs(sc: Scenario) -> dict:
    """Mollified coefficients at every node: ``coefficients.csv``."""
    fld = mollify_coefficients(sc.vgrid, sc.model.gamma)
    path = sc.output_dir / "coefficients.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    names = ["v1", "v2", "v3"] + [f"abar{i}{j}" for i in range(1, 4) for j in range(1, 4)] \
        + ["bbar1", "bbar2", "bbar3", "cbar", "ell1", "ell2"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for k in range(fld.points.shape[0]):
            row = list(fld.points[k]) + list(fld.abar[k].ravel()) + list(fld.bbar[k]) \
                + [fld.cbar[k], fld.ell1[k], fld.ell2[k]]
            w.writerow([repr(float(x)) for x in row])
    return {"artifacts": [path.name], "nodes": int(fld.points.shape[0]),
            "max_abs_cbar": float(np.abs(fld.cbar).max())}


def run_dissipativity(sc: Scenario) -> dict:
    """Abscissa, functional profile and cutoff search: ``functional.csv``."""
    d = sc.section("dissipativity")
    p, which = float(d["p"]), d["which"]
    ab = abscissa(sc.model, p)
    lam = float(d["lam"]) if d["lam"] is not None else (0.5 * ab.value if not ab.infinite else 1.0)
    radii = np.concatenate([[0.0], np.geomspace(1e-2, 4 * float(d["radius"]), 200)])
    v = np.zeros((radii.size, 3))
    v[:, 0] = radii
    vals = FUNCTIONALS[which](sc.model, p, v)
    path = sc.output_dir / "functional.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["radius", which])
        for r, f in zip(radii, vals):
            w.writerow([repr(float(r)), repr(float(f))])
    res = find_cutoff(sc.model, p, lam, float(d["delta"]), which=which, part=int(d["part"]))
    ok = verify_cutoff(res, sc.model)
    out = {"artifacts": [path.name], "abscissa": ab.value, "abscissa_tag": ab.tag, "lam": lam,
           "M": res.M, "R": res.R, "witness_margin": res.witness.worst, "verified": bool(ok)}
    try:
        out["asymptotic_ratio"] = asymptotic_ratio(sc.model, p, which, float(d["radius"]))
    except Exception as err:  # not every functional has a closed-form limit
        out["asymptotic_ratio"] = None
        log.info("no asymptotic ratio: %s", err)
    return out


def run_spectrum(sc: Scenario) -> dict:
    """Dense spectrum: ``spectrum.csv``."""
    s = sc.section("spectrum")
    om = assemble_operator(s["tag"], sc.model, sc.vgrid, xi=tuple(map(float, s["xi"])), weight=s["weight"])
    rep = spectral_report(om)
    path = sc.output_dir / "spectrum.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    rep.to_csv(path)
    return {"artifacts": [path.name], **rep.summary()}


def _fit_summary(sc: Scenario, traj):
    f = sc.section("fit")
    try:
        return fit_trajectory(traj, f["column"], f["window"]).as_dict()
    except Exception as err:
        return {"error": str(err)}


def run_evolve(sc: Scenario, mode=None) -> dict:
    """Linear or nonlinear run: ``trajectory.csv`` plus a decay fit."""
    mode = mode or (sc.pipeline if sc.pipeline.startswith("evolve") else "evolve-nonlinear")
    f0 = initial_field(sc)
    path = sc.output_dir / "trajectory.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if mode == "evolve-linear":
            traj = evolve_linear(f0, sc.section("linear")["tag"], sc.model, sc.evolve)
        else:
            traj = evolve_nonlinear(f0, sc.model, sc.evolve)
    except (BlowUp, MomentDrift) as err:
        if getattr(err, "trajectory", None) is not None and err.trajectory.times:
            err.trajectory.to_csv(path)
        raise
    traj.to_csv(path)
    out = {"artifacts": [path.name], "mode": mode, "steps": traj.meta.get("steps"), "dt": traj.meta.get("dt"),
           "drift": traj.drift(), "fit": _fit_summary(sc, traj), "evolve_wall": traj.meta.get("wall")}
    if mode == "evolve-nonlinear":
        out["positivity_violations"] = len(traj.positivity_violations)
        out["min_density"] = min(traj.min_density) if traj.min_density else None
        if {"HH3xL2", "HH3xH1*"} <= set(traj.norms):
            led = stability_inequality_monitor(traj, sc.model)
            out["stability"] = {"lam2": led.lam2, "K": led.K, "C": led.C, "feasible": led.feasible}
    return out


def run_probe(sc: Scenario) -> dict:
    """Probe report: ``probe.csv``."""
    p = sc.section("probe")
    kw = dict(samples=int(p["samples"]), grids=tuple(int(n) for n in p["grids"]), L=float(p["L"]), seed=sc.seed)
    if p["kind"] == "aux":
        rep = probe_aux_bounds(sc.model, **kw)
    else:
        rep = probe_bilinear(sc.model, slab=bool(p["slab"]), **kw)
    path = sc.output_dir / "probe.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    rep.to_csv(path)
    summary = {b: {str(k): v for k, v in e.items()} for b, e in rep.summary.items()}
    return {"artifacts": [path.name], "summary": summary, "red_flags": rep.red_flags(), "seed": sc.seed}


def run_decay_fit(sc: Scenario) -> dict:
    """Fit the scenario's trajectory CSV, running the evolution first if it is missing."""
    path = sc.output_dir / "trajectory.csv"
    ran = None
    if not path.exists():
        ran = run_evolve(sc)
    f = sc.section("fit")
    fit = fit_trajectory(path, f["column"], f["window"])
    out = {"artifacts": [path.name], "fit": fit.as_dict()}
    if ran is not None:
        out["evolve"] = ran
    return out


PIPELINE_FUNCS = {
    "coeffs": run_coeffs,
    "dissipativity": run_dissipativity,
    "spectrum": run_spectrum,
    "evolve-linear": lambda sc: run_evolve(sc, "evolve-linear"),
    "evolve-nonlinear": lambda sc: run_evolve(sc, "evolve-nonlinear"),
    "evolve": run_evolve,
    "probe": run_probe,
    "decay-fit": run_decay_fit,
}


def run_pipeline(sc: Scenario, name=None) -> dict:
    """Run ``name`` (default: the scenario's pipeline) and write ``summary.json``."""
    name = name or sc.pipeline
    t0 = time.perf_counter()
    out = PIPELINE_FUNCS[name](sc)
    wall = time.perf_counter() - t0
    summary = {"scenario": sc.name, "pipeline": name, "seed": sc.seed, "wall": wall,
               "time_budget": sc.time_budget, "within_budget": wall <= sc.time_budget, **out}
    if wall > sc.time_budget:
        log.warning("scenario %s took %.1fs, over its %.0fs budget", sc.name, wall, sc.time_budget)
    write_summary(sc.output_dir, summary)
    return summary


def amplitude_sweep(sc: Scenario, factors=(1.0, 10.0)) -> list:
    """Nonlinear runs at scaled initial amplitudes.

    Stands in for the non-constructive smallness threshold: each entry
    records the fitted rate or the failure (``MomentDrift``, ``BlowUp``).
    """
    rows = []
    base = float(sc.initial["amplitude"])
    for fac in factors:
        sc.initial["amplitude"] = base * fac
        try:
            f0 = initial_field(sc)
            traj = evolve_nonlinear(f0, sc.model, sc.evolve)
            fit = fit_trajectory(traj, sc.section("fit")["column"], sc.section("fit")["window"])
            rows.append({"factor": fac, "outcome": "decay", "rate": fit.rate, "r_squared": fit.r_squared,
                         "positivity_violations": len(traj.positivity_violations)})
        except (BlowUp, MomentDrift) as err:
            rows.append({"factor": fac, "outcome": type(err).__name__, "message": str(err)})
        except Exception as err:
            rows.append({"factor": fac, "outcome": type(err).__name__, "message": str(err)})
        finally:
            sc.initial["amplitude"] = base
    return rows
