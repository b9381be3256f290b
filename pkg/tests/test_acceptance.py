"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section at the
end of the pytest run (see ``conftest.py``).  Thresholds are the ones the
criteria state; nothing here is tuned to the measured values.
"""
import dataclasses
import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from landaulab import grids as G
from landaulab.coefficients import mollify_coefficients
from landaulab.collision import q_divergence_form
from landaulab.dynamics import EvolveConfig, evolve_linear, evolve_nonlinear, sample_dissipation
from landaulab.errors import Infeasible
from landaulab.functionals import abscissa, asymptotic_ratio, find_cutoff, verify_cutoff
from landaulab.grids import DistributionField, VelocityGrid
from landaulab.kernels import CutoffSpec, ModelSpec, WeightSpec
from landaulab.lab import load_scenario
from landaulab.lab.pipelines import amplitude_sweep, initial_field, run_pipeline
from landaulab.linearized import assemble_operator, linearized, project_pi0_array, spectral_report
from landaulab.probes import probe_bilinear, scale_invariance_defect

pytestmark = pytest.mark.slow

XI = (2 * np.pi, 0.0, 0.0)
GAUSS = WeightSpec.gaussian(0.25)
SPECTRAL_L = 4.0
INF = math.inf

_MATRICES = {}


def spectrum(tag, gamma, N, xi=None):
    """Dense Gaussian-weighted spectrum, cached across criteria; also returns timings."""
    key = (tag, gamma, N, xi)
    if key not in _MATRICES:
        t0 = time.perf_counter()
        om = assemble_operator(tag, ModelSpec(gamma, GAUSS), VelocityGrid(SPECTRAL_L, N), xi=xi, weight="gaussian")
        t1 = time.perf_counter()
        rep = spectral_report(om)
        _MATRICES[key] = (om, rep, t1 - t0 + time.perf_counter() - t1)
    return _MATRICES[key]


@pytest.fixture(scope="module")
def conservation_run():
    sc = load_scenario("maxwell-conservation")
    cfg = dataclasses.replace(sc.evolve, keep_fields=True)
    f0 = initial_field(sc)
    t0 = time.perf_counter()
    tr = evolve_nonlinear(f0, sc.model, cfg)
    return sc, tr, time.perf_counter() - t0


# ------------------------------------------------------------- oracles first
def test_c14_oracle_equivalence(criterion, rng):
    g = VelocityGrid(4.0, 8)
    worst = 0.0
    for kind, gamma in (("a", 0.0), ("a", -2.0), ("a", 1.0), ("b", 1.0), ("b", -1.0), ("c", -1.0), ("one", 0.0)):
        f = rng.normal(size=g.shape)
        s = G.KernelSampler(kind, gamma)
        slow = G.convolve_direct(s, f, g)
        fast = G.convolve_velocity(s, f, g)
        worst = max(worst, np.abs(fast - slow).max() / max(1.0, np.abs(slow).max()))
    quad = mollify_coefficients(g, 0.0, method="quadrature")
    v = g.points
    abar = (np.einsum("ni,ni->n", v, v) + 2)[:, None, None] * np.eye(3) - v[:, :, None] * v[:, None, :]
    coef = max(np.abs(quad.abar - abar).max(), np.abs(quad.bbar + 2 * v).max(), np.abs(quad.cbar + 6).max())
    ok = worst <= 1e-12 and coef <= 1e-8
    criterion(14, "oracle equivalence", ok, f"FFT vs direct {worst:.2e} (<=1e-12), coefficients vs closed form "
                                            f"{coef:.2e} (<=1e-8)")
    assert ok


ABSCISSA_TABLE = [
    (1.0, WeightSpec.polynomial(8), 2, INF, "H1(i)"),
    (0.5, WeightSpec.polynomial(10), 1, INF, "H1(i)"),
    (1.0, WeightSpec.stretched(1.0, 1.0), 2, INF, "H1(ii)"),
    (0.5, WeightSpec.gaussian(0.25), 2, INF, "H1(iii)"),
    (0.0, WeightSpec.polynomial(10), 2, 17.0, "H2(i)"),
    (0.0, WeightSpec.polynomial(6), 1, 12.0, "H2(i)"),
    (0.0, WeightSpec.polynomial(8), INF, 10.0, "H2(i)"),
    (0.0, WeightSpec.stretched(0.5, 1.5), 2, INF, "H2(ii)"),
    (0.0, WeightSpec.gaussian(0.4), 2, INF, "H2(iii)"),
    (-1.0, WeightSpec.stretched(1.0, 1.5), 2, INF, "H3(i)"),
    (-1.5, WeightSpec.gaussian(0.3), 2, INF, "H3(ii)"),
    (-2.0, WeightSpec.gaussian(0.25), 2, 0.5, "H3(iii)"),
]


def test_c09_abscissa_table(criterion):
    bad = []
    for gamma, w, p, value, tag in ABSCISSA_TABLE:
        res = abscissa(ModelSpec(gamma, w), p)
        if not (res.value == value and res.tag == tag):
            bad.append((gamma, w.describe(), p, res.value, res.tag))
    ok = not bad
    criterion(9, "abscissa table", ok, f"{len(ABSCISSA_TABLE) - len(bad)}/{len(ABSCISSA_TABLE)} bit-exact"
                                       + (f"; mismatches {bad}" if bad else ""))
    assert ok


def test_c10_asymptotic_ratios(criterion):
    cases = [
        ("polynomial k=10, p=2", ModelSpec(0.0, WeightSpec.polynomial(10)), 2, "phi"),
        ("gaussian r=0.1, p=2, tilde", ModelSpec(0.0, WeightSpec.gaussian(0.1)), 2, "phi_tilde"),
        ("stretched r=0.5 s=1, p=1", ModelSpec(0.0, WeightSpec.stretched(0.5, 1.0)), 1, "phi"),
    ]
    ratios = {name: asymptotic_ratio(m, p, which, 40.0) for name, m, p, which in cases}
    # informational: the stretched family at p=2 (not asserted, see the ledger)
    best2 = max(asymptotic_ratio(ModelSpec(0.0, WeightSpec.stretched(r, s)), 2, "phi", 40.0)
                for r in (0.1, 0.5, 1.0, 2.0) for s in (0.5, 1.0, 1.5))
    ok = all(abs(r - 1) <= 0.05 for r in ratios.values())
    detail = ", ".join(f"{k}: {v:.4f}" for k, v in ratios.items())
    criterion(10, "phi asymptotics at |v|=40", ok, f"{detail} (within 5%); stretched p=2 best {best2:.4f}")
    assert ok


def test_c11_find_cutoff_soundness(criterion):
    cases = [
        (ModelSpec(0.0, WeightSpec.polynomial(10)), 2, 8.5, 1.0, 2),
        (ModelSpec(0.0, WeightSpec.polynomial(10)), 2, 8.5, 1.0, 1),
        (ModelSpec(0.0, WeightSpec.polynomial(6)), 1, 6.0, 1.0, 2),
        (ModelSpec(0.0, WeightSpec.gaussian(0.1)), 2, 50.0, 0.1, 2),
        (ModelSpec(-1.0, WeightSpec.stretched(1.0, 1.5)), 2, 5.0, 0.5, 2),
    ]
    margins = []
    for m, p, lam, delta, part in cases:
        res = find_cutoff(m, p, lam, delta, part=part)
        margins.append(verify_cutoff(res, m, refine=2))
    infeasible = 0
    for m, p, lam in ((ModelSpec(0.0, WeightSpec.polynomial(10)), 2, 17.0),
                      (ModelSpec(0.0, WeightSpec.polynomial(10)), 2, 20.0),
                      (ModelSpec(-2.0, WeightSpec.gaussian(0.25)), 2, 0.5)):
        try:
            find_cutoff(m, p, lam, 0.1)
        except Infeasible:
            infeasible += 1
    ok = max(margins) <= 0.0 and infeasible == 3
    criterion(11, "find_cutoff soundness", ok, f"worst margin on 2x grid {max(margins):.3e} (<=0), "
                                               f"Infeasible {infeasible}/3")
    assert ok


def test_c08_adjoint_identity(criterion, rng):
    g = VelocityGrid(4.0, 8)
    lin = linearized(g, ModelSpec(0.0, WeightSpec.polynomial(4), CutoffSpec(4.0, 1.5)))
    worst = 0.0
    for _ in range(100):
        u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        w = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        a = np.vdot(w, lin.apply_Bm(u, XI))
        b = np.vdot(lin.apply_Bm_adjoint(w, XI), u)
        worst = max(worst, abs(a - b) / abs(a))
    ok = worst <= 1e-8
    criterion(8, "B_m adjoint pairing", ok, f"max relative mismatch {worst:.2e} over 100 pairs (<=1e-8)")
    assert ok


# --------------------------------------------------------- discrete operator
def test_c03_equilibrium_annihilation(criterion):
    errs, hs = [], []
    for N in (16, 24, 32):
        g = VelocityGrid(8.0, N)
        mu = g.maxwellian()
        errs.append(np.abs(q_divergence_form(mu, mu, 0.0, g)).max())
        hs.append(g.dv)
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    C = max(e / h**2 for e, h in zip(errs, hs))
    ok = order >= 1.8
    criterion(3, "Q(mu,mu) annihilation", ok, f"order {order:.3f} (>=1.8), errors {', '.join(f'{e:.2e}' for e in errs)}, "
                                              f"C = max err/dv^2 = {C:.3f}")
    assert ok


def test_c04_null_space(criterion):
    lines, ok = [], True
    for gamma in (0.0, 1.0):
        om, rep, _ = spectrum("L", gamma, 12)
        g = VelocityGrid(SPECTRAL_L, 12)
        lin = linearized(g, ModelSpec(gamma, GAUSS))
        mu = g.maxwellian()
        scale = np.abs(lin.apply_L(g.v2 * g.v2 * mu)).max()
        res = max(np.abs(lin.apply_L(p)).max() / scale for p in lin.null_vectors())
        good = rep.null_count == 5 and res <= g.dv**2
        ok &= good
        lines.append(f"gamma={gamma:g}: {rep.null_count} null eigenvalues, residual {res:.1e} (<= dv^2={g.dv**2:.2f})")
    criterion(4, "null space of L", ok, "; ".join(lines))
    assert ok


def test_c05_spectral_gap(criterion):
    lines, ok = [], True
    for xi in (None, XI):
        _, r12, t12 = spectrum("Lambda", 0.0, 12, xi)
        _, r16, t16 = spectrum("Lambda", 0.0, 16, xi)
        change = abs(r16.gap - r12.gap) / r12.gap
        good = r12.gap > 0 and r16.gap > 0 and change < 0.10 and max(t12, t16) <= 600
        ok &= good
        label = "xi=0" if xi is None else "xi=(2pi,0,0)"
        lines.append(f"{label}: gap {r12.gap:.4f}/{r16.gap:.4f} (N=12/16), change {change:.1%}, "
                     f"slowest matrix {max(t12, t16):.0f}s")
    criterion(5, "spectral gap", ok, "; ".join(lines))
    assert ok


# ------------------------------------------------------------------ dynamics
def test_c06_semigroup_vs_expm(criterion):
    g = VelocityGrid(4.0, 12)
    model = ModelSpec(0.0)
    X = g.mesh
    f = X[0] ** 3 * g.maxwellian() + 0.3 * X[1] * X[2] * g.maxwellian()
    f = f - project_pi0_array(f, g)
    tr = evolve_linear(DistributionField.homogeneous(g, f), "Lambda", model,
                       EvolveConfig(t_end=0.1, keep_fields=True, record_every=10**6))
    M = assemble_operator("L", model, g).matrix
    exact = sla.expm(0.1 * M) @ f.ravel()
    err = np.linalg.norm(tr.fields[-1].values.ravel() - exact) / np.linalg.norm(exact)
    ok = err <= 1e-6
    criterion(6, "semigroup vs expm", ok, f"relative error {err:.2e} at t=0.1, N=12 (<=1e-6)")
    assert ok


def test_c07_dissipativity_of_B(criterion, rng):
    model = ModelSpec(0.0, WeightSpec.polynomial(10))
    lam = 0.5 * abscissa(model, 2).value
    res = find_cutoff(model, 2, lam, 1.0, part=1)
    mc = model.with_cutoff(res.cutoff)
    g = VelocityGrid(8.0, 16)
    env = np.exp(-g.v2 / 4)
    slopes = []
    for _ in range(5):
        f0 = DistributionField.homogeneous(g, rng.standard_normal(g.shape) * env)
        tr = evolve_linear(f0, "B", mc, EvolveConfig(t_end=1.0, dt=0.01, integrator="semi_implicit"))
        t = np.asarray(tr.times)
        slopes.append(np.polyfit(t, np.log(tr.norm("Lp")), 1)[0])
    ok = max(slopes) <= -0.9 * lam
    criterion(7, "dissipativity of B", ok, f"lambda={lam:g}, M={res.M:.2f}, R={res.R:g}; log-slopes "
                                           f"{', '.join(f'{s:.1f}' for s in slopes)} (<= {-0.9 * lam:.2f})")
    assert ok


def test_c01_conservation(criterion, conservation_run):
    sc, tr, wall = conservation_run
    m = np.asarray(tr.mass)
    p = np.asarray(tr.momentum)
    E = np.asarray(tr.energy)
    mass = np.abs(m - m[0]).max()
    mom = np.abs(p - p[0]).max()
    en = np.abs(E - E[0]).max()
    ok = mass <= 1e-13 and mom <= 1e-7 and en <= 1e-7 and wall <= 300
    criterion(1, "conservation", ok, f"mass drift {mass:.1e} (machine precision, <=1e-13), momentum {mom:.1e}, "
                                     f"energy {en:.1e} (<=1e-7), runtime {wall:.0f}s (<=300s); "
                                     f"positivity violations {len(tr.positivity_violations)}")
    assert ok


def test_c02_h_theorem(criterion, conservation_run):
    sc, tr, _ = conservation_run
    H = np.asarray(tr.entropy)
    rise = np.max((np.diff(H)) / np.abs(H[:-1]))
    D = [d for _, d in sample_dissipation(tr, sc.model.gamma, 5)]
    ok = rise <= 1e-8 and min(D) >= -1e-8 and len(D) == 5
    criterion(2, "H-theorem", ok, f"largest relative entropy increase {rise:.1e} (<=1e-8), "
                                  f"D on 5 states min {min(D):.2e} (>=-1e-8)")
    assert ok


def test_c12_nonlinear_decay(criterion, tmp_path):
    sc = load_scenario("maxwell-homog-decay", output_dir=tmp_path / "decay")
    summary = run_pipeline(sc)
    fit = summary["fit"]
    _, rep, _ = spectrum("L", 0.0, 12)
    rel = abs(fit["rate"] - rep.gap) / rep.gap
    sweep = amplitude_sweep(sc, factors=(10.0,))[0]
    big = (f"rate {sweep['rate']:.3f}, r2 {sweep['r_squared']:.4f}" if sweep["outcome"] == "decay"
           else sweep["outcome"])
    ok = fit["r_squared"] >= 0.99 and rel <= 0.25
    criterion(12, "nonlinear decay", ok, f"rate {fit['rate']:.3f} vs gap {rep.gap:.3f} ({rel:.1%}, <=25%), "
                                         f"r2 {fit['r_squared']:.6f} (>=0.99); 10x amplitude: {big} (reported)")
    assert ok


def test_c13_bilinear_probe(criterion):
    model = ModelSpec(0.0, WeightSpec.polynomial(10))
    rep = probe_bilinear(model, samples=16, grids=(16, 24), L=5.0, seed=0)
    changes = {b: rep.summary[b]["change"] for b in rep.summary if "change" in rep.summary[b]}
    defect = max(scale_invariance_defect(ModelSpec(g, WeightSpec.polynomial(10) if g >= 0 else GAUSS))
                 for g in (0.0, -2.0))
    ok = all(c < 0.15 for c in changes.values()) and defect <= 1e-12
    criterion(13, "bilinear probe stability", ok,
              ", ".join(f"{b} change {c:.1%}" for b, c in changes.items()) + f" (<15%); scale defect {defect:.1e}")
    assert ok
