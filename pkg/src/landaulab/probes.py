"""Empirical probes of the convolution and bilinear collision estimates.

The estimates only assert that some constant exists.  A probe samples
random states, evaluates the left-hand side over the right-hand side of
each bound, and reports the largest ratio on two grids.  A bound is called
stable when the largest ratio changes by less than a tolerance under
refinement.  A ratio that keeps growing under refinement is reported, not
raised.

Every ratio is homogeneous of degree zero in each argument, so rescaling
``f``, ``g`` or ``h`` leaves it unchanged (:func:`scale_invariance_defect`).
"""
from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .coefficients import mollify_coefficients
from .collision import get_operator
from .errors import DomainError
from .functionals import _velocity_h1, _x_derivatives, norm_eval
from .grids import DistributionField, KernelSampler, SpatialGrid, VelocityGrid, get_convolver, gradient_v
from .kernels import ModelSpec, bracket, weight_eval

THRESHOLD_MARGIN = 0.1
WORKERS_ENV = "LANDAULAB_WORKERS"


def _workers(workers=None):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


# ------------------------------------------------------------ ensemble
_MONOMIALS = [e for e in itertools.product(range(4), repeat=3) if sum(e) <= 3]


@dataclass
class EnsembleState:
    """``sum_i c_i p_i((v - c_i)/s_i) exp(-|v - c_i|^2 / (2 s_i^2))``, degree of ``p_i`` at most 3."""

    amps: np.ndarray  # (K,)
    centers: np.ndarray  # (K, 3)
    widths: np.ndarray  # (K,)
    poly: np.ndarray  # (K, len(_MONOMIALS))

    def sample(self, vg: VelocityGrid) -> np.ndarray:
        X = vg.mesh
        out = np.zeros(vg.shape)
        for a, c, s, p in zip(self.amps, self.centers, self.widths, self.poly):
            Y = [(X[i] - c[i]) / s for i in range(3)]
            poly = sum(q * Y[0] ** e[0] * Y[1] ** e[1] * Y[2] ** e[2] for q, e in zip(p, _MONOMIALS))
            out += a * poly * np.exp(-0.5 * (Y[0] ** 2 + Y[1] ** 2 + Y[2] ** 2))
        return out


def random_state(rng: np.random.Generator, terms=3, max_shift=3.0, widths=(0.5, 2.0)) -> EnsembleState:
    """Draw one ensemble member (shifted, anisotropic, sign-changing)."""
    d = rng.standard_normal((terms, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    centers = d * max_shift * rng.uniform(0, 1, (terms, 1)) ** (1 / 3)
    return EnsembleState(amps=rng.standard_normal(terms), centers=centers,
                         widths=rng.uniform(*widths, terms),
                         poly=rng.standard_normal((terms, len(_MONOMIALS))) / np.sqrt(len(_MONOMIALS)))


# -------------------------------------------------------------- reports
@dataclass
class ProbeReport:
    """Per-sample ratios and their refinement summary.

    ``rows`` holds dicts with keys ``sample, N, bound, ratio`` and the norms
    entering the right-hand side.  ``summary[bound]`` maps each grid size to
    the largest ratio and stores the relative change between the first two.
    """

    name: str
    seed: int
    model: ModelSpec
    grids: tuple
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    tolerance: float = 0.15

    def ratios(self, bound, N=None):
        return np.array([r["ratio"] for r in self.rows if r["bound"] == bound and (N is None or r["N"] == N)])

    def max_ratio(self, bound, N):
        return float(self.ratios(bound, N).max())

    def _summarize(self):
        skip = ("A_alpha", "mu_check")
        bounds = list(dict.fromkeys(r["bound"] for r in self.rows if r["bound"] not in skip))
        for b in bounds:
            entry = {N: self.max_ratio(b, N) for N in self.grids}
            if len(self.grids) > 1:
                a, c = entry[self.grids[0]], entry[self.grids[-1]]
                change = abs(c - a) / max(abs(a), abs(c)) if max(abs(a), abs(c)) > 0 else 0.0
                entry["change"] = change
                entry["stable"] = bool(change < self.tolerance)
            self.summary[b] = entry

    def red_flags(self):
        """Bounds whose largest ratio moved by more than the tolerance."""
        return [b for b, e in self.summary.items() if not e.get("stable", True)]

    def to_csv(self, path):
        keys = ["sample", "N", "bound", "ratio", "norm_f", "norm_g", "norm_h"]
        with open(path, "w", newline="") as fh:
            fh.write(f"# probe={self.name} seed={self.seed} gamma={self.model.gamma!r} "
                     f"weight={self.model.weight.describe()} grids={list(self.grids)}\n")
            for k, v in self.params.items():
                fh.write(f"# {k}={v!r}\n")
            w = csv.writer(fh)
            w.writerow(keys)
            for r in self.rows:
                w.writerow([r.get(k, "") if k in ("sample", "N", "bound") else repr(float(r.get(k, np.nan)))
                            for k in keys])
            for b, e in self.summary.items():
                if b in ("A_alpha", "mu_check"):
                    fh.write(f"# summary bound={b} " + " ".join(f"{k}={v!r}" for k, v in e.items()) + "\n")
                    continue
                parts = " ".join(f"max_N{N}={e[N]!r}" for N in self.grids)
                extra = f" change={e['change']!r} stable={e['stable']}" if "change" in e else ""
                fh.write(f"# summary bound={b} {parts}{extra}\n")


# ------------------------------------------------------------ helpers
def _lp_weighted(vals, vg, theta, p=2.0):
    br = bracket(np.moveaxis(vg.mesh, 0, -1))
    return float((np.sum(np.abs(vals * br**theta) ** p) * vg.weight) ** (1.0 / p))


def _h1_weighted(vals, vg, theta):
    """Plain ``H^1_v(<v>^theta)`` norm (central differences)."""
    br = bracket(np.moveaxis(vg.mesh, 0, -1))
    grad = gradient_v(vg, vals)
    dens = (vals**2 + np.sum(grad**2, axis=-4)) * br ** (2 * theta)
    return float(np.sqrt(dens.sum() * vg.weight))


def aux_thresholds(gamma, margin=THRESHOLD_MARGIN):
    """Default weight exponents: each bound's threshold plus ``margin``.

    Returns a dict with ``theta`` (for ``a*f``), ``theta_b`` (``b*f``),
    and ``theta_c, p_c`` (``c*f``, with the exponent of the ``L^p`` norm).
    """
    th = {"theta": gamma + 4 + 1.5 + margin, "theta_b": max(gamma + 1, 0.0) + 1.5 + margin}
    if gamma >= 0:
        th.update(theta_c=gamma + 1.5 + margin, p_c=2.0)
    elif gamma > -1.5:
        th.update(theta_c=1.5 + margin, p_c=2.0)
    else:
        th.update(theta_c=2.25 + margin, p_c=4.0)
    return th


def A_alpha(v, alpha, theta):
    """``int |v - w|^alpha <w>^(-theta) dw`` by radial quadrature.

    The angular integral is done in closed form; the radial one by adaptive
    quadrature with a break point at ``r = |v|``.
    """
    if not -3 < alpha < 0:
        raise DomainError("alpha must lie in (-3, 0)", key="alpha")
    if not theta > 3:
        raise DomainError("theta must exceed 3", key="theta")
    s = float(np.linalg.norm(v))

    def angular(r):
        if r == 0:
            return 2.0 * s**alpha
        if s == 0:
            return 2.0 * r**alpha
        if alpha == -2:
            return np.log((s + r) ** 2 / (s - r) ** 2) / (2 * s * r)
        return ((s + r) ** (alpha + 2) - abs(s - r) ** (alpha + 2)) / ((alpha + 2) * s * r)

    f = lambda r: 2 * np.pi * r * r * (1 + r * r) ** (-theta / 2) * angular(r)
    pts = [s] if s > 0 else None
    a, _ = integrate.quad(f, 0, 2 * s + 10, points=pts, limit=400)
    b, _ = integrate.quad(f, 2 * s + 10, np.inf, limit=400)
    return a + b


# ----------------------------------------------------------- aux bounds
def _aux_rows(state_vals, vg, gamma, th):
    """Ratios of the three convolution bounds for one sampled state."""
    V = np.moveaxis(vg.mesh, 0, -1)
    br = bracket(V)
    Aop = get_convolver(vg, KernelSampler("a", gamma))(state_vals)  # (3,3,N,N,N)
    Bop = get_convolver(vg, KernelSampler("b", gamma))(state_vals)
    Cop = get_convolver(vg, KernelSampler("c", gamma))(state_vals)
    X = vg.mesh
    Av = np.einsum("ij...,j...->i...", Aop, X)
    lhs_a = (np.abs(np.einsum("i...,i...->...", Av, X)) + np.sqrt(np.sum(Av**2, axis=0))
             + np.sqrt(np.sum(Aop**2, axis=(0, 1))))
    nf_a = _lp_weighted(state_vals, vg, th["theta"])
    nf_b = _lp_weighted(state_vals, vg, th["theta_b"])
    nf_c = _lp_weighted(state_vals, vg, th["theta_c"], th["p_c"])
    out = []
    for bound, lhs, expo, nf in (("a_conv", lhs_a, gamma + 2, nf_a),
                                 ("b_conv", np.sqrt(np.sum(Bop**2, axis=0)), gamma + 1, nf_b),
                                 ("c_conv", np.abs(Cop), gamma, nf_c)):
        out.append({"bound": bound, "ratio": float((lhs / br**expo).max() / nf) if nf > 0 else 0.0,
                    "norm_f": nf})
    return out


def probe_aux_bounds(model: ModelSpec, samples=16, grids=(16, 24), L=5.0, seed=0, alpha=-1.0,
                     theta_alpha=3.0 + THRESHOLD_MARGIN, vmax=10.0, radii=64, mu_grid=(8.0, 24),
                     workers=None, tolerance=0.15) -> ProbeReport:
    """Sample the auxiliary convolution bounds.

    Bounds reported (``bound`` column):

    ``A_alpha``
        ``A_alpha(v) / <v>^alpha`` on ``radii`` (and ``2 radii``) radii in
        ``[0, vmax]``; the ``N`` column holds the radial sample count.
    ``a_conv``, ``b_conv``, ``c_conv``
        ``sup_v LHS(v) / (<v>^e ||f||)`` with the norm exponents of
        :func:`aux_thresholds`, for each random ``f``.
    ``mu_check``
        Largest difference between the grid ``c * mu`` and the tabulated
        mollified ``c``, relative to ``max |c|``, on the ``mu_grid = (L, N)``
        box (the probe box is too small to hold ``mu`` to rounding).
    """
    gamma = model.gamma
    th = aux_thresholds(gamma)
    rng = np.random.default_rng(seed)
    states = [random_state(rng) for _ in range(samples)]
    rep = ProbeReport("aux_bounds", seed, model, tuple(grids), tolerance=tolerance,
                      params={"alpha": alpha, "theta_alpha": theta_alpha, "L": L, **th})
    # A_alpha against its quadrature oracle
    for n in (radii, 2 * radii):
        rs = np.linspace(0.0, vmax, n)
        vals = [A_alpha((r, 0, 0), alpha, theta_alpha) / (1 + r * r) ** (alpha / 2) for r in rs]
        rep.rows.append({"sample": -1, "N": n, "bound": "A_alpha", "ratio": float(max(vals))})
    for N in grids:
        vg = VelocityGrid(L, N)
        with ThreadPoolExecutor(_workers(workers)) as ex:
            results = list(ex.map(lambda s: _aux_rows(s.sample(vg), vg, gamma, th), states))
        for i, rows in enumerate(results):
            for r in rows:
                rep.rows.append({"sample": i, "N": N, **r})
    # f = mu cross-check on a box that holds the Maxwellian to rounding
    vg = VelocityGrid(*mu_grid)
    cmu = get_convolver(vg, KernelSampler("c", gamma))(vg.maxwellian())
    cbar = mollify_coefficients(vg, gamma).reshaped("cbar", vg.N)
    rep.rows.append({"sample": -1, "N": vg.N, "bound": "mu_check",
                     "ratio": float(np.abs(cmu - cbar).max() / np.abs(cbar).max())})
    rep._summarize()
    rep.summary["mu_check"] = {"max": float(rep.ratios("mu_check")[0]), "grid": mu_grid}
    # the A_alpha rows are keyed by radial count, not grid size
    a = rep.ratios("A_alpha")
    rep.summary["A_alpha"] = {"max_coarse": float(a[0]), "max_fine": float(a[1]),
                              "change": float(abs(a[1] - a[0]) / a[1]), "stable": bool(abs(a[1] - a[0]) / a[1] < 0.05)}
    return rep


# ------------------------------------------------------------- bilinear
def bilinear_thresholds(gamma, margin=THRESHOLD_MARGIN):
    """``theta`` for ``f`` in both bounds; ``theta_prime`` for the ``gamma <= -3/2`` extra term."""
    return {"theta": gamma + 4 + 1.5 + margin, "theta_prime": 9 / 4 + margin}


def _pairing(q, h, m2, vg):
    return float(np.sum(q * h * m2) * vg.weight)


def bilinear_ratios(f, g, h, vg: VelocityGrid, model: ModelSpec, theta=None, theta_prime=None):
    """Both bilinear ratios for one homogeneous triple.

    Returns a dict with ``trilinear``
    ``|<Q(f,g),h>_m| / (|f|_{L2(<v>^theta)} |g|_{H1**(m)} |h|_{H1*(m)})``,
    ``energy``, the ``<Q(f,g),g>_m`` ratio (with the extra
    ``|f|_{H1(<v>^theta')} |g|_{L2(m)}^2`` term when ``gamma <= -3/2``),
    and the norms involved.
    """
    gamma = model.gamma
    th = bilinear_thresholds(gamma)
    theta = th["theta"] if theta is None else theta
    theta_prime = th["theta_prime"] if theta_prime is None else theta_prime
    op = get_operator(vg, gamma)
    m = weight_eval(model.weight, np.moveaxis(vg.mesh, 0, -1))
    m2 = m * m
    s0 = SpatialGrid(0)
    fld = lambda u: DistributionField(s0, vg, u)
    nf = _lp_weighted(f, vg, theta)
    ng2 = norm_eval(fld(g), "H1**", model)
    nh = norm_eval(fld(h), "H1*", model)
    ng1 = norm_eval(fld(g), "H1*", model)
    qfg = op.q(f, g)
    tri = abs(_pairing(qfg, h, m2, vg))
    en = abs(_pairing(qfg, g, m2, vg))
    rhs = nf * ng1**2
    if gamma <= -1.5:
        rhs += _h1_weighted(f, vg, theta_prime) * norm_eval(fld(g), "Lp", model) ** 2
    den = nf * ng2 * nh
    return {"trilinear": tri / den if den > 0 else 0.0, "energy": en / rhs if rhs > 0 else 0.0,
            "norm_f": nf, "norm_g": ng2, "norm_h": nh}


def _hh3_velocity(values, space, vg, model, zeroth):
    """``HH3_x`` hierarchy over an anisotropic velocity ``H^1`` norm."""
    m = weight_eval(model.weight, np.moveaxis(vg.mesh, 0, -1))
    br = bracket(np.moveaxis(vg.mesh, 0, -1))
    total = 0.0
    for j in range(4):
        mj = m * br ** (-j * (1.0 - 0.5 * model.sigma))
        total += np.sum(_velocity_h1(_x_derivatives(values, space, j), vg, model, mj, zeroth)) * space.cell_volume
    return float(np.sqrt(total))


def _hh3_pairing(q, h, space, vg, model):
    m = weight_eval(model.weight, np.moveaxis(vg.mesh, 0, -1))
    br = bracket(np.moveaxis(vg.mesh, 0, -1))
    total = 0.0
    for j in range(4):
        mj = m * br ** (-j * (1.0 - 0.5 * model.sigma))
        total += np.sum(_x_derivatives(q, space, j) * _x_derivatives(h, space, j) * mj**2)
    return float(total * vg.weight * space.cell_volume)


def slab_ratio(f, g, h, space: SpatialGrid, vg: VelocityGrid, model: ModelSpec):
    """``HH3_x`` trilinear ratio for slab fields (pairing form of the dual estimate).

    ``|<Q(f,g),h>_{HH3 L2(m)}| / (|f|_{HH3 L2(m)} |g|_{HH3 H1**(m)} |h|_{HH3 H1*(m)})``.
    """
    op = get_operator(vg, model.gamma)
    q = op.q(f, g)
    g_, s = model.gamma, model.sigma
    nf = norm_eval(DistributionField(space, vg, f), "HH3xL2", model)
    ng = _hh3_velocity(g, space, vg, model, g_ + 2.0)
    nh = _hh3_velocity(h, space, vg, model, g_ + s)
    den = nf * ng * nh
    return {"ratio": abs(_hh3_pairing(q, h, space, vg, model)) / den if den > 0 else 0.0,
            "norm_f": nf, "norm_g": ng, "norm_h": nh}


def _slab_sample(states, modes, vg, space):
    x = space.nodes()
    out = np.zeros(space.shape + vg.shape)
    for st, (k, phase) in zip(states, modes):
        out += np.cos(2 * np.pi * k * x + phase)[:, None, None, None] * st.sample(vg)[None]
    return out


def probe_bilinear(model: ModelSpec, samples=16, grids=(16, 24), L=5.0, seed=0, theta=None, theta_prime=None,
                   slab=False, Nx=8, workers=None, tolerance=0.15) -> ProbeReport:
    """Sample the bilinear collision estimates over random triples.

    Homogeneous bounds: ``trilinear`` and ``energy`` (see
    :func:`bilinear_ratios`).  With ``slab=True`` the ``HH3`` pairing ratio
    ``slab_trilinear`` is also sampled on 1D-x fields with ``Nx`` nodes,
    each field a sum of three ensemble states times random Fourier modes.
    """
    gamma = model.gamma
    th = bilinear_thresholds(gamma)
    theta = th["theta"] if theta is None else theta
    theta_prime = th["theta_prime"] if theta_prime is None else theta_prime
    rng = np.random.default_rng(seed)
    triples = [tuple(random_state(rng) for _ in range(3)) for _ in range(samples)]
    slabs = []
    if slab:
        for _ in range(samples):
            slabs.append([([random_state(rng) for _ in range(3)],
                           [(int(rng.integers(0, 3)), float(rng.uniform(0, 2 * np.pi))) for _ in range(3)])
                          for _ in range(3)])
    rep = ProbeReport("bilinear", seed, model, tuple(grids), tolerance=tolerance,
                      params={"theta": theta, "theta_prime": theta_prime, "L": L, "slab": slab})
    for N in grids:
        vg = VelocityGrid(L, N)

        def one(tr):
            f, g, h = (s.sample(vg) for s in tr)
            return bilinear_ratios(f, g, h, vg, model, theta, theta_prime)

        with ThreadPoolExecutor(_workers(workers)) as ex:
            results = list(ex.map(one, triples))
        for i, r in enumerate(results):
            norms = {k: r[k] for k in ("norm_f", "norm_g", "norm_h")}
            rep.rows.append({"sample": i, "N": N, "bound": "trilinear", "ratio": r["trilinear"], **norms})
            rep.rows.append({"sample": i, "N": N, "bound": "energy", "ratio": r["energy"], **norms})
        if slab:
            space = SpatialGrid(1, Nx)
            for i, spec in enumerate(slabs):
                f, g, h = (_slab_sample(st, md, vg, space) for st, md in spec)
                r = slab_ratio(f, g, h, space, vg, model)
                rep.rows.append({"sample": i, "N": N, "bound": "slab_trilinear", **r})
    rep._summarize()
    return rep


def scale_invariance_defect(model: ModelSpec, N=12, L=6.0, seed=0, scales=(3.7, -0.02, 250.0)):
    """Largest relative change of the bilinear ratios when ``f, g, h`` are rescaled."""
    rng = np.random.default_rng(seed)
    vg = VelocityGrid(L, N)
    f, g, h = (random_state(rng).sample(vg) for _ in range(3))
    base = bilinear_ratios(f, g, h, vg, model)
    a, b, c = scales
    scaled = bilinear_ratios(a * f, b * g, c * h, vg, model)
    return max(abs(scaled[k] - base[k]) / abs(base[k]) for k in ("trilinear", "energy"))


__all__ = [
    "EnsembleState", "random_state", "ProbeReport", "aux_thresholds", "bilinear_thresholds", "A_alpha",
    "probe_aux_bounds", "probe_bilinear", "bilinear_ratios", "slab_ratio", "scale_invariance_defect",
]
