"""Dissipativity functionals, abscissas, cutoff search and weighted norms.

The functionals are built from the mollified coefficients and the
logarithmic derivatives of the weight ``m``:

    phi_{m,p}  = abar : D2m/m + (p-1) abar Dm/m . Dm/m + 2 bbar . Dm/m + (1/p - 1) cbar
    phi~_{m,p} = (2/p - 1) abar : D2m/m + (2 - 2/p) abar Dm/m . Dm/m
                 + (2/p) bbar . Dm/m + (1/p - 1) cbar
    psi_{m,1}  = bbar . Dm/m + r s ell2 <v>^{s-2}          (exponential weights)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import coefficients_at
from .errors import DomainError, InadmissibleWeight, Infeasible, SearchExhausted, ValidationError
from .grids import DistributionField, gradient_v
from .kernels import (
    CutoffSpec,
    ModelSpec,
    bracket,
    cutoff_chi,
    cutoff_grad_norm,
    radial_projector,
    weight_eval,
    weight_log_derivs,
)

INF = math.inf


# ---------------------------------------------------------------- abscissa
@dataclass(frozen=True)
class AbscissaResult:
    """Abscissa ``lambda_{m,p}`` and the hypothesis branch that produced it.

    Attributes
    ----------
    value : float
        ``math.inf`` when the branch defines the abscissa as infinite.
    tag : str
        Branch label such as ``"H2(i)"``.
    phi_value : float or None
        For Gaussian weights, the abscissa that applies to ``phi_{m,p}``
        (rather than ``phi~_{m,p}``): ``4r(1-2rp)`` at gamma = -2 and
        infinity otherwise, provided ``r < 1/(2p)``; None when that
        restriction fails.
    """

    value: float
    tag: str
    phi_value: float | None = None

    @property
    def infinite(self) -> bool:
        return self.value == INF


def _check_p(p):
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p={p} must lie in [1, inf]", key="p")
    return p


def abscissa(model: ModelSpec, p=2.0) -> AbscissaResult:
    """Branch table of the abscissa for hard, Maxwellian and soft potentials.

    Raises
    ------
    InadmissibleWeight
        If the weight falls outside every branch for this ``gamma`` and ``p``.
    """
    p = _check_p(p)
    g, w = model.gamma, model.weight
    q = 1.0 - 1.0 / p  # 1 - 1/p, equal to 1 for p = inf
    head = "H1" if g > 0 else ("H2" if g == 0 else "H3")
    if w.family == "polynomial":
        if g < 0:
            raise InadmissibleWeight(
                f"polynomial weights are not admissible for gamma={g} < 0", key="weight.family")
        kmin = g + 2.0 + 3.0 * q
        if not w.k > kmin:
            raise InadmissibleWeight(f"polynomial weight needs k > gamma + 2 + 3(1 - 1/p) = {kmin:g}",
                                     key="weight.k")
        if g > 0:
            return AbscissaResult(INF, "H1(i)")
        return AbscissaResult(2.0 * (w.k - (g + 3.0) * q), "H2(i)")
    if w.family == "stretched_exp":
        if g == -2.0:
            raise InadmissibleWeight("gamma=-2 admits only the Gaussian weight exp(r<v>^2)",
                                     key="weight.family")
        if g < 0 and not w.s + g > 0:
            raise InadmissibleWeight(f"stretched weight needs s + gamma > 0 (s={w.s:g}, gamma={g:g})",
                                     key="weight.s")
        return AbscissaResult(INF, head + ("(ii)" if g >= 0 else "(i)"))
    # Gaussian weight, r in (0, 1/2) already enforced by WeightSpec
    r = w.r
    phi_ok = r < 1.0 / (2.0 * p)
    if g == -2.0:
        return AbscissaResult(4.0 * r * (1.0 - 2.0 * r), "H3(iii)",
                              4.0 * r * (1.0 - 2.0 * r * p) if phi_ok else None)
    return AbscissaResult(INF, head + ("(iii)" if g >= 0 else "(ii)"), INF if phi_ok else None)


# ----------------------------------------------------------- functionals
def _pieces(model: ModelSpec, v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    c = coefficients_at(model.gamma, v)
    d1, d2 = weight_log_derivs(model.weight, v)
    a, b = c["abar"], c["bbar"]
    hess = np.einsum("nij,nij->n", a, d2)
    quad = np.einsum("nij,ni,nj->n", a, d1, d1)
    drift = np.einsum("ni,ni->n", b, d1)
    return hess, quad, drift, c


def phi_mp(model: ModelSpec, p, v):
    """``phi_{m,p}`` at velocities ``v`` (shape ``(n, 3)`` or ``(3,)``)."""
    p = _check_p(p)
    hess, quad, drift, c = _pieces(model, v)
    out = hess + (p - 1.0) * quad + 2.0 * drift + (1.0 / p - 1.0) * c["cbar"]
    return out if np.ndim(v) > 1 else out[0]


def phi_tilde_mp(model: ModelSpec, p, v):
    """``phi~_{m,p}``, the functional with the better Gaussian constant."""
    p = _check_p(p)
    hess, quad, drift, c = _pieces(model, v)
    out = (2.0 / p - 1.0) * hess + (2.0 - 2.0 / p) * quad + (2.0 / p) * drift + (1.0 / p - 1.0) * c["cbar"]
    return out if np.ndim(v) > 1 else out[0]


def psi_m1(model: ModelSpec, v):
    """``psi_{m,1} = bbar . Dm/m + r s ell2 <v>^{s-2}`` for exponential weights."""
    w = model.weight
    if w.family == "polynomial":
        raise InadmissibleWeight("psi_{m,1} is defined for exponential weights; use phi_mp(model, 1, v)",
                                 key="weight.family")
    _, _, drift, c = _pieces(model, v)
    vv = np.atleast_2d(np.asarray(v, dtype=float))
    out = drift + w.r * w.s * c["ell2"] * bracket(vv) ** (w.s - 2.0)
    return out if np.ndim(v) > 1 else out[0]


FUNCTIONALS = {"phi": phi_mp, "phi_tilde": phi_tilde_mp, "psi": lambda m, p, v: psi_m1(m, v)}


def asymptotic_limit(model: ModelSpec, p=2.0, which="phi"):
    """Leading large-|v| behaviour ``(coefficient, exponent)`` of a functional.

    Polynomial: ``-2[k - (gamma+3)(1-1/p)] <v>^gamma``.  Stretched:
    ``-2rs <v>^{gamma+s}``.  Gaussian: ``-4r(1-2pr) <v>^{gamma+2}`` for
    ``phi`` and ``-4r(1-2r) <v>^{gamma+2}`` for ``phi_tilde``.
    """
    p = _check_p(p)
    g, w = model.gamma, model.weight
    if which == "psi":
        raise ValidationError("no tabulated limit for psi", key="which")
    if w.family == "polynomial":
        return -2.0 * (w.k - (g + 3.0) * (1.0 - 1.0 / p)), g
    if w.family == "stretched_exp":
        return -2.0 * w.r * w.s, g + w.s
    r = w.r
    if which == "phi":
        return -4.0 * r * (1.0 - 2.0 * p * r), g + 2.0
    return -4.0 * r * (1.0 - 2.0 * r), g + 2.0


def asymptotic_ratio(model: ModelSpec, p=2.0, which="phi", radius=40.0):
    """``functional(v) / (coefficient <v>^exponent)`` at ``|v| = radius``."""
    coef, expo = asymptotic_limit(model, p, which)
    v = np.array([radius, 0.0, 0.0])
    val = FUNCTIONALS[which](model, p, v)
    return float(val / (coef * (1.0 + radius * radius) ** (0.5 * expo)))


# ----------------------------------------------------------- cutoff search
@dataclass
class CutoffWitness:
    """Check-grid evidence for a cutoff: radii and the two margin profiles.

    ``margin1 = phi - M chi_R + lambda + delta <v>^{gamma+sigma}`` and
    ``margin2`` adds ``M |grad chi_R|``.  ``margin1`` and the tail must be
    ``<= 0``; with ``part == 2`` so must ``margin2``.
    """

    radii: np.ndarray
    margin1: np.ndarray
    margin2: np.ndarray
    tail_radii: np.ndarray
    tail_margin: np.ndarray
    part: int = 2

    @property
    def worst(self) -> float:
        inner = self.margin2.max() if self.part == 2 else self.margin1.max()
        return float(max(inner, self.margin1.max(), self.tail_margin.max()))


@dataclass
class CutoffResult:
    """Outcome of :func:`find_cutoff`."""

    cutoff: CutoffSpec
    lam: float
    delta: float
    which: str
    p: float
    witness: CutoffWitness = field(repr=False)
    part: int = 2

    @property
    def M(self):
        return self.cutoff.M

    @property
    def R(self):
        return self.cutoff.R


def check_grid(R, n=512):
    """Radial check grid: ``0`` plus ``n-1`` log-spaced radii up to ``4R``."""
    return np.concatenate([[0.0], np.geomspace(1e-3, 4.0 * R, n - 1)])


def _radial(model, p, which, radii):
    v = np.stack([radii, np.zeros_like(radii), np.zeros_like(radii)], axis=-1)
    return np.asarray(FUNCTIONALS[which](model, p, v), dtype=float)


def cutoff_margins(model: ModelSpec, p, lam, delta, cutoff: CutoffSpec, which="phi", n=512, values=None,
                   part=2):
    """Evaluate both margin profiles of a cutoff on the radial check grid."""
    radii = check_grid(cutoff.R, n)
    phi = _radial(model, p, which, radii) if values is None else values
    v = np.stack([radii, 0 * radii, 0 * radii], axis=-1)
    target = lam + delta * bracket(v) ** (model.gamma + model.sigma)
    chi = cutoff_chi(cutoff, v)
    m1 = phi - cutoff.M * chi + target
    m2 = m1 + cutoff.M * cutoff_grad_norm(cutoff, v)
    tail_r = 4.0 * cutoff.R * np.geomspace(1.0, 256.0, 33)[1:]
    tv = np.stack([tail_r, 0 * tail_r, 0 * tail_r], axis=-1)
    tail = _radial(model, p, which, tail_r) + lam + delta * bracket(tv) ** (model.gamma + model.sigma)
    return CutoffWitness(radii, m1, m2, tail_r, tail, part)


def _target_abscissa(model, p, which):
    if which == "psi":
        return abscissa(model, 1.0)
    return abscissa(model, p)


def find_cutoff(model: ModelSpec, p, lam, delta, which="phi", part=2, n=512, max_doublings=14) -> CutoffResult:
    """Find ``(M, R)`` with ``functional - M chi_R (+ M |grad chi_R|) <= -lam - delta <v>^{gamma+sigma}``.

    The search doubles ``R`` from 1.  For each ``R`` it sets ``M`` to the
    largest positive part of ``functional + lam + delta <v>^{gamma+sigma}``
    on ``|v| <= 2R`` and verifies both inequalities on a 512-node log grid
    over ``[0, 4R]``.  A geometric tail grid up to ``1024 R`` covers larger speeds.
    ``part=1`` checks only the inequality without the ``M |grad chi_R|``
    term; ``part=2`` checks both.

    Raises
    ------
    Infeasible
        If ``lam`` is not below the applicable abscissa.
    SearchExhausted
        If no ``R`` up to ``2^max_doublings`` works; carries the best margin.
    """
    ab = _target_abscissa(model, p, which)
    limit = ab.value
    if which == "phi" and model.weight.family == "gaussian_exp":
        limit = ab.phi_value if ab.phi_value is not None else -INF
    if not lam < limit:
        raise Infeasible(f"lambda={lam:g} is not below the abscissa {limit:g} ({ab.tag})")
    if not delta > 0 or (limit < INF and not delta < limit - lam):
        raise DomainError(f"delta={delta:g} must lie in (0, abscissa - lambda)", key="delta")
    best = INF
    R = 1.0
    for _ in range(max_doublings + 1):
        radii = check_grid(R, n)
        phi = _radial(model, p, which, radii)
        v = np.stack([radii, 0 * radii, 0 * radii], axis=-1)
        excess = phi + lam + delta * bracket(v) ** (model.gamma + model.sigma)
        M0 = float(np.clip(excess[radii <= 2.0 * R], 0.0, None).max())
        for M in (M0 * 1.05 + 1e-9, 2.0 * M0 + 1.0, 4.0 * M0 + 1.0):
            cut = CutoffSpec(M, R)
            wit = cutoff_margins(model, p, lam, delta, cut, which, n, values=phi, part=part)
            best = min(best, wit.worst)
            if wit.worst <= 0.0:
                return CutoffResult(cut, float(lam), float(delta), which, float(p), wit, part)
        R *= 2.0
    raise SearchExhausted(f"no cutoff found up to R={R / 2:g}", best_margin=best)


def verify_cutoff(result: CutoffResult, model: ModelSpec, refine=2) -> float:
    """Worst margin of a found cutoff on a ``refine`` times finer check grid."""
    n = refine * len(result.witness.radii)
    wit = cutoff_margins(model, result.p, result.lam, result.delta, result.cutoff, result.which, n,
                         part=result.part)
    return wit.worst


# ------------------------------------------------------------------ norms
NORM_TAGS = ("Lp", "H1*", "H1**", "HH3xL2", "HH3xH1*")


def _velocity_h1(values, vgrid, model, mweight, zeroth_exp):
    """Per-x squared anisotropic H^1 velocity norm with multiplier ``mweight``."""
    V = np.moveaxis(vgrid.mesh, 0, -1)
    br = bracket(V)
    g = model.gamma
    grad = gradient_v(vgrid, values)  # (..., 3, N, N, N)
    gv = np.moveaxis(grad, -4, -1)
    radial = radial_projector(V, gv)
    trans = gv - radial
    w2 = mweight**2
    dens = (np.abs(values) ** 2 * br ** zeroth_exp
            + np.sum(np.abs(radial) ** 2, axis=-1) * br**g
            + np.sum(np.abs(trans) ** 2, axis=-1) * br ** (g + 2.0)) * w2
    return dens.sum(axis=(-3, -2, -1)) * vgrid.weight


def _x_derivatives(values, space, order):
    """All ``order``-th centered x-derivatives, stacked on a new leading axis."""
    if order == 0:
        return values[None]
    if space.dim == 0:
        return np.zeros((1,) + values.shape, dtype=values.dtype)
    axes = tuple(range(space.dim))
    if min(space.shape) < 8:
        raise ValidationError(f"x-derivative norms need at least 8 x-nodes per dimension, got {space.shape}",
                              key="space.Nx")
    terms = [values]
    for _ in range(order):
        nxt = []
        for t in terms:
            for ax in axes:
                nxt.append((np.roll(t, -1, axis=ax) - np.roll(t, 1, axis=ax)) / (2.0 * space.dx))
        terms = nxt
    return np.stack(terms)


def norm_eval(f: DistributionField, tag: str, model: ModelSpec, p=2.0):
    """Weighted norm of a distribution field.

    Parameters
    ----------
    f : DistributionField
    tag : {"Lp", "H1*", "H1**", "HH3xL2", "HH3xH1*"}
        ``Lp`` is ``L^p_x L^p_v(m)``; the others are the anisotropic velocity
        Sobolev norms and their graded x-derivative hierarchies.  Velocity
        derivatives use central differences; x-derivatives use centered
        periodic differences.
    model : ModelSpec
        Supplies ``gamma`` and the weight ``m``.
    p : float
        Exponent for ``Lp`` (``inf`` allowed).
    """
    if tag not in NORM_TAGS:
        raise ValidationError(f"unknown norm tag {tag!r}; expected one of {NORM_TAGS}", key="tag")
    vg, sp = f.vgrid, f.space
    V = np.moveaxis(vg.mesh, 0, -1)
    m = weight_eval(model.weight, V)
    vals = f.values
    dx = sp.cell_volume
    if tag == "Lp":
        p = _check_p(p)
        if p == INF:
            return float(np.abs(vals * m).max())
        return float((np.sum(np.abs(vals * m) ** p) * vg.weight * dx) ** (1.0 / p))
    g, sigma = model.gamma, model.sigma
    if tag in ("H1*", "H1**"):
        zeroth = g + (sigma if tag == "H1*" else 2.0)
        return float(np.sqrt(np.sum(_velocity_h1(vals, vg, model, m, zeroth)) * dx))
    br = bracket(V)
    total = 0.0
    for j in range(4):
        mj = m * br ** (-j * (1.0 - 0.5 * sigma))
        ders = _x_derivatives(vals, sp, j)
        if tag == "HH3xL2":
            total += np.sum(np.abs(ders * mj) ** 2) * vg.weight * dx
        else:
            total += np.sum(_velocity_h1(ders, vg, model, mj, g + sigma)) * dx
    return float(np.sqrt(total))


__all__ = [
    "AbscissaResult", "CutoffResult", "CutoffWitness", "abscissa", "phi_mp", "phi_tilde_mp", "psi_m1",
    "asymptotic_limit", "asymptotic_ratio", "find_cutoff", "verify_cutoff", "cutoff_margins", "norm_eval",
    "check_grid", "NORM_TAGS",
]
