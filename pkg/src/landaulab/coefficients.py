"""Mollified coefficients ``a*mu``, ``b*mu``, ``c*mu`` and moments ``J_alpha``.

Every quantity is radial in ``v``, so the three-dimensional integrals are
reduced analytically.  In spherical coordinates centred at ``v`` with
``z = rho * omega`` and ``tau = cos(angle(z, v))`` one has
``mu(v - z) = (2 pi)^(-3/2) exp(-(s^2 + rho^2)/2) exp(s rho tau)``
with ``s = |v|``; the ``tau`` integrals of ``exp(a tau)`` times
``1``, ``tau`` and ``tau^2`` are elementary.  What remains is a smooth
one-dimensional integral in ``rho`` handled by adaptive quadrature.
The ``|z|^gamma`` singularity becomes the integrable factor
``rho^(gamma+2)``.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError
from .kernels import _check_gamma, bracket

_PREF = (2.0 * math.pi) ** -0.5
_TAIL = 14.0  # Gaussian tail cut: exp(-14^2/2) ~ 1e-43
QUAD_RTOL = 1e-12


# scaled angular integrals: e^{-a} * int_{-1}^{1} tau^k e^{a tau} d tau
def _ang0(a):
    if a < 1e-3:
        return math.exp(-a) * 2.0 * (1.0 + a * a / 6.0 + a**4 / 120.0)
    return -math.expm1(-2.0 * a) / a


def _ang1(a):
    # int tau e^{a tau} = 2 (cosh a / a - sinh a / a^2)
    if a < 1e-2:
        return math.exp(-a) * (2.0 * a / 3.0 + a**3 / 15.0 + a**5 / 420.0)
    e = math.exp(-2.0 * a)
    return (1.0 + e) / a - (1.0 - e) / (a * a)


def _ang_perp(a):
    # int (1 - tau^2) e^{a tau} = (4/a^2)(cosh a - sinh a / a)
    if a < 0.5:
        s, term, n = 0.0, 1.0, 1
        # 4 sum_{n>=1} a^{2n-2} 2n / (2n+1)!
        while True:
            t = 4.0 * a ** (2 * n - 2) * 2 * n / math.factorial(2 * n + 1)
            s += t
            if t < 1e-18 * s or n > 30:
                break
            n += 1
        return math.exp(-a) * s
    e = math.exp(-2.0 * a)
    return (2.0 / (a * a)) * ((1.0 + e) - (1.0 - e) / a)


def _radial_quad(fun, s, alpha_sing=None):
    """Integrate ``fun(rho)`` over the support of the Gaussian shell at radius s."""
    lo = max(0.0, s - _TAIL)
    hi = s + _TAIL
    pieces = [(lo, s), (s, hi)] if s > lo else [(lo, hi)]
    total, err = 0.0, 0.0
    for a, b in pieces:
        if b <= a:
            continue
        val, e = integrate.quad(fun, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
        total += val
        err += e
    if not math.isfinite(total) or err > 1e-9 * max(abs(total), 1e-300) + 1e-300:
        raise QuadratureError("radial quadrature did not converge", achieved=err / max(abs(total), 1e-300))
    return total


def _weight(rho, s):
    # exp(-(s - rho)^2 / 2), the exp(s rho) factor is folded into the _ang* helpers
    return math.exp(-0.5 * (s - rho) ** 2)


def j_alpha_radial(alpha, s):
    """``J_alpha`` at ``|v| = s`` (scalar)."""
    alpha = float(alpha)
    if not (-3.0 < alpha <= 3.0):
        raise DomainError(f"alpha={alpha} outside (-3, 3]", key="alpha")
    s = float(s)
    if s == 0.0:
        # explicit: 2^{alpha/2} Gamma((alpha+3)/2) / Gamma(3/2)
        return 2.0 ** (alpha / 2) * math.gamma((alpha + 3) / 2) / math.gamma(1.5)
    f = lambda r: _PREF * r ** (alpha + 2) * _weight(r, s) * _ang0(s * r)
    return _radial_quad(f, s)


def j_alpha(alpha, v):
    """``J_alpha(v) = int |v - w|^alpha mu(w) dw`` for ``-3 < alpha <= 3``.

    Parameters
    ----------
    alpha : float
    v : array_like, shape (3,)

    Returns
    -------
    float
    """
    v = np.asarray(v, dtype=float)
    return j_alpha_radial(alpha, float(np.linalg.norm(v)))


def radial_eigenvalues(gamma, radii):
    """Radial and transverse eigenvalues ``(ell1, ell2)`` of ``a*mu``.

    ``ell2`` is integrated with its own angular factor ``(1 + tau^2) / 2``
    rather than deduced from the trace, so the trace identity
    ``ell1 + 2 ell2 = 2 J_{gamma+2}`` remains a genuine check.
    """
    gamma = _check_gamma(gamma)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    l1 = np.empty_like(radii)
    l2 = np.empty_like(radii)
    p = gamma + 4.0
    for n, s in enumerate(radii):
        if s == 0.0:
            # isotropic: a*mu(0) = (2/3) J_{gamma+2}(0) I
            l1[n] = l2[n] = (2.0 / 3.0) * j_alpha_radial(gamma + 2.0, 0.0)
            continue
        f1 = lambda r: _PREF * r**p * _weight(r, s) * _ang_perp(s * r)
        f2 = lambda r: _PREF * r**p * _weight(r, s) * (_ang0(s * r) - 0.5 * _ang_perp(s * r))
        l1[n] = _radial_quad(f1, s)
        l2[n] = _radial_quad(f2, s)
    return l1, l2


def radial_bbar(gamma, radii):
    """Component of ``b*mu`` along ``v/|v|`` (the transverse part vanishes)."""
    gamma = _check_gamma(gamma)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    out = np.zeros_like(radii)
    for n, s in enumerate(radii):
        if s == 0.0:
            continue
        f = lambda r: -2.0 * _PREF * r ** (gamma + 3.0) * _weight(r, s) * _ang1(s * r)
        out[n] = _radial_quad(f, s)
    return out


def _closed_gamma0(radii):
    radii = np.asarray(radii, dtype=float)
    return 2.0 * np.ones_like(radii), radii**2 + 2.0, -2.0 * radii, -6.0 * np.ones_like(radii)


def _assemble(v, l1, l2, bpar, cbar):
    s = np.linalg.norm(v, axis=-1)
    safe = np.where(s == 0, 1.0, s)
    e = v / safe[..., None]
    ee = e[..., :, None] * e[..., None, :]
    eye = np.eye(3)
    abar = l1[..., None, None] * ee + l2[..., None, None] * (eye - ee)
    abar = np.where((s == 0)[..., None, None], l1[..., None, None] * eye, abar)
    bbar = bpar[..., None] * e
    return abar, bbar


def coefficients_at(gamma, v, method="auto"):
    """Mollified coefficients at arbitrary points.

    Parameters
    ----------
    gamma : float
    v : array_like, shape (n, 3)
    method : {"auto", "closed", "quadrature"}
        ``auto`` uses the closed forms for gamma = 0 and quadrature otherwise.

    Returns
    -------
    dict
        Keys ``abar`` (n,3,3), ``bbar`` (n,3), ``cbar``, ``ell1``, ``ell2`` (n,).
    """
    gamma = _check_gamma(gamma)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    s = np.linalg.norm(v, axis=-1)
    uniq, inv = np.unique(np.round(s, 13), return_inverse=True)
    if method == "closed" or (method == "auto" and gamma == 0.0):
        if gamma != 0.0:
            raise DomainError("closed forms exist only for gamma = 0", key="method")
        l1, l2, bp, cb = _closed_gamma0(uniq)
    elif method in ("auto", "quadrature"):
        l1, l2 = radial_eigenvalues(gamma, uniq)
        bp = radial_bbar(gamma, uniq)
        cb = np.array([-2.0 * (gamma + 3.0) * j_alpha_radial(gamma, x) for x in uniq])
    else:
        raise DomainError(f"unknown method {method!r}", key="method")
    l1, l2, bp, cb = l1[inv], l2[inv], bp[inv], cb[inv]
    abar, bbar = _assemble(v, l1, l2, bp, cb)
    return {"abar": abar, "bbar": bbar, "cbar": cb, "ell1": l1, "ell2": l2}


@dataclass
class CoefficientField:
    """Per-node tables of the mollified coefficients on a velocity grid.

    Arrays are flattened over the grid nodes in C order, matching
    ``grid.points``.
    """

    grid_hash: str
    gamma: float
    abar: np.ndarray
    bbar: np.ndarray
    cbar: np.ndarray
    ell1: np.ndarray
    ell2: np.ndarray
    points: np.ndarray | None = None

    def reshaped(self, name, N):
        arr = getattr(self, name)
        return arr.reshape((N, N, N) + arr.shape[1:])


def check_field(fld: CoefficientField, points=None):
    """Residuals of the structural identities of a coefficient field."""
    v = fld.points if points is None else points
    tr = np.trace(fld.abar, axis1=-2, axis2=-1)
    j = np.array([j_alpha_radial(fld.gamma + 2.0, x) for x in np.linalg.norm(v, axis=-1)])
    scale = np.maximum(1.0, np.abs(j))
    trace_err = float(np.max(np.abs(fld.ell1 + 2 * fld.ell2 - 2 * j) / scale))
    bb = np.abs(fld.bbar + fld.ell1[:, None] * v).max(axis=-1) / np.maximum(1.0, np.abs(fld.ell1) * np.linalg.norm(v, axis=-1))
    eig = np.linalg.eigvalsh(fld.abar)
    return {"trace_err": trace_err, "bbar_err": float(bb.max()), "min_eig": float(eig.min()),
            "trace_consistency": float(np.max(np.abs(tr - fld.ell1 - 2 * fld.ell2) / scale))}


# ---------------------------------------------------------------- cache file
# Layout (little endian):
#   8s  magic  b"LLABCOEF"
#   I   version (1)
#   32s sha256 digest of the grid descriptor (raw bytes)
#   d   gamma
#   Q   number of nodes n
#   n records of 15 doubles: abar (9, row major), bbar (3), cbar, ell1, ell2
_MAGIC = b"LLABCOEF"
_VERSION = 1
_HEADER = struct.Struct("<8sI32sdQ")


def write_cache(path, fld: CoefficientField):
    rec = np.concatenate([fld.abar.reshape(-1, 9), fld.bbar, fld.cbar[:, None], fld.ell1[:, None],
                          fld.ell2[:, None]], axis=1).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, bytes.fromhex(fld.grid_hash), fld.gamma, rec.shape[0]))
        fh.write(rec.tobytes(order="C"))


def read_cache(path) -> CoefficientField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, digest, gamma, n = _HEADER.unpack(head)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"{path}: not a coefficient cache (magic {magic!r}, version {version})")
        rec = np.frombuffer(fh.read(), dtype="<f8").reshape(n, 15)
    rec = rec.astype(float)
    return CoefficientField(digest.hex(), gamma, rec[:, :9].reshape(n, 3, 3).copy(), rec[:, 9:12].copy(),
                            rec[:, 12].copy(), rec[:, 13].copy(), rec[:, 14].copy())


def mollify_coefficients(grid, gamma, method="auto", cache_dir=None) -> CoefficientField:
    """Tabulate the mollified coefficients on every node of ``grid``.

    Parameters
    ----------
    grid : VelocityGrid
    gamma : float
    method : {"auto", "closed", "quadrature"}
    cache_dir : path-like, optional
        When given, the field is read from / written to a binary cache file
        named after a content hash of ``(grid, gamma, method)``.
    """
    gamma = _check_gamma(gamma)
    ghash = grid.content_hash()
    path = None
    if cache_dir is not None:
        key = hashlib.sha256(f"{ghash}|{gamma!r}|{method}".encode()).hexdigest()[:20]
        path = Path(cache_dir) / f"coef-{key}.lcoef"
        if path.exists():
            fld = read_cache(path)
            if fld.grid_hash == ghash and fld.gamma == gamma:
                fld.points = grid.points
                return fld
    d = coefficients_at(gamma, grid.points, method=method)
    fld = CoefficientField(ghash, gamma, d["abar"], d["bbar"], d["cbar"], d["ell1"], d["ell2"], grid.points)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_cache(path, fld)
    return fld


def ell_asymptotics_report(gamma, radii=(1, 2, 4, 8, 16), tol=0.10):
    """Ratios ``ell1 / (2 <v>^gamma)`` and ``ell2 / <v>^(gamma+2)`` along a ray.

    Returns
    -------
    dict
        ``radius``, ``ell1_ratio``, ``ell2_ratio`` arrays and ``flagged``,
        true when the last ratios deviate from 1 by more than ``tol``.
    """
    radii = np.asarray(radii, dtype=float)
    pts = np.stack([radii, 0 * radii, 0 * radii], axis=-1)
    d = coefficients_at(gamma, pts)
    b = bracket(pts)
    r1 = d["ell1"] / (2.0 * b**gamma)
    r2 = d["ell2"] / b ** (gamma + 2.0)
    flagged = bool(abs(r1[-1] - 1) > tol or abs(r2[-1] - 1) > tol)
    return {"radius": radii, "ell1_ratio": r1, "ell2_ratio": r2, "flagged": flagged}


def measure_coercivity(gamma, samples=500, seed=0, vmax=10.0):
    """Smallest observed ratio ``abar xi.xi / (<v>^g |P xi|^2 + <v>^(g+2) |(I-P) xi|^2)``.

    The ratio depends only on ``|v|`` and the angle between ``xi`` and ``v``;
    the minimum over samples is the measured coercivity constant ``c0``.
    """
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(samples, 3))
    v *= (rng.uniform(0, vmax, samples) / np.linalg.norm(v, axis=1))[:, None]
    xi = rng.normal(size=(samples, 3))
    d = coefficients_at(gamma, v)
    num = np.einsum("nij,ni,nj->n", d["abar"], xi, xi)
    vhat = v / np.linalg.norm(v, axis=1)[:, None]
    par = np.einsum("ni,ni->n", xi, vhat)
    perp2 = np.einsum("ni,ni->n", xi, xi) - par**2
    b = bracket(v)
    den = b**gamma * par**2 + b ** (gamma + 2) * perp2
    return float(np.min(num / den))


def j_alpha_bound_constants(alphas, radii):
    """Fit the constants in the upper bounds on ``J_alpha``.

    For ``2 < alpha <= 3`` the bound is ``|v|^a + C |v|^(a/2) + C``, for
    ``0 <= alpha <= 2`` it is ``|v|^a + C`` and for negative alpha
    ``C <v>^a``; the returned value is the smallest ``C`` valid on ``radii``.
    """
    out = {}
    radii = np.asarray(radii, dtype=float)
    for a in alphas:
        j = np.array([j_alpha_radial(a, s) for s in radii])
        if 2 < a <= 3:
            c = (j - radii**a) / (radii ** (a / 2) + 1.0)
        elif 0 <= a <= 2:
            c = j - radii**a
        else:
            c = j / (1 + radii**2) ** (a / 2)
        out[float(a)] = float(max(0.0, c.max()))
    return out
