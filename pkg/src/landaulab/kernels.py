"""Pointwise closed-form objects: collision kernels, Maxwellian, weights.

All functions accept velocities as array-likes whose last axis has length
three and broadcast over leading axes.  Scalars are returned as numpy
scalars for single points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularityError

GAMMA_MIN, GAMMA_MAX = -2.0, 1.0
_MU0 = (2.0 * math.pi) ** -1.5


def _vec(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 3:
        raise ValueError(f"last axis must have length 3, got shape {z.shape}")
    return z


def _check_gamma(gamma):
    gamma = float(gamma)
    if not (GAMMA_MIN <= gamma <= GAMMA_MAX):
        raise DomainError(f"gamma={gamma} outside [{GAMMA_MIN}, {GAMMA_MAX}]", key="potential.gamma")
    return gamma


@dataclass(frozen=True)
class Potential:
    """Interaction exponent of the kernel ``|z|^(gamma+2)``.

    Parameters
    ----------
    gamma : float
        Exponent in ``[-2, 1]``; 0 is the Maxwellian-molecule case.
    """

    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", _check_gamma(self.gamma))

    @property
    def kind(self) -> str:
        if self.gamma > 0:
            return "hard"
        return "maxwellian" if self.gamma == 0 else "soft"


@dataclass(frozen=True)
class WeightSpec:
    """Velocity weight ``m(v)``.

    Use the constructors :meth:`polynomial`, :meth:`stretched` and
    :meth:`gaussian` rather than the raw initializer.

    Attributes
    ----------
    family : {"polynomial", "stretched_exp", "gaussian_exp"}
    k : float
        Exponent of ``<v>^k`` (polynomial family).
    r, s : float
        Parameters of ``exp(r <v>^s)``; ``s == 2`` for the Gaussian family.
    """

    family: str
    k: float = 0.0
    r: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.family == "polynomial":
            if not math.isfinite(self.k):
                raise DomainError("k must be finite", key="weight.k")
        elif self.family == "stretched_exp":
            if not self.r > 0:
                raise DomainError("stretched weight needs r > 0", key="weight.r")
            if not 0 < self.s < 2:
                raise DomainError("stretched weight needs s in (0, 2)", key="weight.s")
        elif self.family == "gaussian_exp":
            if not 0 < self.r < 0.5:
                raise DomainError("Gaussian weight needs r in (0, 1/2)", key="weight.r")
            object.__setattr__(self, "s", 2.0)
        else:
            raise DomainError(f"unknown weight family {self.family!r}", key="weight.family")

    @classmethod
    def polynomial(cls, k):
        return cls("polynomial", k=float(k))

    @classmethod
    def stretched(cls, r, s):
        return cls("stretched_exp", r=float(r), s=float(s))

    @classmethod
    def gaussian(cls, r):
        return cls("gaussian_exp", r=float(r), s=2.0)

    @property
    def sigma(self) -> float:
        """Growth class: 0 for polynomial, s otherwise."""
        return 0.0 if self.family == "polynomial" else float(self.s)

    def check_nonlinear(self, gamma):
        """Raise unless the weight suits the nonlinear hard-potential theory."""
        if self.family == "polynomial" and gamma >= 0 and not self.k > gamma + 7 + 1.5:
            raise DomainError(f"nonlinear runs need k > gamma + 8.5 = {gamma + 8.5}", key="weight.k")
        if self.family == "stretched_exp" and gamma < 0 and not self.s + gamma > 0:
            raise DomainError("soft potentials need s + gamma > 0", key="weight.s")

    def describe(self) -> str:
        if self.family == "polynomial":
            return f"<v>^{self.k:g}"
        return f"exp({self.r:g} <v>^{self.s:g})"


@dataclass(frozen=True)
class CutoffSpec:
    """Localized damping ``M chi_R``.

    Parameters
    ----------
    M : float
        Non-negative amplitude.
    R : float
        Radius, at least one; ``chi_R = 1`` on ``|v| <= R`` and 0 beyond ``2R``.
    """

    M: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if not self.M >= 0:
            raise DomainError(f"M={self.M} must be >= 0", key="cutoff.M")
        if not self.R >= 1:
            raise DomainError(f"R={self.R} must be >= 1", key="cutoff.R")


@dataclass(frozen=True)
class ModelSpec:
    """Potential, weight and cutoff bundled together.

    Parameters
    ----------
    gamma : float
        Kernel exponent in ``[-2, 1]``.
    weight : WeightSpec
    cutoff : CutoffSpec
    """

    gamma: float
    weight: WeightSpec = field(default_factory=lambda: WeightSpec.polynomial(10))
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)

    def __post_init__(self):
        object.__setattr__(self, "gamma", _check_gamma(self.gamma))

    @property
    def sigma(self) -> float:
        return self.weight.sigma

    def abscissa(self, p=2.0):
        """Shorthand for :func:`landaulab.functionals.abscissa`."""
        from .functionals import abscissa

        return abscissa(self, p)

    def with_cutoff(self, cutoff: CutoffSpec) -> "ModelSpec":
        return ModelSpec(self.gamma, self.weight, cutoff)


def bracket(v):
    """Japanese bracket ``<v> = sqrt(1 + |v|^2)``."""
    v = _vec(v)
    return np.sqrt(1.0 + np.einsum("...i,...i->...", v, v))


def kernel_a(gamma, z):
    """Matrix kernel ``|z|^(gamma+2) (I - z z^T / |z|^2)``.

    Parameters
    ----------
    gamma : float
    z : array_like, shape (..., 3)

    Returns
    -------
    ndarray, shape (..., 3, 3)
        Zero at ``z = 0`` by convention (this is the limit when gamma > -2).
    """
    gamma = _check_gamma(gamma)
    z = _vec(z)
    r2 = np.einsum("...i,...i->...", z, z)
    zero = r2 == 0
    safe = np.where(zero, 1.0, r2)
    proj = np.eye(3) - z[..., :, None] * z[..., None, :] / safe[..., None, None]
    out = (safe ** (0.5 * gamma + 1.0))[..., None, None] * proj
    return np.where(zero[..., None, None], 0.0, out)


def _singular_guard(gamma, r2):
    if gamma < 0 and np.any(r2 == 0):
        raise SingularityError(f"kernel singular at z=0 for gamma={gamma}")


def kernel_b(gamma, z):
    """Vector kernel ``b(z) = -2 |z|^gamma z``."""
    gamma = _check_gamma(gamma)
    z = _vec(z)
    r2 = np.einsum("...i,...i->...", z, z)
    _singular_guard(gamma, r2)
    safe = np.where(r2 == 0, 1.0, r2)
    return -2.0 * (safe ** (0.5 * gamma))[..., None] * z


def kernel_c(gamma, z):
    """Scalar kernel ``c(z) = -2 (gamma+3) |z|^gamma`` (``|0|^0 = 1``)."""
    gamma = _check_gamma(gamma)
    z = _vec(z)
    r2 = np.einsum("...i,...i->...", z, z)
    _singular_guard(gamma, r2)
    if gamma == 0:
        return -6.0 * np.ones_like(r2)
    return -2.0 * (gamma + 3.0) * r2 ** (0.5 * gamma)


def maxwellian(v):
    """Normalized Gaussian ``(2 pi)^(-3/2) exp(-|v|^2 / 2)``."""
    v = _vec(v)
    return _MU0 * np.exp(-0.5 * np.einsum("...i,...i->...", v, v))


def weight_eval(w: WeightSpec, v):
    """Evaluate ``m(v)``."""
    b = bracket(v)
    if w.family == "polynomial":
        return b ** w.k
    return np.exp(w.r * b ** w.s)


def weight_log_derivs(w: WeightSpec, v):
    """Logarithmic derivatives of the weight.

    Returns
    -------
    d1 : ndarray, shape (..., 3)
        ``grad m / m``.
    d2 : ndarray, shape (..., 3, 3)
        ``Hess m / m``.
    """
    v = _vec(v)
    b2 = 1.0 + np.einsum("...i,...i->...", v, v)
    vv = v[..., :, None] * v[..., None, :]
    eye = np.eye(3)
    if w.family == "polynomial":
        k = w.k
        g = k / b2
        d1 = g[..., None] * v
        d2 = g[..., None, None] * eye + (k * (k - 2.0) / b2**2)[..., None, None] * vv
        return d1, d2
    r, s = w.r, w.s
    g = r * s * b2 ** (0.5 * s - 1.0)  # d1 = g v
    gp = r * s * (s - 2.0) * b2 ** (0.5 * s - 2.0)  # derivative of g along v, over v
    d1 = g[..., None] * v
    d2 = g[..., None, None] * eye + (gp + g * g)[..., None, None] * vv
    return d1, d2


def radial_projector(v, xi):
    """Project ``xi`` on the direction of ``v``; zero at ``v = 0``."""
    v = _vec(v)
    xi = _vec(xi)
    r2 = np.einsum("...i,...i->...", v, v)
    coef = np.where(r2 == 0, 0.0, np.einsum("...i,...i->...", v, xi) / np.where(r2 == 0, 1.0, r2))
    return coef[..., None] * v


def _smooth_step(t):
    # e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}), clamped to [0, 1]
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    inner = (t > 0) & (t < 1)
    tt = np.where(inner, t, 0.5)
    # ratio form avoids underflow: 1 / (1 + exp(1/t - 1/(1-t)))
    x = 1.0 / tt - 1.0 / (1.0 - tt)
    val = 0.5 * (1.0 - np.tanh(0.5 * x))
    return np.where(inner, val, t)


def _smooth_step_prime(t):
    t = np.asarray(t, dtype=float)
    inner = (t > 0) & (t < 1)
    tt = np.where(inner, t, 0.5)
    x = 1.0 / tt - 1.0 / (1.0 - tt)
    dx = -1.0 / tt**2 - 1.0 / (1.0 - tt) ** 2
    sech2 = 1.0 / np.cosh(np.clip(0.5 * x, -350, 350)) ** 2
    return np.where(inner, -0.25 * sech2 * dx, 0.0)


def _chi_deriv_bound():
    t = np.linspace(0.0, 1.0, 200001)
    return float(np.abs(_smooth_step_prime(t)).max())


#: sup |chi'| of the bump profile, so that |grad chi_R| <= CHI_DERIV_BOUND / R
CHI_DERIV_BOUND = _chi_deriv_bound()


def cutoff_chi(c: CutoffSpec, v):
    """Smooth radial cutoff ``chi(|v| / R)`` with ``chi(r) = h(2 - r)``."""
    r = np.sqrt(np.einsum("...i,...i->...", _vec(v), _vec(v)))
    return _smooth_step(2.0 - r / c.R)


def cutoff_grad_norm(c: CutoffSpec, v):
    """``|grad chi_R(v)|``, bounded by ``CHI_DERIV_BOUND / R``."""
    r = np.sqrt(np.einsum("...i,...i->...", _vec(v), _vec(v)))
    return np.abs(_smooth_step_prime(2.0 - r / c.R)) / c.R
