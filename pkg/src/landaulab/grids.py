"""Velocity and spatial grids, fields, stencils and velocity convolution.

Velocity nodes sit at ``-L + dv (i + 1/2)``, so the origin is never a node
and differences of nodes are integer multiples of ``dv``.  Fields are numpy
arrays whose last three axes index the velocity grid; leading axes index
space (none, ``Nx`` or ``Nx^3``) or an arbitrary batch.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _backend
from .errors import DomainError, ValidationError
from .kernels import _check_gamma, kernel_a, kernel_b, kernel_c, maxwellian

VAXES = (-3, -2, -1)


# ------------------------------------------------------------------ grids
@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centred grid on ``[-L, L)^3``.

    Parameters
    ----------
    L : float
        Box half-width.
    N : int
        Even number of nodes per dimension.
    """

    L: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise DomainError(f"N={self.N} must be an even integer >= 4", key="grid.N")
        if not self.L > 0:
            raise DomainError(f"L={self.L} must be positive", key="grid.L")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dv(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def nodes1d(self) -> np.ndarray:
        return -self.L + self.dv * (np.arange(self.N) + 0.5)

    @property
    def shape(self):
        return (self.N,) * 3

    @property
    def size(self) -> int:
        return self.N**3

    @property
    def weight(self) -> float:
        """Quadrature weight of every node, ``dv^3``."""
        return self.dv**3

    @property
    def mesh(self) -> np.ndarray:
        """Coordinates, shape ``(3, N, N, N)``."""
        return _mesh(self.L, self.N)

    @property
    def points(self) -> np.ndarray:
        """Coordinates, shape ``(N^3, 3)`` in C order."""
        return self.mesh.reshape(3, -1).T.copy()

    @property
    def v2(self) -> np.ndarray:
        m = self.mesh
        return m[0] ** 2 + m[1] ** 2 + m[2] ** 2

    def maxwellian(self) -> np.ndarray:
        return maxwellian(np.moveaxis(self.mesh, 0, -1))

    def integrate(self, f) -> np.ndarray:
        """Quadrature over the velocity axes."""
        return np.sum(f, axis=VAXES) * self.weight

    def content_hash(self) -> str:
        return hashlib.sha256(f"VelocityGrid|{self.L!r}|{self.N}".encode()).hexdigest()

    def descriptor(self):
        return {"L": self.L, "N": self.N}


@lru_cache(maxsize=16)
def _mesh(L, N):
    x = -L + (2.0 * L / N) * (np.arange(N) + 0.5)
    m = np.array(np.meshgrid(x, x, x, indexing="ij"))
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic spatial grid on the unit torus.

    ``dim = 0`` is the spatially homogeneous case; ``dim = 1`` a slab of
    length one; ``dim = 3`` the full torus, capped at ``Nx = 8``.
    """

    dim: int = 0
    Nx: int = 1

    def __post_init__(self):
        if self.dim not in (0, 1, 3):
            raise DomainError(f"dim={self.dim} must be 0, 1 or 3", key="space.dim")
        if self.dim == 0:
            object.__setattr__(self, "Nx", 1)
        elif self.Nx < 2:
            raise DomainError("Nx must be >= 2 for dim >= 1", key="space.Nx")
        if self.dim == 3 and self.Nx > 8:
            raise DomainError("3D-x is capped at Nx = 8", key="space.Nx")

    @property
    def shape(self):
        return () if self.dim == 0 else (self.Nx,) * self.dim

    @property
    def dx(self) -> float:
        return 1.0 / self.Nx

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim if self.dim else 1.0

    def nodes(self):
        return np.arange(self.Nx) / self.Nx

    def wavenumbers(self):
        """Angular wavenumbers ``2 pi k`` in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)

    def descriptor(self):
        return {"dim": self.dim, "Nx": self.Nx}


@dataclass
class DistributionField:
    """Samples ``f(x, v)`` on a phase grid.

    Attributes
    ----------
    space, vgrid : SpatialGrid, VelocityGrid
    values : ndarray, shape ``space.shape + vgrid.shape``
    generation : int
        Bumped by :meth:`touch`; caches compare it to detect changes.
    """

    space: SpatialGrid
    vgrid: VelocityGrid
    values: np.ndarray
    generation: int = field(default=0)

    def __post_init__(self):
        expect = self.space.shape + self.vgrid.shape
        self.values = np.asarray(self.values)
        if self.values.shape != expect:
            raise ValidationError(f"values shape {self.values.shape} != {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field has non-finite values")

    @property
    def mode(self) -> str:
        return {0: "homogeneous", 1: "slab", 3: "torus"}[self.space.dim]

    def touch(self):
        self.generation += 1

    def copy(self, values=None) -> "DistributionField":
        return DistributionField(self.space, self.vgrid, self.values.copy() if values is None else values)

    @classmethod
    def homogeneous(cls, vgrid, values):
        return cls(SpatialGrid(0), vgrid, values)


def moments(f: DistributionField):
    """Mass, momentum and energy integrated over ``x`` and ``v``.

    Returns
    -------
    mass : float
    momentum : ndarray, shape (3,)
    energy : float
        ``int |v|^2 f``.
    """
    return moments_array(f.values, f.vgrid, f.space)


def moments_array(values, vgrid: VelocityGrid, space: SpatialGrid | None = None):
    vol = 1.0 if space is None else space.cell_volume
    xs = tuple(range(values.ndim - 3))
    fv = values.sum(axis=xs) if xs else values
    m = vgrid.mesh
    w = vgrid.weight * vol
    mass = float(fv.sum() * w)
    mom = np.array([float((m[i] * fv).sum() * w) for i in range(3)])
    energy = float((vgrid.v2 * fv).sum() * w)
    return mass, mom, energy


# -------------------------------------------------------------- stencils
STENCILS = {
    "central": (-1, 0, 1),
    "forward3": (0, 1, 2, 3),
    "backward3": (-3, -2, -1, 0),
}


def _stencil_weights(offsets, h):
    # first-derivative weights exact for polynomials of degree len(offsets)-1
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    V = np.vander(o, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / h


@lru_cache(maxsize=64)
def diff_matrix(N, h, kind="central"):
    """Dense ``N x N`` first-derivative matrix.

    Near the faces the stencil is shifted inside the box, so every row keeps
    its polynomial exactness (degree 2 for ``central``, degree 3 for the
    one-sided kinds).  The central kind becomes a one-sided three-point
    formula at the two faces.
    """
    try:
        base = np.array(STENCILS[kind])
    except KeyError:
        raise DomainError(f"unknown stencil {kind!r}") from None
    D = np.zeros((N, N))
    for i in range(N):
        o = base.copy()
        if i + o.min() < 0:
            o = o - (i + o.min())
        if i + o.max() > N - 1:
            o = o - (i + o.max() - (N - 1))
        D[i, i + o] = _stencil_weights(o, h)
    D.setflags(write=False)
    return D


@lru_cache(maxsize=16)
def second_diff_matrix(N, h):
    """Central second difference, one-sided four-point rows at the faces."""
    D = np.zeros((N, N))
    for i in range(1, N - 1):
        D[i, i - 1:i + 2] = (1.0, -2.0, 1.0)
    D[0, :4] = (2.0, -5.0, 4.0, -1.0)
    D[-1, -4:] = (-1.0, 4.0, -5.0, 2.0)
    D /= h * h
    D.setflags(write=False)
    return D


def apply_axis(D, f, axis):
    """Apply the 1D matrix ``D`` along ``axis`` of ``f``."""
    return np.moveaxis(np.tensordot(D, f, axes=(1, axis)), 0, axis)


def gradient_v(grid: VelocityGrid, f, kind="central"):
    """Velocity gradient, shape ``(..., 3, N, N, N)``.

    Parameters
    ----------
    kind : {"central", "forward3", "backward3"}
        Central differences are second order (one-sided at the faces).
    """
    D = diff_matrix(grid.N, grid.dv, kind)
    return np.stack([apply_axis(D, f, ax) for ax in VAXES], axis=-4)


def divergence_v(grid: VelocityGrid, flux, kind="central"):
    """Discrete divergence, the negative transpose of :func:`gradient_v`.

    Because every gradient row differentiates constants exactly, the
    quadrature sum of the result is zero for any flux (discrete
    integration by parts with no boundary term).
    """
    D = diff_matrix(grid.N, grid.dv, kind)
    out = 0.0
    for k, ax in enumerate(VAXES):
        out = out - apply_axis(D.T, flux[..., k, :, :, :], ax)
    return out


# ---------------------------------------------------------- convolution
@lru_cache(maxsize=32)
def cell_average_power(beta):
    """Mean of ``|z|^beta`` over the unit cube centred at the origin."""
    if beta <= -3:
        raise DomainError("|z|^beta is not integrable for beta <= -3")
    f = lambda y, x: (x * x + y * y + 0.25) ** (0.5 * beta)
    val = integrate.dblquad(f, -0.5, 0.5, -0.5, 0.5, epsabs=1e-13, epsrel=1e-12)[0]
    return 3.0 * val / (beta + 3.0)


@dataclass(frozen=True)
class KernelSampler:
    """Sampled collision kernel for grid convolutions.

    Parameters
    ----------
    kind : {"a", "b", "c", "one"}
    gamma : float
    origin : {"cell", "point"}
        Value used at ``z = 0``.  ``point`` uses the pointwise convention of
        :mod:`landaulab.kernels` (``a(0) = b(0) = 0``).  ``cell`` (default)
        uses the cell average when ``gamma < 0``, where the point value is
        singular; for ``gamma >= 0`` both choices coincide with the point
        value.
    """

    kind: str
    gamma: float = 0.0
    origin: str = "cell"

    def __post_init__(self):
        if self.kind not in ("a", "b", "c", "one"):
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        object.__setattr__(self, "gamma", _check_gamma(self.gamma))

    @property
    def value_shape(self):
        return {"a": (3, 3), "b": (3,), "c": (), "one": ()}[self.kind]

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        r2 = np.einsum("...i,...i->...", z, z)
        zero = r2 == 0
        zs = np.where(zero[..., None], 1.0, z)
        g = self.gamma
        if self.kind == "one":
            return np.ones(z.shape[:-1])
        if self.kind == "a":
            out = kernel_a(g, zs)
        elif self.kind == "b":
            out = kernel_b(g, zs)
        else:
            out = kernel_c(g, zs)
        mask = zero.reshape(zero.shape + (1,) * len(self.value_shape))
        return np.where(mask, self.origin_value(1.0), out)

    def origin_value(self, h):
        """Kernel value assigned to the node ``z = 0`` on a grid of spacing h."""
        g = self.gamma
        if self.kind == "b":
            return np.zeros(3)
        if self.kind == "a":
            if self.origin == "cell" and g < 0:
                return (2.0 / 3.0) * h ** (g + 2) * cell_average_power(g + 2) * np.eye(3)
            return np.zeros((3, 3))
        if self.kind == "c":
            if g < 0:
                if self.origin == "point":
                    return np.float64(0.0)
                return np.float64(-2.0 * (g + 3.0) * h**g * cell_average_power(g))
            return np.float64(-6.0 if g == 0 else 0.0)
        return np.float64(1.0)

    def sample_differences(self, grid: VelocityGrid):
        """Kernel on the doubled difference grid, in FFT order.

        Returns an array of shape ``value_shape + (2N, 2N, 2N)`` whose entry
        at index ``k`` (taken modulo 2N) is the kernel at ``k * dv``.
        """
        N, h = grid.N, grid.dv
        k = np.fft.ifftshift(np.arange(-N, N)) * h
        Z = np.stack(np.meshgrid(k, k, k, indexing="ij"), axis=-1)
        vals = self(Z)
        vals[0, 0, 0] = self.origin_value(h)
        nv = len(self.value_shape)
        return np.moveaxis(vals, tuple(range(3)), tuple(range(nv, nv + 3)))


class Convolver:
    """Linear (non-periodic) velocity convolution by zero-padded FFT.

    ``(K * g)(v_i) = dv^3 sum_j K(v_i - v_j) g(v_j)``, computed on the
    doubled grid of ``2N`` points per axis so that no wrap-around occurs.
    """

    def __init__(self, grid: VelocityGrid, sampler: KernelSampler):
        self.grid, self.sampler = grid, sampler
        K = sampler.sample_differences(grid)
        self._khat = np.fft.rfftn(K, axes=VAXES) * grid.weight

    def _fwd(self, g):
        n2 = 2 * self.grid.N
        return np.fft.rfftn(g, s=(n2, n2, n2), axes=VAXES)

    def _inv(self, gh):
        N, n2 = self.grid.N, 2 * self.grid.N
        return np.fft.irfftn(gh, s=(n2, n2, n2), axes=VAXES)[..., :N, :N, :N]

    def __call__(self, g):
        """Convolve ``g`` of shape ``(..., N, N, N)``; kernel axes come before the grid axes."""
        gh = self._fwd(np.asarray(g, dtype=float))
        nv = len(self.sampler.value_shape)
        gh = gh[(Ellipsis,) + (None,) * nv + (slice(None),) * 3]
        return self._inv(gh * self._khat)

    def contract(self, gvec):
        """``sum_j K_ij * g_j`` for a matrix kernel and ``gvec`` of shape ``(..., 3, N, N, N)``."""
        if self.sampler.value_shape != (3, 3):
            raise ValidationError("contract() needs a matrix kernel")
        gh = self._fwd(np.asarray(gvec, dtype=float))
        out = np.stack([sum(self._khat[i, j] * gh[..., j, :, :, :] for j in range(3)) for i in range(3)], axis=-4)
        return self._inv(out)


@lru_cache(maxsize=32)
def get_convolver(grid: VelocityGrid, sampler: KernelSampler) -> Convolver:
    return Convolver(grid, sampler)


def convolve_velocity(sampler: KernelSampler, g, grid: VelocityGrid):
    """Convolve a velocity slice with a sampled kernel (FFT, zero padding).

    Parameters
    ----------
    sampler : KernelSampler
    g : ndarray, shape (..., N, N, N)
    grid : VelocityGrid

    Returns
    -------
    ndarray, shape ``(...,) + sampler.value_shape + (N, N, N)``
    """
    return get_convolver(grid, sampler)(g)


def convolve_direct(sampler: KernelSampler, g, grid: VelocityGrid):
    """Brute-force O(N^6) convolution, the reference for :func:`convolve_velocity`."""
    K = sampler.sample_differences(grid)
    g = np.asarray(g, dtype=float)
    flatK = K.reshape((-1,) + K.shape[-3:])
    out = np.stack([_backend.direct_convolve(np.ascontiguousarray(k), g) for k in flatK])
    return out.reshape(sampler.value_shape + g.shape) * grid.weight


# ------------------------------------------------------------- snapshots
_SNAP_MAGIC = b"LLABSNAP"
_SNAP_HEAD = struct.Struct("<8sII")  # magic, version, json length


def save_snapshot(path, f: DistributionField, extra=None):
    """Write a self-describing binary snapshot.

    Layout: ``LLABSNAP``, uint32 version, uint32 header length, a UTF-8
    JSON header (grids, dtype, shape, generation, extra) and the raw
    little-endian array in C order.
    """
    arr = np.ascontiguousarray(f.values)
    dt = arr.dtype.newbyteorder("<")
    head = {"vgrid": f.vgrid.descriptor(), "space": f.space.descriptor(), "dtype": dt.str,
            "shape": list(arr.shape), "generation": f.generation, "extra": extra or {}}
    hb = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEAD.pack(_SNAP_MAGIC, 1, len(hb)))
        fh.write(hb)
        fh.write(arr.astype(dt).tobytes(order="C"))


def load_snapshot(path):
    """Read a snapshot written by :func:`save_snapshot`.

    Returns
    -------
    field : DistributionField
    extra : dict
    """
    with open(path, "rb") as fh:
        magic, version, n = _SNAP_HEAD.unpack(fh.read(_SNAP_HEAD.size))
        if magic != _SNAP_MAGIC:
            raise ValidationError(f"{path}: not a snapshot file")
        head = json.loads(fh.read(n).decode())
        arr = np.frombuffer(fh.read(), dtype=np.dtype(head["dtype"])).reshape(head["shape"])
    fld = DistributionField(SpatialGrid(**head["space"]), VelocityGrid(**head["vgrid"]), arr.copy())
    fld.generation = head["generation"]
    return fld, head["extra"]


def export_csv(path_or_buf, f: DistributionField, digits=6):
    """Lossy CSV export: one row per (x node, v node)."""
    vg = f.vgrid
    pts = vg.points
    xs = list(np.ndindex(*f.space.shape)) if f.space.dim else [()]
    close = False
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, "w", newline="")
        close = True
    else:
        fh = path_or_buf
    try:
        fh.write("x_index,v1,v2,v3,value\n")
        for xi in xs:
            vals = f.values[xi].reshape(-1)
            tag = ":".join(map(str, xi)) if xi else "0"
            for p, val in zip(pts, vals):
                fh.write(f"{tag},{p[0]:.{digits}g},{p[1]:.{digits}g},{p[2]:.{digits}g},{val:.{digits}e}\n")
    finally:
        if close:
            fh.close()
