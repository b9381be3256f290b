"""The bilinear Landau operator ``Q(g, f)`` on a velocity grid.

The authoritative discretization is a weak (bracket) form.  With a first
derivative matrix ``D`` that is exact on polynomials of degree <= 2,

    Q_h(g, f) = -D^T J,  J_i = (a*g)_ij (D f)_j - f (a*(D g))_i,

where ``*`` is the exact discrete convolution on the grid.  Pairing with a
test function ``phi`` gives ``-sum (D phi) . J``.  For ``phi`` in
``{1, v, |v|^2}`` the discrete gradient is exact, and the double sum
cancels by the symmetry of ``a`` and ``a(z) z = 0``.  Hence mass,
momentum and energy are conserved to round-off for any inputs.  The term
``a*(D g)`` stands for ``b*g`` (they agree in the continuum because
``div a = b``).  We average the scheme over the pair of third-order
one-sided stencils (forward and backward).  That damps grid-scale modes
and keeps the linearized spectrum free of spurious eigenvalues.
"""
from __future__ import annotations

import numpy as np

from . import _backend
from .errors import NonPositiveDensity
from .grids import (VAXES, DistributionField, KernelSampler, VelocityGrid, apply_axis, diff_matrix,
                    get_convolver, second_diff_matrix)
from .kernels import _check_gamma

DEFAULT_SCHEME = (("forward3", 0.5), ("backward3", 0.5))


class CollisionOperator:
    """Discrete Landau operator bound to a grid and a potential.

    Parameters
    ----------
    grid : VelocityGrid
    gamma : float
    scheme : sequence of (stencil kind, weight)
        Stencils averaged in the weak form.  Weights should sum to one.
    """

    def __init__(self, grid: VelocityGrid, gamma, scheme=DEFAULT_SCHEME):
        self.grid = grid
        self.gamma = _check_gamma(gamma)
        self.scheme = tuple((k, float(w)) for k, w in scheme)
        self.D = {k: diff_matrix(grid.N, grid.dv, k) for k, _ in self.scheme}
        self._moment_path = self.gamma == 0.0
        self._conv = None if self._moment_path else get_convolver(grid, KernelSampler("a", self.gamma))

    # -- convolutions -------------------------------------------------
    def conv_a(self, g):
        """``a*g``, shape ``(..., 3, 3, N, N, N)``."""
        g = np.asarray(g, dtype=float)
        if not self._moment_path:
            return self._conv(g)
        # gamma = 0: a(z) = |z|^2 I - z z^T is quadratic, so a*g only needs
        # the moments of g up to order two (exactly equal to the grid sum)
        grid = self.grid
        X = grid.mesh
        w = grid.weight
        m0 = g.sum(axis=VAXES) * w
        m1 = np.stack([(X[i] * g).sum(axis=VAXES) for i in range(3)], axis=-1) * w
        m2 = np.stack([np.stack([(X[i] * X[j] * g).sum(axis=VAXES) for j in range(3)], axis=-1)
                       for i in range(3)], axis=-2) * w
        lead = g.shape[:-3]
        ex = (Ellipsis,) + (None,) * 3
        eye = np.eye(3)[(slice(None), slice(None)) + (None,) * 3]
        XX = X[:, None] * X[None, :]
        v2 = grid.v2
        xm1 = np.einsum("i...,ni->n...", X, m1.reshape(-1, 3)).reshape(lead + grid.shape)
        out = (m0[ex][..., None, None, :, :, :] * (v2 * eye - XX)
               - 2.0 * xm1[..., None, None, :, :, :] * eye
               + X[:, None] * m1[..., None, :, None, None, None]
               + m1[..., :, None, None, None, None] * X[None, :]
               + (np.trace(m2, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) - m2)[ex])
        return out

    def conv_a_contract(self, h):
        """``sum_j a_ij * h_j`` for ``h`` of shape ``(..., 3, N, N, N)``."""
        if not self._moment_path:
            return self._conv.contract(h)
        full = self.conv_a(h)  # (..., 3[j], 3, 3, N, N, N)
        return sum(full[..., j, :, j, :, :, :] for j in range(3))

    # -- stencils -------------------------------------------------------
    def grad(self, f, kind):
        D = self.D[kind]
        return np.stack([apply_axis(D, f, ax) for ax in VAXES], axis=-4)

    def div(self, J, kind):
        DT = self.D[kind].T
        out = 0.0
        for k, ax in enumerate(VAXES):
            out = out - apply_axis(DT, J[..., k, :, :, :], ax)
        return out

    # -- operator ---------------------------------------------------------
    def flux(self, A, B, f, Df):
        return np.einsum("...ij" + "abc,...j" + "abc->...i" + "abc", A, Df) - f[..., None, :, :, :] * B

    def __call__(self, g, f):
        return self.q(g, f)

    def q(self, g, f):
        """Divergence (bracket) form ``Q_h(g, f)``; leading axes broadcast."""
        g = np.asarray(g, dtype=float)
        f = np.asarray(f, dtype=float)
        A = self.conv_a(g)
        out = 0.0
        for kind, w in self.scheme:
            B = self.conv_a_contract(self.grad(g, kind))
            out = out + w * self.div(self.flux(A, B, f, self.grad(f, kind)), kind)
        return out

    def q_parts_fixed_g(self, g):
        """Precompute ``a*g`` and ``a*(D g)`` so ``Q_h(g, .)`` becomes local."""
        A = self.conv_a(g)
        Bs = {kind: self.conv_a_contract(self.grad(g, kind)) for kind, _ in self.scheme}
        return A, Bs

    def q_fixed_g(self, parts, f):
        A, Bs = parts
        out = 0.0
        for kind, w in self.scheme:
            out = out + w * self.div(self.flux(A, Bs[kind], f, self.grad(f, kind)), kind)
        return out

    def sparse_grad(self, kind):
        """The three sparse ``N^3 x N^3`` gradient components for stencil ``kind``."""
        import scipy.sparse as sp

        I = sp.identity(self.grid.N, format="csr")
        out = []
        for k in range(3):
            mats = [I, I, I]
            mats[k] = sp.csr_matrix(self.D[kind])
            out.append(sp.kron(sp.kron(mats[0], mats[1]), mats[2], format="csr"))
        return out

    def sparse_q_fixed_g(self, g):
        """Sparse matrix of ``f -> Q_h(g, f)`` for a single velocity slice ``g``."""
        import scipy.sparse as sp

        A, Bs = self.q_parts_fixed_g(g)
        M = None
        for kind, w in self.scheme:
            Gk = self.sparse_grad(kind)
            B = Bs[kind]
            for i in range(3):
                row = sp.diags(-B[i].ravel())
                for j in range(3):
                    row = row + sp.diags(A[i, j].ravel()) @ Gk[j]
                term = -w * (Gk[i].T @ row)
                M = term if M is None else M + term
        return M.tocsr()


def q_divergence_form(g, f, gamma, grid: VelocityGrid, scheme=DEFAULT_SCHEME):
    """``Q(g, f)`` in divergence form with exact discrete mass conservation.

    Parameters
    ----------
    g, f : ndarray, shape (..., N, N, N)
    gamma : float
    grid : VelocityGrid
    """
    return _op(grid, gamma, scheme)(g, f)


_OPS = {}


def _op(grid, gamma, scheme=DEFAULT_SCHEME):
    key = (grid, float(gamma), tuple(scheme))
    if key not in _OPS:
        _OPS[key] = CollisionOperator(grid, gamma, scheme)
    return _OPS[key]


def get_operator(grid, gamma, scheme=DEFAULT_SCHEME) -> CollisionOperator:
    """Shared :class:`CollisionOperator` for ``(grid, gamma, scheme)``."""
    return _op(grid, gamma, scheme)


def q_nondivergence_form(g, f, gamma, grid: VelocityGrid):
    """``(a*g)_ij d_ij f - (c*g) f`` with central second differences.

    Used for cross-validation of the divergence form only.
    """
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    A = _op(grid, gamma).conv_a(g)
    C = get_convolver(grid, KernelSampler("c", gamma))(g)
    D1 = diff_matrix(grid.N, grid.dv, "central")
    D2 = second_diff_matrix(grid.N, grid.dv)
    out = -C * f
    for i, ai in enumerate(VAXES):
        out = out + A[..., i, i, :, :, :] * apply_axis(D2, f, ai)
        for j in range(i + 1, 3):
            dij = apply_axis(D1, apply_axis(D1, f, ai), VAXES[j])
            out = out + 2.0 * A[..., i, j, :, :, :] * dij
    return out


def restrict(F, factor):
    """Average ``factor^3`` blocks of a velocity slice (cell-centred restriction)."""
    N = F.shape[-1]
    n = N // factor
    r = F.reshape(F.shape[:-3] + (n, factor, n, factor, n, factor))
    return r.mean(axis=(-5, -3, -1))


def entropy_and_dissipation(F: DistributionField, gamma, threshold=0.0, max_excluded_mass=1e-8, coarsen_to=12):
    """Entropy ``H = int F log F`` and dissipation ``D(F)``.

    Parameters
    ----------
    F : DistributionField
        Full density (not the perturbation).
    gamma : float
        Kernel exponent used in ``D``.
    threshold : float
        Nodes with ``F <= threshold`` are excluded from both functionals.
    max_excluded_mass : float
        Largest tolerated fraction ``sum |F| (excluded) / sum |F|``.
    coarsen_to : int
        ``D`` is a double velocity integral of cost ``O(N^6)``; the field is
        restricted to at most this many nodes per axis by averaging
        ``log F`` over blocks of ``2^3`` cells (a geometric mean, which maps
        Maxwellians to Maxwellians so that ``D`` vanishes at equilibrium).

    Returns
    -------
    H, D : float

    Raises
    ------
    NonPositiveDensity
        When the excluded mass fraction exceeds ``max_excluded_mass``.
    """
    gamma = _check_gamma(gamma)
    vg = F.vgrid
    vals = F.values
    keep = vals > threshold
    tot = np.abs(vals).sum()
    excl = np.abs(vals[~keep]).sum() / tot if tot > 0 else 0.0
    if excl > max_excluded_mass:
        raise NonPositiveDensity(f"excluded mass fraction {excl:.3e} exceeds {max_excluded_mass:.1e}")
    safe = np.where(keep, vals, 1.0)
    H = float(np.sum(np.where(keep, vals * np.log(safe), 0.0)) * vg.weight * F.space.cell_volume)
    # dissipation on the restricted grid
    factor = 1
    while vg.N // factor > coarsen_to and (vg.N // factor) % 2 == 0:
        factor *= 2
    if vg.N // factor > coarsen_to:
        raise NonPositiveDensity(f"cannot restrict N={vg.N} to <= {coarsen_to} by halving")
    cg = VelocityGrid(vg.L, vg.N // factor)
    pts = cg.points
    D = 0.0
    xs = list(np.ndindex(*F.space.shape)) if F.space.dim else [()]
    for xi in xs:
        Fx = vals[xi]
        okf = Fx > max(threshold, 0.0)
        logf = np.log(np.where(okf, Fx, 1.0))
        if factor > 1:
            # log-average keeps every Maxwellian exactly Maxwellian on the coarse grid
            logF = restrict(logf, factor)
            ok = restrict(okf.astype(float), factor) == 1.0
        else:
            logF, ok = logf, okf
        Fc = np.exp(logF)
        gl = np.stack([apply_axis(diff_matrix(cg.N, cg.dv, "central"), logF, ax) for ax in VAXES])
        # nodes whose stencil touches an excluded node are dropped
        bad = ~ok
        for ax in VAXES:
            bad = bad | np.roll(~ok, 1, ax) | np.roll(~ok, -1, ax)
        use = ~bad
        Fu = np.ascontiguousarray(Fc[use])
        glu = np.ascontiguousarray(np.moveaxis(gl, 0, -1)[use])
        D += _backend.dissipation_sum(np.ascontiguousarray(pts[use.ravel()]), Fu, glu, float(gamma))
    return H, float(D * cg.weight**2 * F.space.cell_volume)

