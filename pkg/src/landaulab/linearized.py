"""Linearized operators, the A/B splitting, dense assembly and spectra.

In the spatial Fourier representation, free transport ``-v . grad_x`` is the
diagonal multiplier ``-i (v . xi)``.  So ``Lambda`` splits into independent
velocity blocks ``Lambda_xi = L - i (v . xi)``, one per mode ``xi``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .collision import DEFAULT_SCHEME, get_operator
from .errors import SizeCapError, ValidationError
from .grids import VAXES, DistributionField, SpatialGrid, VelocityGrid
from .kernels import CutoffSpec, ModelSpec, cutoff_chi, weight_eval

DENSE_CAP = 16**3
TAGS = ("L", "Lambda", "A", "B", "Bm", "Bm*", "T")


def _xi(xi):
    return np.zeros(3) if xi is None else np.asarray(xi, dtype=float).reshape(3)


class LinearizedOperator:
    """Linearized Landau operator and its splitting on one velocity grid.

    With ``h = f / mu`` the discretization is the Dirichlet form

        L_h f = -sum_s w_s G_s^T [ mu ((a*mu) G_s h - a*(mu G_s h)) ],

    which is exactly symmetric in ``L^2(mu^{-1})`` and exactly annihilates
    ``mu``, ``v mu`` and ``|v|^2 mu`` (the stencils ``G_s`` are exact on
    quadratics and the sampled kernel satisfies ``a(z) z = 0``).  The local
    part ``-G^T[mu (a*mu) G h]`` discretizes ``Q(mu, f)`` and the non-local
    part discretizes ``Q(f, mu)``.  They are the building blocks of ``B`` and
    ``A``, so ``A + B = Lambda`` up to rounding.

    Parameters
    ----------
    grid : VelocityGrid
    model : ModelSpec
        Supplies ``gamma``, the weight ``m`` (for ``B_m``) and the cutoff
        ``M chi_R``.
    scheme : stencil scheme of :class:`landaulab.collision.CollisionOperator`
    """

    def __init__(self, grid: VelocityGrid, model: ModelSpec, scheme=DEFAULT_SCHEME):
        self.grid, self.model = grid, model
        self.op = get_operator(grid, model.gamma, scheme)
        self.mu = grid.maxwellian()
        self._mu_abar = self.mu * self.op.conv_a(self.mu)
        self._sparse_B0 = None
        V = np.moveaxis(grid.mesh, 0, -1)
        self.chi = cutoff_chi(model.cutoff, V)
        self.m = weight_eval(model.weight, V)

    # -- building blocks ------------------------------------------------
    def q_mu_f(self, f):
        """Local part, the discrete ``Q(mu, f)``."""
        def real(u):
            h = u / self.mu
            out = 0.0
            for kind, w in self.op.scheme:
                Gh = self.op.grad(h, kind)
                out = out + w * self.op.div(np.einsum("ijxyz,...jxyz->...ixyz", self._mu_abar, Gh), kind)
            return out
        return _complex_apply(real, f)

    def q_f_mu(self, f):
        """Non-local part, the discrete ``Q(f, mu)``."""
        def real(u):
            h = u / self.mu
            out = 0.0
            for kind, w in self.op.scheme:
                Gh = self.op.grad(h, kind)
                out = out - w * self.op.div(self.mu * self.op.conv_a_contract(self.mu * Gh), kind)
            return out
        return _complex_apply(real, f)

    def transport(self, f, xi):
        xi = _xi(xi)
        if not np.any(xi):
            return np.zeros_like(f)
        vx = np.tensordot(xi, self.grid.mesh, axes=(0, 0))
        return -1j * vx * f

    # -- public operators -------------------------------------------------
    def apply_L(self, f):
        """``L f = Q(mu, f) + Q(f, mu)``."""
        return self.q_mu_f(f) + self.q_f_mu(f)

    def apply_Lambda(self, f, xi=None):
        """``Lambda_xi f = L f - i (v . xi) f``."""
        return self.apply_L(f) + self.transport(f, xi)

    def apply_A(self, f):
        """``A f = Q(f, mu) + M chi_R f``."""
        return self.q_f_mu(f) + self.model.cutoff.M * self.chi * f

    def apply_B(self, f, xi=None):
        """``B f = Q(mu, f) - i (v . xi) f - M chi_R f``."""
        return self.q_mu_f(f) + self.transport(f, xi) - self.model.cutoff.M * self.chi * f

    def apply_Bm(self, h, xi=None):
        """Conjugated operator ``B_m h = m B(h / m)``."""
        return self.m * self.apply_B(h / self.m, xi)

    def sparse_B0(self):
        """Sparse matrix of :meth:`q_mu_f`."""
        if self._sparse_B0 is None:
            import scipy.sparse as sp

            M = None
            for kind, w in self.op.scheme:
                G = self.op.sparse_grad(kind)
                for i in range(3):
                    row = sum(sp.diags(self._mu_abar[i, j].ravel()) @ G[j] for j in range(3))
                    term = -w * (G[i].T @ row)
                    M = term if M is None else M + term
            self._sparse_B0 = (M @ sp.diags(1.0 / self.mu.ravel())).tocsr()
        return self._sparse_B0

    def apply_Bm_adjoint(self, phi, xi=None):
        """Discrete adjoint of :meth:`apply_Bm` for ``<u, w> = sum u conj(w) dv^3``.

        This is ``B*_m phi = m^{-1} B^H (m phi)``, the exact transpose of the
        discrete ``B_m``.  Its continuum limit is the operator
        ``abar d_ij phi + (2 bbar + 2 abar grad m / m) . grad phi
        + (abar : Hess m / m + 2 bbar . grad m / m - M chi_R) phi + v . grad_x phi``;
        :meth:`bm_adjoint_formula` evaluates that expression directly.
        """
        B0T = self.sparse_B0().T
        shape = self.grid.shape
        u = np.asarray(self.m * phi)
        lead = u.shape[:-3]
        flat = u.reshape((-1, self.grid.size))
        out = np.stack([B0T @ row for row in flat]).reshape(lead + shape) if flat.shape[0] else u
        out = out + np.conj(self.transport(np.ones(shape), xi)) * u - self.model.cutoff.M * self.chi * u
        return out / self.m

    def bm_adjoint_formula(self, phi, coeffs, xi=None):
        """Coefficient form of ``B*_m`` with central differences (consistency check)."""
        from .grids import gradient_v, diff_matrix, second_diff_matrix, apply_axis
        from .kernels import weight_log_derivs

        g = self.grid
        V = np.moveaxis(g.mesh, 0, -1)
        d1, d2 = weight_log_derivs(self.model.weight, V)
        abar = coeffs["abar"].reshape(g.shape + (3, 3))
        bbar = coeffs["bbar"].reshape(g.shape + (3,))
        beta = 2 * bbar + 2 * np.einsum("...ij,...i->...j", abar, d1)
        zeta = np.einsum("...ij,...ij->...", abar, d2) + 2 * np.einsum("...j,...j->...", bbar, d1)
        D1 = diff_matrix(g.N, g.dv, "central")
        D2 = second_diff_matrix(g.N, g.dv)
        grad = gradient_v(g, phi)
        out = (zeta - self.model.cutoff.M * self.chi) * phi + np.einsum("...j,j...->...", beta, grad)
        for i, ai in enumerate(VAXES):
            out = out + abar[..., i, i] * apply_axis(D2, phi, ai)
            for j in range(i + 1, 3):
                out = out + 2 * abar[..., i, j] * apply_axis(D1, apply_axis(D1, phi, ai), VAXES[j])
        return out - self.transport(phi, xi)

    def apply(self, tag, f, xi=None):
        if tag == "L":
            return self.apply_L(f)
        if tag == "Lambda":
            return self.apply_Lambda(f, xi)
        if tag == "A":
            return self.apply_A(f)
        if tag == "B":
            return self.apply_B(f, xi)
        if tag == "Bm":
            return self.apply_Bm(f, xi)
        if tag == "Bm*":
            return self.apply_Bm_adjoint(f, xi)
        if tag == "T":
            return self.transport(f, xi)
        raise ValidationError(f"unknown operator tag {tag!r}", key="tag")

    def null_vectors(self):
        """The five analytic collision invariants times ``mu``."""
        X = self.grid.mesh
        mu = self.mu
        return np.stack([mu, X[0] * mu, X[1] * mu, X[2] * mu, self.grid.v2 * mu])


def _complex_apply(fun, f):
    f = np.asarray(f)
    if np.iscomplexobj(f):
        return fun(f.real) + 1j * fun(f.imag)
    return fun(f)


_CACHE = {}


def linearized(grid, model, scheme=DEFAULT_SCHEME) -> LinearizedOperator:
    """Shared :class:`LinearizedOperator` for ``(grid, model, scheme)``."""
    key = (grid, model, tuple(scheme))
    if key not in _CACHE:
        _CACHE[key] = LinearizedOperator(grid, model, scheme)
    return _CACHE[key]


# ------------------------------------------------------------- assembly
@dataclass
class OperatorMatrix:
    """Dense matrix of a discrete operator on the velocity grid (C order)."""

    matrix: np.ndarray
    tag: str
    xi: np.ndarray
    model: ModelSpec
    grid: VelocityGrid
    weight: str = "none"


def assemble_operator(tag, model: ModelSpec, grid: VelocityGrid, xi=None, cap=DENSE_CAP, weight="none",
                      batch=64) -> OperatorMatrix:
    """Dense matrix of an operator, one column per basis vector.

    Parameters
    ----------
    tag : {"L", "Lambda", "A", "B", "Bm", "Bm*", "T"}
        ``T`` is free transport alone.
    xi : array_like of 3 floats, optional
        Spatial angular wavenumber (for instance ``(2 pi, 0, 0)``).
    cap : int
        Largest allowed ``N^3``.
    weight : {"none", "gaussian"}
        ``gaussian`` conjugates by ``mu^{-1/2}``; the spectrum is unchanged,
        and ``L`` becomes symmetric in the continuum.

    Raises
    ------
    SizeCapError
        If ``N^3 > cap``.
    """
    if tag not in TAGS:
        raise ValidationError(f"unknown operator tag {tag!r}", key="tag")
    n = grid.size
    if n > cap:
        raise SizeCapError(n, cap)
    lin = linearized(grid, model)
    xi = _xi(xi)
    vx = np.tensordot(xi, grid.mesh, axes=(0, 0)).ravel()
    if tag in ("B", "Bm", "Bm*"):
        M = lin.sparse_B0().toarray() - np.diag(model.cutoff.M * lin.chi.ravel())
        M = M.astype(complex) - 1j * np.diag(vx) if np.any(xi) else M
        if tag == "Bm":
            m = lin.m.ravel()
            M = (m[:, None] * M) / m[None, :]
        elif tag == "Bm*":
            m = lin.m.ravel()
            M = ((m[:, None] * M) / m[None, :]).conj().T
    elif tag == "T":
        M = -1j * np.diag(vx)
    else:
        M = np.empty((n, n))
        eye_cols = np.eye(n)
        for s in range(0, n, batch):
            cols = eye_cols[s:s + batch].reshape((-1,) + grid.shape)
            if tag == "A":
                M[:, s:s + batch] = lin.apply_A(cols).reshape(-1, n).T
            else:
                M[:, s:s + batch] = lin.apply_L(cols).reshape(-1, n).T
        if tag == "Lambda" and np.any(xi):
            M = M - 1j * np.diag(vx)
    if weight == "gaussian":
        w = lin.mu.ravel() ** -0.5
        M = (w[:, None] * M) / w[None, :]
    elif weight != "none":
        raise ValidationError(f"unknown weight {weight!r}", key="weight")
    return OperatorMatrix(M, tag, xi, model, grid, weight)


# --------------------------------------------------------------- spectra
@dataclass
class SpectralReport:
    """Eigenvalues and null-space diagnostics of an assembled operator."""

    eigenvalues: np.ndarray
    null_tol: float
    scale: float
    null_count: int
    gap: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tag: str = ""
    xi: tuple = (0.0, 0.0, 0.0)
    N: int = 0

    def to_csv(self, path):
        """Summary header lines (``# key=value``) followed by ``re,im`` rows."""
        with open(path, "w", newline="") as fh:
            for k, v in self.summary().items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["re", "im"])
            for z in self.eigenvalues:
                w.writerow([repr(float(z.real)), repr(float(z.imag))])

    def summary(self):
        return {"tag": self.tag, "xi": list(self.xi), "N": self.N, "null_count": self.null_count,
                "gap": self.gap, "scale": self.scale, "null_tol": self.null_tol,
                "max_null_residual": float(self.residuals.max()) if self.residuals.size else None}


def spectral_report(matrix: OperatorMatrix, rel_tol=1e-6, null_vectors=None) -> SpectralReport:
    """Full spectrum, null count and gap of an assembled operator.

    ``null_tol = rel_tol * max |lambda|``; the gap is ``-max Re lambda``
    over eigenvalues of modulus at least ``null_tol``.  Residuals are the
    relative norms ``|M phi| / |phi|`` of the supplied candidate null vectors
    (by default the five collision invariants, for ``L`` and ``Lambda``).
    """
    M = matrix.matrix
    ev = sla.eigvals(M, check_finite=False)
    ev = ev[np.argsort(-ev.real, kind="stable")]
    scale = float(np.abs(ev).max())
    tol = rel_tol * scale
    small = np.abs(ev) < tol
    rest = ev[~small]
    gap = float(-rest.real.max()) if rest.size else float("inf")
    res = np.zeros(0)
    if null_vectors is None and matrix.tag in ("L", "Lambda"):
        lin = linearized(matrix.grid, matrix.model)
        null_vectors = lin.null_vectors().reshape(5, -1)
        if matrix.weight == "gaussian":
            null_vectors = null_vectors * lin.mu.ravel() ** -0.5
    if null_vectors is not None:
        nv = np.asarray(null_vectors).reshape(len(null_vectors), -1)
        res = np.array([np.linalg.norm(M @ p) / np.linalg.norm(p) for p in nv])
    return SpectralReport(ev, tol, scale, int(small.sum()), gap, res, matrix.tag,
                          tuple(float(x) for x in matrix.xi), matrix.grid.N)


def self_adjointness_defect(matrix: OperatorMatrix):
    """``|M - M^H| / |M|`` (Frobenius); use with ``weight="gaussian"``."""
    M = matrix.matrix
    return float(np.linalg.norm(M - M.conj().T) / np.linalg.norm(M))


# ------------------------------------------------------------ projection
def pi0_coefficients(values, vgrid: VelocityGrid, space: SpatialGrid | None = None):
    """Coefficients of the projection on span{mu, v mu, (|v|^2 - 3) mu}.

    The discrete Gram matrix is used, so the projector is exactly
    idempotent on the grid.  With exact quadrature it reduces to the
    closed-form formula with coefficients ``int f``, ``int v_i f`` and
    ``int (|v|^2 - 3) f / 6``.
    """
    mu = vgrid.maxwellian()
    X = vgrid.mesh
    tests = np.stack([np.ones_like(mu), X[0], X[1], X[2], vgrid.v2 - 3.0])
    basis = tests * mu
    w = vgrid.weight * (1.0 if space is None else space.cell_volume)
    xs = tuple(range(np.ndim(values) - 3))
    fv = np.sum(values, axis=xs) if xs else values
    gram = np.einsum("kabc,labc->kl", tests, basis) * vgrid.weight
    rhs = np.einsum("kabc,abc->k", tests, fv) * w
    return np.linalg.solve(gram, rhs), basis


def project_pi0(f: DistributionField) -> DistributionField:
    """Projection ``Pi_0 f`` on the null space of ``Lambda``.

    The result is independent of ``x`` and has the moments of ``f``
    integrated over the torus (unit volume).
    """
    c, basis = pi0_coefficients(f.values, f.vgrid, f.space)
    p = np.tensordot(c, basis, axes=(0, 0))
    vals = np.broadcast_to(p, f.space.shape + f.vgrid.shape).copy()
    return DistributionField(f.space, f.vgrid, vals)


def project_pi0_array(values, vgrid, space=None):
    c, basis = pi0_coefficients(values, vgrid, space)
    return np.broadcast_to(np.tensordot(c, basis, axes=(0, 0)), np.shape(values)).copy()


def dump_matrix(path, om: OperatorMatrix):
    """Write an assembled matrix in the snapshot container layout.

    The JSON header carries ``kind = "operator"`` with the tag, wavenumber,
    model and velocity grid; there is no spatial grid.
    """
    import json

    from .grids import _SNAP_HEAD, _SNAP_MAGIC

    arr = np.ascontiguousarray(om.matrix)
    dt = arr.dtype.newbyteorder("<")
    head = {"kind": "operator", "vgrid": om.grid.descriptor(), "dtype": dt.str, "shape": list(arr.shape),
            "tag": om.tag, "xi": [float(x) for x in om.xi], "weight": om.weight,
            "model": {"gamma": om.model.gamma, "weight": om.model.weight.describe(),
                      "M": om.model.cutoff.M, "R": om.model.cutoff.R}}
    hb = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEAD.pack(_SNAP_MAGIC, 1, len(hb)))
        fh.write(hb)
        fh.write(arr.astype(dt).tobytes(order="C"))


def load_matrix(path):
    """Read a file written by :func:`dump_matrix`; returns ``(matrix, header)``."""
    import json

    from .grids import _SNAP_HEAD, _SNAP_MAGIC

    with open(path, "rb") as fh:
        magic, _, n = _SNAP_HEAD.unpack(fh.read(_SNAP_HEAD.size))
        if magic != _SNAP_MAGIC:
            raise ValidationError(f"{path}: not a snapshot file")
        head = json.loads(fh.read(n).decode())
        if head.get("kind") != "operator":
            raise ValidationError(f"{path}: snapshot does not hold an operator matrix")
        arr = np.frombuffer(fh.read(), dtype=np.dtype(head["dtype"])).reshape(head["shape"]).copy()
    return arr, head
