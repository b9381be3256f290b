"""Time evolution: linear semigroups and the nonlinear perturbation equation.

The nonlinear solver advances ``f`` in ``F = mu + f`` under
``d_t f + v . grad_x f = L_h f + Q_h(f, f)``.  Here ``L_h`` is the linearized
operator of :mod:`landaulab.linearized`, which annihilates the collision
invariants exactly.  ``Q_h`` is the conservative bracket form of
:mod:`landaulab.collision`.  So ``f = 0`` is an exact steady state, and mass,
momentum and energy are conserved by the spatial discretization.

Transport is solved exactly by a Fourier phase shift and combined with the
collision stage by Strang (or Lie) splitting.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .collision import entropy_and_dissipation, get_operator
from .errors import BlowUp, MomentDrift, NonPositiveDensity, ValidationError
from .functionals import NORM_TAGS, norm_eval
from .grids import DistributionField, SpatialGrid, moments_array
from .kernels import CutoffSpec, ModelSpec
from .linearized import linearized, pi0_coefficients

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4", "semi_implicit")
SPLITTINGS = ("strang", "lie")
RK4_REAL_STABILITY = 2.785  # stability interval of classical RK4 on the negative real axis


@dataclass
class EvolveConfig:
    """Time-stepping options.

    Parameters
    ----------
    t_end : float
        Final time, positive.
    dt : float or "auto"
        ``auto`` estimates the stiffness by power iteration (see
        :func:`auto_dt`).
    integrator : {"rk4", "semi_implicit"}
    splitting : {"strang", "lie"}
        Transport/collision splitting for inhomogeneous nonlinear runs.
    record_every : int
        Record norms and moments every this many steps (and at ``t_end``).
    norms : sequence of str
        Norm tags understood by :func:`landaulab.functionals.norm_eval`.
    moment_budget : float
        Largest tolerated drift of mass, momentum and energy.
    blowup_factor : float
        A recorded norm above ``blowup_factor`` times its initial value
        raises :class:`BlowUp`.
    positivity_tol : float
        ``min(mu + f)`` below ``-positivity_tol`` is reported.
    keep_fields : bool
        Store a copy of the field at every record step.
    """

    t_end: float
    dt: float | str = "auto"
    integrator: str = "rk4"
    splitting: str = "strang"
    record_every: int = 1
    norms: tuple = ("Lp",)
    moment_budget: float = 1e-7
    blowup_factor: float = 1e6
    positivity_tol: float = 1e-10
    keep_fields: bool = False

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValidationError(f"t_end={self.t_end} must be positive", key="evolve.t_end")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValidationError(f"dt={self.dt!r} must be positive or 'auto'", key="evolve.dt")
        if self.integrator not in INTEGRATORS:
            raise ValidationError(f"integrator must be one of {INTEGRATORS}", key="evolve.integrator")
        if self.splitting not in SPLITTINGS:
            raise ValidationError(f"splitting must be one of {SPLITTINGS}", key="evolve.splitting")
        if int(self.record_every) < 1:
            raise ValidationError("record_every must be >= 1", key="evolve.record_every")
        if not self.moment_budget > 0:
            raise ValidationError("moment_budget must be positive", key="evolve.moment_budget")
        if not self.blowup_factor > 1:
            raise ValidationError("blowup_factor must exceed 1", key="evolve.blowup_factor")
        self.norms = tuple(self.norms)
        for tag in self.norms:
            if tag not in NORM_TAGS:
                raise ValidationError(f"unknown norm {tag!r}", key="evolve.norms")


@dataclass
class Trajectory:
    """Recorded history of a run."""

    times: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)
    mass: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    min_density: list = field(default_factory=list)
    positivity_violations: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def norm(self, tag):
        return np.asarray(self.norms[tag])

    def drift(self):
        """Largest absolute deviation of mass, momentum and energy from the start."""
        m = np.asarray(self.mass)
        p = np.asarray(self.momentum)
        e = np.asarray(self.energy)
        return {"mass": float(np.abs(m - m[0]).max()), "momentum": float(np.abs(p - p[0]).max()),
                "energy": float(np.abs(e - e[0]).max())}

    def columns(self):
        cols = {"t": self.times}
        for tag, vals in self.norms.items():
            cols[f"norm_{tag}"] = vals
        cols["mass"] = self.mass
        p = np.asarray(self.momentum).reshape(-1, 3)
        for i, ax in enumerate("xyz"):
            cols[f"momentum_{ax}"] = list(p[:, i])
        cols["energy"] = self.energy
        cols["entropy"] = self.entropy if self.entropy else [float("nan")] * len(self.times)
        return cols

    def to_csv(self, path):
        cols = self.columns()
        keys = list(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for i in range(len(self.times)):
                w.writerow([repr(float(cols[k][i])) for k in keys])


# --------------------------------------------------------------- transport
def _x_axes(space: SpatialGrid):
    return tuple(range(space.dim))


def _v_dot_xi(space: SpatialGrid, vgrid):
    """``v . xi`` with shape ``x-modes + v-grid`` (FFT mode ordering).

    The Nyquist wavenumber is set to zero: its mode is real, and any
    non-trivial phase would make the real part of the shift non-unitary.
    """
    k = space.wavenumbers()
    if space.Nx % 2 == 0:
        k[space.Nx // 2] = 0.0
    X = vgrid.mesh
    if space.dim == 1:
        return k[:, None, None, None] * X[0][None]
    k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij")
    e = (Ellipsis, None, None, None)
    return k1[e] * X[0] + k2[e] * X[1] + k3[e] * X[2]


def _phase(space: SpatialGrid, vgrid, dt):
    """``exp(-i (v . xi) dt)``."""
    return np.exp(-1j * dt * _v_dot_xi(space, vgrid))


def transport_step(f: DistributionField, dt) -> DistributionField:
    """Exact free transport ``d_t f + v . grad_x f = 0`` over time ``dt``.

    Each velocity slice is shifted by ``v dt`` through its spatial Fourier
    series, so the x-mean (and every moment) is preserved exactly.
    """
    if f.space.dim == 0:
        return f.copy()
    ax = _x_axes(f.space)
    fh = np.fft.fftn(f.values, axes=ax)
    out = np.fft.ifftn(fh * _phase(f.space, f.vgrid, dt), axes=ax).real
    return DistributionField(f.space, f.vgrid, out, f.generation + 1)


# ------------------------------------------------------------ integrators
def _rk4(fun, y, dt):
    k1 = fun(y)
    k2 = fun(y + 0.5 * dt * k1)
    k3 = fun(y + 0.5 * dt * k2)
    k4 = fun(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def spectral_radius(apply, shape, weight=None, iters=40, seed=0, dtype=float):
    """Power-iteration estimate of the largest ``|lambda|`` of a linear map."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape).astype(dtype)
    w = np.ones(shape) if weight is None else weight
    nrm = lambda u: np.sqrt(np.sum(np.abs(u) ** 2 * w))
    x /= nrm(x)
    lam = 0.0
    for _ in range(iters):
        y = apply(x)
        lam = nrm(y)
        if lam == 0:
            return 0.0
        x = y / lam
    return float(lam)


def auto_dt(rho, integrator="rk4", safety=0.4):
    """Step from a spectral-radius estimate.

    ``rk4``: ``safety * 2.785 / rho`` (inside the real stability interval).
    ``semi_implicit``: ``safety / rho`` where ``rho`` is the radius of the
    explicitly treated part.
    """
    if rho <= 0:
        return 0.1
    return safety * (RK4_REAL_STABILITY if integrator == "rk4" else 1.0) / rho


class ImplicitSolver:
    """Linearly implicit Euler with a sparse implicit part.

    Solves ``(I - dt S') y = b`` where ``S' = S - U Z^T`` is a rank-``r``
    correction of the sparse matrix ``S``.  The matrix is factored once in
    the symmetric scaling ``u = f / sqrt(mu)`` and the correction is
    applied with the Woodbury identity.
    """

    def __init__(self, S, dt, scale, U=None, Z=None):
        n = S.shape[0]
        self.dt = dt
        self.P = scale.ravel()
        Su = sp.diags(1.0 / self.P) @ S @ sp.diags(self.P)
        t0 = time.perf_counter()
        self.lu = spla.splu((sp.identity(n, dtype=Su.dtype, format="csc") - dt * Su).tocsc())
        log.debug("factorized %d x %d in %.2fs", n, n, time.perf_counter() - t0)
        self.S, self.U0, self.Z0 = S, U, Z
        self.U = self.Z = None
        if U is not None:
            self.U = U / self.P[:, None]
            self.Z = Z * self.P[:, None]
            self.AiU = self.lu.solve(self.U.astype(Su.dtype))
            self.cap = np.linalg.inv(np.eye(U.shape[1]) / dt + self.Z.T @ self.AiU)

    def apply(self, f):
        """``S' f`` for a batch ``f`` of shape ``(k, n)``."""
        out = (self.S @ f.T).T
        if self.U0 is not None:
            out = out - (f @ self.Z0) @ self.U0.T
        return out

    def solve(self, b):
        """Solve ``(I - dt S') y = b`` for a batch ``b`` of shape ``(k, n)``."""
        bu = (b / self.P).T
        y = self.lu.solve(np.ascontiguousarray(bu))
        if self.U is not None:
            y = y - self.AiU @ (self.cap @ (self.Z.T @ y))
        return y.T * self.P

    def step(self, u, rhs):
        """One linearly implicit Euler step for ``u' = rhs(u)``; ``u`` is ``(..., N, N, N)``."""
        shape = u.shape
        flat = u.reshape((-1, self.P.size))
        r = rhs(u).reshape(flat.shape) - self.apply(flat)
        return self.solve(flat + self.dt * r).reshape(shape)


def _moment_basis(vgrid):
    """Test vectors ``W`` (with quadrature weight) and basis ``Phi`` of the invariants."""
    X = vgrid.mesh
    mu = vgrid.maxwellian()
    tests = np.stack([np.ones(vgrid.shape), X[0], X[1], X[2], vgrid.v2]).reshape(5, -1)
    W = tests.T * vgrid.weight
    Phi = (tests * mu.ravel()).T
    return W, Phi


def _conservative_correction(S, vgrid):
    """``U, Z`` with ``S' = S - U Z^T`` and ``W^T S' = 0`` exactly."""
    W, Phi = _moment_basis(vgrid)
    U = Phi @ np.linalg.inv(W.T @ Phi)
    Z = np.asarray((S.T @ W))
    return U, Z


# ------------------------------------------------------------ recording
class _Recorder:
    def __init__(self, traj: Trajectory, config: EvolveConfig, model: ModelSpec, entropy=False):
        self.traj, self.config, self.model, self.entropy = traj, config, model, entropy
        self.norm0 = {}
        for tag in config.norms:
            traj.norms[tag] = []

    def __call__(self, t, f: DistributionField):
        tr, cfg = self.traj, self.config
        tr.times.append(float(t))
        mass, mom, en = moments_array(f.values, f.vgrid, f.space)
        tr.mass.append(mass)
        tr.momentum.append(mom)
        tr.energy.append(en)
        for tag in cfg.norms:
            val = norm_eval(f, tag, self.model)
            tr.norms[tag].append(val)
            n0 = self.norm0.setdefault(tag, val)
            if not np.isfinite(val) or (n0 > 0 and val > cfg.blowup_factor * n0):
                raise BlowUp(f"norm {tag} reached {val:.3e} at t={t:.4g} (initial {n0:.3e})")
        if self.entropy:
            F = f.values + f.vgrid.maxwellian()
            fmin = float(F.min())
            tr.min_density.append(fmin)
            if fmin < -cfg.positivity_tol:
                tr.positivity_violations.append((float(t), fmin))
            tr.entropy.append(entropy(DistributionField(f.space, f.vgrid, F)))
        if cfg.keep_fields:
            tr.fields.append(f.copy())


def entropy(F: DistributionField):
    """``int F log F`` over nodes with ``F > 0`` (negative nodes are skipped)."""
    v = F.values
    pos = v > 0
    return float(np.sum(np.where(pos, v * np.log(np.where(pos, v, 1.0)), 0.0)) * F.vgrid.weight
                 * F.space.cell_volume)


def sample_dissipation(traj: Trajectory, gamma, count=5):
    """``D(mu + f)`` at ``count`` evenly spaced recorded fields (needs ``keep_fields``)."""
    if not traj.fields:
        raise ValidationError("trajectory has no stored fields; set keep_fields=True", key="evolve.keep_fields")
    idx = np.unique(np.linspace(0, len(traj.fields) - 1, count).round().astype(int))
    out = []
    for i in idx:
        f = traj.fields[i]
        F = DistributionField(f.space, f.vgrid, f.values + f.vgrid.maxwellian())
        out.append((traj.times[i], entropy_and_dissipation(F, gamma, max_excluded_mass=np.inf)[1]))
    return out


def _steps(config: EvolveConfig, dt):
    n = max(1, int(np.ceil(config.t_end / dt - 1e-9)))
    return n, config.t_end / n


# ----------------------------------------------------------- linear runs
def evolve_linear(f0: DistributionField, tag: str, model: ModelSpec, config: EvolveConfig,
                  cutoff: CutoffSpec | None = None) -> Trajectory:
    """Semigroup ``S_B(t) f0`` or ``S_Lambda(t) f0``.

    The field is expanded in spatial Fourier modes, where transport is the
    multiplier ``-i v . xi``, and every mode is advanced with the chosen
    integrator.  ``rk4`` is explicit; ``semi_implicit`` treats the local
    part of the operator (and the transport multiplier) implicitly with one
    sparse factorization per mode.

    Parameters
    ----------
    tag : {"B", "Lambda"}
    cutoff : CutoffSpec, optional
        Overrides ``model.cutoff`` (used by ``B``).
    """
    if tag not in ("B", "Lambda"):
        raise ValidationError(f"linear evolution supports tags B and Lambda, got {tag!r}", key="tag")
    if cutoff is not None:
        model = model.with_cutoff(cutoff)
    vg, space = f0.vgrid, f0.space
    lin = linearized(vg, model)
    ax = _x_axes(space)
    modes = np.fft.fftn(f0.values, axes=ax) if space.dim else np.asarray(f0.values, dtype=float)
    mult = -1j * _v_dot_xi(space, vg) if space.dim else None

    def op(u):
        if tag == "Lambda":
            out = lin.apply_L(u)
        else:
            out = lin.q_mu_f(u) - model.cutoff.M * lin.chi * u
        return out if mult is None else out + mult * u

    mu = vg.maxwellian()
    traj = Trajectory()
    t_start = time.perf_counter()
    if config.integrator == "rk4":
        dt = config.dt
        if dt == "auto":
            wts = np.broadcast_to(1.0 / mu, modes.shape)
            rho = spectral_radius(op, modes.shape, weight=wts, dtype=modes.dtype)
            dt = auto_dt(rho * 1.1, "rk4")
            traj.meta["rho"] = rho
        n, dt = _steps(config, dt)
        step = lambda u: _rk4(op, u, dt)
    else:
        dt = 0.01 if config.dt == "auto" else config.dt
        n, dt = _steps(config, dt)
        S = lin.sparse_B0()
        if tag == "B":
            S = (S - sp.diags(model.cutoff.M * lin.chi.ravel())).tocsr()
        if mult is None:
            U, Z = _conservative_correction(S, vg) if tag == "Lambda" else (None, None)
            solver = ImplicitSolver(S, dt, np.sqrt(mu), U, Z)
            step = lambda u: solver.step(u, op)
        else:
            # one factorization per spatial mode (transport is diagonal in v)
            flat_mult = mult.reshape((-1, vg.size))
            solvers = []
            for k in range(flat_mult.shape[0]):
                Sk = (S.astype(complex) + sp.diags(flat_mult[k])).tocsr()
                U = Z = None
                if tag == "Lambda" and not np.any(flat_mult[k]):
                    U, Z = _conservative_correction(S, vg)
                solvers.append(ImplicitSolver(Sk, dt, np.sqrt(mu), U, Z))

            def step(u):
                flat = u.reshape((-1,) + vg.shape)
                full = op(u).reshape(flat.shape)
                out = np.empty_like(flat)
                for k, sol in enumerate(solvers):
                    out[k] = sol.step(flat[k], lambda _u, k=k: full[k])
                return out.reshape(u.shape)
    traj.meta.update(dt=dt, steps=n, integrator=config.integrator, tag=tag)
    rec = _Recorder(traj, config, model)

    def physical(u):
        vals = np.fft.ifftn(u, axes=ax).real if space.dim else u
        return DistributionField(space, vg, vals)

    rec(0.0, physical(modes))
    u = modes
    for i in range(1, n + 1):
        u = step(u)
        if i % config.record_every == 0 or i == n:
            rec(i * dt, physical(u))
    traj.meta["wall"] = time.perf_counter() - t_start
    return traj


# -------------------------------------------------------- nonlinear runs
def check_initial_perturbation(f0: DistributionField, tol=1e-8, positivity_tol=1e-10):
    """Validate ``mu + f0 >= 0`` and ``Pi_0 f0 = 0`` (moments of ``f0`` below ``tol``)."""
    F0min = float((f0.values + f0.vgrid.maxwellian()).min())
    if F0min < -positivity_tol:
        raise NonPositiveDensity(f"mu + f0 has minimum {F0min:.3e} < 0")
    c, _ = pi0_coefficients(f0.values, f0.vgrid, f0.space)
    if np.abs(c).max() > tol:
        raise ValidationError(f"f0 is not orthogonal to the collision invariants (Pi_0 coefficients "
                              f"{np.array2string(c, precision=3)}); project it first", key="f0")


class CollisionStage:
    """Homogeneous collision step ``f' = L_h f + Q_h(f, f)`` at every x node."""

    def __init__(self, vgrid, model: ModelSpec, integrator, dt):
        self.vgrid, self.model, self.dt = vgrid, model, dt
        self.lin = linearized(vgrid, model)
        self.op = get_operator(vgrid, model.gamma)
        self.integrator = integrator
        self.solver = None
        if integrator == "semi_implicit":
            S = self.lin.sparse_B0()
            U, Z = _conservative_correction(S, vgrid)
            self.solver = ImplicitSolver(S, dt, np.sqrt(vgrid.maxwellian()), U, Z)

    def rhs(self, f):
        return self.lin.apply_L(f) + self.op.q(f, f)

    def __call__(self, f, dt=None):
        dt = self.dt if dt is None else dt
        if self.solver is None:
            return _rk4(self.rhs, f, dt)
        if dt != self.solver.dt:
            raise ValidationError("semi-implicit stage was factorized for a different dt", key="evolve.dt")
        return self.solver.step(f, self.rhs)

    def explicit_radius(self):
        """Spectral radius of the explicitly treated linear part."""
        mu = self.vgrid.maxwellian()
        if self.solver is None:
            return spectral_radius(self.lin.apply_L, self.vgrid.shape, weight=1.0 / mu)
        flat = lambda u: u.reshape(1, -1)
        rem = lambda u: self.lin.apply_L(u) - self.solver.apply(flat(u)).reshape(u.shape)
        return spectral_radius(rem, self.vgrid.shape, weight=1.0 / mu)


def _nonlinear_dt(config, vgrid, model):
    if config.dt != "auto":
        return float(config.dt)
    probe = CollisionStage(vgrid, model, "rk4", 1.0)
    if config.integrator == "rk4":
        return auto_dt(1.1 * probe.explicit_radius(), "rk4")
    # the implicit part absorbs the stiff local diffusion; the rest is the
    # bounded non-local part
    mu = vgrid.maxwellian()
    rho = spectral_radius(probe.lin.q_f_mu, vgrid.shape, weight=1.0 / mu)
    return min(0.05, auto_dt(rho, "semi_implicit"))


def evolve_nonlinear(f0: DistributionField, model: ModelSpec, config: EvolveConfig) -> Trajectory:
    """Perturbation equation ``d_t f + v . grad_x f = L f + Q(f, f)``.

    Strang splitting: transport half step, collision full step, transport
    half step (``lie``: transport then collision).  The collision stage is
    RK4 or a linearly implicit Euler step.  In the latter, the local
    diffusion part of ``L_h`` is implicit with its moment-preserving
    correction, and ``Q_h(f, f)`` and the non-local part are explicit.
    Moments, norms, entropy and ``min(mu + f)`` are recorded; negative
    densities are reported in ``positivity_violations`` and never clipped.

    Raises
    ------
    ValidationError
        If ``f0`` has a component along the collision invariants.
    MomentDrift
        If mass, momentum or energy drift beyond ``config.moment_budget``.
    BlowUp
        If a recorded norm grows beyond ``config.blowup_factor`` times its start.
    """
    check_initial_perturbation(f0, positivity_tol=config.positivity_tol)
    vg, space = f0.vgrid, f0.space
    dt0 = _nonlinear_dt(config, vg, model)
    n, dt = _steps(config, dt0)
    t_start = time.perf_counter()
    stage = CollisionStage(vg, model, config.integrator, dt)
    traj = Trajectory(meta={"dt": dt, "steps": n, "integrator": config.integrator,
                            "splitting": config.splitting, "gamma": model.gamma})
    rec = _Recorder(traj, config, model, entropy=True)
    f = f0.copy()
    rec(0.0, f)
    m0 = moments_array(f.values, vg, space)
    half = 0.5 * dt if config.splitting == "strang" else dt
    moving = space.dim > 0
    for i in range(1, n + 1):
        if moving:
            f = transport_step(f, half)
        vals = stage(f.values)
        f = DistributionField(space, vg, vals, f.generation + 1)
        if moving and config.splitting == "strang":
            f = transport_step(f, half)
        m = moments_array(f.values, vg, space)
        drift = max(abs(m[0] - m0[0]), float(np.abs(m[1] - m0[1]).max()), abs(m[2] - m0[2]))
        if drift > config.moment_budget:
            rec(i * dt, f)
            err = MomentDrift(f"moment drift {drift:.3e} exceeds budget {config.moment_budget:.1e} at t={i * dt:.4g}")
            err.trajectory = traj
            raise err
        if i % config.record_every == 0 or i == n:
            try:
                rec(i * dt, f)
            except BlowUp as err:
                err.trajectory = traj
                raise
    traj.meta["wall"] = time.perf_counter() - t_start
    return traj


# ---------------------------------------------------- stability ledger
@dataclass
class StabilityLedger:
    """Per-interval check of ``d/dt |f|_X^2 <= -2 lam2 |f|_X^2 - 2 (K - C |f|_X) |f|_Y^2``."""

    times: np.ndarray
    dX2: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    lam2: float
    K: float
    C: float
    lam2_max: float

    def rhs(self):
        # 0 * inf counts as 0: with zero norms any constant is admissible
        with np.errstate(invalid="ignore"):
            a = np.where(self.X == 0, 0.0, self.lam2 * self.X**2)
            b = np.where(self.Y == 0, 0.0, (self.K - self.C * self.X) * self.Y**2)
        return -2 * a - 2 * b

    def slack(self):
        return self.rhs() - self.dX2

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.slack() >= -1e-12 * np.maximum(1.0, np.abs(self.dX2))))


def stability_inequality_monitor(traj: Trajectory, model: ModelSpec | None = None,
                                 x_tag="HH3xL2", y_tag="HH3xH1*") -> StabilityLedger:
    """Fit constants of the nonlinear energy inequality along a trajectory.

    ``d/dt |f|_X^2`` is a forward difference between records and the norms
    are averaged over each interval.  The constants are chosen
    lexicographically: ``lam2`` as large as possible with ``K = C = 0``,
    then ``K`` as large as possible with ``C = 0`` at that ``lam2``.  ``C``
    stays 0 (a positive ``C`` only loosens the bound).  If no
    ``lam2 >= 0`` works, ``C`` is the smallest value making ``lam2 = K = 0``
    feasible.
    """
    t = np.asarray(traj.times)
    X = traj.norm(x_tag)
    Y = traj.norm(y_tag)
    if len(t) < 2:
        raise ValidationError("need at least two records", key="trajectory")
    dX2 = np.diff(X**2) / np.diff(t)
    Xm = 0.5 * (X[1:] + X[:-1])
    Ym = 0.5 * (Y[1:] + Y[:-1])
    live = Xm > 0
    if not np.any(live):
        return StabilityLedger(t[:-1], dX2, Xm, Ym, np.inf, np.inf, 0.0, np.inf)
    rates = -dX2[live] / (2 * Xm[live] ** 2)
    lam2_max = float(rates.min())
    C = 0.0
    if lam2_max >= 0:
        lam2 = lam2_max
        room = -dX2[live] - 2 * lam2 * Xm[live] ** 2
        yl = Ym[live] ** 2
        K = float(np.min(np.where(yl > 0, room / (2 * np.where(yl > 0, yl, 1.0)), np.inf)))
        K = max(K, 0.0)
    else:
        lam2, K = 0.0, 0.0
        need = dX2[live] / (2 * Xm[live] * np.maximum(Ym[live] ** 2, 1e-300))
        C = float(max(need.max(), 0.0))
    return StabilityLedger(t[:-1], dX2, Xm, Ym, lam2, K, C, lam2_max)
