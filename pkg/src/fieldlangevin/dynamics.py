"""Equations of motion: mean trajectories, Langevin runs, linearized system.

Two built-in models:

* Dipole (internal oscillator at a fixed point): exactly linear.  In the
  local limit of the radiation memory the equation per realization is
  qdd + e qd + w0^2 q = chi(x0, t); it is integrated with an exact
  exponential stepper (the homogeneous map is the matrix exponential,
  forcing enters through piecewise-linear quadrature), so the
  zero-coupling oscillator is propagated to rounding accuracy.

* Monopole (point charge on a worldline): in 1+1 the self-interaction
  reduces to the local friction -4*pi*e^2 * v per unit charge^2 (the
  radiation kernel's lightcone locality); mutual forces between distinct
  particles are retarded-kernel quadratures with exact causal support.
  Integrated with a Heun predictor-corrector (the colored noise is a
  smooth forcing within one realization).

The semiclassical solution iterates the history-dependent mutual forces
to a fixed point; per-realization Langevin runs add the projected
stochastic forcing and reduce to the semiclassical solve when the noise
is identically zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .conventions import ACTION_KERNEL_FACTOR, LOCAL_DISSIPATION_1P1, spatial_dim
from .errors import (ConditioningError, ConfigurationError, ConvergenceError,
                     CouplingError)
from .kernels import KernelGrid, hadamard_grid, retarded_grid
from .modes import FieldState, ModeSet
from .noise import NoiseRealization, project_force_history, stochastic_field_history
from .worldline import DipoleCoupling, MonopoleCoupling, Worldline, static_worldline


@dataclass
class DipoleModel:
    """Internal oscillator at fixed position; exactly linear dynamics."""

    charge: float
    frequency: float
    position: np.ndarray
    q0: float = 0.0
    qdot0: float = 0.0
    mass: float = 1.0

    def __post_init__(self):
        self.position = np.atleast_1d(np.asarray(self.position, dtype=float))

    def coupling(self):
        return DipoleCoupling(self.charge, self.position)


@dataclass
class MonopoleModel:
    """Point charge with initial position and velocity."""

    charge: float
    position: np.ndarray
    velocity: np.ndarray
    mass: float = 1.0
    external_force: np.ndarray = None

    def __post_init__(self):
        self.position = np.atleast_1d(np.asarray(self.position, dtype=float))
        self.velocity = np.atleast_1d(np.asarray(self.velocity, dtype=float))
        if self.external_force is None:
            self.external_force = np.zeros_like(self.position)
        else:
            self.external_force = np.atleast_1d(np.asarray(self.external_force, dtype=float))

    def coupling(self):
        return MonopoleCoupling(self.charge)


@dataclass(frozen=True)
class LocalFriction:
    """Marker for a dissipation kernel that is exactly local: F = coeff * v."""

    coefficient: float


def local_friction_1p1(charge):
    """Self-dissipation of a 1+1 point charge: F = -4*pi*e^2 * v."""
    return LocalFriction(LOCAL_DISSIPATION_1P1 * charge**2)


def _gauss(u, sigma):
    return np.exp(-0.5 * (u / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _dgauss(u, sigma):
    return -(u / sigma**2) * _gauss(u, sigma)


class _MutualForce:
    """Retarded force of source worldline `src` on field point x at time t.

    Uses the closed-form radiation kernel, so the causal support is exact:
    spacelike-separated pairs exert strictly zero force.
    """

    def __init__(self, dimension, dt, sigma=None):
        self.dimension = dimension
        self.sigma = sigma if sigma is not None else 2.0 * dt
        self.dt = dt

    def gradient_kernel(self, dtv, dxv):
        """d/dx_i of theta(dt) A(dt, x - z_src); dxv shape (..., d_s)."""
        if self.dimension == "1+1":
            dx = dxv[..., 0]
            g = 2 * math.pi * (_gauss(dtv + dx, self.sigma) - _gauss(dtv - dx, self.sigma))
            out = np.where(dtv > 0, g, 0.0)
            return out[..., None]
        r = np.linalg.norm(dxv, axis=-1)
        r = np.where(r < self.sigma, self.sigma, r)
        u = dtv - r
        radial = -8 * math.pi**2 * (_gauss(u, self.sigma) / r**2 + _dgauss(u, self.sigma) / r)
        radial = np.where(dtv > 0, radial, 0.0)
        return radial[..., None] * (dxv / r[..., None])

    def force_on(self, x, t, times, src_pos, e_pair, upto=None):
        """2 e_n e_m int dt' grad G_ret(t - t', x - z_src(t')) by trapezoid."""
        n = times.size if upto is None else upto + 1
        if n < 2:
            return np.zeros(x.shape[-1])
        dtv = t - times[:n]
        dxv = x[None, :] - src_pos[:n]
        grad = self.gradient_kernel(dtv, dxv)
        w = np.full(n, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return ACTION_KERNEL_FACTOR * e_pair * np.sum(w[:, None] * grad, axis=0)


def _dipole_step_matrices(omega0, gamma, dt, mass=1.0):
    """Exact exponential-integrator coefficients for qdd + g qd + w0^2 q = F/m."""
    if omega0 <= 0:
        raise ConfigurationError("dipole frequency must be positive")
    A = np.array([[0.0, 1.0], [-omega0**2, -gamma]])
    B = np.array([0.0, 1.0 / mass])
    M = expm(A * dt)
    Ainv = np.linalg.inv(A)
    I = np.eye(2)
    psi0 = Ainv @ (M - I) @ B
    psi1 = Ainv @ Ainv @ (M @ (A * dt - I) + I) @ B
    return M, psi0, psi1


def integrate_dipole(model: DipoleModel, times, forcing=None, gamma=None):
    """Integrate one dipole with the exact stepper.

    forcing : array (N,) or (N, n_real) sampled on `times`; interpolated
    piecewise linearly inside each step.  gamma defaults to the local
    radiation friction e of the oscillator convention.
    Returns (q, v) arrays with the same trailing shape as forcing.
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    dt = times[1] - times[0]
    g = model.charge if gamma is None else gamma
    M, psi0, psi1 = _dipole_step_matrices(model.frequency, g, dt, model.mass)
    if forcing is None:
        F = np.zeros((n, 1))
        squeeze = True
    else:
        F = np.asarray(forcing, dtype=float)
        squeeze = F.ndim == 1
        F = F.reshape(n, -1)
    nreal = F.shape[1]
    q = np.empty((n, nreal))
    v = np.empty((n, nreal))
    q[0] = model.q0
    v[0] = model.qdot0
    state = np.vstack([q[0], v[0]])  # (2, nreal)
    for k in range(n - 1):
        slope = (F[k + 1] - F[k]) / dt
        state = M @ state + np.outer(psi0, F[k + 1]) - np.outer(psi1, slope)
        q[k + 1] = state[0]
        v[k + 1] = state[1]
    if squeeze:
        return q[:, 0], v[:, 0]
    return q, v


def _heun_monopole(model: MonopoleModel, times, dimension, noise=None,
                   mutual_hist=None, friction=None):
    """Heun integration of m xdd = friction*v + F_ext + F_mutual(t) + noise(t).

    noise and mutual_hist are precomputed force histories (N, d_s); the
    trajectory must stay timelike (|v| < 1).
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    ds = model.position.size
    dt = times[1] - times[0]
    x = np.zeros((n, ds))
    v = np.zeros((n, ds))
    x[0] = model.position
    v[0] = model.velocity
    fric = 0.0 if friction is None else friction.coefficient
    hist = np.zeros((n, ds)) if mutual_hist is None else mutual_hist
    xi = np.zeros((n, ds)) if noise is None else noise

    def accel(vk, k):
        return (fric * vk + model.external_force + hist[k] + xi[k]) / model.mass

    for k in range(n - 1):
        a1 = accel(v[k], k)
        xp = x[k] + dt * v[k]
        vp = v[k] + dt * a1
        a2 = accel(vp, k + 1)
        x[k + 1] = x[k] + 0.5 * dt * (v[k] + vp)
        v[k + 1] = v[k] + 0.5 * dt * (a1 + a2)
        if np.sum(v[k + 1] ** 2) >= 1.0:
            raise ConfigurationError(
                f"trajectory became non-timelike at t = {times[k + 1]:.6g}"
            )
    return x, v


def _solve_given_mutual(models, times, dimension, mutual, noises):
    """One sweep: integrate every particle with frozen mutual histories."""
    out = []
    for i, m in enumerate(models):
        if isinstance(m, DipoleModel):
            forcing = np.zeros(times.size)
            if mutual[i] is not None:
                forcing = forcing + mutual[i][:, 0]
            if noises[i] is not None:
                forcing = forcing + noises[i][:, 0]
            q, v = integrate_dipole(m, times, forcing)
            wl = static_worldline(i, times, m.position, m.mass, m.charge)
            wl.amplitude = q
            wl.amplitude_rate = v
            out.append(wl)
        else:
            friction = local_friction_1p1(m.charge) if dimension == "1+1" else None
            x, v = _heun_monopole(m, times, dimension, noises[i], mutual[i], friction)
            out.append(Worldline(i, times, x, v, m.mass, m.charge))
    return out


def _mutual_histories(models, worldlines, times, dimension, sigma=None):
    """Force of every other particle on each particle, from current iterates."""
    n = len(models)
    dt = times[1] - times[0]
    mf = _MutualForce(dimension, dt, sigma)
    ds = spatial_dim(dimension)
    out = [None] * n
    for i, mi in enumerate(models):
        total = None
        for j, mj in enumerate(models):
            if i == j:
                continue
            contrib = np.zeros((times.size, ds))
            if isinstance(mi, DipoleModel) and isinstance(mj, DipoleModel):
                # scalar kernel quadrature on the internal amplitudes
                G = retarded_grid(times, np.repeat(mi.position[None, :], times.size, 0),
                                  np.repeat(mj.position[None, :], times.size, 0),
                                  dimension, sigma)
                w = np.full(times.size, dt)
                w[0] *= 0.5
                w[-1] *= 0.5
                amp = worldlines[j].amplitude
                contrib[:, 0] = ACTION_KERNEL_FACTOR * mi.charge * mj.charge * (
                    G.values @ (w * amp))
            elif isinstance(mi, MonopoleModel) and isinstance(mj, MonopoleModel):
                for k in range(times.size):
                    contrib[k] = mf.force_on(worldlines[i].positions[k], times[k],
                                             times, worldlines[j].positions,
                                             mi.charge * mj.charge, upto=k)
            else:
                raise CouplingError("mixed dipole/monopole mutual forces are not defined")
            total = contrib if total is None else total + contrib
        out[i] = total
    return out


def semiclassical_trajectory(models, times, dimension="1+1", tol_sc=1e-10,
                             max_iter=200, damping=0.5, sigma=None, noises=None):
    """Mean trajectories with self-consistent retarded backreaction.

    Fixed-point iteration over the mutual force histories, mixed with
    weight `damping` to control overshoot; single particles (no mutual
    forces) converge in one sweep.  Raises ConvergenceError with the
    residual history when max_iter is exhausted.
    """
    times = np.asarray(times, dtype=float)
    if noises is None:
        noises = [None] * len(models)
    mutual = [None] * len(models)
    wls = _solve_given_mutual(models, times, dimension, mutual, noises)
    if len(models) == 1:
        return wls
    residuals = []
    prev_mutual = [np.zeros((times.size, spatial_dim(dimension))) for _ in models]
    for it in range(max_iter):
        new_mutual = _mutual_histories(models, wls, times, dimension, sigma)
        mixed = []
        for pm, nm in zip(prev_mutual, new_mutual):
            nm = np.zeros_like(pm) if nm is None else nm
            mixed.append((1 - damping) * pm + damping * nm)
        new_wls = _solve_given_mutual(models, times, dimension, mixed, noises)
        dev = 0.0
        for a, b in zip(wls, new_wls):
            if a.amplitude is not None:
                dev = max(dev, float(np.max(np.abs(a.amplitude - b.amplitude))))
            dev = max(dev, float(np.max(np.abs(a.positions - b.positions))))
        residuals.append(dev)
        wls = new_wls
        prev_mutual = mixed
        if dev < tol_sc:
            return wls
    raise ConvergenceError(
        f"semiclassical iteration did not reach {tol_sc} in {max_iter} sweeps",
        residuals,
    )


def integrate_langevin(models, times, realization, modes: ModeSet,
                       dimension="1+1", tol_sc=1e-10, max_iter=200,
                       damping=0.5, sigma=None):
    """One Langevin run: the realization's projected forces drive the
    semiclassical system.  With a zero realization this reproduces the
    semiclassical trajectories exactly (same code path).
    """
    times = np.asarray(times, dtype=float)
    noises = []
    for i, m in enumerate(models):
        if realization is None:
            noises.append(None)
            continue
        if isinstance(m, DipoleModel):
            if m.charge == 0.0:
                # zero coupling decouples the oscillator from the field entirely
                noises.append(None)
                continue
            # oscillator convention: unit noise coupling chi(x0, t)
            chi = stochastic_field_history(realization, modes, m.position)
            noises.append(chi[:, None])
        else:
            wl0 = static_worldline(i, times, m.position, m.mass, m.charge)
            eta = project_force_history(realization, wl0, m.coupling(), modes)
            noises.append(eta)
    return semiclassical_trajectory(models, times, dimension, tol_sc, max_iter,
                                    damping, sigma, noises=noises)


def first_cumulant(trajectories, couplings, kernel, dt=None):
    """Backreaction force history from the retarded kernel.

    kernel : LocalFriction        -> F(t) = coeff * (velocity or qdot)
             KernelGrid 'gamma'   -> F(t) = int Gamma(t,s) rate(s) ds
             KernelGrid 'retarded'-> F(t) = 2 e^2 int G(t,s) q(s) ds
                                      (dipole amplitudes)
    Returns a list of (N, n_dof) force histories, one per trajectory.
    Zero charge gives identically zero.
    """
    if isinstance(trajectories, Worldline):
        trajectories = [trajectories]
    couplings = couplings if isinstance(couplings, (list, tuple)) else [couplings] * len(trajectories)
    out = []
    for wl, cp in zip(trajectories, couplings):
        def rate():
            if wl.amplitude is not None:
                if wl.amplitude_rate is None:
                    raise CouplingError("worldline lacks an amplitude rate")
                return wl.amplitude_rate[:, None]
            return wl.velocities

        if isinstance(kernel, LocalFriction):
            out.append(kernel.coefficient * rate())
            continue
        if not isinstance(kernel, KernelGrid):
            raise CouplingError("first_cumulant needs a LocalFriction or KernelGrid")
        w = np.full(kernel.times.size, kernel.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        if kernel.kind == "gamma":
            out.append((kernel.values @ (w[:, None] * rate())))
        elif kernel.kind == "retarded":
            if wl.amplitude is None:
                raise CouplingError("grid-kernel first cumulant is defined for dipole "
                                    "amplitudes; monopoles use the closed-form route")
            e2 = getattr(cp, "charge", 0.0) ** 2
            out.append(ACTION_KERNEL_FACTOR * e2
                       * (kernel.values @ (w * wl.amplitude))[:, None])
        else:
            raise CouplingError(f"unsupported kernel kind {kernel.kind!r}")
    return out


def mutual_force_history(models, worldlines, times, dimension, sigma=None):
    """Public wrapper over the mutual retarded forces (per particle)."""
    return _mutual_histories(models, worldlines, times, dimension, sigma)


@dataclass(frozen=True)
class LinearizedSystem:
    """Matrices of the fluctuation equations (T + R) z + eta = 0.

    Flat index i = (particle n, component a, time k), time fastest.  T is
    the kinetic operator (second difference plus restoring terms), the
    diagonal blocks of R carry dissipation, off-diagonal blocks retarded
    propagation; C is the noise covariance matrix <eta eta>.
    """

    times: np.ndarray
    block_shapes: tuple
    T: np.ndarray
    R: np.ndarray
    C: np.ndarray
    noise_rules: tuple

    def block(self, M, n, m):
        """View of the (n, m) particle block of matrix M."""
        starts = np.cumsum([0] + [s for s in self.block_shapes])
        return M[starts[n]:starts[n + 1], starts[m]:starts[m + 1]]


def _second_difference(n, dt):
    D2 = np.zeros((n, n))
    for i in range(1, n - 1):
        D2[i, i - 1] = 1.0 / dt**2
        D2[i, i] = -2.0 / dt**2
        D2[i, i + 1] = 1.0 / dt**2
    # one-sided rows at the ends keep the operator defined everywhere
    D2[0, :3] = np.array([1.0, -2.0, 1.0]) / dt**2
    D2[-1, -3:] = np.array([1.0, -2.0, 1.0]) / dt**2
    return D2


def _first_difference(n, dt):
    D1 = np.zeros((n, n))
    for i in range(1, n - 1):
        D1[i, i - 1] = -0.5 / dt
        D1[i, i + 1] = 0.5 / dt
    D1[0, :2] = np.array([-1.0, 1.0]) / dt
    D1[-1, -2:] = np.array([-1.0, 1.0]) / dt
    return D1


def linearize(models, worldlines, modes: ModeSet, state: FieldState,
              dimension="1+1", sigma=None):
    """Assemble the linearized fluctuation system around mean worldlines.

    Restrictions: every model must be a DipoleModel or every model a
    MonopoleModel (mixed systems have no defined mutual kernel).  Zero
    charge yields R = 0 and C = 0 with T the free kinetic operator.
    """
    times = worldlines[0].times
    n = times.size
    dt = times[1] - times[0]
    ds = spatial_dim(dimension)
    sizes = []
    for m in models:
        sizes.append(n if isinstance(m, DipoleModel) else n * ds)
    ntot = sum(sizes)
    T = np.zeros((ntot, ntot))
    R = np.zeros((ntot, ntot))
    C = np.zeros((ntot, ntot))
    starts = np.cumsum([0] + sizes)
    D2 = _second_difference(n, dt)
    D1 = _first_difference(n, dt)
    rules = []
    for i, mi in enumerate(models):
        sl = slice(starts[i], starts[i + 1])
        if isinstance(mi, DipoleModel):
            # T z = -(qdd + w0^2 q);  R z = -e qd  =>  (T+R) z + eta = 0
            T[sl, sl] = -(mi.mass * D2 + mi.frequency**2 * np.eye(n))
            R[sl, sl] = -mi.charge * D1
            rules.append(("dipole-unit-field", mi.position))
        else:
            blockT = -mi.mass * np.kron(np.eye(ds), D2)
            T[sl, sl] = blockT
            if dimension == "1+1":
                R[sl, sl] = local_friction_1p1(mi.charge).coefficient * np.kron(np.eye(ds), D1)
            rules.append(("monopole-gradient", None))
    # off-diagonal R: retarded propagation, exactly zero at spacelike separation
    w = np.full(n, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    for i, mi in enumerate(models):
        for j, mj in enumerate(models):
            if i == j:
                continue
            sli = slice(starts[i], starts[i + 1])
            slj = slice(starts[j], starts[j + 1])
            if isinstance(mi, DipoleModel) and isinstance(mj, DipoleModel):
                G = retarded_grid(times, worldlines[i].positions, worldlines[j].positions,
                                  dimension, sigma)
                R[sli, slj] = ACTION_KERNEL_FACTOR * mi.charge * mj.charge * (
                    G.values * w[None, :])
            elif isinstance(mi, MonopoleModel) and isinstance(mj, MonopoleModel):
                mf = _MutualForce(dimension, dt, sigma)
                if _mutually_spacelike(worldlines[i], worldlines[j]):
                    continue  # exact causal zero
                blk = np.zeros((n * ds, n * ds))
                for k in range(n):
                    dtv = times[k] - times
                    dxv = worldlines[i].positions[k][None, :] - worldlines[j].positions
                    grad = mf.gradient_kernel(dtv, dxv)
                    for a in range(ds):
                        blk[a * n + k, a * n: (a + 1) * n] = (
                            ACTION_KERNEL_FACTOR * mi.charge * mj.charge * grad[:, a] * w)
                R[sli, slj] = blk
            else:
                raise CouplingError("mixed dipole/monopole systems are not supported")
    # C: noise covariance on the mean worldlines
    for i, mi in enumerate(models):
        for j, mj in enumerate(models):
            sli = slice(starts[i], starts[i + 1])
            slj = slice(starts[j], starts[j + 1])
            if isinstance(mi, DipoleModel):
                if mi.charge == 0.0 or mj.charge == 0.0:
                    continue  # zero coupling: no noise channel
                GH = hadamard_grid(times, worldlines[i].positions,
                                   worldlines[j].positions, modes, state)
                C[sli, slj] = state.hbar * GH.values
            else:
                C[sli, slj] = state.hbar * _gradgrad_hadamard(
                    times, worldlines[i], worldlines[j], modes, state,
                    mi.charge * mj.charge, ds)
    return LinearizedSystem(times, tuple(sizes), T, R, C, tuple(rules))


def _mutually_spacelike(wa: Worldline, wb: Worldline):
    """True when every pair of samples of the two worldlines is spacelike."""
    dt = np.abs(wa.times[:, None] - wb.times[None, :])
    dx = np.linalg.norm(wa.positions[:, None, :] - wb.positions[None, :, :], axis=2)
    return bool(np.all(dx > dt))


def _gradgrad_hadamard(times, wa, wb, modes, state, e_pair, ds):
    """<d_i chi(z_a t) d_j chi(z_b t')> kernel block for monopole noise."""
    from .modes import coth_half

    n = times.size
    karr = modes.k_array()
    pol = np.array([m.polarization for m in modes.modes])
    sel = pol == 1
    kvecs = karr[sel]
    omegas = modes.omegas[sel]
    c = coth_half(omegas, state.beta, state.hbar)
    lag = times[:, None] - times[None, :]
    out = np.zeros((n * ds, n * ds))
    for idx in range(len(omegas)):
        kv = kvecs[idx]
        phase = (wa.positions @ kv)[:, None] - (wb.positions @ kv)[None, :]
        tshape = c[idx] * np.cos(omegas[idx] * lag) / (2 * omegas[idx])
        geom = np.cos(phase) * tshape
        for a in range(ds):
            for b in range(ds):
                out[a * n:(a + 1) * n, b * n:(b + 1) * n] += kv[a] * kv[b] * geom
    return e_pair * modes.norm**2 * out


def fluctuation_dynamics(system: LinearizedSystem, models, eta, dimension="1+1",
                         method="stepper"):
    """Solve (T + R) z + eta = 0 for one realization of the noises.

    method='stepper' integrates the equivalent local ODEs; it treats
    particles independently and is valid exactly when the off-diagonal R
    blocks vanish (single particle, or mutually spacelike systems).
    method='matrix' solves the assembled linear system with initial-value
    rows (small grids; refuses ill-conditioned operators rather than
    regularizing them).  Returns a list of fluctuation histories.
    """
    times = system.times
    n = times.size
    if eta is None:
        return [np.zeros((n, 1 if isinstance(m, DipoleModel) else
                          spatial_dim(dimension))) for m in models]
    if method == "stepper":
        out = []
        for i, m in enumerate(models):
            f = eta[i]
            if isinstance(m, DipoleModel):
                zero = DipoleModel(m.charge, m.frequency, m.position, 0.0, 0.0, m.mass)
                q, _ = integrate_dipole(zero, times, f[:, 0])
                out.append(q[:, None])
            else:
                zero = MonopoleModel(m.charge, 0.0 * m.position, 0.0 * m.velocity, m.mass)
                friction = local_friction_1p1(m.charge) if dimension == "1+1" else None
                x, _ = _heun_monopole(zero, times, dimension, f, None, friction)
                out.append(x)
        return out
    # matrix route
    H = solution_operator(system)
    flat = np.concatenate([eta[i].T.ravel() for i in range(len(models))])
    sol = H @ flat
    starts = np.cumsum([0] + list(system.block_shapes))
    out = []
    for i, m in enumerate(models):
        ncomp = system.block_shapes[i] // n
        blk = sol[starts[i]:starts[i + 1]].reshape(ncomp, n).T
        out.append(blk)
    return out


def solution_operator(system: LinearizedSystem):
    """Discrete solution operator H with z = H eta for the linearized
    fluctuation equations, initial conditions z(0) = zdot(0) = 0.

    Built by central-difference collocation of the EOM at the interior
    times t_1..t_{N-2}; the two freed end rows per component carry the
    initial conditions.  Refuses ill-conditioned operators rather than
    regularizing them.
    """
    times = system.times
    n = times.size
    A_full = system.T + system.R
    ntot = A_full.shape[0]
    starts = np.cumsum([0] + list(system.block_shapes))
    A = A_full.copy()
    S = np.zeros((ntot, ntot))
    dt0 = times[1] - times[0]
    for i, size in enumerate(system.block_shapes):
        ncomp = size // n
        for a in range(ncomp):
            base = starts[i] + a * n
            # shift the interior EOM rows down by one, freeing two rows
            A[base + 2: base + n] = A_full[base + 1: base + n - 1]
            S[base + 2: base + n, base + 1: base + n - 1] = np.eye(n - 2)
            A[base, :] = 0.0
            A[base, base] = 1.0
            A[base + 1, :] = 0.0
            A[base + 1, base] = -1.0 / dt0
            A[base + 1, base + 1] = 1.0 / dt0
    cond = np.linalg.cond(A)
    if cond > 1e12:
        raise ConditioningError(f"fluctuation operator condition number {cond:.3e}; "
                                "refusing to regularize")
    return -np.linalg.solve(A, S)


def fluctuation_covariance(system: LinearizedSystem):
    """Exact second moments of the fluctuations: Cov(z) = H C H^T."""
    H = solution_operator(system)
    return H @ system.C @ H.T
