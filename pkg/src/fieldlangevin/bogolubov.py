"""Bogolubov evolution for time-dependent oscillator environments.

Oscillators with stipulated m(t), omega(t) mix their creation and
annihilation operators through coefficients (alpha, beta) obeying

    d alpha/dt = -i A*(t) beta - i B(t) alpha
    d beta/dt  = +i B(t) beta  + i A(t) alpha

with A(t) = (m w^2/(m_i w_i) - m_i w_i/m)/2 and
B(t) = (m_i w_i/m + m w^2/(m_i w_i))/2 referenced to the initial time.
|alpha|^2 - |beta|^2 = 1 is conserved identically; the numerical drift
measures integrator error.  The noise and dissipation kernels of a
squeezed thermal bath are assembled from [alpha + beta] factors below.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, StiffnessError
from .kernels import KernelGrid
from .modes import FieldState, coth_half


@dataclass(frozen=True)
class OscillatorSchedule:
    """Mass and frequency curves m(t), omega(t), valid from t_initial."""

    mass: object          # callable t -> m(t) > 0
    frequency: object     # callable t -> omega(t) > 0
    t_initial: float = 0.0

    @classmethod
    def constant(cls, omega, mass=1.0, t_initial=0.0):
        return cls(lambda t: mass + 0.0 * np.asarray(t),
                   lambda t: omega + 0.0 * np.asarray(t), t_initial)

    @classmethod
    def from_csv(cls, mass_path, frequency_path, t_initial=None):
        """Tabulated curves from two-column CSV files (time, value).

        Values are linearly interpolated and held constant beyond the
        tabulated range.
        """
        def load(path):
            ts, vs = [], []
            with open(path, newline="") as f:
                for row in csv.reader(f):
                    if not row or row[0].lstrip().startswith("#"):
                        continue
                    ts.append(float(row[0]))
                    vs.append(float(row[1]))
            if len(ts) < 2:
                raise ConfigurationError(f"{path}: need at least two samples")
            t = np.asarray(ts)
            v = np.asarray(vs)
            order = np.argsort(t)
            t, v = t[order], v[order]
            return lambda x: np.interp(x, t, v), t[0]

        m_fn, t0m = load(mass_path)
        w_fn, t0w = load(frequency_path)
        if t_initial is None:
            t_initial = max(t0m, t0w)
        return cls(m_fn, w_fn, t_initial)

    def validate(self, t_grid):
        m = np.asarray(self.mass(t_grid), dtype=float)
        w = np.asarray(self.frequency(t_grid), dtype=float)
        if np.any(m <= 0) or np.any(w <= 0):
            raise ConfigurationError("schedule must keep m(t) > 0 and omega(t) > 0")
        return m, w

    def coefficients(self, t):
        """A(t), B(t) referenced to m_i omega_i at t_initial."""
        mi_wi = float(self.mass(self.t_initial)) * float(self.frequency(self.t_initial))
        m = self.mass(t)
        w = self.frequency(t)
        a = 0.5 * (m * w**2 / mi_wi - mi_wi / m)
        b = 0.5 * (mi_wi / m + m * w**2 / mi_wi)
        return a, b


@dataclass(frozen=True)
class BogolubovTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    tol: float

    def __post_init__(self):
        for name in ("times", "alpha", "beta"):
            arr = np.asarray(getattr(self, name))
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)

    def conservation_drift(self):
        """max_t | |alpha|^2 - |beta|^2 - 1 |."""
        return float(np.max(np.abs(np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2 - 1.0)))


def evolve_bogolubov(schedule: OscillatorSchedule, window, tol=1e-10, grid=None):
    """Solve the Bogolubov system on `window` = (t_start, t_end).

    Initial condition alpha = 1, beta = 0 at t_start.  Returns a
    BogolubovTrajectory sampled on `grid` (default: 513 uniform points).
    A(t) is real for mass/frequency schedules; complex A is carried
    through the conjugation in the right-hand side but is experimental
    (only schedules with real coefficients are exercised by the tests).
    """
    t0, t1 = float(window[0]), float(window[1])
    if not t1 > t0:
        raise ConfigurationError("window must have t_end > t_start")
    if grid is None:
        grid = np.linspace(t0, t1, 513)
    grid = np.asarray(grid, dtype=float)
    schedule.validate(grid)

    def rhs(t, y):
        a = y[0] + 1j * y[1]
        b = y[2] + 1j * y[3]
        A, B = schedule.coefficients(t)
        da = -1j * np.conj(A) * b - 1j * B * a
        db = 1j * B * b + 1j * A * a
        return [da.real, da.imag, db.real, db.imag]

    sol = solve_ivp(rhs, (t0, t1), [1.0, 0.0, 0.0, 0.0], method="DOP853",
                    rtol=tol, atol=tol * 1e-2, dense_output=True)
    if not sol.success:
        raise StiffnessError(f"Bogolubov integration failed: {sol.message}",
                             t=sol.t[-1] if sol.t.size else t0)
    y = sol.sol(grid)
    alpha = y[0] + 1j * y[1]
    beta = y[2] + 1j * y[3]
    return BogolubovTrajectory(grid, alpha, beta, tol)


def instantaneous_occupation(traj: BogolubovTrajectory, schedule: OscillatorSchedule, t):
    """|beta|^2 relative to the instantaneous oscillator basis at time t.

    For a frequency jump w1 -> w2 this is the quantity that settles to the
    sudden-approximation value (w2-w1)^2/(4 w1 w2).
    """
    w1 = float(schedule.frequency(schedule.t_initial)) * float(schedule.mass(schedule.t_initial))
    w2 = float(schedule.frequency(t)) * float(schedule.mass(t))
    cp = (w2 + w1) / (2 * math.sqrt(w1 * w2))
    cm = (w2 - w1) / (2 * math.sqrt(w1 * w2))
    i = int(np.argmin(np.abs(traj.times - t)))
    return float(np.abs(cp * traj.beta[i] + cm * traj.alpha[i]) ** 2)


class SpectralDensity:
    """Weighted set of environment frequencies for kernel assembly.

    Discrete form: explicit (omega_j, weight_j) pairs; the natural weight
    for a box mode of frequency w is 1/(2w), which reproduces the thermal
    influence kernel mode by mode.  Continuous form: ohmic density
    I(w) = (2 e^2/pi) w exp(-w/cutoff) integrated by Gauss-Legendre panels.
    """

    def __init__(self, omegas, weights):
        self.omegas = np.asarray(omegas, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.omegas <= 0):
            raise ConfigurationError("spectral density support must be positive")
        if self.omegas.shape != self.weights.shape:
            raise ConfigurationError("omegas and weights must align")

    @classmethod
    def discrete_modes(cls, omegas):
        omegas = np.asarray(omegas, dtype=float)
        return cls(omegas, 1.0 / (2.0 * omegas))

    @classmethod
    def ohmic(cls, coupling, cutoff, omega_max=None, panels=64, order=16):
        """I(w) = (2 e^2 / pi) w exp(-w/cutoff), quadratured up to omega_max."""
        if omega_max is None:
            omega_max = 40.0 * cutoff
        xg, wg = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, omega_max, panels + 1)
        om, wt = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            om.append(mid + half * xg)
            wt.append(half * wg)
        om = np.concatenate(om)
        wt = np.concatenate(wt)
        dens = (2.0 * coupling**2 / math.pi) * om * np.exp(-om / cutoff)
        good = dens * wt > 0
        return cls(om[good], (dens * wt)[good])


def kernels_from_bogolubov(trajectories, state: FieldState, density: SpectralDensity,
                           grid=None):
    """Noise and dissipation kernels of a (squeezed) thermal bath.

    trajectories : one BogolubovTrajectory per density frequency (or a
    single trajectory reused for all, when the schedule is shared).
    Returns (nu KernelGrid, mu KernelGrid) with

        mu = -sum_j w_j Im[(a+b)*(t) (a+b)(t')]
        nu = +sum_j w_j coth(hbar beta w_j/2) { cosh(2r) Re[(a+b)*(t)(a+b)(t')]
              - sinh(2r) Re[e^{2 i phi} (a+b)(t)(a+b)(t')] }

    With r = 0 the nu expression reduces term by term to the thermal noise
    kernel; mu never depends on beta or on the squeeze parameters.
    """
    if isinstance(trajectories, BogolubovTrajectory):
        trajectories = [trajectories] * len(density.omegas)
    if len(trajectories) != len(density.omegas):
        raise ConfigurationError("need one Bogolubov trajectory per density frequency")
    if grid is None:
        grid = trajectories[0].times
    grid = np.asarray(grid, dtype=float)
    nu = np.zeros((grid.size, grid.size))
    mu = np.zeros_like(nu)
    for traj, om, wt in zip(trajectories, density.omegas, density.weights):
        if grid[0] < traj.times[0] - 1e-12 or grid[-1] > traj.times[-1] + 1e-12:
            raise ConfigurationError("Bogolubov trajectory does not cover the kernel grid")
        z = np.interp(grid, traj.times, (traj.alpha + traj.beta).real) + 1j * np.interp(
            grid, traj.times, (traj.alpha + traj.beta).imag)
        outer = np.conj(z)[:, None] * z[None, :]
        mu += -wt * outer.imag
        cf = float(coth_half(om, state.beta, state.hbar))
        if state.kind == "squeezed-thermal":
            r = float(state.r_at(om))
            phi = float(state.phi_at(om))
        else:
            r, phi = 0.0, 0.0
        term = math.cosh(2 * r) * outer.real
        if r != 0.0:
            zz = z[:, None] * z[None, :]
            term = term - math.sinh(2 * r) * (np.exp(2j * phi) * zz).real
        nu += wt * cf * term
    meta = {"beta": state.beta, "hbar": state.hbar, "kind": state.kind}
    return (KernelGrid(grid, nu, "nu", meta), KernelGrid(grid, mu, "mu", meta))
