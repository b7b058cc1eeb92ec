"""Particle worldlines and current functionals.

Worldlines are parametrized in the gauge tau = t (laboratory time), so
z^0(tau) = tau exactly and only the spatial coordinates are dynamical.
Current functionals define how a particle sources the field; they carry
the variational rules needed to project forces and assemble linearized
kernels.
"""

from dataclasses import dataclass, field

import numpy as np

from .conventions import spatial_dim
from .errors import ConfigurationError, CouplingError
from .modes import ModeSet


@dataclass
class Worldline:
    """Sampled trajectory of one particle on a uniform time grid.

    positions : (N, d_s) spatial coordinates; velocities : (N, d_s).
    The time component is the grid itself (tau = t gauge).  For the
    dipole model `positions` is the fixed location and `amplitude`
    holds the internal coordinate q(t).
    """

    particle_id: int
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    mass: float
    charge: float
    amplitude: np.ndarray = None       # internal dipole coordinate q(t)
    amplitude_rate: np.ndarray = None  # qdot(t)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[0] != self.times.size:
            # fixed-position worldline: broadcast a single point to the grid
            if self.positions.shape[0] == 1:
                self.positions = np.repeat(self.positions, self.times.size, axis=0)
            else:
                raise ConfigurationError("positions do not match the time grid")
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if self.velocities.shape[0] == 1:
            self.velocities = np.repeat(self.velocities, self.times.size, axis=0)
        if self.mass <= 0:
            raise ConfigurationError("particle mass must be positive")

    @property
    def z0(self):
        """Time component of the worldline; tau = t exactly in this gauge."""
        return self.times

    @property
    def ncomp(self):
        return self.positions.shape[1]

    def is_timelike(self):
        """dz^0/dtau = 1 > 0 always; spatial speed must stay below 1."""
        return bool(np.all(np.sum(self.velocities**2, axis=1) < 1.0))

    def index_of(self, tau, tol=1e-9):
        dt = self.times[1] - self.times[0] if self.times.size > 1 else 1.0
        i = int(round((tau - self.times[0]) / dt))
        if i < 0 or i >= self.times.size or abs(self.times[i] - tau) > tol * max(dt, 1.0):
            raise ConfigurationError(f"tau = {tau} is not on the worldline grid")
        return i

    def to_proper_time(self):
        """Post-hoc reparametrization: proper time tau_p(t) = int sqrt(1-v^2).

        Only defined for timelike worldlines; returns (tau_p, positions).
        """
        v2 = np.sum(self.velocities**2, axis=1)
        if np.any(v2 >= 1.0):
            raise ConfigurationError("proper-time reparametrization needs a timelike worldline")
        gammainv = np.sqrt(1.0 - v2)
        dt = np.diff(self.times)
        tau_p = np.concatenate([[0.0], np.cumsum(0.5 * dt * (gammainv[1:] + gammainv[:-1]))])
        return tau_p, self.positions.copy()


def static_worldline(particle_id, times, position, mass=1.0, charge=1.0):
    times = np.asarray(times, dtype=float)
    pos = np.atleast_1d(np.asarray(position, dtype=float))
    z = np.repeat(pos[None, :], times.size, axis=0)
    v = np.zeros_like(z)
    return Worldline(particle_id, times, z, v, mass, charge)


class CurrentFunctional:
    """Base class: how a particle couples to the field.

    Concrete couplings provide the mode projection of the current and the
    variational rule delta j / delta z used to project forces.  Couplings
    are linear in the field by construction; nonlinearity lives in the
    dependence on the particle coordinates.
    """

    kind = "custom"

    def mode_current(self, worldline: Worldline, modes: ModeSet, alpha: int, t: float):
        raise CouplingError(f"{self.kind} coupling does not define a mode current")

    def variational_weights(self, worldline: Worldline, modes: ModeSet, tau: float):
        """delta f_alpha / delta(dynamical coordinate) at one instant.

        Returns an array (n_modes, n_dof) so that the projected force is
        eta = weights^T xi(t).
        """
        raise CouplingError(f"{self.kind} coupling has no variational rule")


class DipoleCoupling(CurrentFunctional):
    """Pointlike internal oscillator: j(x,t) = e q(t) delta(x - x0).

    The dynamical coordinate is the internal amplitude q; the projected
    force on q is e * chi(x0, t).
    """

    kind = "dipole-QBM"

    def __init__(self, charge, position):
        self.charge = float(charge)
        self.position = np.atleast_1d(np.asarray(position, dtype=float))

    def mode_current(self, worldline, modes, alpha, t):
        i = worldline.index_of(t)
        if worldline.amplitude is None:
            raise CouplingError("dipole coupling needs a worldline with an amplitude")
        u = modes.mode_functions(self.position)[alpha]
        return float(self.charge * worldline.amplitude[i] * modes.norm * u)

    def variational_weights(self, worldline, modes, tau):
        u = modes.mode_functions(self.position)
        return (self.charge * modes.norm * u)[:, None]


class MonopoleCoupling(CurrentFunctional):
    """Point charge: j(x,t) = e delta^(d_s)(x - z(t)).

    The force projection involves the field gradient on the worldline:
    eta_i(tau) = e * d chi/dx_i at x = z(tau).
    """

    kind = "monopole-point"

    def __init__(self, charge):
        self.charge = float(charge)

    def mode_current(self, worldline, modes, alpha, t):
        i = worldline.index_of(t)
        u = modes.mode_functions(worldline.positions[i])[alpha]
        return float(self.charge * modes.norm * u)

    def variational_weights(self, worldline, modes, tau):
        i = worldline.index_of(tau)
        grad = modes.mode_gradients(worldline.positions[i])
        return self.charge * modes.norm * grad


def mode_current(trajectories, coupling: CurrentFunctional, modes: ModeSet, alpha: int,
                 t: float):
    """Total mode current f_alpha(t) = (2/L)^(d_s/2) int dx j(x,t) u_alpha(x).

    Sums the contribution of every worldline in `trajectories`.
    """
    if np.isscalar(alpha):
        if alpha < 0 or alpha >= len(modes):
            raise ConfigurationError("mode index out of range")
    if isinstance(trajectories, Worldline):
        trajectories = [trajectories]
    couplings = coupling if isinstance(coupling, (list, tuple)) else [coupling] * len(trajectories)
    total = 0.0
    for wl, cp in zip(trajectories, couplings):
        total += cp.mode_current(wl, modes, alpha, t)
    return total
