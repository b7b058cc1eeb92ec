"""Two-time kernels of the field environment.

Everything here is built from the per-mode oscillator influence kernel

    zeta(t,t') = (1/2w) [coth(hbar*beta*w/2) cos w(t-t') - i sin w(t-t')]

and from the worldline radiation kernel A documented in
:mod:`fieldlangevin.conventions`.  Kernel matrices are immutable after
construction; mode sums run in a fixed order so repeated builds are
bit-identical.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .conventions import spatial_dim
from .errors import ConfigurationError, KernelError
from .modes import FieldState, ModeSet, coth_half

KERNEL_KINDS = ("nu", "mu", "zeta", "hadamard", "retarded", "causal", "gamma", "fdrK")


@dataclass(frozen=True)
class KernelGrid:
    """A discretized two-time kernel on a uniform grid.

    values[i, j] is the kernel at (t_i, t_j).  `meta` records the physical
    inputs (frequency, beta, cutoffs, ...) used to build the matrix.
    """

    times: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if v.shape != (t.size, t.size):
            raise KernelError("kernel matrix must be square on the time grid")
        if t.size >= 2:
            dts = np.diff(t)
            if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
                raise KernelError("kernel grid must be uniform")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def __len__(self):
        return self.times.size


def thermal_influence_kernel(omega, beta, t, t_prime, hbar=1.0):
    """Influence kernel of one thermal oscillator mode (complex).

    Real part is the noise kernel nu, imaginary part the dissipation
    kernel mu.  Vectorized over any broadcastable combination of
    arguments; beta = inf uses the exact coth -> 1 branch.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("mode frequency must be positive")
    if not (np.isinf(beta) or beta > 0):
        raise ValueError("beta must be positive (inf allowed)")
    dt = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
    c = coth_half(omega, beta, hbar)
    return (c * np.cos(omega * dt) - 1j * np.sin(omega * dt)) / (2.0 * omega)


def nu_kernel(omega, beta, dt, hbar=1.0):
    """Noise kernel (1/2w) coth(hbar beta w/2) cos(w dt)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("mode frequency must be positive")
    return coth_half(omega, beta, hbar) * np.cos(omega * dt) / (2.0 * omega)


def mu_kernel(omega, dt):
    """Dissipation kernel -(1/2w) sin(w dt); independent of the state."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("mode frequency must be positive")
    return -np.sin(omega * dt) / (2.0 * omega)


def nu_grid(omega, beta, times, hbar=1.0):
    times = np.asarray(times, dtype=float)
    lag = times[:, None] - times[None, :]
    vals = nu_kernel(omega, beta, lag, hbar)
    return KernelGrid(times, vals, "nu", {"omega": float(omega), "beta": beta, "hbar": hbar})


def mu_grid(omega, times):
    times = np.asarray(times, dtype=float)
    lag = times[:, None] - times[None, :]
    return KernelGrid(times, mu_kernel(omega, lag), "mu", {"omega": float(omega)})


def bath_nu_grid(modes: ModeSet, state: FieldState, times, weights=None):
    """Mode-summed noise kernel sum_alpha w_alpha nu_alpha(t,t').

    Default weight 1 per mode.  Used for aggregate kernel export; sampling
    uses the per-mode grids.
    """
    times = np.asarray(times, dtype=float)
    lag = times[:, None] - times[None, :]
    omegas = np.array([m.omega for m in modes.modes])
    if weights is None:
        weights = np.ones_like(omegas)
    vals = np.zeros_like(lag)
    for w, om in zip(weights, omegas):  # fixed order: deterministic sums
        vals += w * nu_kernel(om, state.beta, lag, state.hbar)
    return KernelGrid(times, vals, "nu", {"beta": state.beta, "hbar": state.hbar,
                                          "n_modes": len(modes)})


def bath_mu_grid(modes: ModeSet, times, weights=None):
    times = np.asarray(times, dtype=float)
    lag = times[:, None] - times[None, :]
    omegas = np.array([m.omega for m in modes.modes])
    if weights is None:
        weights = np.ones_like(omegas)
    vals = np.zeros_like(lag)
    for w, om in zip(weights, omegas):
        vals += w * mu_kernel(om, lag)
    return KernelGrid(times, vals, "mu", {"n_modes": len(modes)})


def _split_point(x, modes):
    """Split a spacetime point (t, x1[, x2, x3]) for the given mode set."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ds = spatial_dim(modes.dimension)
    if x.shape != (1 + ds,):
        raise ConfigurationError(
            f"spacetime point needs {1 + ds} components for {modes.dimension}"
        )
    return x[0], x[1:]


def hadamard_green(x, x_prime, modes: ModeSet, state: FieldState):
    """Hadamard (anticommutator / noise) Green's function by mode sum.

    G_H(x,x') = (2/L)^(d_s) sum_{k>0} cos(k.(x-x')) nu_k(t,t'); the thermal
    factor coth = 1 + 2 n_Bose enters through nu.  State dependent, nonzero
    at spacelike separation.
    """
    if state.kind != "thermal":
        raise ConfigurationError("hadamard_green covers thermal states; "
                                 "squeezed kernels come from the bogolubov module")
    t, xs = _split_point(x, modes)
    tp, xsp = _split_point(x_prime, modes)
    for pt in (xs, xsp):
        if np.any(pt < 0) or np.any(pt >= modes.box_size):
            raise ConfigurationError("point outside the simulation box")
    karr = modes.k_array()
    pol = np.array([m.polarization for m in modes.modes])
    sel = pol == 1  # one entry per k: cos(k.dx) already sums both polarizations
    kvecs = karr[sel]
    omegas = modes.omegas[sel]
    dx = xs - xsp
    geom = np.cos(kvecs @ dx)
    nus = nu_kernel(omegas, state.beta, t - tp, state.hbar)
    return float(modes.norm**2 * np.sum(geom * nus))


def causal_green(x, x_prime, modes: ModeSet):
    """Commutator (causal) Green's function by mode sum; state independent.

    Normalized as the radiation kernel A of :mod:`conventions`,
    A = 4 int d^(d_s)k cos(k.dx) sin(w dt)/w, discretized on the box
    lattice (positive-k half line in 1+1, positive octant times 8 in 3+1).
    Converges to pi[sgn(dt+dx) + sgn(dt-dx)] in 1+1.  The octant sin/cos
    basis makes the 3+1 sum quantitative at small |dx| only; worldline
    kernels in 3+1 use the smeared closed form instead.
    """
    t, xs = _split_point(x, modes)
    tp, xsp = _split_point(x_prime, modes)
    ds = spatial_dim(modes.dimension)
    dt = t - tp
    dxv = xs - xsp
    dk = 2 * math.pi / modes.box_size
    karr = modes.k_array()
    pol = np.array([m.polarization for m in modes.modes])
    sel = pol == 1
    kvecs = karr[sel]
    omegas = modes.omegas[sel]
    geom = np.cos(kvecs @ dxv)
    octant = 1.0 if ds == 1 else 8.0
    return float(4.0 * octant * dk**ds * np.sum(geom * np.sin(omegas * dt) / omegas))


def radiation_kernel_closed(dt, dx, dimension, sigma=None):
    """Closed-form radiation (commutator) kernel A(dt, dx).

    1+1: pi[sgn(dt+dx) + sgn(dt-dx)] with exact lightcone support.
    3+1: (8 pi^2/r)[delta(dt-r) - delta(dt+r)] with the deltas smeared by a
    Gaussian of width `sigma` (required for grid evaluation).
    """
    dt = np.asarray(dt, dtype=float)
    if dimension == "1+1":
        dx = np.asarray(dx, dtype=float)
        return math.pi * (np.sign(dt + dx) + np.sign(dt - dx))
    if dimension == "3+1":
        if sigma is None or sigma <= 0:
            raise ConfigurationError("3+1 radiation kernel needs a smearing width sigma")
        r = np.asarray(dx, dtype=float)  # interpreted as spatial distance
        r = np.where(r < sigma, sigma, r)  # regulate the 1/r at coincidence
        g = lambda u: np.exp(-0.5 * (u / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        return 8 * math.pi**2 / r * (g(dt - r) - g(dt + r))
    raise ConfigurationError(f"unsupported dimension {dimension!r}")


def retarded_green(x, x_prime, modes=None, dimension=None, sigma=None, route="closed"):
    """Retarded Green's function theta(t-t') A(t-t', x-x').

    route='closed' evaluates the exact-support closed form (preferred for
    causality-sensitive assembly); route='mode-sum' evaluates the
    truncated mode sum of `causal_green` (for convergence studies).
    State independent by construction.
    """
    if route == "mode-sum":
        if modes is None:
            raise ConfigurationError("mode-sum route requires a ModeSet")
        t, xs = _split_point(x, modes)
        tp, _ = _split_point(x_prime, modes)
        if t < tp:
            return 0.0
        return causal_green(x, x_prime, modes)
    if dimension is None:
        if modes is None:
            raise ConfigurationError("retarded_green needs a dimension or a ModeSet")
        dimension = modes.dimension
    ds = spatial_dim(dimension)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != (1 + ds,) or xp.shape != (1 + ds,):
        raise ConfigurationError("spacetime points have the wrong dimension")
    dt = x[0] - xp[0]
    if dt < 0:
        return 0.0
    if ds == 1:
        return float(radiation_kernel_closed(dt, x[1] - xp[1], dimension))
    r = float(np.linalg.norm(x[1:] - xp[1:]))
    return float(radiation_kernel_closed(dt, r, dimension, sigma=sigma))


def retarded_grid(times, positions_a, positions_b, dimension, sigma=None):
    """Retarded kernel matrix G_ret(z_a(t_i), z_b(t_j)) on a shared grid.

    positions_a/b : arrays (N, d_s) sampling two (possibly identical)
    worldlines on `times`.  Causality: rows with t_i < t_j are exactly 0.
    """
    times = np.asarray(times, dtype=float)
    pa = np.atleast_2d(np.asarray(positions_a, dtype=float))
    pb = np.atleast_2d(np.asarray(positions_b, dtype=float))
    dt = times[:, None] - times[None, :]
    if dimension == "1+1":
        dx = pa[:, 0][:, None] - pb[:, 0][None, :]
        vals = radiation_kernel_closed(dt, dx, dimension)
    else:
        if sigma is None:
            sigma = 2.0 * (times[1] - times[0])
        r = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
        vals = radiation_kernel_closed(dt, r, dimension, sigma=sigma)
    vals = np.where(dt > 0, vals, 0.0)
    return KernelGrid(times, vals, "retarded", {"dimension": dimension, "sigma": sigma})


def hadamard_grid(times, positions_a, positions_b, modes: ModeSet, state: FieldState):
    """Hadamard kernel matrix G_H(z_a(t_i), z_b(t_j)) on a shared grid."""
    times = np.asarray(times, dtype=float)
    pa = np.atleast_2d(np.asarray(positions_a, dtype=float))
    pb = np.atleast_2d(np.asarray(positions_b, dtype=float))
    karr = modes.k_array()
    pol = np.array([m.polarization for m in modes.modes])
    sel = pol == 1
    kvecs = karr[sel]
    omegas = modes.omegas[sel]
    lag = times[:, None] - times[None, :]
    c = coth_half(omegas, state.beta, state.hbar)
    vals = np.zeros_like(lag)
    for i in range(len(omegas)):  # fixed order
        geom = np.cos((pa @ kvecs[i])[:, None] - (pb @ kvecs[i])[None, :])
        vals += geom * (c[i] * np.cos(omegas[i] * lag) / (2 * omegas[i]))
    vals *= modes.norm**2
    return KernelGrid(times, vals, "hadamard",
                      {"beta": state.beta, "hbar": state.hbar, "n_modes": len(modes)})


def check_psd(grid: KernelGrid, eps_psd=1e-10):
    """Verify a nu-kind kernel is symmetric positive semidefinite.

    Returns the eigenvalues; raises KernelError if the most negative
    eigenvalue is below -eps_psd * max eigenvalue.
    """
    v = grid.values
    if not np.allclose(v, v.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(v).max()))):
        raise KernelError("nu kernel must be symmetric")
    w = np.linalg.eigvalsh(v)
    if w[0] < -eps_psd * max(w[-1], 0.0):
        raise KernelError(
            f"nu kernel indefinite: min eigenvalue {w[0]:.3e} vs max {w[-1]:.3e}"
        )
    return w
