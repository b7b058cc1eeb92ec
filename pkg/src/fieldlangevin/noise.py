"""Colored Gaussian noise: covariance factorization and sampling.

Per-mode noises xi_alpha(t) are Gaussian with covariance hbar*nu_alpha.
Sampling is counter-based: realization `index` under global `seed` draws
from an independent Philox stream keyed by (seed, index), so ensembles
are deterministic and order-independent.  The sampled noises assemble
into the stochastic field chi(x) = (2/L)^(d_s/2) sum_alpha xi_alpha(t)
u_alpha(x), whose autocorrelation is hbar * G_H by construction.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, KernelError
from .kernels import KernelGrid
from .modes import FieldState, ModeSet, coth_half
from .worldline import CurrentFunctional, Worldline

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CovarianceFactor:
    """Factor F with F F^T equal to the (repaired) covariance hbar*nu.

    `clipped` records eigenvalues that were clipped to zero during the
    positive-semidefinite repair; clipping is logged, never silent.
    """

    times: np.ndarray
    factor: np.ndarray          # (N, r) with r = numerical rank
    covariance: np.ndarray      # the repaired covariance F F^T reproduces
    clipped: np.ndarray
    kind: str = "spectral"

    def __post_init__(self):
        for name in ("times", "factor", "covariance", "clipped"):
            arr = np.asarray(getattr(self, name))
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)

    @property
    def rank(self):
        return self.factor.shape[1]

    def reconstruction_error(self):
        return float(np.max(np.abs(self.factor @ self.factor.T - self.covariance)))


def build_covariance(nu: KernelGrid, hbar=1.0, eps_psd=1e-10, eps_fact=1e-10):
    """Factor the noise covariance C = hbar * nu.

    Tries a Cholesky factorization first; thermal covariances are often
    numerically rank deficient (each mode contributes rank 2), in which
    case a spectral factorization is used.  Eigenvalues in
    [-eps_psd*lmax, 0) are clipped to zero and logged; anything more
    negative signals a kernel-construction bug and raises.
    """
    if nu.kind != "nu":
        raise ConfigurationError("covariance factorization expects a nu-kind kernel")
    C = hbar * nu.values
    sym_tol = 1e-12 * max(1.0, float(np.abs(C).max()))
    if not np.allclose(C, C.T, rtol=0, atol=sym_tol):
        raise KernelError("noise covariance must be symmetric")
    C = 0.5 * (C + C.T)
    try:
        L = np.linalg.cholesky(C)
        factor = L
        clipped = np.empty(0)
        kind = "cholesky"
        cov = C
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(C)
        lmax = max(float(w[-1]), 0.0)
        if w[0] < -eps_psd * lmax:
            raise KernelError(
                f" indefinite covariance: min eigenvalue {w[0]:.3e} "
                f"below -eps_psd*lmax = {-eps_psd * lmax:.3e}; "
                "this indicates a kernel-construction bug"
            )
        clipped = w[w < 0]
        if clipped.size:
            log.info("covariance repair: clipped %d eigenvalues in [%.3e, %.3e)",
                     clipped.size, float(clipped.min()), 0.0)
        w = np.where(w < 0, 0.0, w)
        keep = w > eps_fact * max(lmax, 1e-300)
        factor = V[:, keep] * np.sqrt(w[keep])
        cov = (V * w) @ V.T
        kind = "spectral"
    fac = CovarianceFactor(nu.times, factor, cov, clipped, kind)
    err = fac.reconstruction_error()
    scale = max(float(np.abs(cov).max()), 1e-300)
    if err > max(eps_fact * scale, 1e3 * np.finfo(float).eps * scale * len(nu)):
        raise KernelError(f"factorization failed to reproduce covariance (max err {err:.3e})")
    return fac


def mode_factors(modes: ModeSet, state: FieldState, times):
    """Exact rank-2 covariance factors for every thermal mode.

    The stationary noise of one oscillator mode is a random-phase
    cosine: xi(t) = s * (g1 cos wt + g2 sin wt) with
    s = sqrt(hbar*coth(hbar beta w/2)/(2w)) reproduces hbar*nu exactly.
    Returns a list of (N, 2) factors in mode order.
    """
    if state.kind != "thermal":
        raise ConfigurationError("exact rank-2 factors are thermal-only; build nu "
                                 "from the bogolubov module for squeezed states")
    times = np.asarray(times, dtype=float)
    out = []
    for m in modes.modes:
        s = np.sqrt(state.hbar * float(coth_half(m.omega, state.beta, state.hbar))
                    / (2.0 * m.omega))
        F = np.column_stack([s * np.cos(m.omega * times), s * np.sin(m.omega * times)])
        cov = F @ F.T
        out.append(CovarianceFactor(times, F, cov, np.empty(0), "stationary-rank2"))
    return out


@dataclass(frozen=True)
class NoiseRealization:
    """One sampled realization of all per-mode noises on a common grid."""

    times: np.ndarray
    xi: np.ndarray             # (n_modes, N)
    seed_path: tuple           # (seed, index)
    modes: ModeSet = None

    def __post_init__(self):
        for name in ("times", "xi"):
            arr = np.asarray(getattr(self, name))
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)


def _stream(seed, index):
    return np.random.Generator(np.random.Philox(key=np.array(
        [seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)))


def standard_draws(factors, seed, index):
    """The flat standard-normal vector a realization consumes, one draw
    call per realization so block and scalar paths agree bit for bit."""
    total = sum(f.rank for f in factors)
    return _stream(seed, index).standard_normal(total)


def sample_noise(factors, seed, index, modes: ModeSet = None, times=None):
    """Draw one realization: xi_alpha = F_alpha g with g standard normal.

    `factors` is a CovarianceFactor or a list of them (one per mode).
    Identical (seed, index) always reproduces the identical realization;
    the gaussian draws are consumed in fixed mode order from the
    realization's own counter-based stream.
    """
    single = isinstance(factors, CovarianceFactor)
    if single:
        factors = [factors]
    g = standard_draws(factors, seed, index)
    xs = []
    off = 0
    for fac in factors:
        xs.append(fac.factor @ g[off:off + fac.rank])
        off += fac.rank
    t = factors[0].times if times is None else np.asarray(times, dtype=float)
    return NoiseRealization(t, np.vstack(xs), (int(seed), int(index)), modes)


def sample_noise_block(factors, seed, indices, modes: ModeSet = None):
    """Vectorized ensemble sampling for a block of realization indices.

    Returns an array (n_real, n_modes, N).  Each realization still uses
    its own (seed, index) stream, so the result is independent of how
    realizations are grouped into blocks.
    """
    single = isinstance(factors, CovarianceFactor)
    if single:
        factors = [factors]
    n = factors[0].times.size
    out = np.empty((len(indices), len(factors), n))
    for r, idx in enumerate(indices):
        g = standard_draws(factors, seed, idx)
        off = 0
        for a, fac in enumerate(factors):
            out[r, a] = fac.factor @ g[off:off + fac.rank]
            off += fac.rank
    return out


def stochastic_field_at(realization: NoiseRealization, modes: ModeSet, x):
    """chi(x) = (2/L)^(d_s/2) sum_alpha xi_alpha(t) u_alpha(x).

    The time component of x must lie exactly on the realization grid:
    interpolation is refused to keep the xi -> chi map exact.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, xs = x[0], x[1:]
    dt = realization.times[1] - realization.times[0]
    i = int(round((t - realization.times[0]) / dt))
    if i < 0 or i >= realization.times.size or abs(realization.times[i] - t) > 1e-9 * max(dt, 1.0):
        raise ConfigurationError("time off the realization grid; interpolation refused")
    u = modes.mode_functions(xs)
    return float(modes.norm * np.dot(realization.xi[:, i], u))


def stochastic_field_history(realization: NoiseRealization, modes: ModeSet, xs):
    """chi(x, t_k) for all grid times at a fixed spatial point (vectorized)."""
    u = modes.mode_functions(np.atleast_1d(np.asarray(xs, dtype=float)))
    return modes.norm * (u @ realization.xi)


def project_force(realization: NoiseRealization, traj: Worldline,
                  coupling: CurrentFunctional, tau, modes: ModeSet = None):
    """Stochastic force on the particle's dynamical coordinates at tau.

    eta = (delta f_alpha/delta z)^T xi(tau); for the dipole this is
    e*chi(x0,tau), for the monopole e*grad chi on the worldline.
    """
    if modes is None:
        modes = realization.modes
    if modes is None:
        raise ConfigurationError("project_force needs the ModeSet of the realization")
    i = traj.index_of(tau)
    # variational weights already carry the (2/L)^(d_s/2) mode normalization
    w = coupling.variational_weights(traj, modes, tau)  # (n_modes, n_dof)
    return w.T @ realization.xi[:, i]


def project_force_history(realization: NoiseRealization, traj: Worldline,
                          coupling: CurrentFunctional, modes: ModeSet = None):
    """eta(t_k) for every grid time; (N, n_dof)."""
    if modes is None:
        modes = realization.modes
    n = realization.times.size
    out = np.empty((n, coupling.variational_weights(traj, modes, realization.times[0]).shape[1]))
    moving = np.ptp(traj.positions, axis=0).max() > 0 if traj.positions.size else False
    if not moving:
        w = coupling.variational_weights(traj, modes, realization.times[0])
        out[:] = (w.T @ realization.xi).T
        return out
    for k in range(n):
        out[k] = project_force(realization, traj, coupling, realization.times[k], modes)
    return out
