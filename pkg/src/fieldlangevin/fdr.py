"""Fluctuation-dissipation objects on worldlines and their verification.

The dissipation matrix, the local dissipation kernel Gamma, the
state-dependent kernel K and the worldline noise matrix N follow the
normalizations documented in :mod:`fieldlangevin.conventions`; with those
choices the identity

    N(tau, tau') = int ds K(tau, s) Gamma(s, tau')

is exact in the continuum.  The discrete residual reported by
`verify_fdr` measures the ultraviolet content mismatch between the noise
matrix (a box-mode sum) and K (a matched continuum quadrature): it is
O(dtau) under grid refinement at fixed cutoff*dtau and vanishes with the
stub cell.  This module also hosts the frequency-domain response oracle
for the dipole model and the stationary quantum-Brownian-motion relation.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .conventions import (ACTION_KERNEL_FACTOR, LOCAL_DISSIPATION_1P1,
                          RADIATION_DELTA2_3P1, spatial_dim)
from .errors import ConfigurationError, KernelError
from .kernels import KernelGrid, radiation_kernel_closed
from .modes import FieldState, ModeSet, coth_half
from .worldline import Worldline

log = logging.getLogger(__name__)


def _require_timelike(worldline: Worldline):
    if not worldline.is_timelike():
        raise ConfigurationError("worldline must be timelike (|v| < 1, dz0/dtau = 1 > 0)")


def dissipation_matrix(worldlines, dimension="1+1", sigma=None):
    """Dissipation matrix: retarded kernel on trajectories, diagonal
    divergent (even) part removed.

    Diagonal blocks reduce to the odd commutator part e^2 A(z(t)-z(t'));
    off-diagonal blocks are the retarded propagation 2 e_i e_j G_ret and
    vanish identically for mutually spacelike pairs.  Zero charge gives a
    zero matrix.
    """
    if isinstance(worldlines, Worldline):
        worldlines = [worldlines]
    for wl in worldlines:
        _require_timelike(wl)
    times = worldlines[0].times
    n = times.size
    ds = spatial_dim(dimension)
    if sigma is None and dimension == "3+1":
        sigma = 2.0 * (times[1] - times[0])
    npart = len(worldlines)
    A = np.zeros((npart * n, npart * n))
    dtv = times[:, None] - times[None, :]
    for i, wi in enumerate(worldlines):
        for j, wj in enumerate(worldlines):
            blk = slice(i * n, (i + 1) * n), slice(j * n, (j + 1) * n)
            if dimension == "1+1":
                dx = wi.positions[:, 0][:, None] - wj.positions[:, 0][None, :]
                comm = radiation_kernel_closed(dtv, dx, dimension)
            else:
                r = np.linalg.norm(wi.positions[:, None, :] - wj.positions[None, :, :],
                                   axis=2)
                comm = radiation_kernel_closed(dtv, r, dimension, sigma=sigma)
            if i == j:
                A[blk] = wi.charge**2 * comm  # odd part: advanced piece subtracted
            else:
                A[blk] = (ACTION_KERNEL_FACTOR * wi.charge * wj.charge
                          * np.where(dtv > 0, comm, 0.0))
    return A


def gamma_kernel(worldline: Worldline, dimension="1+1"):
    """Local dissipation kernel Gamma = -(d/dtau) of the diagonal
    dissipation matrix, derivative on the first argument.

    1+1: exactly local, Gamma = -4*pi*e^2 delta(tau-tau'); on the grid the
    delta is (1/dtau) on the diagonal.  3+1: the kernel is the second
    derivative of a delta; it is never differentiated numerically here.
    Instead the returned grid is a scaled grid delta and its metadata
    records local_order = 2, so consumers transfer the derivatives onto
    the smooth factor by integration by parts (see `verify_fdr`).
    """
    _require_timelike(worldline)
    times = worldline.times
    n = times.size
    dt = times[1] - times[0]
    e2 = worldline.charge**2
    if dimension == "1+1":
        vals = np.zeros((n, n))
        np.fill_diagonal(vals, LOCAL_DISSIPATION_1P1 * e2 / dt)
        return KernelGrid(times, vals, "gamma",
                          {"dimension": dimension, "local_order": 0,
                           "coefficient": LOCAL_DISSIPATION_1P1 * e2})
    if dimension == "3+1":
        # distributional grid stencil of delta'': column j carries
        # (1, -2, 1)/dt^3 so that sum_s dt * vals[s, j] f(s) = f''(tau_j)
        coeff = -RADIATION_DELTA2_3P1 * e2
        vals = np.zeros((n, n))
        idx = np.arange(1, n - 1)
        vals[idx - 1, idx] += coeff / dt**3
        vals[idx, idx] += -2.0 * coeff / dt**3
        vals[idx + 1, idx] += coeff / dt**3
        zdot0 = np.ones(n)  # tau = t gauge
        return KernelGrid(times, vals, "gamma",
                          {"dimension": dimension, "local_order": 2,
                           "coefficient": coeff, "zdot0": zdot0})
    raise ConfigurationError(f"unsupported dimension {dimension!r}")


def gamma_from_dissipation(A_diag: np.ndarray, times, charge=None):
    """Numerical route: central-difference -d/dtau of a diagonal
    dissipation block.  Row integrals agree with the exact local kernel;
    used to cross-validate `gamma_kernel`.
    """
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    G = np.zeros_like(A_diag)
    G[1:-1, :] = -(A_diag[2:, :] - A_diag[:-2, :]) / (2 * dt)
    G[0, :] = -(A_diag[1, :] - A_diag[0, :]) / dt
    G[-1, :] = -(A_diag[-1, :] - A_diag[-2, :]) / dt
    return KernelGrid(times, G, "gamma", {"route": "numerical"})


def _null_coordinates(worldline: Worldline):
    """Outgoing u = t - |x| and incoming v = t + |x| along the worldline."""
    r = np.linalg.norm(worldline.positions, axis=1)
    return worldline.times - r, worldline.times + r


def _mode_lattice(kappa_cutoff, box_size):
    """Box-mode nodes covering [dk/2, kappa_eff] with a half-cell stub.

    kappa_eff = (floor(kappa_cutoff/dk) + 1) * dk, so the mode cells
    [k - dk/2, k + dk/2] tile the range up to kappa_eff - dk/2 and the
    remaining half cell [kappa_eff - dk/2, kappa_eff] is the stub that a
    matched continuum quadrature covers but the mode sum does not.
    """
    dk = 2 * math.pi / box_size
    n_k = int(math.floor(kappa_cutoff / dk))
    if n_k < 1:
        raise ConfigurationError("cutoff below the first box mode")
    kmodes = dk * np.arange(1, n_k + 1)
    kappa_eff = (n_k + 1) * dk
    return kmodes, dk, kappa_eff


def _b_weight(k, dimension):
    if dimension == "1+1":
        return 1.0 / k
    return 4 * math.pi * k


def _uv_sums(worldline, beta, hbar, nodes, weights, dimension):
    """sum_q w_q b(k_q) coth(..)[cos k du + cos k dv] as an (N, N) matrix."""
    u, v = _null_coordinates(worldline)
    du = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    cf = coth_half(nodes, beta, hbar)
    b = _b_weight(nodes, dimension)
    w = weights * b * cf
    # stationary fast path: du and dv depend only on the index lag
    if np.allclose(np.diff(u), u[1] - u[0]) and np.allclose(np.diff(v), v[1] - v[0]):
        n = u.size
        lag_u = (u[1] - u[0]) * np.arange(-(n - 1), n)
        lag_v = (v[1] - v[0]) * np.arange(-(n - 1), n)
        su = np.cos(np.outer(nodes, lag_u)).T @ w
        sv = np.cos(np.outer(nodes, lag_v)).T @ w
        i = np.arange(n)
        lag_idx = i[:, None] - i[None, :] + (n - 1)
        return su[lag_idx] + sv[lag_idx]
    out = np.zeros_like(du)
    for q in range(nodes.size):  # fixed order
        out += w[q] * (np.cos(nodes[q] * du) + np.cos(nodes[q] * dv))
    return out


def fdr_kernel_K(worldline: Worldline, state: FieldState, dimension="1+1",
                 kappa_cutoff=None, box_size=None, strict=False, gl_order=16):
    """State-dependent fluctuation-dissipation kernel K on the worldline.

    K(tau,s) = (1/2pi) int_0^cut dk b(k) coth(hbar beta k/2)
               [cos k(v(tau)-v(s)) + cos k(u(tau)-u(s))].

    Quadrature: midpoint rule on the box-mode cells (sharing the discrete
    field's ultraviolet content) plus Gauss-Legendre on the terminal half
    cell up to the snapped cutoff.
    """
    _require_timelike(worldline)
    times = worldline.times
    dt = times[1] - times[0]
    if kappa_cutoff is None or box_size is None:
        raise ConfigurationError("fdr_kernel_K needs kappa_cutoff and box_size")
    kmodes, dk, kappa_eff = _mode_lattice(kappa_cutoff, box_size)
    nyquist = math.pi / dt
    if kappa_eff > nyquist:
        msg = (f"cutoff {kappa_eff:.4g} exceeds the grid Nyquist {nyquist:.4g}; "
               "kernel features fall below grid resolution")
        if strict:
            raise ConfigurationError(msg)
        log.warning(msg)
    nodes = [kmodes]
    weights = [np.full(kmodes.size, dk)]
    xg, wg = np.polynomial.legendre.leggauss(gl_order)
    a, b = kappa_eff - dk / 2, kappa_eff
    nodes.append(0.5 * (b - a) * xg + 0.5 * (a + b))
    weights.append(0.5 * (b - a) * wg)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    vals = _uv_sums(worldline, state.beta, state.hbar, nodes, weights, dimension)
    vals = vals / (2 * math.pi)
    return KernelGrid(times, vals, "fdrK",
                      {"dimension": dimension, "beta": state.beta, "hbar": state.hbar,
                       "kappa_cutoff": kappa_eff, "box_size": box_size})


def noise_matrix(worldline: Worldline, state: FieldState, dimension="1+1",
                 kappa_cutoff=None, box_size=None):
    """Worldline noise matrix N from the box-mode Hadamard content.

    N(tau,s) = -2 e^2 sum_modes dk b(k) coth(hbar beta k/2)
               [cos k(v(tau)-v(s)) + cos k(u(tau)-u(s))];
    the overall sign follows the dissipation generator (see conventions).
    """
    _require_timelike(worldline)
    kmodes, dk, _ = _mode_lattice(kappa_cutoff, box_size)
    weights = np.full(kmodes.size, dk)
    vals = _uv_sums(worldline, state.beta, state.hbar, kmodes, weights, dimension)
    vals *= -2.0 * worldline.charge**2
    return KernelGrid(worldline.times, vals, "hadamard",
                      {"dimension": dimension, "beta": state.beta,
                       "kappa_cutoff": float(kmodes[-1]), "box_size": box_size,
                       "worldline_noise": True})


@dataclass(frozen=True)
class FdrReport:
    """Result of one fluctuation-dissipation verification run."""

    times: np.ndarray
    gamma: KernelGrid
    kernel_K: KernelGrid
    noise: KernelGrid
    reconstructed: np.ndarray
    residual: float
    beta: float
    dimension: str
    kappa_cutoff: float
    charge: float

    def summary(self):
        temp = "0" if math.isinf(self.beta) else f"{1.0 / self.beta:.6g}"
        return (f"FDR {self.dimension} T={temp}: relative L2 residual "
                f"{self.residual:.3e} at N={self.times.size}, "
                f"cutoff={self.kappa_cutoff:.6g}")


def verify_fdr(worldline: Worldline, state: FieldState, dimension="1+1",
               kappa_cutoff=None, box_size=None, strict=False):
    """Build N, K and Gamma on the worldline and measure N - int K Gamma.

    In 1+1 the local Gamma makes int K Gamma a row scaling of K; in 3+1
    the delta'' structure is applied by differentiating K twice with
    central differences after the analytic integration by parts (the
    delta itself is never differentiated numerically).
    """
    K = fdr_kernel_K(worldline, state, dimension, kappa_cutoff, box_size, strict)
    N = noise_matrix(worldline, state, dimension, kappa_cutoff, box_size)
    G = gamma_kernel(worldline, dimension)
    dt = worldline.times[1] - worldline.times[0]
    if worldline.charge == 0.0:
        recon = np.zeros_like(N.values)
        residual = 0.0
    elif dimension == "1+1":
        recon = (K.values @ G.values) * dt
        residual = float(np.linalg.norm(N.values - recon)
                         / np.linalg.norm(N.values))
    else:
        coeff = G.meta["coefficient"]
        zdot0 = G.meta["zdot0"]
        dKds = np.gradient(K.values, dt, axis=1)
        inner = dKds / zdot0[None, :]
        d2 = np.gradient(inner, dt, axis=1) / zdot0[None, :]
        recon = coeff * d2
        residual = float(np.linalg.norm(N.values - recon)
                         / np.linalg.norm(N.values))
    return FdrReport(worldline.times, G, K, N, recon, residual,
                     state.beta, dimension, K.meta["kappa_cutoff"], worldline.charge)


@dataclass(frozen=True)
class ResponseOracle:
    """Frequency-domain oracle for the dipole oscillator model.

    g(w) = 1/(w^2 + i e w - w0^2); the stationary response to the
    discrete-mode field noise has the exact correlator
    <q q>(lag) = sum_k a_k cos(w_k lag) with
    a_k = hbar (2/L)^(d_s) coth(hbar beta w_k/2)/(2 w_k) |g(w_k)|^2.
    """

    charge: float
    omega0: float
    modes: ModeSet
    state: FieldState

    def response_function(self, omega):
        omega = np.asarray(omega)  # real or complex (pole probing)
        return 1.0 / (omega**2 + 1j * self.charge * omega - self.omega0**2)

    def pole_locations(self):
        root = np.sqrt(complex(self.omega0**2 - self.charge**2 / 4.0))
        return (-0.5j * self.charge + root, -0.5j * self.charge - root)

    def mode_frequencies(self):
        pol = np.array([m.polarization for m in self.modes.modes])
        return self.modes.omegas[pol == 1]

    def field_mode_amplitudes(self):
        """Per-wavenumber amplitude of <chi chi> at a point (both
        polarizations summed)."""
        om = self.mode_frequencies()
        cf = coth_half(om, self.state.beta, self.state.hbar)
        return self.state.hbar * self.modes.norm**2 * cf / (2 * om)

    def position_mode_amplitudes(self):
        om = self.mode_frequencies()
        return self.field_mode_amplitudes() * np.abs(self.response_function(om)) ** 2

    def stationary_correlator(self, lag):
        om = self.mode_frequencies()
        a = self.position_mode_amplitudes()
        return float(np.sum(a * np.cos(om * np.asarray(lag))))

    def stationary_variance(self):
        return self.stationary_correlator(0.0)


def _window_sum(omega, times):
    """D(w) = sum_j exp(i w t_j) over a uniform grid, numerically robust."""
    n = times.size
    dt = times[1] - times[0]
    half = 0.5 * omega * dt
    num = np.sin(n * half)
    den = np.sin(half)
    phase = np.exp(1j * omega * (times[0] + 0.5 * (n - 1) * dt))
    if abs(den) < 1e-14:
        return phase * n
    return phase * num / den


def windowed_pair_expectation(omega1, omega2, amplitudes, mode_freqs, times):
    """E[Q(w1) Q(w2)] for Q(w) = dt sum_j q(t_j) e^{i w t_j} over a
    stationary Gaussian q with correlator sum_k a_k cos(w_k lag)."""
    dt = times[1] - times[0]
    total = 0.0 + 0.0j
    for a, wk in zip(amplitudes, mode_freqs):
        d1 = _window_sum(omega1 + wk, times) * _window_sum(omega2 - wk, times)
        d2 = _window_sum(omega1 - wk, times) * _window_sum(omega2 + wk, times)
        total += 0.5 * a * (d1 + d2)
    return dt**2 * total


@dataclass(frozen=True)
class CorrelatorPrediction:
    value: complex
    homogeneous_solution_dropped: bool


def analytic_symmetrized_correlator(oracle: ResponseOracle, times, omega,
                                    omega_prime=None):
    """Window-transformed symmetrized position correlator target.

    Returns E[Q(w) Q(w')] for the stationary dipole response (with
    w' = -w this is the expected windowed power E|Q(w)|^2, the quantity an
    ensemble must reproduce).  At zero coupling the response is a free
    oscillator and the dropped homogeneous solution dominates; the result
    carries a caveat flag instead of a meaningless number.
    """
    if omega_prime is None:
        omega_prime = -omega
    if oracle.charge == 0.0:
        return CorrelatorPrediction(0.0, True)
    a = oracle.position_mode_amplitudes()
    om = oracle.mode_frequencies()
    val = windowed_pair_expectation(omega, omega_prime, a, om, np.asarray(times))
    return CorrelatorPrediction(val, False)


def windowed_power_stats(oracle: ResponseOracle, times, omega):
    """(E[P], SD[P]) for the windowed power P = |Q(w)|^2 of one realization.

    Exact zero-mean Gaussian moments: with Vr = Var Re Q, Vi = Var Im Q,
    Cri = Cov, Var P = 2 Vr^2 + 2 Vi^2 + 4 Cri^2.
    """
    times = np.asarray(times)
    a = oracle.position_mode_amplitudes()
    om = oracle.mode_frequencies()
    s1 = windowed_pair_expectation(omega, -omega, a, om, times).real
    s2 = windowed_pair_expectation(omega, omega, a, om, times)
    vr = 0.5 * (s1 + s2.real)
    vi = 0.5 * (s1 - s2.real)
    cri = 0.5 * s2.imag
    var_p = 2 * vr**2 + 2 * vi**2 + 4 * cri**2
    return s1, math.sqrt(max(var_p, 0.0))


def qbm_fdr_check(density, beta, span, grid_points, hbar=1.0, k_max=None,
                  k_panels=96, gl_order=16):
    """Stationary quantum-Brownian-motion relation on a 1-D lag grid.

    With gamma(s) = int dw I(w)/w cos(ws) and nu(s) = int dw I(w)
    coth(hbar beta w/2) cos(ws), the identity
    nu(s) = int ds' K(s,s') gamma(s') holds with
    K(s,s') = int_0^kmax (k dk/pi) coth(hbar beta k/2) cos k(s-s').
    Both sides share the cutoff k_max; the residual measures the lag
    window truncation and trapezoid error.
    """
    omegas = np.asarray(density.omegas, dtype=float)
    weights = np.asarray(density.weights, dtype=float)
    if not (np.all(np.isfinite(omegas)) and np.all(np.isfinite(weights))):
        raise KernelError("spectral density is not integrable on its support")
    if k_max is None:
        k_max = float(omegas.max())
    keep = omegas <= k_max
    omegas, weights = omegas[keep], weights[keep]
    s = np.linspace(-span / 2, span / 2, grid_points)
    ds = s[1] - s[0]
    cf = coth_half(omegas, beta, hbar)
    nu = np.cos(np.outer(s, omegas)) @ (weights * cf)
    gamma = np.cos(np.outer(s, omegas)) @ (weights / omegas)
    # K by Gauss-Legendre panels in k, assembled on lags (Toeplitz)
    xg, wg = np.polynomial.legendre.leggauss(gl_order)
    edges = np.linspace(0.0, k_max, k_panels + 1)
    kq, kw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        kq.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        kw.append(0.5 * (b - a) * wg)
    kq = np.concatenate(kq)
    kw = np.concatenate(kw)
    kcf = coth_half(kq, beta, hbar)
    # K depends on the lag only: assemble on unique lags (Toeplitz)
    lags_1d = ds * np.arange(-(grid_points - 1), grid_points)
    K_lag = np.cos(np.outer(lags_1d, kq)) @ (kq * kw * kcf / math.pi)
    idx = np.arange(grid_points)
    K = K_lag[idx[:, None] - idx[None, :] + grid_points - 1]
    w = np.full(grid_points, ds)
    w[0] *= 0.5
    w[-1] *= 0.5
    nu_hat = K @ (w * gamma)
    residual = float(np.linalg.norm(nu - nu_hat) / np.linalg.norm(nu))
    return residual, {"s": s, "nu": nu, "nu_hat": nu_hat, "gamma": gamma,
                      "k_max": k_max, "beta": beta}
