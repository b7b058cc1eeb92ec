"""Deterministic parallel ensembles of Langevin runs.

Realizations are grouped into fixed blocks (by realization index).  Each
block is reduced internally in index order and the per-block partials are
combined in block order afterwards, so the result is a pure function of
(configuration, seed) regardless of the worker-thread count.  The dipole
model has a fully vectorized fast path built on the exact rank-2 noise
factorization; generic systems fall back to per-realization integration.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DipoleModel, integrate_dipole, integrate_langevin
from .errors import ConfigurationError
from .modes import FieldState, ModeSet, coth_half
from .noise import mode_factors, sample_noise
from .worldline import Worldline


def _blocks(n_real, block_size):
    return [(s, min(s + block_size, n_real)) for s in range(0, n_real, block_size)]


def dipole_noise_block(modes: ModeSet, state: FieldState, times, position,
                       seed, start, stop):
    """chi(x0, t) histories for realizations [start, stop), shape (N, B).

    Reproduces sample_noise + stochastic_field_history draw for draw: each
    realization consumes one flat standard-normal vector from its
    (seed, index) stream in mode order.
    """
    times = np.asarray(times, dtype=float)
    pol = np.array([m.polarization for m in modes.modes])
    sel = pol == 1
    om = modes.omegas[sel]
    nk = om.size
    s_k = np.sqrt(state.hbar * coth_half(om, state.beta, state.hbar) / (2.0 * om))
    u = modes.mode_functions(np.atleast_1d(position))
    u1, u2 = u[sel], u[~sel]
    Cmat = (modes.norm * s_k)[:, None] * np.cos(np.outer(om, times))
    Smat = (modes.norm * s_k)[:, None] * np.sin(np.outer(om, times))
    B = stop - start
    H1 = np.empty((B, nk))
    H2 = np.empty((B, nk))
    for r in range(B):
        g = np.random.Generator(np.random.Philox(key=np.array(
            [seed & 0xFFFFFFFFFFFFFFFF, (start + r) & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64))).standard_normal(4 * nk)
        g = g.reshape(nk, 4)
        H1[r] = g[:, 0] * u1 + g[:, 2] * u2
        H2[r] = g[:, 1] * u1 + g[:, 3] * u2
    return (H1 @ Cmat + H2 @ Smat).T


@dataclass
class DipoleEnsembleResult:
    times: np.ndarray
    n_real: int
    mean: np.ndarray
    var: np.ndarray
    cov_lags: dict
    probe_omegas: np.ndarray
    probe_Q: np.ndarray        # (n_real, n_probes) complex window transforms
    window: slice
    sample_trajectories: np.ndarray  # (n_saved, N) first few realizations


def run_dipole_ensemble(model: DipoleModel, modes: ModeSet, state: FieldState,
                        times, n_real, seed, threads=1, block_size=64,
                        probe_omegas=(), window=None, lags=(1, 2, 4),
                        save_trajectories=0, zero_noise=False):
    """Vectorized ensemble of dipole Langevin runs.

    Statistics (mean, variance, lag covariances) are accumulated over the
    full grid; windowed probe transforms Q(w) = dt sum_window q e^{iwt}
    are collected per realization for spectral comparisons.
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    dt = times[1] - times[0]
    if window is None:
        window = slice(0, n)
    if any(lag < 1 for lag in lags):
        raise ConfigurationError("covariance lags must be >= 1")
    probe_omegas = np.asarray(probe_omegas, dtype=float)
    wt = times[window]
    phases = np.exp(1j * np.outer(probe_omegas, wt)) * dt  # (n_probes, n_win)
    blocks = _blocks(n_real, block_size)
    sum1 = np.zeros((len(blocks), n))
    sum2 = np.zeros((len(blocks), n))
    sum_lag = {lag: np.zeros((len(blocks), n - lag)) for lag in lags}
    probe_Q = np.zeros((n_real, probe_omegas.size), dtype=complex)
    saved = np.zeros((save_trajectories, n))

    def work(bi):
        start, stop = blocks[bi]
        if zero_noise or model.charge == 0.0:
            chi = np.zeros((n, stop - start))
        else:
            chi = dipole_noise_block(modes, state, times, model.position, seed,
                                     start, stop)
        q, _ = integrate_dipole(model, times, forcing=chi)
        sum1[bi] = q.sum(axis=1)
        sum2[bi] = (q * q).sum(axis=1)
        for lag in lags:
            sum_lag[lag][bi] = (q[:-lag] * q[lag:]).sum(axis=1)
        if probe_omegas.size:
            probe_Q[start:stop] = (phases @ q[window]).T
        if start < save_trajectories:
            upto = min(stop, save_trajectories)
            saved[start:upto] = q[:, :upto - start].T
        return bi

    if threads <= 1:
        for bi in range(len(blocks)):
            work(bi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(len(blocks))))
    # combine partials in fixed block order
    total1 = np.zeros(n)
    total2 = np.zeros(n)
    total_lag = {lag: np.zeros(n - lag) for lag in lags}
    for bi in range(len(blocks)):
        total1 += sum1[bi]
        total2 += sum2[bi]
        for lag in lags:
            total_lag[lag] += sum_lag[lag][bi]
    mean = total1 / n_real
    var = total2 / n_real - mean**2
    cov = {lag: total_lag[lag] / n_real - mean[:-lag] * mean[lag:] for lag in lags}
    return DipoleEnsembleResult(times, n_real, mean, var, cov, probe_omegas,
                                probe_Q, window, saved)


@dataclass
class GenericEnsembleResult:
    times: np.ndarray
    n_real: int
    mean: list                 # per particle: (N, n_dof)
    var: list
    cross_equal_time: dict     # (i, j) -> (N,) mean of z_i(t) z_j(t), first dof
    trajectories: list         # per saved realization: list of Worldline


def run_generic_ensemble(models, modes: ModeSet, state: FieldState, times,
                         n_real, seed, dimension="1+1", threads=1,
                         block_size=16, save_trajectories=0, zero_noise=False,
                         tol_sc=1e-10):
    """Per-realization ensemble for arbitrary model sets.

    Slower than the dipole fast path but fully general (multi-particle,
    monopole couplings).  Same deterministic block reduction.
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    facs = mode_factors(modes, state, times)
    blocks = _blocks(n_real, block_size)
    dof = [1 if isinstance(m, DipoleModel) else m.position.size for m in models]
    sum1 = [np.zeros((len(blocks), n, d)) for d in dof]
    sum2 = [np.zeros((len(blocks), n, d)) for d in dof]
    pairs = [(i, j) for i in range(len(models)) for j in range(i + 1, len(models))]
    cross = {p: np.zeros((len(blocks), n)) for p in pairs}
    kept = {}

    def coord(wl: Worldline):
        if wl.amplitude is not None:
            return wl.amplitude[:, None]
        return wl.positions

    def work(bi):
        start, stop = blocks[bi]
        for idx in range(start, stop):
            real = None if zero_noise else sample_noise(facs, seed, idx, modes, times)
            wls = integrate_langevin(models, times, real, modes, dimension,
                                     tol_sc=tol_sc)
            for p, wl in enumerate(wls):
                c = coord(wl)
                sum1[p][bi] += c
                sum2[p][bi] += c * c
            for (i, j) in pairs:
                cross[(i, j)][bi] += coord(wls[i])[:, 0] * coord(wls[j])[:, 0]
            if idx < save_trajectories:
                kept[idx] = wls
        return bi

    if threads <= 1:
        for bi in range(len(blocks)):
            work(bi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(len(blocks))))
    mean, var = [], []
    for p in range(len(models)):
        t1 = np.zeros((n, dof[p]))
        t2 = np.zeros((n, dof[p]))
        for bi in range(len(blocks)):
            t1 += sum1[p][bi]
            t2 += sum2[p][bi]
        m = t1 / n_real
        mean.append(m)
        var.append(t2 / n_real - m * m)
    crossm = {}
    for p in pairs:
        tot = np.zeros(n)
        for bi in range(len(blocks)):
            tot += cross[p][bi]
        crossm[p] = tot / n_real - mean[p[0]][:, 0] * mean[p[1]][:, 0]
    trajs = [kept[i] for i in sorted(kept)]
    return GenericEnsembleResult(times, n_real, mean, var, crossm, trajs)
