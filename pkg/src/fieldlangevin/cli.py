"""Command-line interface: scenario runner and validation harness.

Subcommands
    run             semiclassical solve -> ensemble -> statistics files
    verify          fdr | qbm-fdr | noise-cov | bogolubov
    export-kernels  write kernel matrices as CSV

Exit codes: 0 success, 1 usage/configuration error, 2 validation failure
(residuals or statistical bands out of tolerance), 3 numerical failure.
"""

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bogolubov import OscillatorSchedule, SpectralDensity, evolve_bogolubov
from .config import ScenarioConfig, canonical_json, load_config
from .dynamics import DipoleModel, MonopoleModel, semiclassical_trajectory
from .ensemble import run_dipole_ensemble, run_generic_ensemble
from .errors import (ConditioningError, ConfigurationError, ConvergenceError,
                     CouplingError, KernelError, StiffnessError)
from .fdr import qbm_fdr_check, verify_fdr
from .io import (RunManifest, StageTimer, kernel_to_csv, statistics_to_csv,
                 trajectories_to_csv)
from .kernels import bath_mu_grid, bath_nu_grid, hadamard_grid, retarded_grid
from .modes import FieldState, ModeSet
from .noise import build_covariance, sample_noise
from .kernels import nu_grid
from .worldline import Worldline, static_worldline

_NUMERICAL = (KernelError, StiffnessError, ConvergenceError, ConditioningError,
              CouplingError)


def _grid(cfg: ScenarioConfig):
    return np.linspace(cfg.grid.t_start, cfg.grid.t_end, cfg.grid.points)


def _modes(cfg: ScenarioConfig):
    return ModeSet.box(cfg.field.box_size, cfg.field.uv_cutoff,
                       cfg.field.mass, cfg.dimension)


def _state(cfg: ScenarioConfig):
    s = cfg.field.state
    return FieldState(s.kind, s.beta, s.squeeze_r, s.squeeze_phi, cfg.field.hbar)


def _models(cfg: ScenarioConfig):
    out = []
    for p in cfg.particles:
        if p.kind == "dipole":
            out.append(DipoleModel(p.charge, p.frequency, p.position, p.q0,
                                   p.qdot0, p.mass))
        else:
            out.append(MonopoleModel(p.charge, p.position, p.velocity, p.mass,
                                     p.external_force))
    return out


def _config_hash(cfg, seed):
    payload = canonical_json(cfg) + f"|seed={seed}"
    return hashlib.sha256(payload.encode()).hexdigest()


def run_scenario(cfg: ScenarioConfig, seed, threads, out_dir):
    """Execute a scenario and write trajectory/statistics/manifest files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(_config_hash(cfg, seed), __version__, seed)
    timer = StageTimer(manifest)
    times = _grid(cfg)
    modes = _modes(cfg)
    state = _state(cfg)
    models = _models(cfg)
    m_ens = cfg.ensemble.size
    zero_noise = cfg.ensemble.zero_noise
    with timer.stage("semiclassical"):
        mean_wls = semiclassical_trajectory(models, times, cfg.dimension,
                                            tol_sc=cfg.tolerances.tol_sc)
    save = m_ens if (cfg.output.trajectories or m_ens == 1) else 0
    save = min(save, 8)
    with timer.stage("ensemble"):
        if len(models) == 1 and isinstance(models[0], DipoleModel):
            burn = cfg.ensemble.burn_in
            w0 = int(np.searchsorted(times, cfg.grid.t_start + burn))
            res = run_dipole_ensemble(
                models[0], modes, state, times, m_ens, seed, threads=threads,
                block_size=cfg.ensemble.block_size,
                probe_omegas=cfg.ensemble.probe_frequencies,
                window=slice(w0, times.size), save_trajectories=save,
                zero_noise=zero_noise)
            mean, var, cov = res.mean, res.var, res.cov_lags
            saved_wls = []
            for r in range(save):
                wl = static_worldline(0, times, models[0].position,
                                      models[0].mass, models[0].charge)
                wl.amplitude = res.sample_trajectories[r]
                wl.amplitude_rate = np.gradient(res.sample_trajectories[r], times)
                saved_wls.append([wl])
            probe = res
        else:
            res = run_generic_ensemble(models, modes, state, times, m_ens, seed,
                                       cfg.dimension, threads=threads,
                                       block_size=min(cfg.ensemble.block_size, 16),
                                       save_trajectories=save,
                                       zero_noise=zero_noise,
                                       tol_sc=cfg.tolerances.tol_sc)
            mean, var = res.mean[0][:, 0], res.var[0][:, 0]
            cov = {}
            saved_wls = res.trajectories
            probe = None
    with timer.stage("write"):
        stats_path = out_dir / "statistics.csv"
        statistics_to_csv(times, mean, var, cov, stats_path)
        manifest.add_output(stats_path)
        if saved_wls:
            traj_path = out_dir / "trajectories.csv"
            trajectories_to_csv(saved_wls, traj_path)
            manifest.add_output(traj_path)
        if probe is not None and len(probe.probe_omegas):
            spec_path = out_dir / "spectra.csv"
            power = np.mean(np.abs(probe.probe_Q) ** 2, axis=0)
            lines = ["omega,mean_power"]
            for w, p in zip(probe.probe_omegas, power):
                lines.append(f"{w!r},{p!r}")
            spec_path.write_text("\n".join(lines) + "\n")
            manifest.add_output(spec_path)
    timer.finish()
    manifest.write(out_dir / "manifest.json")
    return manifest


def _verify_fdr(cfg, out_dir, strict):
    times = _grid(cfg)
    dt = times[1] - times[0]
    kc = cfg.fdr.kappa_cutoff or 0.5 * math.pi / dt
    p = cfg.particles[0]
    wl = static_worldline(0, times, p.position, p.mass, p.charge)
    report = verify_fdr(wl, _state(cfg), cfg.dimension, kappa_cutoff=kc,
                        box_size=cfg.field.box_size, strict=strict)
    out_dir.mkdir(parents=True, exist_ok=True)
    kernel_to_csv(report.gamma, out_dir / "gamma.csv")
    kernel_to_csv(report.kernel_K, out_dir / "fdrK.csv")
    kernel_to_csv(report.noise, out_dir / "noise_matrix.csv")
    np.savetxt(out_dir / "noise_reconstructed.csv", report.reconstructed,
               delimiter=",")
    (out_dir / "fdr_report.json").write_text(json.dumps({
        "dimension": report.dimension,
        "beta": None if math.isinf(report.beta) else report.beta,
        "grid_points": int(report.times.size),
        "dt": float(report.times[1] - report.times[0]),
        "kappa_cutoff": report.kappa_cutoff,
        "charge": report.charge,
        "residual": report.residual,
        "tolerance": cfg.fdr.residual_tolerance,
    }, indent=2, sort_keys=True) + "\n")
    print(report.summary())
    return 0 if report.residual < cfg.fdr.residual_tolerance else 2


def _verify_qbm(cfg, out_dir):
    q = cfg.qbm
    density = SpectralDensity.ohmic(q.coupling, q.cutoff, omega_max=q.k_max)
    residual, data = qbm_fdr_check(density, cfg.field.state.beta, q.span,
                                   q.points, cfg.field.hbar, k_max=q.k_max)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "qbm_fdr_report.json").write_text(json.dumps({
        "residual": residual, "k_max": data["k_max"],
        "beta": None if math.isinf(cfg.field.state.beta) else cfg.field.state.beta,
        "tolerance": q.residual_tolerance}, indent=2, sort_keys=True) + "\n")
    print(f"QBM FDR residual {residual:.3e} (tolerance {q.residual_tolerance})")
    return 0 if residual < q.residual_tolerance else 2


def _verify_noise_cov(cfg, out_dir, seed):
    nc = cfg.noise_check
    m_ens = nc.realizations
    if m_ens < nc.min_realizations:
        print(f"noise-cov: {m_ens} realizations is below the CLT validity "
              f"threshold {nc.min_realizations}; the gaussian fourth-moment "
              "bands are not trustworthy at this ensemble size")
        return 2
    times = _grid(cfg)
    dk = 2 * math.pi / cfg.field.box_size
    state = _state(cfg)
    hbar = state.hbar
    worst = []
    n_exceed = 0
    n_total = 0
    for j in range(1, nc.modes + 1):
        omega = math.sqrt((j * dk) ** 2 + cfg.field.mass**2)
        grid = nu_grid(omega, state.beta, times[:nc.grid_points], hbar)
        fac = build_covariance(grid, hbar, cfg.tolerances.eps_psd)
        g = np.empty((fac.rank, m_ens))
        for r in range(m_ens):
            rng = np.random.Generator(np.random.Philox(
                key=np.array([seed, (j << 32) + r], dtype=np.uint64)))
            g[:, r] = rng.standard_normal(fac.rank)
        X = fac.factor @ g
        C_hat = (X @ X.T) / m_ens
        C = hbar * grid.values
        se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / m_ens)
        dev = np.abs(C_hat - C) / se
        n_exceed += int(np.sum(dev > 3.0))
        n_total += dev.size
        worst.append(float(dev.max()))
    frac = n_exceed / n_total
    print(f"noise-cov: {n_exceed}/{n_total} entries beyond 3 standard errors "
          f"({100 * frac:.3f}%), worst deviation {max(worst):.2f} se")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "noise_cov_report.json").write_text(json.dumps({
        "exceed_fraction": frac, "allowed": nc.max_exceed_fraction,
        "worst_se": max(worst), "realizations": m_ens,
        "modes": nc.modes}, indent=2, sort_keys=True) + "\n")
    return 0 if frac <= nc.max_exceed_fraction else 2


def _verify_bogolubov(cfg, out_dir):
    omega = cfg.particles[0].frequency if cfg.particles else 1.0
    times = _grid(cfg)
    sched = OscillatorSchedule.constant(omega, t_initial=times[0])
    tol = cfg.tolerances.tol_ode
    traj = evolve_bogolubov(sched, (times[0], times[-1]), tol=tol, grid=times)
    drift = traj.conservation_drift()
    expected = np.exp(-1j * omega * (times - times[0]))
    phase_err = float(np.max(np.abs(traj.alpha - expected)))
    beta_err = float(np.max(np.abs(traj.beta)))
    print(f"bogolubov: conservation drift {drift:.3e}, constant-schedule "
          f"alpha error {phase_err:.3e}, beta leak {beta_err:.3e}")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bogolubov_report.json").write_text(json.dumps({
        "drift": drift, "alpha_error": phase_err, "beta_leak": beta_err,
        "tol": tol}, indent=2, sort_keys=True) + "\n")
    ok = drift < 10 * tol and phase_err < 1e-6 and beta_err < 1e-8
    return 0 if ok else 2


def export_kernels(cfg: ScenarioConfig, kinds, out_dir, strict=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    times = _grid(cfg)
    modes = _modes(cfg)
    state = _state(cfg)
    p = cfg.particles[0]
    pos = np.atleast_1d(np.asarray(p.position, dtype=float))
    positions = np.repeat(pos[None, :], times.size, axis=0)
    wl = static_worldline(0, times, p.position, p.mass, p.charge)
    written = []
    for kind in kinds:
        if kind == "nu":
            grid = bath_nu_grid(modes, state, times)
        elif kind == "mu":
            grid = bath_mu_grid(modes, times)
        elif kind == "hadamard":
            grid = hadamard_grid(times, positions, positions, modes, state)
        elif kind == "retarded":
            grid = retarded_grid(times, positions, positions, cfg.dimension)
        elif kind == "gamma":
            from .fdr import gamma_kernel
            grid = gamma_kernel(wl, cfg.dimension)
        elif kind == "fdrK":
            from .fdr import fdr_kernel_K
            dt = times[1] - times[0]
            kc = cfg.fdr.kappa_cutoff or 0.5 * math.pi / dt
            grid = fdr_kernel_K(wl, state, cfg.dimension, kappa_cutoff=kc,
                                box_size=cfg.field.box_size, strict=strict)
        else:
            raise ConfigurationError(f"unknown kernel kind {kind!r}; choose from "
                                     "nu, mu, hadamard, retarded, gamma, fdrK")
        written.append(kernel_to_csv(grid, out_dir / f"{kind}.csv"))
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="fieldlangevin",
                                 description="Colored-noise Langevin dynamics in a "
                                             "quantum scalar field")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML or JSON scenario file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config ensemble seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--strict", action="store_true",
                       help="escalate resolution warnings to errors")

    runp = sub.add_parser("run", help="run a scenario end to end")
    common(runp)

    verp = sub.add_parser("verify", help="run a named validation")
    verp.add_argument("check", choices=["fdr", "qbm-fdr", "noise-cov", "bogolubov"])
    common(verp)

    exp = sub.add_parser("export-kernels", help="write kernel matrices as CSV")
    exp.add_argument("--kinds", required=True,
                     help="comma list: nu,mu,hadamard,retarded,gamma,fdrK")
    common(exp)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else cfg.ensemble.seed
    out_dir = Path(args.out_dir) if args.out_dir else Path(cfg.output.directory)
    try:
        if args.command == "run":
            manifest = run_scenario(cfg, seed, args.threads, out_dir)
            print(f"run complete: {len(manifest.outputs)} files in {out_dir}")
            return 0
        if args.command == "verify":
            if args.check == "fdr":
                return _verify_fdr(cfg, out_dir, args.strict)
            if args.check == "qbm-fdr":
                return _verify_qbm(cfg, out_dir)
            if args.check == "noise-cov":
                return _verify_noise_cov(cfg, out_dir, seed)
            return _verify_bogolubov(cfg, out_dir)
        if args.command == "export-kernels":
            kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
            written = export_kernels(cfg, kinds, out_dir, args.strict)
            print(f"wrote {len(written)} kernel files to {out_dir}")
            return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 1


if __name__ == "__main__":
    sys.exit(main())
