import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from fieldlangevin.cli import main
from fieldlangevin.io import read_kernel_csv, sha256_file
from fieldlangevin.kernels import thermal_influence_kernel

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(*args):
    return main(list(args))


class TestRun:
    def test_minimal_deterministic_trajectory(self, tmp_path):
        out = tmp_path / "run1"
        rc = run_cli("run", "--config", str(CONFIGS / "dipole_minimal.toml"),
                     "--out-dir", str(out))
        assert rc == 0
        assert (out / "trajectories.csv").exists()
        assert (out / "statistics.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["outputs"]) >= 2
        # zero-noise single realization: the trajectory is the mean
        lines = (out / "trajectories.csv").read_text().splitlines()
        assert lines[0].startswith("realization,particle,t,q")

    def test_same_seed_identical_checksums(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = run_cli("run", "--config", str(CONFIGS / "dipole_minimal.toml"),
                         "--out-dir", str(out), "--seed", "5")
            assert rc == 0
            outs.append(json.loads((out / "manifest.json").read_text()))
        c1 = {o["path"]: o["sha256"] for o in outs[0]["outputs"]}
        c2 = {o["path"]: o["sha256"] for o in outs[1]["outputs"]}
        assert c1 == c2

    def test_thread_count_independence(self, tmp_path):
        # byte-identical result files with different worker counts
        cfg = tmp_path / "small.toml"
        text = (CONFIGS / "dipole_minimal.toml").read_text()
        text = text.replace("size = 1", "size = 32").replace(
            "zero_noise = true", "zero_noise = false")
        cfg.write_text(text)
        sums = []
        for threads, name in (("1", "t1"), ("4", "t4")):
            out = tmp_path / name
            rc = run_cli("run", "--config", str(cfg), "--out-dir", str(out),
                         "--threads", threads)
            assert rc == 0
            sums.append(sha256_file(out / "statistics.csv"))
        assert sums[0] == sums[1]

    def test_two_particle_scenario(self, tmp_path):
        out = tmp_path / "two"
        rc = run_cli("run", "--config", str(CONFIGS / "two_particle_spacelike.toml"),
                     "--out-dir", str(out))
        assert rc == 0
        assert (out / "trajectories.csv").exists()

    def test_bad_config_exit_code(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[grid]\nt_start = 5.0\nt_end = 1.0\n")
        assert run_cli("run", "--config", str(p)) == 1

    def test_unknown_key_exit_code(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[grid]\npoints = 8\nextra_knob = 1\n")
        assert run_cli("run", "--config", str(p)) == 1


class TestVerify:
    def test_fdr_reference_passes(self, tmp_path):
        rc = run_cli("verify", "fdr", "--config", str(CONFIGS / "fdr_1p1_T0.toml"),
                     "--out-dir", str(tmp_path))
        assert rc == 0
        report = json.loads((tmp_path / "fdr_report.json").read_text())
        assert report["residual"] < 1e-2
        assert (tmp_path / "gamma.csv").exists()
        assert (tmp_path / "fdrK.csv").exists()
        assert (tmp_path / "noise_matrix.csv").exists()

    def test_fdr_beta1_passes(self, tmp_path):
        rc = run_cli("verify", "fdr", "--config", str(CONFIGS / "fdr_1p1_beta1.toml"),
                     "--out-dir", str(tmp_path))
        assert rc == 0

    def test_fdr_impossible_tolerance_fails(self, tmp_path):
        cfg = tmp_path / "strict.toml"
        text = (CONFIGS / "fdr_1p1_T0.toml").read_text()
        cfg.write_text(text.replace("residual_tolerance = 1e-2",
                                    "residual_tolerance = 1e-18"))
        rc = run_cli("verify", "fdr", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "o"))
        assert rc == 2

    def test_qbm_fdr_passes(self, tmp_path):
        rc = run_cli("verify", "qbm-fdr", "--config", str(CONFIGS / "qbm_fdr.toml"),
                     "--out-dir", str(tmp_path))
        assert rc == 0

    def test_noise_cov_small_ensemble_rejected(self, tmp_path):
        cfg = tmp_path / "small.toml"
        text = (CONFIGS / "noise_cov.toml").read_text()
        cfg.write_text(text.replace("realizations = 4096", "realizations = 16"))
        rc = run_cli("verify", "noise-cov", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "o"))
        assert rc == 2

    def test_noise_cov_reduced_passes(self, tmp_path):
        # reduced size for test runtime; the full case runs in acceptance
        cfg = tmp_path / "mid.toml"
        text = (CONFIGS / "noise_cov.toml").read_text()
        text = text.replace("realizations = 4096", "realizations = 512")
        text = text.replace("modes = 8", "modes = 2")
        text = text.replace("grid_points = 256", "grid_points = 64")
        cfg.write_text(text)
        rc = run_cli("verify", "noise-cov", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "o"))
        assert rc == 0

    def test_bogolubov_passes(self, tmp_path):
        rc = run_cli("verify", "bogolubov", "--config",
                     str(CONFIGS / "bogolubov_const.toml"),
                     "--out-dir", str(tmp_path))
        assert rc == 0
        report = json.loads((tmp_path / "bogolubov_report.json").read_text())
        assert report["drift"] < 1e-9


class TestExportKernels:
    def test_single_mode_nu_mu_match_influence_kernel(self, tmp_path):
        cfg = tmp_path / "single.toml"
        cfg.write_text("""
name = "single-mode"
[field]
box_size = 6.283185307179586
uv_cutoff = 1.5
[field.state]
beta = 2.5
[[particles]]
kind = "dipole"
position = [2.0]
charge = 0.1
[grid]
t_start = 0.0
t_end = 4.0
points = 33
""")
        rc = run_cli("export-kernels", "--kinds", "nu,mu", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "k"))
        assert rc == 0
        nu = read_kernel_csv(tmp_path / "k" / "nu.csv")
        mu = read_kernel_csv(tmp_path / "k" / "mu.csv")
        # the box admits one wavenumber k = 1 with two polarizations; the
        # aggregate kernel is twice the single-oscillator one
        z00 = thermal_influence_kernel(1.0, 2.5, 0.0, 0.0)
        assert nu.values[0, 0] == pytest.approx(2 * z00.real, rel=1e-12)
        assert mu.values[0, 0] == pytest.approx(2 * z00.imag, abs=1e-12)
        z05 = thermal_influence_kernel(1.0, 2.5, 0.0, nu.times[5])
        assert nu.values[0, 5] == pytest.approx(2 * z05.real, rel=1e-12)
        assert mu.values[0, 5] == pytest.approx(2 * z05.imag, rel=1e-12)

    def test_retarded_lower_triangular(self, tmp_path):
        rc = run_cli("export-kernels", "--kinds", "retarded", "--config",
                     str(CONFIGS / "fdr_1p1_T0.toml"), "--out-dir", str(tmp_path))
        assert rc == 0
        g = read_kernel_csv(tmp_path / "retarded.csv")
        assert np.all(np.triu(g.values, k=1) == 0.0)

    def test_fdrk_matches_module(self, tmp_path):
        from fieldlangevin.fdr import fdr_kernel_K
        from fieldlangevin.modes import FieldState
        from fieldlangevin.worldline import static_worldline
        rc = run_cli("export-kernels", "--kinds", "fdrK", "--config",
                     str(CONFIGS / "fdr_1p1_T0.toml"), "--out-dir", str(tmp_path))
        assert rc == 0
        g = read_kernel_csv(tmp_path / "fdrK.csv")
        t = np.linspace(0.0, 16.0, 512)
        wl = static_worldline(0, t, [10.0], charge=1.0)
        dt = t[1] - t[0]
        K = fdr_kernel_K(wl, FieldState(beta=math.inf), "1+1",
                         kappa_cutoff=0.5 * math.pi / dt, box_size=400.0)
        assert np.allclose(g.values, K.values, rtol=1e-12)

    def test_unknown_kind_usage_error(self, tmp_path):
        rc = run_cli("export-kernels", "--kinds", "wightman", "--config",
                     str(CONFIGS / "fdr_1p1_T0.toml"), "--out-dir", str(tmp_path))
        assert rc == 1
