import math

import numpy as np
import pytest

from fieldlangevin.bogolubov import (OscillatorSchedule, SpectralDensity,
                                     evolve_bogolubov, instantaneous_occupation,
                                     kernels_from_bogolubov)
from fieldlangevin.errors import ConfigurationError
from fieldlangevin.kernels import thermal_influence_kernel
from fieldlangevin.modes import FieldState


def smooth_jump_schedule(w1, w2, ts, width):
    return OscillatorSchedule(
        lambda t: 1.0 + 0.0 * np.asarray(t),
        lambda t: w1 + (w2 - w1) * 0.5 * (1 + np.tanh((np.asarray(t) - ts) / width)),
    )


class TestEvolveBogolubov:
    def test_constant_schedule_exact(self):
        omega = 2.0
        sched = OscillatorSchedule.constant(omega)
        grid = np.linspace(0.0, 5.0, 257)
        traj = evolve_bogolubov(sched, (0.0, 5.0), tol=1e-13, grid=grid)
        expected = np.exp(-1j * omega * grid)
        assert np.max(np.abs(traj.alpha - expected)) < 1e-12
        assert np.max(np.abs(traj.beta)) < 1e-12

    def test_conservation_constant(self):
        sched = OscillatorSchedule.constant(1.7)
        traj = evolve_bogolubov(sched, (0.0, 10.0), tol=1e-10)
        assert traj.conservation_drift() < 1e-9

    def test_conservation_random_smooth_schedules(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a, b = rng.uniform(0.1, 0.4, 2)
            w0 = rng.uniform(0.5, 2.0)
            ph = rng.uniform(0, 2 * math.pi, 2)
            sched = OscillatorSchedule(
                lambda t, a=a, ph=ph: 1.0 + a * np.sin(0.7 * np.asarray(t) + ph[0]),
                lambda t, b=b, w0=w0, ph=ph: w0 * (1.0 + b * np.sin(1.3 * np.asarray(t) + ph[1])),
            )
            traj = evolve_bogolubov(sched, (0.0, 8.0), tol=1e-10)
            assert traj.conservation_drift() < 1e-9

    def test_sudden_jump_matches_reference_and_sudden_value(self):
        # frozen from the tol/100 reference solve of this schedule
        w1, w2 = 1.0, 2.0
        sched = smooth_jump_schedule(w1, w2, 2.5, 0.004)
        grid = np.linspace(0.0, 6.0, 1201)
        traj = evolve_bogolubov(sched, (0.0, 6.0), tol=1e-10, grid=grid)
        ref = evolve_bogolubov(sched, (0.0, 6.0), tol=1e-12, grid=grid)
        assert np.max(np.abs(traj.beta - ref.beta)) < 1e-7
        n_inst = instantaneous_occupation(traj, sched, 6.0)
        sudden = (w2 - w1) ** 2 / (4 * w1 * w2)
        assert n_inst == pytest.approx(sudden, rel=2e-3)
        # occupation in the instantaneous basis is constant after the jump
        vals = [instantaneous_occupation(traj, sched, t) for t in (4.0, 5.0, 6.0)]
        assert np.ptp(vals) < 1e-6

    def test_invalid_schedule_rejected(self):
        sched = OscillatorSchedule(lambda t: -1.0 + 0.0 * np.asarray(t),
                                   lambda t: 1.0 + 0.0 * np.asarray(t))
        with pytest.raises(ConfigurationError):
            evolve_bogolubov(sched, (0.0, 1.0))

    def test_bad_window_rejected(self):
        sched = OscillatorSchedule.constant(1.0)
        with pytest.raises(ConfigurationError):
            evolve_bogolubov(sched, (1.0, 1.0))


class TestScheduleCsv:
    def test_interpolated_curves(self, tmp_path):
        tgrid = np.linspace(0.0, 4.0, 41)
        m = 1.0 + 0.1 * tgrid
        w = 2.0 - 0.2 * tgrid
        mp = tmp_path / "m.csv"
        wp = tmp_path / "w.csv"
        mp.write_text("\n".join(f"{t},{v}" for t, v in zip(tgrid, m)))
        wp.write_text("\n".join(f"{t},{v}" for t, v in zip(tgrid, w)))
        sched = OscillatorSchedule.from_csv(mp, wp)
        assert float(sched.mass(2.05)) == pytest.approx(1.205, rel=1e-12)
        assert float(sched.frequency(0.55)) == pytest.approx(1.89, rel=1e-12)

    def test_too_few_samples(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("0.0,1.0")
        with pytest.raises(ConfigurationError):
            OscillatorSchedule.from_csv(p, p)


class TestKernelsFromBogolubov:
    def grid(self):
        return np.linspace(0.0, 6.0, 49)

    def test_thermal_reduction_single_mode(self):
        # constant schedule, r = 0: nu, mu must match the thermal influence
        # kernel mode by mode (cross-module consistency)
        omega, beta = 1.5, 2.0
        grid = self.grid()
        traj = evolve_bogolubov(OscillatorSchedule.constant(omega), (0.0, 6.0),
                                tol=1e-12, grid=grid)
        dens = SpectralDensity.discrete_modes([omega])
        nu, mu = kernels_from_bogolubov(traj, FieldState(beta=beta), dens)
        zeta = thermal_influence_kernel(omega, beta, grid[:, None], grid[None, :])
        assert np.max(np.abs(nu.values - zeta.real)) < 1e-10
        assert np.max(np.abs(mu.values - zeta.imag)) < 1e-10

    def test_vacuum_coincident_value(self):
        omega = 2.0
        grid = self.grid()
        traj = evolve_bogolubov(OscillatorSchedule.constant(omega), (0.0, 6.0),
                                tol=1e-12, grid=grid)
        dens = SpectralDensity.discrete_modes([omega])
        nu, _ = kernels_from_bogolubov(traj, FieldState(beta=math.inf), dens)
        assert np.allclose(np.diag(nu.values), 1.0 / (2 * omega), rtol=1e-10)

    def test_squeezed_diagonal_oscillates_between_exponentials(self):
        # r = 1, phi = 0: nu(t,t) = coth * (cosh 2r - sinh 2r cos 2w(t-ti))/(2w)
        # sweeps the band [e^{-2r}, e^{+2r}]/(2w)
        omega, r = 1.0, 1.0
        grid = np.linspace(0.0, 2 * math.pi, 257)
        traj = evolve_bogolubov(OscillatorSchedule.constant(omega), (0.0, 2 * math.pi),
                                tol=1e-12, grid=grid)
        dens = SpectralDensity.discrete_modes([omega])
        state = FieldState("squeezed-thermal", math.inf, r, 0.0)
        nu, _ = kernels_from_bogolubov(traj, state, dens)
        diag = np.diag(nu.values) * 2 * omega
        assert diag.min() == pytest.approx(math.exp(-2 * r), rel=1e-6)
        assert diag.max() == pytest.approx(math.exp(2 * r), rel=1e-6)

    def test_dissipation_kernel_state_independent(self):
        omega = 1.3
        grid = self.grid()
        traj = evolve_bogolubov(OscillatorSchedule.constant(omega), (0.0, 6.0),
                                tol=1e-12, grid=grid)
        dens = SpectralDensity.discrete_modes([omega])
        _, mu_cold = kernels_from_bogolubov(traj, FieldState(beta=math.inf), dens)
        _, mu_hot = kernels_from_bogolubov(traj, FieldState(beta=0.2), dens)
        _, mu_sq = kernels_from_bogolubov(
            traj, FieldState("squeezed-thermal", 0.5, 1.2, 0.3), dens)
        assert np.array_equal(mu_cold.values, mu_hot.values)
        assert np.array_equal(mu_cold.values, mu_sq.values)

    def test_grid_mismatch_rejected(self):
        traj = evolve_bogolubov(OscillatorSchedule.constant(1.0), (0.0, 2.0),
                                tol=1e-10)
        dens = SpectralDensity.discrete_modes([1.0])
        with pytest.raises(ConfigurationError):
            kernels_from_bogolubov(traj, FieldState(beta=1.0), dens,
                                   grid=np.linspace(0.0, 4.0, 33))

    def test_ohmic_density_positive_and_normalized(self):
        dens = SpectralDensity.ohmic(1.0, 2.0)
        # int I(w) dw = (2/pi) cutoff^2 for the exponential ohmic form
        assert np.sum(dens.weights) == pytest.approx((2 / math.pi) * 4.0, rel=1e-6)
