import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldlangevin.bogolubov import SpectralDensity
from fieldlangevin.errors import ConfigurationError, KernelError
from fieldlangevin.fdr import (ResponseOracle, analytic_symmetrized_correlator,
                               dissipation_matrix, fdr_kernel_K, gamma_kernel,
                               gamma_from_dissipation, noise_matrix,
                               qbm_fdr_check, verify_fdr, windowed_power_stats)
from fieldlangevin.modes import FieldState, ModeSet
from fieldlangevin.worldline import Worldline, static_worldline


def static(times, x=10.0, e=1.0):
    return static_worldline(0, times, [x], charge=e)


class TestDissipationMatrix:
    def test_zero_charge(self, times_64):
        A = dissipation_matrix(static(times_64, e=0.0))
        assert np.all(A == 0.0)

    def test_diagonal_block_is_odd_commutator(self, times_64):
        e = 0.7
        A = dissipation_matrix(static(times_64, e=e))
        assert np.allclose(A, -A.T, atol=1e-12)
        # on a static 1+1 worldline the commutator is 2*pi*e^2*sgn(dt)
        assert A[10, 3] == pytest.approx(2 * math.pi * e**2)
        assert A[3, 10] == pytest.approx(-2 * math.pi * e**2)

    def test_local_dissipation_via_derivative(self, times_64):
        # the time derivative of the diagonal block is delta-supported:
        # every row of -dA/dtau integrates to -4 pi e^2
        e = 1.0
        A = dissipation_matrix(static(times_64, e=e))
        G = gamma_from_dissipation(A, times_64)
        dt = times_64[1] - times_64[0]
        row_sums = G.values[1:-1].sum(axis=1) * dt
        assert np.allclose(row_sums, -4 * math.pi * e**2, rtol=1e-12)
        # support is on and next to the diagonal only
        off = np.abs(G.values[np.abs(np.subtract.outer(
            np.arange(times_64.size), np.arange(times_64.size))) > 1])
        assert np.max(off) == 0.0

    def test_spacelike_pair_block_zero(self, times_64):
        w1 = static(times_64, x=10.0)
        w2 = static(times_64, x=200.0)
        A = dissipation_matrix([w1, w2])
        n = times_64.size
        assert np.all(A[:n, n:] == 0.0)
        assert np.all(A[n:, :n] == 0.0)

    def test_timelike_pair_block_retarded(self, times_64):
        w1 = static(times_64, x=10.0)
        w2 = static(times_64, x=12.0)
        A = dissipation_matrix([w1, w2])
        n = times_64.size
        blk = A[:n, n:]
        dtv = times_64[:, None] - times_64[None, :]
        assert np.all(blk[dtv <= 2.0] == 0.0)
        assert np.any(blk[dtv > 2.0] != 0.0)

    def test_non_timelike_rejected(self, times_64):
        wl = Worldline(0, times_64, np.zeros((times_64.size, 1)),
                       np.full((times_64.size, 1), 1.2), 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            dissipation_matrix(wl)


class TestGammaKernel:
    def test_exact_local_1p1(self, times_64):
        e = 1.0
        G = gamma_kernel(static(times_64, e=e), "1+1")
        dt = times_64[1] - times_64[0]
        assert np.allclose(np.diag(G.values), -4 * math.pi * e**2 / dt)
        assert np.count_nonzero(G.values - np.diag(np.diag(G.values))) == 0

    def test_row_integral_minus_4pi_e2(self, times_64):
        # numerically integrated row sums: -4 pi e^2 within 0.5 percent
        e = 1.3
        G = gamma_kernel(static(times_64, e=e), "1+1")
        dt = times_64[1] - times_64[0]
        sums = G.values.sum(axis=1) * dt
        assert np.allclose(sums, -4 * math.pi * e**2, rtol=5e-3)

    def test_charge_squared_scaling(self, times_64):
        g1 = gamma_kernel(static(times_64, e=1.0), "1+1")
        g2 = gamma_kernel(static(times_64, e=2.0), "1+1")
        assert np.allclose(g2.values, 4 * g1.values)

    def test_locality_for_any_worldline_speed(self, times_64):
        # state independence / trajectory independence of the local form
        v = 0.5
        pos = (v * times_64)[:, None] + 30.0
        vel = np.full((times_64.size, 1), v)
        wl = Worldline(0, times_64, pos, vel, 1.0, 1.0)
        G = gamma_kernel(wl, "1+1")
        off_diag = G.values - np.diag(np.diag(G.values))
        assert np.max(np.abs(off_diag)) == 0.0

    def test_3p1_distributional_stencil(self, times_64):
        # column quadrature against a smooth f gives 16 pi^2 e^2 f''
        e = 0.5
        G = gamma_kernel(static(times_64, e=e), "3+1")
        dt = times_64[1] - times_64[0]
        f = np.sin(times_64)
        quad = dt * (f @ G.values)
        expected = 16 * math.pi**2 * e**2 * (-np.sin(times_64))
        assert np.allclose(quad[2:-2], expected[2:-2], atol=3e-3 * np.max(np.abs(expected)))


class TestFdrKernelK:
    def make(self, beta=math.inf, n=128, T=8.0, box=200.0):
        times = np.linspace(0.0, T, n)
        wl = static(times)
        dt = times[1] - times[0]
        K = fdr_kernel_K(wl, FieldState(beta=beta), "1+1",
                         kappa_cutoff=0.5 * math.pi / dt, box_size=box)
        return times, K

    def test_stationary_toeplitz(self):
        times, K = self.make()
        i = np.arange(times.size)
        lag = i[:, None] - i[None, :]
        for d in (-20, -3, 0, 5, 17):
            vals = K.values[lag == d]
            assert np.ptp(vals) < 1e-12 * max(1.0, abs(vals[0]))

    def test_t0_matches_independent_quadrature(self):
        # T = 0 form: K(s) = (1/pi) int dk cos(k s)/k over the matched
        # range.  The dense continuum rule agrees up to the first-cell IR
        # deviation of the mode lattice (a few percent on a 1/k
        # integrand); an independently coded lattice sum agrees exactly.
        times, K = self.make()
        kc = K.meta["kappa_cutoff"]
        dk = 2 * math.pi / 200.0
        from scipy.integrate import simpson
        kq = np.linspace(dk / 2, kc, 400001)
        s = times[5] - times[0]
        target = simpson(np.cos(kq * s) / kq, x=kq) / math.pi
        assert K.values[5, 0] == pytest.approx(target, rel=5e-2)
        n_k = int(round(kc / dk)) - 1
        kmodes = dk * np.arange(1, n_k + 1)
        latt = 2 * np.sum(dk * np.cos(kmodes * s) / kmodes)
        xg, wg = np.polynomial.legendre.leggauss(16)
        a, b = kc - dk / 2, kc
        ks = 0.5 * (b - a) * xg + 0.5 * (a + b)
        latt += 2 * np.sum(0.5 * (b - a) * wg * np.cos(ks * s) / ks)
        assert K.values[5, 0] == pytest.approx(latt / (2 * math.pi), rel=1e-12)

    def test_thermal_factor_increases_K(self):
        _, K0 = self.make(beta=math.inf)
        _, K1 = self.make(beta=1.0)
        assert K1.values[0, 0] > K0.values[0, 0]

    def test_strict_mode_rejects_underresolved(self):
        times = np.linspace(0.0, 8.0, 64)
        wl = static(times)
        dt = times[1] - times[0]
        with pytest.raises(ConfigurationError):
            fdr_kernel_K(wl, FieldState(beta=math.inf), "1+1",
                         kappa_cutoff=5 * math.pi / dt, box_size=200.0,
                         strict=True)


class TestVerifyFdr:
    def run_case(self, beta, n=512, T=16.0, box=400.0):
        times = np.linspace(0.0, T, n)
        dt = times[1] - times[0]
        wl = static(times)
        return verify_fdr(wl, FieldState(beta=beta), "1+1",
                          kappa_cutoff=0.5 * math.pi / dt, box_size=box)

    def test_t0_residual_small(self):
        rep = self.run_case(math.inf)
        assert rep.residual < 1e-2

    def test_thermal_residual_small(self):
        rep = self.run_case(1.0)
        assert rep.residual < 1e-2

    def test_residual_shrinks_under_refinement(self):
        # dtau -> dtau/2 at fixed cutoff*dtau: O(dtau) stub convergence
        r1 = self.run_case(math.inf, n=512).residual
        r2 = self.run_case(math.inf, n=1024).residual
        assert r2 < r1
        assert r2 == pytest.approx(0.5 * r1, rel=0.2)

    def test_zero_charge_trivial(self):
        times = np.linspace(0.0, 8.0, 64)
        wl = static(times, e=0.0)
        rep = verify_fdr(wl, FieldState(beta=math.inf), "1+1",
                         kappa_cutoff=10.0, box_size=100.0)
        assert rep.residual == 0.0
        assert np.all(rep.noise.values == 0.0)

    def test_report_reproducible(self):
        a = self.run_case(1.0, n=128)
        b = self.run_case(1.0, n=128)
        assert a.residual == b.residual
        assert np.array_equal(a.kernel_K.values, b.kernel_K.values)

    def test_noise_matrix_symmetric(self):
        rep = self.run_case(math.inf, n=128)
        assert np.allclose(rep.noise.values, rep.noise.values.T, atol=1e-12)

    def test_3p1_reconstruction_symmetric(self):
        # after the integration-by-parts transfer onto K, the
        # reconstructed matrix stays symmetric to quadrature tolerance
        times = np.linspace(0.0, 8.0, 128)
        dt = times[1] - times[0]
        wl = static(times)
        rep = verify_fdr(wl, FieldState(beta=math.inf), "3+1",
                         kappa_cutoff=0.5 * math.pi / dt, box_size=200.0)
        R = rep.reconstructed
        inner = R[2:-2, 2:-2]
        asym = np.max(np.abs(inner - inner.T)) / np.max(np.abs(inner))
        assert asym < 1e-6


class TestQbmFdr:
    def test_ohmic_t0(self):
        dens = SpectralDensity.ohmic(1.0, 2.0, omega_max=12.0)
        r, _ = qbm_fdr_check(dens, math.inf, span=40.0, grid_points=1024)
        assert r < 1e-2

    def test_thermal(self):
        dens = SpectralDensity.ohmic(1.0, 2.0, omega_max=12.0)
        r, _ = qbm_fdr_check(dens, 1.0, span=40.0, grid_points=1024)
        assert r < 1e-2

    def test_high_temperature_einstein_kubo(self):
        # nu -> (2 k_B T / hbar) gamma in the high-T limit; band frozen
        # from the quadrature oracle at T = 20
        dens = SpectralDensity.ohmic(1.0, 2.0, omega_max=12.0)
        _, data = qbm_fdr_check(dens, 0.05, span=40.0, grid_points=1024)
        mid = data["s"].size // 2
        ratio = data["nu"][mid] / data["gamma"][mid]
        assert ratio == pytest.approx(2.0 / 0.05, rel=5e-3)

    def test_zero_coupling(self):
        dens = SpectralDensity.ohmic(0.0, 2.0, omega_max=12.0)
        # zero coupling leaves no spectral support at all
        assert dens.omegas.size == 0 or np.all(dens.weights == 0.0)

    def test_nonintegrable_density_rejected(self):
        bad = SpectralDensity([1.0, 2.0], [1.0, math.inf])
        with pytest.raises(KernelError):
            qbm_fdr_check(bad, 1.0, span=10.0, grid_points=64)


class TestResponseOracle:
    def oracle(self, e=0.1, w0=1.0):
        modes = ModeSet.box(64.0, 3.0)
        return ResponseOracle(e, w0, modes, FieldState(beta=math.inf))

    def test_resonance_value(self):
        # w = w0 = 1: real parts cancel, g = 1/(i e) = -10 i at e = 0.1
        g = self.oracle().response_function(1.0)
        assert g == pytest.approx(-10j, rel=1e-12)

    def test_zero_frequency(self):
        g = self.oracle().response_function(0.0)
        assert g == pytest.approx(-1.0, rel=1e-12)

    def test_pole_locations(self):
        e, w0 = 0.1, 1.0
        p1, p2 = self.oracle(e, w0).pole_locations()
        root = math.sqrt(w0**2 - e**2 / 4)
        assert p1 == pytest.approx(-0.05j + root)
        assert p2 == pytest.approx(-0.05j - root)
        g = self.oracle(e, w0).response_function
        assert abs(1.0 / g(p1.real + 1j * p1.imag + 1e-8)) < 1e-5

    @given(omega=st.floats(-8, 8))
    @settings(max_examples=40, deadline=None)
    def test_reality_symmetry(self, omega):
        g = self.oracle().response_function
        assert g(-omega) == pytest.approx(np.conj(g(omega)), rel=1e-12)

    def test_zero_coupling_caveat_flag(self):
        oracle = self.oracle(e=0.0)
        pred = analytic_symmetrized_correlator(oracle, np.linspace(0, 10, 100), 1.0)
        assert pred.homogeneous_solution_dropped

    def test_stochastic_commutator_vanishes(self):
        # the antisymmetrized product of the commuting stochastic
        # realizations is identically zero (documented limitation: the
        # quantum commutator channel is not reproduced)
        rng = np.random.default_rng(0)
        q = rng.normal(size=128)
        t = np.linspace(0, 10, 128)
        for w1, w2 in [(0.5, 1.0), (1.0, 2.0)]:
            Q1 = np.sum(q * np.exp(1j * w1 * t))
            Q2 = np.sum(q * np.exp(1j * w2 * t))
            assert Q1 * Q2 - Q2 * Q1 == 0.0

    def test_windowed_power_positive(self):
        oracle = self.oracle()
        t = np.linspace(100.0, 160.0, 1201)
        mean, sd = windowed_power_stats(oracle, t, 1.0)
        assert mean > 0
        assert sd > 0
        assert sd < 2 * mean  # quadratic-form variance bound
