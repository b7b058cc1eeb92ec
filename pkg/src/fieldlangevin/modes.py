"""Normal-mode structure of the scalar field in a periodic box."""

import math
from dataclasses import dataclass, field

import numpy as np

from .conventions import spatial_dim
from .errors import ConfigurationError


@dataclass(frozen=True)
class Mode:
    k: tuple          # wavevector components, each 2*pi*n/L with n >= 1
    polarization: int  # 1 -> sin(k.x), 2 -> cos(k.x)
    omega: float


@dataclass(frozen=True)
class ModeSet:
    """Discrete field modes k = 2*pi*n/L below a UV cutoff.

    Mode functions are u_{k,1}(x) = sin(k.x) and u_{k,2}(x) = cos(k.x);
    amplitude normalization (2/L)^(d_s/2) is applied by consumers through
    :attr:`norm`.
    """

    modes: tuple
    box_size: float
    uv_cutoff: float
    field_mass: float = 0.0
    dimension: str = "1+1"

    def __post_init__(self):
        if self.box_size <= 0 or self.uv_cutoff <= 0:
            raise ConfigurationError("box_size and uv_cutoff must be positive")
        if self.field_mass < 0:
            raise ConfigurationError("field_mass must be nonnegative")

    @classmethod
    def box(cls, box_size, uv_cutoff, field_mass=0.0, dimension="1+1"):
        ds = spatial_dim(dimension)
        dk = 2 * math.pi / box_size
        modes = []
        if ds == 1:
            nmax = int(math.floor(uv_cutoff / dk))
            for n in range(1, nmax + 1):
                k = (n * dk,)
                omega = math.sqrt((n * dk) ** 2 + field_mass**2)
                modes.append(Mode(k, 1, omega))
                modes.append(Mode(k, 2, omega))
        else:
            nmax = int(math.floor(uv_cutoff / dk))
            for nx in range(1, nmax + 1):
                for ny in range(1, nmax + 1):
                    for nz in range(1, nmax + 1):
                        k = (nx * dk, ny * dk, nz * dk)
                        kk = math.sqrt(sum(c * c for c in k))
                        if kk > uv_cutoff:
                            continue
                        omega = math.sqrt(kk**2 + field_mass**2)
                        modes.append(Mode(k, 1, omega))
                        modes.append(Mode(k, 2, omega))
        if not modes:
            raise ConfigurationError(
                "no modes below cutoff; raise uv_cutoff or box_size"
            )
        return cls(tuple(modes), box_size, uv_cutoff, field_mass, dimension)

    def __len__(self):
        return len(self.modes)

    @property
    def norm(self):
        """Per-mode amplitude normalization (2/L)^(d_s/2)."""
        return (2.0 / self.box_size) ** (spatial_dim(self.dimension) / 2.0)

    @property
    def ir_cutoff(self):
        """Smallest mode wavenumber 2*pi/L; fidelity below it is not claimed."""
        return 2 * math.pi / self.box_size

    @property
    def omegas(self):
        return np.array([m.omega for m in self.modes])

    def k_array(self):
        return np.array([m.k for m in self.modes])

    def mode_functions(self, x):
        """u_alpha(x) for all modes at one spatial point (no (2/L) factor).

        x : sequence of d_s coordinates, each in [0, box_size).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ds = spatial_dim(self.dimension)
        if x.shape != (ds,):
            raise ConfigurationError(f"point has {x.shape} coordinates, expected {ds}")
        if np.any(x < 0) or np.any(x >= self.box_size):
            raise ConfigurationError("point outside the simulation box")
        kx = self.k_array() @ x
        pol = np.array([m.polarization for m in self.modes])
        return np.where(pol == 1, np.sin(kx), np.cos(kx))

    def mode_gradients(self, x):
        """Spatial gradients du_alpha/dx_i at one point, shape (n_modes, d_s)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        karr = self.k_array()
        kx = karr @ x
        pol = np.array([m.polarization for m in self.modes])
        dphase = np.where(pol == 1, np.cos(kx), -np.sin(kx))
        return karr * dphase[:, None]


@dataclass(frozen=True)
class FieldState:
    """Initial Gaussian state of the field: thermal, optionally squeezed.

    beta = math.inf encodes T = 0 exactly.  squeeze_r / squeeze_phi may be
    floats (uniform over modes) or callables of the mode frequency.
    """

    kind: str = "thermal"
    beta: float = math.inf
    squeeze_r: object = 0.0
    squeeze_phi: object = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.kind not in ("thermal", "squeezed-thermal"):
            raise ConfigurationError(f"unknown field state kind {self.kind!r}")
        if not (self.beta > 0):
            raise ConfigurationError("beta must be positive (inf allowed)")
        if self.hbar <= 0:
            raise ConfigurationError("hbar must be positive")

    def r_at(self, omega):
        r = self.squeeze_r(omega) if callable(self.squeeze_r) else self.squeeze_r
        if not np.all(np.isfinite(r)):
            raise ConfigurationError("squeeze_r must be finite")
        return r

    def phi_at(self, omega):
        p = self.squeeze_phi(omega) if callable(self.squeeze_phi) else self.squeeze_phi
        if not np.all(np.isfinite(p)):
            raise ConfigurationError("squeeze_phi must be finite")
        return p


def coth_half(omega, beta, hbar=1.0):
    """coth(hbar*beta*omega/2) with the exact beta = inf -> 1 branch.

    Vectorized over omega.  Raises on nonpositive frequencies: the
    oscillator decomposition only produces omega > 0.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("mode frequency must be positive")
    if math.isinf(beta):
        return np.ones_like(omega)
    return 1.0 / np.tanh(0.5 * hbar * beta * omega)
