"""Normalization conventions used throughout the package.

All kernels and Green's functions in this library follow one fixed set of
conventions, collected here so that every headline constant appears in
exactly one place.

Units and metric
    c = 1, metric signature (+, -, -, -).  hbar is kept explicit and
    defaults to 1.  Inverse temperature beta = 1/(k_B T); beta = inf is the
    exact zero-temperature branch (coth -> 1), never a large float.

Field modes
    The scalar field lives in a box of side L with modes k = 2*pi*n/L for
    positive integers n (per spatial dimension), two real polarizations
    u_{k,1}(x) = sin(k.x), u_{k,2}(x) = cos(k.x), and frequencies
    omega_k = sqrt(k^2 + m^2).  Field amplitudes carry the normalization
    (2/L)^(d_s/2) per mode, d_s being the number of spatial dimensions.

Oscillator influence kernel (per mode, thermal)
    zeta(t,t') = (1/2w) * [coth(hbar*beta*w/2) cos w(t-t') - i sin w(t-t')]
    nu  = Re zeta : noise kernel, symmetric, temperature dependent.
    mu  = Im zeta : dissipation kernel, antisymmetric, state independent.

Hadamard (noise) Green's function
    G_H(x,x') = (2/L)^(d_s) * sum_k cos(k.(x-x')) nu_k(t,t').
    This normalization is fixed by requiring <chi(x) chi(x')> = hbar*G_H
    for the stochastic field chi built from unit-variance mode noises.

Radiation (commutator) kernel on worldlines
    The state-independent kernel that mediates dissipation and
    inter-particle propagation is normalized so that the local limits hold
    exactly:

    1+1:  A(dt, dx) = 4 * int_0^inf dk/k cos(k dx) sin(k dt)
                    = pi * [sgn(dt+dx) + sgn(dt-dx)]
          d/dt A|_{dx=0} = 4*pi*delta(dt)

    3+1:  A(dt, r)  = (16*pi/r) * int_0^inf dk sin(k r) sin(k dt)
                    = (8*pi^2/r) * [delta(dt-r) - delta(dt+r)]
          d/dt A|_{r=0} = -16*pi^2 * delta''(dt)

    The retarded kernel is G_ret(x,x') = theta(t-t') A(t-t', x-x').
    Linearized force kernels built from the coarse-grained action carry a
    combinatorial factor 2 relative to G_ret; with that factor the local
    self-dissipation kernel in 1+1 is exactly

        Gamma(tau, tau') = -4*pi*e^2 * delta(tau - tau')

    for a particle of charge e on any timelike worldline.

Fluctuation-dissipation objects
    K(tau,s)  = (1/2pi) int_0^cut dk b(k) coth(hbar*beta*k/2)
                  * [cos k(v(tau)-v(s)) + cos k(u(tau)-u(s))]
    N(tau,s)  =   -2e^2 int_0^cut dk b(k) coth(hbar*beta*k/2)
                  * [cos k(v(tau)-v(s)) + cos k(u(tau)-u(s))]
    with b(k) = 1/k in 1+1 and 4*pi*k in 3+1, and u = t - |x|, v = t + |x|
    the outgoing/incoming null coordinates of the worldline point.  The
    overall sign and factor of N are fixed by requiring the identity
    N = int ds K(tau,s) Gamma(s,tau') to hold exactly with the local Gamma
    above; the noise matrix therefore carries the sign of Gamma's
    generator.

Discrete delta
    On a uniform grid with spacing dtau, delta(tau-tau') is represented by
    (1/dtau) * Kronecker delta, validated by row-sum normalization.

Dipole (internal-oscillator) model
    A point system at fixed position x0 with internal amplitude q,
    frequency w0 and coupling e obeys, in the local limit of the radiation
    memory,

        qdd + e*qd + w0^2 q = chi(x0, t),

    i.e. the damping coefficient is e and the stochastic forcing couples
    with unit strength.  Its frequency response is
    g(w) = 1/(w^2 + i e w - w0^2), with poles at -i e/2 +- sqrt(w0^2-e^2/4).
    The current functional of the same model is j = e q(t) delta(x-x0), so
    projected forces carry one power of e; the asymmetry (damping e, unit
    noise) is a property of this oscillator convention and is what the
    frequency-domain response checks in `fdr` assume.
"""

import numpy as np

#: Damping constant of the local 1+1 self-dissipation kernel, per unit e^2.
LOCAL_DISSIPATION_1P1 = -4.0 * np.pi

#: Coefficient of delta''(dt) in d/dt A at coincidence in 3+1.
RADIATION_DELTA2_3P1 = -16.0 * np.pi**2

#: Combinatorial factor between the retarded Green's function and the
#: linearized force kernels derived from the coarse-grained action.
ACTION_KERNEL_FACTOR = 2.0


def spatial_dim(dimension: str) -> int:
    """Number of spatial dimensions for a spacetime label '1+1' or '3+1'."""
    if dimension == "1+1":
        return 1
    if dimension == "3+1":
        return 3
    from .errors import ConfigurationError

    raise ConfigurationError(f"unsupported dimension {dimension!r}; use '1+1' or '3+1'")
