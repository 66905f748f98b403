"""Interaction potentials above a periodically doped surface.

A polarizable particle above a flat surface at y = 0 feels two attractive
contributions:

* the Casimir-Polder (CP) potential, here in its highly retarded limit
      V_CP(y) = -C4 / y^4,       C4 = 3 hbar c alpha / (32 pi^2 eps0),

* the electrostatic potential -alpha |E|^2 / 2 induced by a periodic,
  net-neutral surface charge.  Expanding the charge density in Fourier
  components sigma_l along the short doping period d_x (kappa_x = 2 pi/d_x)
  gives the field
      E(x, y) = (1/eps0) sum_l sigma_l e^{-l kappa_x y}
                (sin(l kappa_x x), cos(l kappa_x x)),
  and the Fourier components of the total potential
      V_0(y) = V_CP(y) - (alpha/2 eps0^2) sum_l sigma_l^2 e^{-2 l kappa_x y}
      V_n(y) = -(alpha/2 eps0^2) sum_l sigma_l sigma_{l+|n|}
               e^{-(2l+|n|) kappa_x y}          (n != 0).

For a grating periodic in the second in-plane direction z (period
d_z >> d_x), the doping amplitude is modulated as sigma_1(z) =
sigma_m Delta(z) and the couplings between z-diffraction orders follow
from the Fourier transform of Delta^2.  For rectangular stripes of
opening fraction f and for Gaussian bars of width epsilon the transform
is known in closed form (see :func:`stripe_coupling` and
:func:`gaussian_coupling`).

Everything in this module is a pure function of its inputs; all values
are SI unless the name says otherwise.  Reduced (dimensionless) units
for the solver are handled by :class:`Scaling`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .constants import C_LIGHT, E0, EPS0, HBAR, ALPHA_FS
from .errors import ConfigurationError

__all__ = [
    "ParticleParams",
    "HarmonicProfile",
    "StripeProfile",
    "GaussianProfile",
    "FourierProfile",
    "DopingProfile",
    "SurfaceConfig",
    "PotentialTable",
    "ReducedSpecularPotential",
    "Scaling",
    "sinc",
    "c4_coefficient",
    "cp_potential",
    "surface_field",
    "electro_fourier",
    "stripe_coupling",
    "gaussian_coupling",
    "intermediate_region_exists",
    "coupling_fourier_coefficient",
    "z_modulation",
    "build_potential_table",
]

DEFAULT_LMAX = 64


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalized convention)."""
    x = np.asarray(x, dtype=float)
    out = np.sinc(x / np.pi)  # numpy's sinc is sin(pi t)/(pi t)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleParams:
    """Incoming particle: mass, static polarizability and beam geometry.

    ``theta`` is the incidence angle measured from the surface plane,
    ``phi`` the azimuth of the in-plane momentum.  ``polarizability``
    is the SI value (C m^2 / V); use
    :func:`qreflect.constants.polarizability_si` to convert a
    polarizability volume.
    """

    mass: float             # kg
    polarizability: float   # C m^2 / V
    speed: float            # m / s
    theta: float            # rad, 0 < theta <= pi/2
    phi: float = 0.0        # rad

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ConfigurationError("particle mass must be > 0")
        if self.polarizability < 0.0:
            raise ConfigurationError("polarizability must be >= 0")
        if not self.speed > 0.0:
            raise ConfigurationError("beam speed must be > 0")
        if not 0.0 < self.theta <= math.pi / 2.0:
            raise ConfigurationError("theta must be in (0, pi/2]")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ConfigurationError("phi must be in [0, 2 pi)")


@dataclass(frozen=True)
class HarmonicProfile:
    """Purely harmonic doping sigma(x) = sigma_m cos(kappa_x x), no z structure."""


@dataclass(frozen=True)
class StripeProfile:
    """Rectangular doping stripes along z covering a fraction f of each period."""

    f: float

    def __post_init__(self):
        if not 0.0 <= self.f < 1.0:
            raise ConfigurationError("stripe fraction f must satisfy 0 <= f < 1")


@dataclass(frozen=True)
class GaussianProfile:
    """Gaussian doping bars along z, amplitude profile exp(-z^2 / 2 epsilon^2)."""

    epsilon: float  # m

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ConfigurationError("gaussian width epsilon must be > 0")


@dataclass(frozen=True)
class FourierProfile:
    """Explicit x-Fourier coefficients sigma_l (C/m^2) for l = 1, 2, ...

    sigma_0 = 0 is implied (neutral surface); the list index 0 holds
    sigma_1.
    """

    sigma_ell: tuple

    def __post_init__(self):
        coeffs = tuple(float(s) for s in self.sigma_ell)
        if len(coeffs) < 1:
            raise ConfigurationError("fourier profile needs at least sigma_1")
        object.__setattr__(self, "sigma_ell", coeffs)


DopingProfile = Union[HarmonicProfile, StripeProfile, GaussianProfile, FourierProfile]


@dataclass(frozen=True)
class SurfaceConfig:
    """Doping geometry: short period d_x, grating period d_z, amplitude sigma_m.

    For stripe/gaussian profiles sigma_m is the peak of the modulated
    amplitude sigma_1(z) = sigma_m Delta(z); for the harmonic profile it
    is the cosine amplitude; fourier profiles carry their own
    coefficients and ignore sigma_m.
    """

    d_x: float                  # m
    d_z: float                  # m
    sigma_m: float              # C / m^2
    profile: DopingProfile

    def __post_init__(self):
        if not self.d_x > 0.0:
            raise ConfigurationError("d_x must be > 0")
        if not self.d_z > 0.0:
            raise ConfigurationError("d_z must be > 0")
        if self.sigma_m < 0.0:
            raise ConfigurationError("sigma_m must be >= 0")
        if isinstance(self.profile, GaussianProfile):
            # closed-form couplings assume negligible bar overlap
            if not self.profile.epsilon < self.d_z / 4.0:
                raise ConfigurationError(
                    "gaussian width epsilon must be < d_z / 4 "
                    "(neighboring bars would overlap)"
                )

    @property
    def kappa_x(self) -> float:
        """Decay wavenumber of the surface field, 2 pi / d_x."""
        return 2.0 * math.pi / self.d_x

    @property
    def q_z(self) -> float:
        """Grating wavevector in the z direction, 2 pi / d_z (a_z = d_z)."""
        return 2.0 * math.pi / self.d_z

    def sudden_ratio(self) -> float:
        """d_x / d_z; the z-grating treatment assumes this is small (< 0.1)."""
        return self.d_x / self.d_z


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------

def c4_coefficient(particle: ParticleParams) -> float:
    """Retarded CP coefficient C4 = 3 hbar c alpha / (32 pi^2 eps0), in J m^4."""
    return 3.0 * HBAR * C_LIGHT * particle.polarizability / (32.0 * math.pi ** 2 * EPS0)


def cp_potential(y, c4: float):
    """Casimir-Polder potential -C4 / y^4 (J) for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("cp_potential requires y > 0 (above the surface)")
    out = -c4 / y ** 4
    return float(out) if out.ndim == 0 else out


def surface_field(x, y, sigma_ell: Sequence[float], kappa_x: float):
    """Electrostatic field (E_x, E_y) of the Fourier-expanded surface charge.

    E = (1/eps0) sum_{l>=1} sigma_l e^{-l kappa_x y}
        (sin(l kappa_x x), cos(l kappa_x x)).

    Diagnostic helper; the solver consumes the potential components
    directly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("surface_field requires y > 0")
    ex = np.zeros(np.broadcast(x, y).shape)
    ey = np.zeros_like(ex)
    for ell, sig in enumerate(sigma_ell, start=1):
        damp = sig * np.exp(-ell * kappa_x * y) / EPS0
        ex = ex + damp * np.sin(ell * kappa_x * x)
        ey = ey + damp * np.cos(ell * kappa_x * x)
    if ex.ndim == 0:
        return float(ex), float(ey)
    return ex, ey


def electro_fourier(
    sigma_ell: Sequence[float],
    kappa_x: float,
    n: int,
    y,
    alpha: float,
    c4: float = 0.0,
    lmax: int = DEFAULT_LMAX,
):
    """n-th Fourier component V_n(y) of the interaction potential (J).

    V_n(y) = -(alpha / 2 eps0^2) sum_{l=1}^{lmax} sigma_l sigma_{l+|n|}
             e^{-(2l+|n|) kappa_x y};
    the specular component n = 0 additionally carries -c4/y^4.
    """
    if lmax < 1:
        raise ConfigurationError("Fourier truncation lmax must be >= 1")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("electro_fourier requires y > 0")
    sig = list(sigma_ell[:lmax]) + [0.0] * max(0, lmax - len(sigma_ell))
    total = np.zeros_like(y)
    j = abs(int(n))
    for ell in range(1, lmax + 1):
        s1 = sig[ell - 1]
        s2 = sig[ell + j - 1] if ell + j <= lmax else 0.0
        if s1 == 0.0 or s2 == 0.0:
            continue
        total = total + s1 * s2 * np.exp(-(2 * ell + j) * kappa_x * y)
    out = -alpha / (2.0 * EPS0 ** 2) * total
    if n == 0 and c4 != 0.0:
        out = out + cp_potential(y, c4)
    return float(out) if out.ndim == 0 else out


def stripe_coupling(n: int, y, f: float, sigma_m: float, kappa_x: float, alpha: float):
    """Coupling potential of a rectangular stripe grating (J).

    V_n(y) = -(alpha f / 2) (sigma_m e^{-kappa_x y} / eps0)^2 sinc(n f pi)
    """
    if not 0.0 <= f < 1.0:
        raise ConfigurationError("stripe fraction f must satisfy 0 <= f < 1")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("stripe_coupling requires y > 0")
    out = (
        -(alpha * f / 2.0)
        * (sigma_m * np.exp(-kappa_x * y) / EPS0) ** 2
        * sinc(n * f * math.pi)
    )
    return float(out) if np.ndim(out) == 0 else out


def gaussian_coupling(
    n: int, y, epsilon: float, d_z: float, sigma_m: float, kappa_x: float, alpha: float
):
    """Coupling potential of a Gaussian-bar grating (J).

    V_n(y) = -(alpha epsilon sqrt(pi) / 2 d_z)
             (sigma_m e^{-kappa_x y} / eps0)^2 exp[-(n epsilon pi / d_z)^2]
    """
    if not 0.0 < epsilon < d_z / 4.0:
        raise ConfigurationError(
            "gaussian width must satisfy 0 < epsilon < d_z/4 (no bar overlap)"
        )
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("gaussian_coupling requires y > 0")
    out = (
        -(alpha * epsilon * math.sqrt(math.pi) / (2.0 * d_z))
        * (sigma_m * np.exp(-kappa_x * y) / EPS0) ** 2
        * math.exp(-((n * epsilon * math.pi / d_z) ** 2))
    )
    return float(out) if np.ndim(out) == 0 else out


def intermediate_region_exists(sigma_1: float, d_x: float) -> bool:
    """Whether an electrostatically dominated region separates the two CP regions.

    Obtained by equating the CP and electrostatic parts of the specular
    potential and minimizing over y; the criterion depends only on
    sqrt(sigma_1) * d_x:

        sqrt(sigma_1) d_x >= e sqrt(e0) (3 pi)^{1/4} / (2 (4 alpha_fs)^{1/4})
    """
    if sigma_1 < 0.0:
        raise ConfigurationError("sigma_1 must be >= 0")
    if not d_x > 0.0:
        raise ConfigurationError("d_x must be > 0")
    threshold = (
        math.e
        * math.sqrt(E0)
        * (3.0 * math.pi) ** 0.25
        / (2.0 * (4.0 * ALPHA_FS) ** 0.25)
    )
    return math.sqrt(sigma_1) * d_x >= threshold


def coupling_fourier_coefficient(profile: DopingProfile, n: int, d_z: float) -> float:
    """Dimensionless grating factor c_n = (1/d_z) integral Delta^2(z) e^{-i n q_z z} dz.

    Closed forms: stripes give f sinc(n f pi); Gaussian bars give
    (epsilon sqrt(pi)/d_z) exp[-(n epsilon pi / d_z)^2].  Profiles with
    no z structure are specular only (c_0 = 1, c_n = 0 otherwise).
    """
    if isinstance(profile, StripeProfile):
        return profile.f * float(sinc(n * profile.f * math.pi))
    if isinstance(profile, GaussianProfile):
        eps = profile.epsilon
        return (
            eps * math.sqrt(math.pi) / d_z * math.exp(-((n * eps * math.pi / d_z) ** 2))
        )
    return 1.0 if n == 0 else 0.0


def z_modulation(profile: DopingProfile, z, d_z: float):
    """Periodic modulation Delta(z) of the doping amplitude (dimensionless)."""
    z = np.asarray(z, dtype=float)
    if isinstance(profile, StripeProfile):
        zz = np.mod(z + d_z / 2.0, d_z) - d_z / 2.0
        out = (np.abs(zz) < profile.f * d_z / 2.0).astype(float)
    elif isinstance(profile, GaussianProfile):
        out = np.zeros_like(z)
        for k in range(-3, 4):
            out = out + np.exp(-((z - k * d_z) ** 2) / (2.0 * profile.epsilon ** 2))
    else:
        out = np.ones_like(z)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# assembled potential table and reduced units
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scaling:
    """Reduced units: lengths in 1/kappa, energies in hbar^2 kappa^2 / 2m.

    Raw SI values of C4 (~1e-57 J m^4) produce dangerously small
    intermediate products; the solver therefore works in these units
    throughout and converts once at the boundary.
    """

    mass: float
    kappa: float

    @property
    def energy(self) -> float:
        """Energy unit hbar^2 kappa^2 / 2m in J."""
        return HBAR ** 2 * self.kappa ** 2 / (2.0 * self.mass)

    def length(self, y):
        """y (m) -> dimensionless kappa * y."""
        return self.kappa * np.asarray(y, dtype=float)

    def wavenumber(self, k):
        """k (1/m) -> dimensionless k / kappa."""
        return np.asarray(k, dtype=float) / self.kappa

    def potential_depth(self, v_joule):
        """|V| (J) -> dimensionless depth V / (hbar^2 kappa^2 / 2m)."""
        return np.asarray(v_joule, dtype=float) / self.energy

    def c4_reduced(self, c4: float) -> float:
        """C4 -> (b_CP kappa)^2 with b_CP = sqrt(2 m C4) / hbar."""
        return 2.0 * self.mass * c4 * self.kappa ** 2 / HBAR ** 2


class PotentialTable:
    """Fourier components of the full interaction potential.

    ``coupling_terms(j)`` returns the electrostatic part of V_j as a sum
    of decaying exponentials [(A, beta), ...] meaning
    V_j,el(y) = -sum A e^{-beta kappa_x y}; the CP part -c4/y^4 lives on
    the specular component only.  Instances are immutable and safe to
    share between threads.
    """

    def __init__(self, c4: float, kappa_x: float, term_builder, describe: str = ""):
        self.c4 = c4
        self.kappa_x = kappa_x
        self._term_builder = term_builder
        self.describe = describe

    def coupling_terms(self, j: int):
        """[(amplitude_J, decay multiple of kappa_x), ...] for order |j|."""
        return self._term_builder(abs(int(j)))

    def electrostatic(self, n: int, y):
        """Electrostatic part of V_n(y) in J."""
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0.0):
            raise ValueError("potential evaluated at or behind the surface")
        out = np.zeros_like(y)
        for amp, beta in self.coupling_terms(n):
            out = out - amp * np.exp(-beta * self.kappa_x * y)
        return float(out) if out.ndim == 0 else out

    def coupling(self, n: int, y):
        """Full V_n(y) in J; the n = 0 component includes the CP term."""
        out = self.electrostatic(n, y)
        if n == 0 and self.c4 != 0.0:
            out = out + cp_potential(y, self.c4)
        return out

    def specular(self, y):
        """Specular potential V_0(y) = V_CP(y) + electrostatic part (J)."""
        return self.coupling(0, y)

    def leading_order(self) -> "LeadingOrderSpecular":
        """CP + slowest exponential of V_0; feeds badlands and WKB bounds."""
        amp = 0.0
        for a, beta in self.coupling_terms(0):
            if abs(beta - 2.0) < 1e-12:
                amp += a
        return LeadingOrderSpecular(c4=self.c4, amplitude=amp, kappa=self.kappa_x)

    def reduced(self, scaling: Scaling, order_count: int) -> "ReducedCouplings":
        """Precompute reduced-unit coupling terms for |j| < order_count."""
        amps, betas = [], []
        width = 0
        rows = []
        for j in range(order_count):
            terms = [
                (scaling.potential_depth(a) , beta * self.kappa_x / scaling.kappa)
                for a, beta in self.coupling_terms(j)
            ]
            rows.append(terms)
            width = max(width, len(terms))
        width = max(width, 1)
        amp_arr = np.zeros((order_count, width))
        beta_arr = np.ones((order_count, width))
        for j, terms in enumerate(rows):
            for t, (a, b) in enumerate(terms):
                amp_arr[j, t] = a
                beta_arr[j, t] = b
        return ReducedCouplings(
            amplitudes=amp_arr,
            decays=beta_arr,
            c4r=scaling.c4_reduced(self.c4),
        )


@dataclass(frozen=True)
class ReducedCouplings:
    """Reduced-unit exponential terms: depth_j(y) = sum_t A[j,t] e^{-B[j,t] y}."""

    amplitudes: np.ndarray  # (orders, terms)
    decays: np.ndarray      # (orders, terms)
    c4r: float

    def depths(self, y_reduced: float) -> np.ndarray:
        """Electrostatic well depth (positive = attractive) per order at one y."""
        return (self.amplitudes * np.exp(-self.decays * y_reduced)).sum(axis=1)


@dataclass(frozen=True)
class LeadingOrderSpecular:
    """Specular potential in the form V(y) = -c4/y^4 - A e^{-2 kappa y} (SI)."""

    c4: float        # J m^4
    amplitude: float  # J
    kappa: float     # 1/m

    def value(self, y):
        y = np.asarray(y, dtype=float)
        out = -self.amplitude * np.exp(-2.0 * self.kappa * y)
        if self.c4 != 0.0:
            out = out - self.c4 / y ** 4
        return float(out) if out.ndim == 0 else out

    def reduced(self, scaling: Scaling) -> "ReducedSpecularPotential":
        return ReducedSpecularPotential(
            c4r=scaling.c4_reduced(self.c4),
            amp=scaling.potential_depth(self.amplitude),
            decay=2.0 * self.kappa / scaling.kappa,
            kappa=scaling.kappa,
        )


@dataclass(frozen=True)
class ReducedSpecularPotential:
    """Attractive well depth d(y) = c4r/y^4 + amp e^{-decay y} in reduced units.

    Carries analytic first and second derivatives; this is the reference
    potential for WKB initialization and for the badlands function.
    """

    c4r: float
    amp: float
    decay: float
    kappa: float  # 1/m, for converting back to SI lengths

    def depth(self, y):
        y = np.asarray(y, dtype=float)
        out = self.amp * np.exp(-self.decay * y)
        if self.c4r != 0.0:
            out = out + self.c4r / y ** 4
        return float(out) if out.ndim == 0 else out

    def depth_d1(self, y):
        y = np.asarray(y, dtype=float)
        out = -self.decay * self.amp * np.exp(-self.decay * y)
        if self.c4r != 0.0:
            out = out - 4.0 * self.c4r / y ** 5
        return float(out) if out.ndim == 0 else out

    def depth_d2(self, y):
        y = np.asarray(y, dtype=float)
        out = self.decay ** 2 * self.amp * np.exp(-self.decay * y)
        if self.c4r != 0.0:
            out = out + 20.0 * self.c4r / y ** 6
        return float(out) if out.ndim == 0 else out

    def local_momentum_sq(self, k2_reduced, y):
        """p^2(y) = k^2 + depth(y) for channel wavenumber squared k^2."""
        return k2_reduced + self.depth(y)


def build_potential_table(
    particle: ParticleParams,
    surface: SurfaceConfig,
    lmax: int = DEFAULT_LMAX,
    include_cp: bool = True,
) -> PotentialTable:
    """Assemble the potential table for a particle/surface pair.

    Stripe and Gaussian profiles couple z-diffraction orders through the
    closed-form grating factors; harmonic and fourier profiles describe
    pure x-doping via the sigma_l expansion.
    """
    if lmax < 1:
        raise ConfigurationError("Fourier truncation lmax must be >= 1")
    c4 = c4_coefficient(particle) if include_cp else 0.0
    alpha = particle.polarizability
    kap = surface.kappa_x
    profile = surface.profile

    if isinstance(profile, (StripeProfile, GaussianProfile)):
        flat = (alpha / 2.0) * (surface.sigma_m / EPS0) ** 2

        def build(j: int):
            cj = coupling_fourier_coefficient(profile, j, surface.d_z)
            if cj == 0.0:
                return []
            return [(flat * cj, 2.0)]

        label = type(profile).__name__
    else:
        if isinstance(profile, HarmonicProfile):
            sigma_ell = (surface.sigma_m / 2.0,)
        else:
            sigma_ell = profile.sigma_ell

        def build(j: int):
            terms = []
            for ell in range(1, lmax + 1):
                if ell > len(sigma_ell) or ell + j > len(sigma_ell):
                    break
                s1, s2 = sigma_ell[ell - 1], sigma_ell[ell + j - 1]
                if s1 == 0.0 or s2 == 0.0:
                    continue
                terms.append((alpha / (2.0 * EPS0 ** 2) * s1 * s2, float(2 * ell + j)))
            return terms

        label = type(profile).__name__

    return PotentialTable(c4=c4, kappa_x=kap, term_builder=build, describe=label)
