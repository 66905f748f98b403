"""Diffraction channels and the coupled-channel potential matrix.

A plane wave with total wavenumber k = m v0 / hbar hits the surface at
grazing angle theta (from the plane) and azimuth phi:

    k_x = k cos(theta) cos(phi),  k_y = -k sin(theta),
    k_z = k cos(theta) sin(phi).

A potential periodic along one in-plane axis with grating wavevector q
shifts that momentum component in integer multiples, so order n leaves
with normal wavenumber

    k_n = sqrt(k^2 - (k_par + n q)^2 - k_perp^2),

where k_par is the in-plane component along the grating axis and k_perp
the conserved one.  Orders with k_n^2 > 0 propagate (open); closed
orders carry k_n = i sqrt(|k_n^2|).  The coupled equations are

    (d^2/dy^2 + k_n^2) psi_n(y) - sum_m v_{n-m}(y) psi_m(y) = 0

with v the reduced potential Fourier components, i.e. in matrix form
psi'' + U(y) psi = 0 with U_{nm} = k_n^2 delta_{nm} - v_{n-m}(y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .errors import ConfigurationError
from .potentials import ParticleParams, PotentialTable, ReducedCouplings, Scaling

__all__ = [
    "BeamKinematics",
    "ChannelSet",
    "PotentialMatrixEvaluator",
    "beam_kinematics",
    "build_channels",
    "specular_channel",
    "potential_matrix",
]

# Orders with |k_n^2| below this fraction of k^2 sit numerically on the
# open/closed threshold and make the asymptotic matching ill-conditioned;
# they are classified closed and dropped.
OPEN_CHANNEL_EPS = 1.0e-8


@dataclass(frozen=True)
class BeamKinematics:
    """Incident wavevector decomposition; k_y < 0 points at the surface."""

    k: float
    k_x: float
    k_y: float
    k_z: float


def beam_kinematics(particle: ParticleParams) -> BeamKinematics:
    """Total wavenumber m v0 / hbar split into Cartesian components."""
    k = particle.mass * particle.speed / HBAR
    return BeamKinematics(
        k=k,
        k_x=k * math.cos(particle.theta) * math.cos(particle.phi),
        k_y=-k * math.sin(particle.theta),
        k_z=k * math.cos(particle.theta) * math.sin(particle.phi),
    )


@dataclass(frozen=True)
class ChannelSet:
    """Diffraction orders with their normal wavenumbers.

    ``orders`` is sorted ascending and contains every open order between
    the extreme open indices (the dispersion parabola makes the open set
    contiguous) plus ``n_closed_extra`` closed orders on each side.
    ``k_n`` holds k_n in 1/m: real positive for open orders, positive
    imaginary for closed ones.
    """

    orders: tuple
    k_n: tuple
    q: float
    axis: str
    open_flags: tuple
    k_total: float

    def __post_init__(self):
        if 0 not in self.orders:
            raise ConfigurationError("channel set must contain the specular order 0")

    @property
    def size(self) -> int:
        return len(self.orders)

    @property
    def index_of_specular(self) -> int:
        return self.orders.index(0)

    @property
    def open_orders(self) -> tuple:
        return tuple(n for n, o in zip(self.orders, self.open_flags) if o)

    def kn_squared(self) -> np.ndarray:
        """Real k_n^2 values (negative for closed orders)."""
        kn = np.asarray(self.k_n, dtype=complex)
        return np.real(kn * kn)


def build_channels(
    beam: BeamKinematics,
    q: float,
    n_closed_extra: int = 0,
    axis: str = "x",
) -> ChannelSet:
    """Enumerate diffraction orders for grating wavevector q along ``axis``.

    Open orders satisfy k_n^2 > eps k^2 with eps = 1e-8 (grazing-threshold
    orders are excluded as closed); ``n_closed_extra`` closed orders are
    appended on each side with k_n = i sqrt(|k_n^2|).
    """
    if not q > 0.0:
        raise ConfigurationError("grating wavevector q must be > 0")
    if n_closed_extra < 0:
        raise ConfigurationError("n_closed_extra must be >= 0")
    if axis not in ("x", "z"):
        raise ConfigurationError("diffraction axis must be 'x' or 'z'")

    k = beam.k
    if axis == "x":
        k_par, k_perp = beam.k_x, beam.k_z
    else:
        k_par, k_perp = beam.k_z, beam.k_x

    eps = OPEN_CHANNEL_EPS * k * k

    def kn2(n: int) -> float:
        # k^2 - k_perp^2 - (k_par + n q)^2, written so that the n = 0 value
        # is exactly k_y^2 (the direct form loses ~8 digits at grazing
        # incidence where k_par is close to k)
        return beam.k_y * beam.k_y - n * q * (2.0 * k_par + n * q)

    # the open set lies inside |k_par + n q| < k
    n_lo = math.floor((-k - k_par) / q) - 1
    n_hi = math.ceil((k - k_par) / q) + 1
    open_orders = [n for n in range(n_lo, n_hi + 1) if kn2(n) > eps]
    if not open_orders:
        raise ConfigurationError(
            "beam cannot scatter into any propagating order "
            "(all k_n^2 at or below the open-channel threshold)"
        )

    orders = list(range(open_orders[0] - n_closed_extra, open_orders[-1] + n_closed_extra + 1))
    k_n = []
    flags = []
    for n in orders:
        val = kn2(n)
        flags.append(val > eps)
        if val > 0.0:
            # sub-threshold but formally propagating orders keep a real k_n
            # so the energy identity holds; the open flag still drops them
            # from the asymptotic matching
            k_n.append(complex(math.sqrt(val), 0.0))
        else:
            k_n.append(complex(0.0, math.sqrt(-val)))

    return ChannelSet(
        orders=tuple(orders),
        k_n=tuple(k_n),
        q=q,
        axis=axis,
        open_flags=tuple(flags),
        k_total=k,
    )


def specular_channel(beam: BeamKinematics, q: float = 1.0) -> ChannelSet:
    """Single-channel set holding only the specular order (k_0 = -k_y).

    Used for the isolated specular equation, where the potential is
    x-independent and no diffraction orders couple.
    """
    k0 = -beam.k_y
    if not k0 > 0.0:
        raise ConfigurationError("beam must point at the surface (k_y < 0)")
    return ChannelSet(
        orders=(0,),
        k_n=(complex(k0, 0.0),),
        q=q,
        axis="x",
        open_flags=(True,),
        k_total=beam.k,
    )


class PotentialMatrixEvaluator:
    """Builds U(y) = diag(k_n^2) - v_{n-m}(y) in reduced units on demand.

    The electrostatic couplings form a Toeplitz matrix of decaying
    exponentials that is precomputed once; per grid point only the
    exponential profile and the CP diagonal are refreshed.  U is real for
    real potentials (closed orders contribute real negative k_n^2), which
    the propagator exploits.
    """

    def __init__(self, channels: ChannelSet, table: PotentialTable, scaling: Scaling):
        self.channels = channels
        self.scaling = scaling
        n = channels.size
        self._k2 = channels.kn_squared() / scaling.kappa ** 2
        reduced: ReducedCouplings = table.reduced(scaling, n)
        self._reduced = reduced
        idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        self._toeplitz_index = idx

    @property
    def size(self) -> int:
        return self.channels.size

    @property
    def c4r(self) -> float:
        return self._reduced.c4r

    def k2_reduced(self) -> np.ndarray:
        return self._k2.copy()

    def matrix(self, y_reduced: float) -> np.ndarray:
        """U at reduced height y (> 0)."""
        if y_reduced <= 0.0:
            raise ValueError("potential matrix evaluated at or behind the surface")
        depths = self._reduced.depths(y_reduced)
        u = depths[self._toeplitz_index]
        diag = self._k2.copy()
        if self._reduced.c4r != 0.0:
            diag = diag + self._reduced.c4r / y_reduced ** 4
        u[np.diag_indices_from(u)] += diag
        return u

    def scalar_profile(self, y_reduced: np.ndarray) -> np.ndarray:
        """Vectorized U(y) for a single-channel problem."""
        if self.size != 1:
            raise ValueError("scalar_profile is only defined for one channel")
        y = np.asarray(y_reduced, dtype=float)
        if np.any(y <= 0.0):
            raise ValueError("potential matrix evaluated at or behind the surface")
        amps = self._reduced.amplitudes[0]
        decs = self._reduced.decays[0]
        depth = (amps[None, :] * np.exp(-np.outer(y, decs))).sum(axis=1)
        if self._reduced.c4r != 0.0:
            depth = depth + self._reduced.c4r / y ** 4
        return self._k2[0] + depth


def potential_matrix(
    channels: ChannelSet,
    table: PotentialTable,
    y: float,
    scaling: Scaling,
) -> np.ndarray:
    """One-shot U(y) in reduced units (y in meters).

    Convenience wrapper over :class:`PotentialMatrixEvaluator`; repeated
    evaluation should construct the evaluator once.
    """
    if y <= 0.0:
        raise ValueError("potential matrix evaluated at or behind the surface")
    ev = PotentialMatrixEvaluator(channels, table, scaling)
    return ev.matrix(float(scaling.length(y)))
