"""Log-derivative solution of the coupled-channel reflection problem.

The stationary coupled equations psi'' + U(y) psi = 0 are integrated
with Johnson's log-derivative method (B.R. Johnson, J. Comput. Phys. 13,
445 (1973)): the matrix Z = psi' psi^{-1} obeys the Riccati equation
Z' + Z^2 + U = 0, which the algorithm advances on an equidistant grid of
an even number of steps with O(h^4) global error.

Boundary conditions: near the surface the WKB wave of the attractive
reference potential is exact, so Z is initialized diagonally with

    Z_nn(y_s) = -i p_n(y_s) - p_n'(y_s) / (2 p_n(y_s)),
    p_n(y) = sqrt(k_n^2 + depth(y))     (reduced units),

at a starting point y_s chosen where the badlands function is below
threshold.  At the far end Z is matched to incoming/outgoing plane
waves, giving the reflection matrix

    R = e^{-iKy} (iK - Z)^{-1} (iK + Z) e^{-iKy},   K = diag(k_n),

whose specular column holds the reflection coefficients r_n; the
probabilities are R_n = |r_n|^2.

All propagation happens in reduced units (lengths in 1/kappa, energies
in hbar^2 kappa^2 / 2m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

try:  # BLAS thread pools lose badly against this step-by-step workload
    from threadpoolctl import threadpool_limits as _threadpool_limits
except ImportError:  # pragma: no cover
    from contextlib import nullcontext

    def _threadpool_limits(*args, **kwargs):
        return nullcontext()

from .channels import ChannelSet, PotentialMatrixEvaluator
from .errors import ConfigurationError, MatchingError, PropagationError
from .potentials import (
    ParticleParams,
    PotentialTable,
    ReducedSpecularPotential,
    Scaling,
    SurfaceConfig,
)
from .constants import HBAR

__all__ = [
    "PropagatorConfig",
    "LogDerivativeState",
    "ReflectionResult",
    "SolveDiagnostics",
    "wkb_local_momentum",
    "wkb_init",
    "johnson_propagate",
    "extract_reflection",
    "badlands_reduced",
    "auto_integration_bounds",
    "solve",
]

DEFAULT_STEPS = 20000
DEFAULT_BADLANDS_THRESHOLD = 1.0e-6


@dataclass(frozen=True)
class PropagatorConfig:
    """Grid and bounds for one propagation.

    ``y_start``/``y_end`` are in meters and are ignored when
    ``auto_bounds`` is set, in which case both are placed where the
    badlands function falls below ``badlands_threshold``.
    """

    y_start: float | None = None
    y_end: float | None = None
    steps: int = DEFAULT_STEPS
    auto_bounds: bool = True
    richardson_check: bool = False
    badlands_threshold: float = DEFAULT_BADLANDS_THRESHOLD

    def __post_init__(self):
        if self.steps % 2 != 0 or self.steps < 4:
            raise ConfigurationError("steps must be an even number >= 4")
        if not self.auto_bounds:
            if self.y_start is None or self.y_end is None:
                raise ConfigurationError(
                    "y_start and y_end are required when auto_bounds is off"
                )
            if not 0.0 < self.y_start < self.y_end:
                raise ConfigurationError("need 0 < y_start < y_end")
        if not 0.0 < self.badlands_threshold < 1.0:
            raise ConfigurationError("badlands_threshold must be in (0, 1)")


@dataclass
class LogDerivativeState:
    """Log-derivative matrix Z at reduced position y (lengths in 1/kappa)."""

    z: np.ndarray
    y_reduced: float
    kappa: float

    @property
    def y_meters(self) -> float:
        return self.y_reduced / self.kappa

    @property
    def size(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class SolveDiagnostics:
    steps: int
    y_start_m: float
    y_end_m: float
    richardson_error: float | None = None
    warnings: tuple = ()


@dataclass(frozen=True)
class ReflectionResult:
    """Reflection amplitudes per open diffraction order.

    ``r_n[i]`` belongs to ``orders[i]``; ``R_n = |r_n|^2`` and
    ``R_total = sum R_n`` (quantum reflection off a purely attractive
    tail conserves at most the incoming flux, so R_total <= 1).
    """

    orders: tuple
    k_n: tuple          # 1/m, real (open orders only)
    r_n: np.ndarray     # complex amplitudes
    R_n: np.ndarray     # probabilities
    R_total: float
    diagnostics: SolveDiagnostics

    def order_probability(self, n: int) -> float:
        return float(self.R_n[self.orders.index(n)])

    def order_amplitude(self, n: int) -> complex:
        return complex(self.r_n[self.orders.index(n)])


# ---------------------------------------------------------------------------
# WKB pieces
# ---------------------------------------------------------------------------

def wkb_local_momentum(k2_reduced, y_reduced, potential: ReducedSpecularPotential):
    """Reduced local momentum p(y) = sqrt(k^2 + depth(y)) of one channel.

    Closed channels (k^2 < 0) continue onto the positive imaginary
    branch once the well no longer dominates.
    """
    g = np.asarray(k2_reduced, dtype=complex) + potential.depth(y_reduced)
    out = np.sqrt(g)
    return complex(out) if out.ndim == 0 else out


def badlands_reduced(potential: ReducedSpecularPotential, k2_reduced: float, y_reduced):
    """Badlands function B(y) = |(3/4) p'^2 / p^4 - p'' / (2 p^3)| (hbar = 1).

    Written via g = p^2 = k^2 + depth(y) with analytic derivatives:
    B = |(5/16) g'^2 / g^3 - g'' / (4 g^2)|.  B << 1 marks regions where
    the WKB wave is an accurate solution; quantum reflection originates
    where B is appreciable.
    """
    y = np.asarray(y_reduced, dtype=float)
    g = k2_reduced + potential.depth(y)
    g1 = potential.depth_d1(y)
    g2 = potential.depth_d2(y)
    out = np.abs(5.0 / 16.0 * g1 * g1 / g ** 3 - g2 / (4.0 * g * g))
    return float(out) if out.ndim == 0 else out


def wkb_init(
    channels: ChannelSet,
    potential: ReducedSpecularPotential,
    y_start_reduced: float,
    scaling: Scaling,
    badlands_threshold: float = DEFAULT_BADLANDS_THRESHOLD,
) -> LogDerivativeState:
    """Diagonal WKB log-derivative at the inner boundary.

    Z_nn = -i p_n - p_n'/(2 p_n) with the analytic derivative of the
    reference potential; requires the specular badlands function to be
    below threshold at ``y_start_reduced``.
    """
    if y_start_reduced <= 0.0:
        raise ConfigurationError("y_start must be > 0")
    k2 = channels.kn_squared() / scaling.kappa ** 2
    i0 = channels.index_of_specular
    b_here = badlands_reduced(potential, float(k2[i0]), y_start_reduced)
    if b_here > badlands_threshold * (1.0 + 1e-9):
        raise ConfigurationError(
            f"WKB start point invalid: badlands B(y_start) = {b_here:.3e} exceeds "
            f"{badlands_threshold:.1e}; choose a smaller y_start (deeper in the "
            "well) or strengthen the potential"
        )
    g = k2.astype(complex) + potential.depth(y_start_reduced)
    p = np.sqrt(g)
    g1 = potential.depth_d1(y_start_reduced)
    diag = -1j * p - g1 / (4.0 * g)
    z = np.diag(diag)
    return LogDerivativeState(z=z, y_reduced=float(y_start_reduced), kappa=scaling.kappa)


# ---------------------------------------------------------------------------
# Johnson propagation
# ---------------------------------------------------------------------------

def _propagate_scalar(z0: complex, y0: float, h: float, steps: int, u: np.ndarray) -> complex:
    """Single-channel recurrence on precomputed potential values u[m]."""
    hh6 = h * h / 6.0
    third = h / 3.0
    y = z0 - third * u[0]
    m = 0
    try:
        for m in range(1, steps + 1):
            um = u[m]
            y = y / (1.0 + h * y)
            if m % 2 == 1:
                y -= 4.0 * third * (um / (1.0 + hh6 * um))
            elif m < steps:
                y -= 2.0 * third * um
            else:
                y -= third * um
    except ZeroDivisionError as exc:
        raise PropagationError(
            f"log-derivative pole hit a grid point at step {m}; grid too coarse",
            step=m,
        ) from exc
    return y


def johnson_propagate(
    state: LogDerivativeState,
    config: PropagatorConfig,
    evaluator: PotentialMatrixEvaluator,
    y_end_reduced: float | None = None,
) -> LogDerivativeState:
    """Advance Z from the state's position to y_end on an equidistant grid.

    Two-step cycle: from the initialization Y_0 = Z - (h/3) U_0, odd
    points contribute (4h/3)(I + h^2 U/6)^{-1} U, even points (2h/3) U,
    and the final even point (h/3) U.  Inversions are performed as
    linear solves; a singular step aborts with its index.
    """
    if y_end_reduced is None:
        if config.y_end is None:
            raise ConfigurationError("johnson_propagate needs a target y_end")
        y_end_reduced = config.y_end * state.kappa
    steps = config.steps
    y0 = state.y_reduced
    if not y_end_reduced > y0:
        raise ConfigurationError("y_end must exceed y_start")
    h = (y_end_reduced - y0) / steps

    n = state.size
    if n == 1:
        ys = y0 + h * np.arange(steps + 1)
        u = evaluator.scalar_profile(ys)
        z = _propagate_scalar(complex(state.z[0, 0]), y0, h, steps, u)
        return LogDerivativeState(
            z=np.array([[z]], dtype=complex), y_reduced=float(y_end_reduced), kappa=state.kappa
        )

    eye = np.eye(n)
    hh6 = h * h / 6.0
    third = h / 3.0
    y = state.z - third * evaluator.matrix(y0)
    m = 0
    try:
        # matrices this small gain nothing from BLAS threads; the pool
        # wake/sleep churn between steps costs close to an order of magnitude
        with _threadpool_limits(limits=1):
            for m in range(1, steps + 1):
                um = evaluator.matrix(y0 + m * h)
                y = np.linalg.solve(eye + h * y, y)
                if m % 2 == 1:
                    w = sla.solve(eye + hh6 * um, um, assume_a="sym", check_finite=False)
                    y -= 4.0 * third * w
                elif m < steps:
                    y -= 2.0 * third * um
                else:
                    y -= third * um
    except np.linalg.LinAlgError as exc:
        raise PropagationError(
            f"singular linear system at step {m}; grid too coarse", step=m
        ) from exc
    if not np.all(np.isfinite(y)):
        raise PropagationError(
            f"non-finite log-derivative after step {m}", step=m
        )
    return LogDerivativeState(z=y, y_reduced=float(y_end_reduced), kappa=state.kappa)


# ---------------------------------------------------------------------------
# asymptotic matching
# ---------------------------------------------------------------------------

def extract_reflection(
    state: LogDerivativeState,
    channels: ChannelSet,
    scaling: Scaling,
    diagnostics: SolveDiagnostics | None = None,
) -> ReflectionResult:
    """Match Z to plane waves and read off the specular column of R.

    Requires the potential to be negligible at the state's position
    (badlands below threshold); closed channels are dropped here, the
    matching being defined for propagating waves only.
    """
    open_idx = [i for i, is_open in enumerate(channels.open_flags) if is_open]
    if not open_idx:
        raise MatchingError("no open channels to match")
    orders = tuple(channels.orders[i] for i in open_idx)
    if 0 not in orders:
        raise MatchingError("specular order is not open; nothing is incident")
    kn = np.array([channels.k_n[i].real for i in open_idx], dtype=float)
    k_red = kn / scaling.kappa
    zoo = state.z[np.ix_(open_idx, open_idx)]
    ik = 1j * np.diag(k_red)
    try:
        s = np.linalg.solve(ik - zoo, ik + zoo)
    except np.linalg.LinAlgError as exc:
        raise MatchingError(
            "asymptotic matching failed: (iK - Z) is singular at y_end"
        ) from exc
    if not np.all(np.isfinite(s)):
        raise MatchingError("asymptotic matching produced non-finite entries")
    phase = np.exp(-1j * k_red * state.y_reduced)
    r_matrix = phase[:, None] * s * phase[None, :]
    i0 = orders.index(0)
    r_n = r_matrix[:, i0]
    big_r = np.abs(r_n) ** 2
    if diagnostics is None:
        diagnostics = SolveDiagnostics(
            steps=0, y_start_m=float("nan"), y_end_m=state.y_meters
        )
    return ReflectionResult(
        orders=orders,
        k_n=tuple(kn),
        r_n=r_n,
        R_n=big_r,
        R_total=float(big_r.sum()),
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# integration bounds
# ---------------------------------------------------------------------------

def auto_integration_bounds(
    potential: ReducedSpecularPotential,
    k0_sq_reduced: float,
    threshold: float = DEFAULT_BADLANDS_THRESHOLD,
) -> tuple[float, float]:
    """Reduced [y_start, y_end] with B below threshold at both ends.

    y_start sits at the inner crossing of B = threshold (the WKB wave is
    exact deeper in); y_end starts from max(10 y_cp, 10/(2 kappa_x)) and
    doubles until B has decayed below threshold.
    """

    def bfun(y):
        return badlands_reduced(potential, k0_sq_reduced, y)

    if potential.c4r > 0.0:
        y_scale = (potential.c4r / k0_sq_reduced) ** 0.25
    elif potential.amp > 0.0 and potential.decay > 0.0:
        # depth comparable to k0^2 marks the reflection region
        y_scale = max(math.log(max(potential.amp / k0_sq_reduced, 2.0)), 1.0) / potential.decay
    else:
        raise ConfigurationError("auto bounds need a non-trivial attractive potential")

    # map the badlands landscape on a broad log grid; composite potentials
    # can show several humps (CP/electrostatic crossover plus the
    # electrostatic peak), so the inner bound must sit on the rising flank
    # of the INNERMOST hump and the outer bound beyond the outermost one
    grid = np.geomspace(y_scale * 1e-4, y_scale * 1e3, 600)
    bvals = np.array([bfun(y) for y in grid])
    i_peak = int(np.argmax(bvals))
    b_peak = bvals[i_peak]
    if b_peak <= threshold:
        raise ConfigurationError(
            "badlands function never exceeds the threshold; the potential is too "
            "weak to define WKB bounds (nothing to reflect)"
        )
    y_peak = grid[i_peak]

    above = np.nonzero(bvals >= threshold)[0]
    i_first = above[0]
    if i_first == 0:
        raise ConfigurationError(
            "badlands exceeds threshold all the way to the surface; choose a "
            "smaller y_start explicitly or strengthen the potential"
        )
    y_start = brentq(
        lambda y: bfun(y) - threshold, grid[i_first - 1], grid[i_first],
        xtol=1e-14, rtol=1e-14,
    )
    # step just inside so B(y_start) <= threshold despite roundoff
    y_start *= 1.0 - 1e-9

    if potential.amp > 0.0 and potential.decay > 0.0:
        exp_scale = 10.0 / potential.decay  # 10 / (2 kappa_x) in reduced units
    else:
        exp_scale = 0.0
    y_end = max(10.0 * (potential.c4r / k0_sq_reduced) ** 0.25 if potential.c4r > 0 else 0.0,
                exp_scale, 1.05 * grid[above[-1]], 2.0 * y_peak)
    for _ in range(80):
        if bfun(y_end) < threshold:
            break
        y_end *= 2.0
    else:
        raise ConfigurationError("could not find an asymptotic y_end (B stays large)")
    return float(y_start), float(y_end)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def _wkb_reference(table: PotentialTable, scaling: Scaling) -> ReducedSpecularPotential:
    """Leading-order specular potential that anchors WKB init and bounds.

    Deep in the CP region this coincides with the CP-only momentum (the
    exponential term is negligible there); for purely electrostatic wells
    the exponential term is all there is.
    """
    return table.leading_order().reduced(scaling)


def solve(
    particle: ParticleParams,
    surface: SurfaceConfig | None,
    channels: ChannelSet,
    table: PotentialTable,
    config: PropagatorConfig,
) -> ReflectionResult:
    """WKB init -> Johnson propagation -> plane-wave matching.

    With ``richardson_check`` the solve is repeated at doubled step count
    and the maximum change of any R_n is reported as the error estimate
    (the finer grid provides the returned values).
    """
    if surface is not None:
        kappa = surface.kappa_x
    elif table.c4 > 0.0:
        kappa = HBAR / math.sqrt(2.0 * particle.mass * table.c4)  # 1 / b_CP
    else:
        raise ConfigurationError("need a surface or a CP coefficient to set the length scale")
    scaling = Scaling(mass=particle.mass, kappa=kappa)
    evaluator = PotentialMatrixEvaluator(channels, table, scaling)
    lead = _wkb_reference(table, scaling)

    i0 = channels.index_of_specular
    k0_sq = channels.kn_squared()[i0] / kappa ** 2
    if config.auto_bounds:
        ys, ye = auto_integration_bounds(lead, k0_sq, config.badlands_threshold)
    else:
        ys = config.y_start * kappa
        ye = config.y_end * kappa
        for label, yy in (("y_start", ys), ("y_end", ye)):
            b = badlands_reduced(lead, k0_sq, yy)
            if b > config.badlands_threshold * (1.0 + 1e-9):
                raise ConfigurationError(
                    f"{label} lies inside the badlands region (B = {b:.3e} > "
                    f"{config.badlands_threshold:.1e}); widen the integration range"
                )

    def run(steps: int) -> ReflectionResult:
        cfg = replace(config, steps=steps)
        state = wkb_init(channels, lead, ys, scaling, config.badlands_threshold)
        state = johnson_propagate(state, cfg, evaluator, y_end_reduced=ye)
        diag = SolveDiagnostics(
            steps=steps, y_start_m=ys / kappa, y_end_m=ye / kappa
        )
        return extract_reflection(state, channels, scaling, diag)

    result = run(config.steps)
    if config.richardson_check:
        fine = run(2 * config.steps)
        err = float(np.max(np.abs(fine.R_n - result.R_n)))
        result = ReflectionResult(
            orders=fine.orders,
            k_n=fine.k_n,
            r_n=fine.r_n,
            R_n=fine.R_n,
            R_total=fine.R_total,
            diagnostics=replace(fine.diagnostics, richardson_error=err),
        )
    return result
