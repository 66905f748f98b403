import math

import numpy as np
import pytest

from qreflect.channels import (
    ChannelSet,
    PotentialMatrixEvaluator,
    beam_kinematics,
    build_channels,
    specular_channel,
)
from qreflect.constants import E0, HBAR, HELIUM_MASS
from qreflect.errors import ConfigurationError, MatchingError, PropagationError
from qreflect.potentials import (
    HarmonicProfile,
    ReducedSpecularPotential,
    Scaling,
    StripeProfile,
    SurfaceConfig,
    build_potential_table,
)
from qreflect.propagator import (
    LogDerivativeState,
    PropagatorConfig,
    auto_integration_bounds,
    badlands_reduced,
    extract_reflection,
    johnson_propagate,
    solve,
    wkb_init,
    wkb_local_momentum,
)
from conftest import helium_beam

DX = 500e-9
KAPPA = 2 * math.pi / DX


def exponential_surface(sigma_m=0.0307):
    """Harmonic doping whose specular well is a single exponential."""
    return SurfaceConfig(d_x=DX, d_z=40e-6, sigma_m=sigma_m, profile=HarmonicProfile())


def beam_with_k0dx(k0dx):
    k = HELIUM_MASS * 300.0 / HBAR
    k0 = k0dx / DX
    return helium_beam(theta=math.asin(k0 / k))


# ---------------------------------------------------------------------------
# WKB pieces
# ---------------------------------------------------------------------------

def test_wkb_local_momentum_free():
    pot = ReducedSpecularPotential(c4r=0.0, amp=0.0, decay=2.0, kappa=KAPPA)
    assert wkb_local_momentum(1.7**2, 5.0, pot) == pytest.approx(1.7, rel=1e-15)


def test_wkb_local_momentum_cp_asymptote():
    pot = ReducedSpecularPotential(c4r=0.25, amp=0.0, decay=2.0, kappa=KAPPA)
    for y in (1e-2, 1e-3, 1e-4):
        p = wkb_local_momentum(1.0, y, pot)
        assert (p * y**2 / math.sqrt(0.25)).real == pytest.approx(1.0, rel=1e-4 * (y / 1e-4) ** -0.0 if False else 1e-2)
    p = wkb_local_momentum(1.0, 1e-4, pot)
    assert (p * 1e-8 / 0.5).real == pytest.approx(1.0, rel=1e-8)


def test_wkb_local_momentum_order_differences():
    pot = ReducedSpecularPotential(c4r=0.3, amp=40.0, decay=2.0, kappa=KAPPA)
    y = 0.8
    p1 = wkb_local_momentum(1.3, y, pot)
    p2 = wkb_local_momentum(0.2, y, pot)
    assert (p1**2 - p2**2).real == pytest.approx(1.3 - 0.2, rel=1e-13)


def test_wkb_init_free_particle():
    helium = helium_beam()
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    pot = ReducedSpecularPotential(c4r=0.0, amp=0.0, decay=2.0, kappa=KAPPA)
    state = wkb_init(ch, pot, 1.0, sc, badlands_threshold=1e-6)
    k0_red = -beam.k_y / KAPPA
    assert state.z[0, 0] == pytest.approx(-1j * k0_red, rel=1e-14)


def test_wkb_init_deep_cp_asymptote():
    helium = helium_beam()
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    c4r = 0.146
    pot = ReducedSpecularPotential(c4r=c4r, amp=0.0, decay=2.0, kappa=KAPPA)
    y = 1e-3
    state = wkb_init(ch, pot, y, sc, badlands_threshold=1e-6)
    expected = -1j * math.sqrt(c4r) / y**2 + 1.0 / y
    assert state.z[0, 0] == pytest.approx(expected, rel=1e-6)


def test_wkb_init_is_diagonal_and_gated(helium, fig2a_surface):
    beam = beam_kinematics(helium)
    ch = build_channels(beam, fig2a_surface.q_z, axis="z")
    sc = Scaling(mass=helium.mass, kappa=fig2a_surface.kappa_x)
    table = build_potential_table(helium, fig2a_surface)
    lead = table.leading_order().reduced(sc)
    state = wkb_init(ch, lead, 0.012, sc, badlands_threshold=1e-4)
    off = state.z - np.diag(np.diag(state.z))
    assert np.abs(off).max() == 0.0
    with pytest.raises(ConfigurationError):
        wkb_init(ch, lead, 0.2, sc, badlands_threshold=1e-6)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def test_free_particle_plane_wave():
    helium = helium_beam()
    surface = exponential_surface(sigma_m=0.0)
    table = build_potential_table(helium, surface, include_cp=False)
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    ev = PotentialMatrixEvaluator(ch, table, sc)
    pot = ReducedSpecularPotential(c4r=0.0, amp=0.0, decay=2.0, kappa=KAPPA)
    state = wkb_init(ch, pot, 0.5, sc)
    cfg = PropagatorConfig(y_start=0.5 / KAPPA, y_end=12.5 / KAPPA, steps=20000, auto_bounds=False)
    out = johnson_propagate(state, cfg, ev, y_end_reduced=12.5)
    k0_red = -beam.k_y / KAPPA
    # the plane wave solves the discrete recurrence to O(h^4)
    assert out.z[0, 0] == pytest.approx(-1j * k0_red, rel=1e-11)
    res = extract_reflection(out, ch, sc)
    assert res.R_total < 1e-19


def test_matrix_path_matches_scalar_path(helium):
    """A decoupled diagonal system equals independent 1x1 propagations."""
    surface = exponential_surface(sigma_m=0.0)
    table = build_potential_table(helium, surface)  # CP only, no couplings
    beam = beam_kinematics(helium)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    k = beam.k

    orders = (-1, 0, 1)
    kns = (
        complex(0.7 * k, 0.0),
        complex(-beam.k_y, 0.0),
        complex(1.3 * -beam.k_y, 0.0),
    )
    ch3 = ChannelSet(
        orders=orders, k_n=kns, q=KAPPA, axis="z",
        open_flags=(True, True, True), k_total=k,
    )
    lead = table.leading_order().reduced(sc)
    ys, ye = 0.03, 12.0
    cfg = PropagatorConfig(steps=4000, auto_bounds=True)
    st3 = wkb_init(ch3, lead, ys, sc, badlands_threshold=1.0)
    ev3 = PotentialMatrixEvaluator(ch3, table, sc)
    out3 = johnson_propagate(st3, cfg, ev3, y_end_reduced=ye)

    for i, kn in enumerate(kns):
        ch1 = ChannelSet(
            orders=(0,), k_n=(kn,), q=KAPPA, axis="z",
            open_flags=(True,), k_total=k,
        )
        st1 = wkb_init(ch1, lead, ys, sc, badlands_threshold=1.0)
        ev1 = PotentialMatrixEvaluator(ch1, table, sc)
        out1 = johnson_propagate(st1, cfg, ev1, y_end_reduced=ye)
        assert out3.z[i, i] == pytest.approx(out1.z[0, 0], rel=1e-12)
    off = out3.z - np.diag(np.diag(out3.z))
    assert np.abs(off).max() == 0.0


def test_exponential_well_oracle_quick():
    for k0dx in (0.5, 2.0, 7.0):
        particle = beam_with_k0dx(k0dx)
        surface = exponential_surface()
        table = build_potential_table(particle, surface, include_cp=False)
        ch = specular_channel(beam_kinematics(particle), q=KAPPA)
        res = solve(particle, surface, ch, table, PropagatorConfig(steps=80000))
        exact = math.exp(-k0dx)
        assert res.R_total == pytest.approx(exact, rel=1e-3)


def test_convergence_is_fourth_order():
    particle = beam_with_k0dx(1.0)
    surface = exponential_surface()
    table = build_potential_table(particle, surface, include_cp=False)
    ch = specular_channel(beam_kinematics(particle), q=KAPPA)
    exact = math.exp(-1.0)
    errors = []
    for steps in (20000, 40000, 80000):
        res = solve(particle, surface, ch, table, PropagatorConfig(steps=steps))
        errors.append(abs(res.R_total - exact))
    for a, b in zip(errors, errors[1:]):
        assert 12.0 <= a / b <= 20.0


def test_extract_reflection_no_reflection():
    helium = helium_beam()
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    k0_red = -beam.k_y / KAPPA
    state = LogDerivativeState(
        z=np.array([[-1j * k0_red]], dtype=complex), y_reduced=30.0, kappa=KAPPA
    )
    res = extract_reflection(state, ch, sc)
    assert res.R_total == 0.0


def test_extract_reflection_singular_guard():
    helium = helium_beam()
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    k0_red = -beam.k_y / KAPPA
    state = LogDerivativeState(
        z=np.array([[1j * k0_red]], dtype=complex), y_reduced=30.0, kappa=KAPPA
    )
    with pytest.raises(MatchingError):
        extract_reflection(state, ch, sc)


def test_propagation_pole_reports_step():
    helium = helium_beam()
    surface = exponential_surface(sigma_m=0.0)
    table = build_potential_table(helium, surface, include_cp=False)
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=KAPPA)
    sc = Scaling(mass=helium.mass, kappa=KAPPA)
    ev = PotentialMatrixEvaluator(ch, table, sc)
    h = (2.0 - 1.0) / 100
    u0 = float(ev.scalar_profile(np.array([1.0]))[0])
    # arrange Y_0 = Z - (h/3) U_0 to sit exactly on the pole of (1 + h Y)
    state = LogDerivativeState(
        z=np.array([[-1.0 / h + (h / 3.0) * u0]], dtype=complex), y_reduced=1.0, kappa=KAPPA
    )
    cfg = PropagatorConfig(y_start=1.0 / KAPPA, y_end=2.0 / KAPPA, steps=100, auto_bounds=False)
    with pytest.raises(PropagationError) as err:
        johnson_propagate(state, cfg, ev, y_end_reduced=2.0)
    assert err.value.step is not None


def test_config_validation():
    with pytest.raises(ConfigurationError):
        PropagatorConfig(steps=101)  # odd
    with pytest.raises(ConfigurationError):
        PropagatorConfig(steps=2)
    with pytest.raises(ConfigurationError):
        PropagatorConfig(auto_bounds=False, y_start=None, y_end=1e-6)
    with pytest.raises(ConfigurationError):
        PropagatorConfig(auto_bounds=False, y_start=2e-6, y_end=1e-6)


def test_auto_bounds_satisfy_threshold(helium, fig2a_surface):
    sc = Scaling(mass=helium.mass, kappa=fig2a_surface.kappa_x)
    table = build_potential_table(helium, fig2a_surface)
    lead = table.leading_order().reduced(sc)
    beam = beam_kinematics(helium)
    k2 = (-beam.k_y / fig2a_surface.kappa_x) ** 2
    for thr in (1e-4, 1e-6):
        ys, ye = auto_integration_bounds(lead, k2, thr)
        assert badlands_reduced(lead, k2, ys) <= thr * (1 + 1e-6)
        assert badlands_reduced(lead, k2, ye) <= thr
        assert 0.0 < ys < ye


def test_y_end_doubling_invariance():
    """R is independent of the matching point once B is tiny there."""
    particle = helium_beam(theta=math.pi / 2, speed=0.0287)  # k0 b ~ 0.055
    table = build_potential_table(
        particle, SurfaceConfig(d_x=1.0, d_z=1.0, sigma_m=0.0, profile=HarmonicProfile())
    )
    b_cp = math.sqrt(2 * particle.mass * table.c4) / HBAR
    ch = specular_channel(beam_kinematics(particle))
    beam = beam_kinematics(particle)
    k0 = -beam.k_y
    y_c = math.sqrt(b_cp / k0)
    ys = 0.04 * y_c
    res = []
    for mult, steps in ((40.0, 40000), (80.0, 80000)):
        cfg = PropagatorConfig(
            y_start=ys, y_end=mult * y_c, steps=steps, auto_bounds=False
        )
        res.append(solve(particle, None, ch, table, cfg).R_total)
    assert abs(res[1] - res[0]) / res[0] < 1e-6


def test_richardson_diagnostics():
    particle = beam_with_k0dx(1.0)
    surface = exponential_surface()
    table = build_potential_table(particle, surface, include_cp=False)
    ch = specular_channel(beam_kinematics(particle), q=KAPPA)
    res = solve(
        particle, surface, ch, table,
        PropagatorConfig(steps=20000, richardson_check=True),
    )
    est = res.diagnostics.richardson_error
    assert est is not None
    # the estimate should bound the distance to the exact value
    assert abs(res.R_total - math.exp(-1.0)) <= 20.0 * est + 1e-12


def test_closed_channel_insensitivity(helium):
    """Extra strongly-closed orders change open-channel results negligibly."""
    beam = beam_kinematics(helium)
    k0 = -beam.k_y
    d_z = 11.5 * 2 * math.pi / k0  # puts the first closed order well below threshold
    surface = SurfaceConfig(
        d_x=DX, d_z=d_z, sigma_m=1e16 * E0, profile=StripeProfile(f=0.5)
    )
    table = build_potential_table(helium, surface)
    cfg = PropagatorConfig(steps=8000, badlands_threshold=1e-4)
    base = solve(
        helium, surface,
        build_channels(beam, surface.q_z, axis="z"),
        table, cfg,
    )
    # weak high orders feel the space truncation at the percent level adding
    # the first closed pair; the dominant orders must stay put
    for n_extra in (1, 2):
        extra = solve(
            helium, surface,
            build_channels(beam, surface.q_z, axis="z", n_closed_extra=n_extra),
            table, cfg,
        )
        assert len(extra.orders) == len(base.orders)  # closed orders dropped at matching
        for n in (0, 1):
            assert extra.order_probability(n) == pytest.approx(
                base.order_probability(n), rel=1.5e-2
            )
