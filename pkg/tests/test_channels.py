import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qreflect.channels import (
    PotentialMatrixEvaluator,
    beam_kinematics,
    build_channels,
    potential_matrix,
    specular_channel,
)
from qreflect.constants import E0, HBAR, HELIUM_MASS
from qreflect.errors import ConfigurationError
from qreflect.potentials import (
    HarmonicProfile,
    Scaling,
    StripeProfile,
    SurfaceConfig,
    build_potential_table,
)
from conftest import helium_beam

# m v0 / hbar for the helium preset at 300 m/s, direct evaluation
HELIUM_K300 = 1.8907597357117687e10


def test_kinematics_normal_incidence():
    beam = beam_kinematics(helium_beam(theta=math.pi / 2, phi=0.0))
    assert beam.k_x == pytest.approx(0.0, abs=beam.k * 1e-15)
    assert beam.k_y == pytest.approx(-beam.k, rel=1e-15)
    assert beam.k_z == 0.0


def test_kinematics_zero_azimuth():
    beam = beam_kinematics(helium_beam(phi=0.0))
    assert beam.k_z == 0.0


def test_kinematics_helium_value():
    beam = beam_kinematics(helium_beam())
    assert beam.k == pytest.approx(HELIUM_K300, rel=1e-12)
    assert -beam.k_y == pytest.approx(beam.k * math.sin(1e-3), rel=1e-14)


@given(
    theta=st.floats(min_value=1e-4, max_value=math.pi / 2),
    phi=st.floats(min_value=0.0, max_value=2 * math.pi, exclude_max=True),
)
@settings(max_examples=40, deadline=None)
def test_kinematics_norm_identity(theta, phi):
    beam = beam_kinematics(helium_beam(theta=theta, phi=phi))
    norm = beam.k_x**2 + beam.k_y**2 + beam.k_z**2
    assert norm == pytest.approx(beam.k**2, rel=1e-12)
    assert beam.k_y < 0.0


def test_build_channels_single_open():
    beam = beam_kinematics(helium_beam(theta=math.pi / 2))
    ch = build_channels(beam, q=2.0 * beam.k)
    assert ch.orders == (0,)
    assert ch.open_flags == (True,)
    assert ch.k_n[0].real == pytest.approx(beam.k, rel=1e-14)


def test_build_channels_symmetric():
    # k_x = k cos(pi/2) is zero only to machine precision, so compare values
    beam = beam_kinematics(helium_beam(theta=math.pi / 2))
    ch = build_channels(beam, q=beam.k / 5.7)
    for n, kn in zip(ch.orders, ch.k_n):
        mirror = ch.k_n[ch.orders.index(-n)]
        assert kn == pytest.approx(mirror, rel=1e-12)


def test_build_channels_fig2_brute_force(helium, fig2a_surface):
    """Open z-orders agree with an exhaustive scan of n in [-1e6, 1e6]."""
    beam = beam_kinematics(helium)
    q = fig2a_surface.q_z
    ch = build_channels(beam, q, axis="z")
    n = np.arange(-10**6, 10**6 + 1)
    kn2 = beam.k**2 - beam.k_x**2 - (beam.k_z + n * q) ** 2
    eps = 1e-8 * beam.k**2
    open_brute = n[kn2 > eps]
    assert ch.orders == tuple(open_brute)
    assert all(ch.open_flags)
    assert list(ch.orders) == sorted(ch.orders)
    # contiguous: no gaps between extreme open indices
    assert len(ch.orders) == ch.orders[-1] - ch.orders[0] + 1


def test_build_channels_energy_conservation(helium, fig2a_surface):
    beam = beam_kinematics(helium)
    q = fig2a_surface.q_z
    ch = build_channels(beam, q, axis="z", n_closed_extra=3)
    for n, kn in zip(ch.orders, ch.k_n):
        total = (kn**2).real + (beam.k_z + n * q) ** 2 + beam.k_x**2
        assert total == pytest.approx(beam.k**2, rel=1e-12)


def test_build_channels_closed_extras():
    beam = beam_kinematics(helium_beam(theta=math.pi / 2))
    ch = build_channels(beam, q=beam.k / 2.5, n_closed_extra=2)
    closed = [(n, k) for n, k, o in zip(ch.orders, ch.k_n, ch.open_flags) if not o]
    assert len(closed) == 4
    for n, k in closed:
        assert k.real == 0.0 and k.imag > 0.0
    assert ch.open_orders == tuple(n for n in ch.orders if abs(n) <= 2)


def test_build_channels_k0_matches_normal_component():
    beam = beam_kinematics(helium_beam(theta=2e-3, phi=0.3))
    ch = build_channels(beam, q=1e5, axis="z")
    i0 = ch.orders.index(0)
    assert ch.k_n[i0].real == pytest.approx(-beam.k_y, rel=1e-12)


def test_build_channels_no_open_error():
    beam = beam_kinematics(helium_beam(theta=1e-5))
    # sin(theta)^2 = 1e-10 < 1e-8, so even the specular order is sub-threshold
    with pytest.raises(ConfigurationError):
        build_channels(beam, q=beam.k * 10.0, axis="z")


def test_potential_matrix_diagonal_when_uncoupled(helium):
    surface = SurfaceConfig(d_x=500e-9, d_z=40e-6, sigma_m=0.0, profile=HarmonicProfile())
    table = build_potential_table(helium, surface, include_cp=False)
    beam = beam_kinematics(helium)
    ch = build_channels(beam, surface.q_z, axis="z")
    sc = Scaling(mass=helium.mass, kappa=surface.kappa_x)
    u = potential_matrix(ch, table, 100e-9, sc)
    k2 = ch.kn_squared() / surface.kappa_x**2
    assert np.allclose(u, np.diag(k2), rtol=0, atol=1e-18)


def test_potential_matrix_single_channel_cp(helium):
    surface = SurfaceConfig(d_x=500e-9, d_z=40e-6, sigma_m=0.0, profile=HarmonicProfile())
    table = build_potential_table(helium, surface)
    beam = beam_kinematics(helium)
    ch = specular_channel(beam, q=surface.kappa_x)
    sc = Scaling(mass=helium.mass, kappa=surface.kappa_x)
    y = 80e-9
    u = potential_matrix(ch, table, y, sc)
    k0 = -beam.k_y
    expected = (k0**2 + 2 * helium.mass * table.c4 / (HBAR**2 * y**4)) / surface.kappa_x**2
    assert u.shape == (1, 1)
    assert u[0, 0] == pytest.approx(expected, rel=1e-12)


def test_potential_matrix_stripe_band_zeros(helium, fig2a_surface):
    """f = 1/2 zeroes every even coupling order except the diagonal."""
    table = build_potential_table(helium, fig2a_surface)
    beam = beam_kinematics(helium)
    ch = build_channels(beam, fig2a_surface.q_z, axis="z")
    sc = Scaling(mass=helium.mass, kappa=fig2a_surface.kappa_x)
    u = potential_matrix(ch, table, 50e-9, sc)
    n = ch.size
    scale = np.abs(u).max()
    for i in range(0, n, 17):
        for j in range(0, n, 13):
            d = abs(i - j)
            if d != 0 and d % 2 == 0:
                assert abs(u[i, j]) < scale * 1e-15
            elif d % 2 == 1:
                assert abs(u[i, j]) > 0.0
    assert np.array_equal(u, u.T)


def test_potential_matrix_asymptotic_diagonal(helium):
    """U -> diag(k_n^2) far away (electrostatic-only table at y = 50/kappa)."""
    surface = SurfaceConfig(
        d_x=500e-9, d_z=40e-6, sigma_m=1e16 * E0, profile=StripeProfile(f=0.5)
    )
    table = build_potential_table(helium, surface, include_cp=False)
    beam = beam_kinematics(helium)
    ch = build_channels(beam, surface.q_z, axis="z")
    sc = Scaling(mass=helium.mass, kappa=surface.kappa_x)
    y = 50.0 / surface.kappa_x
    u = potential_matrix(ch, table, y, sc)
    k2 = ch.kn_squared() / surface.kappa_x**2
    assert np.all(np.abs(np.diag(u) - k2) <= 1e-10 * np.abs(k2))
    off = u - np.diag(np.diag(u))
    assert np.abs(off).max() < 1e-10 * np.abs(k2).min()


def test_potential_matrix_asymptotic_diagonal_with_cp(helium):
    """With CP the 1e-10 relative diagonal limit needs a gentler kappa scale."""
    surface = SurfaceConfig(
        d_x=10e-6, d_z=40e-6, sigma_m=1e14 * E0, profile=StripeProfile(f=0.5)
    )
    table = build_potential_table(helium, surface)
    beam = beam_kinematics(helium)
    ch = build_channels(beam, surface.q_z, axis="z")
    sc = Scaling(mass=helium.mass, kappa=surface.kappa_x)
    y = 50.0 / surface.kappa_x
    u = potential_matrix(ch, table, y, sc)
    k2 = ch.kn_squared() / surface.kappa_x**2
    assert np.all(np.abs(np.diag(u) - k2) <= 1e-10 * np.abs(k2))


def test_potential_matrix_domain_error(helium, fig2a_surface):
    table = build_potential_table(helium, fig2a_surface)
    ch = specular_channel(beam_kinematics(helium), q=fig2a_surface.kappa_x)
    sc = Scaling(mass=helium.mass, kappa=fig2a_surface.kappa_x)
    with pytest.raises(ValueError):
        potential_matrix(ch, table, -1e-9, sc)


def test_evaluator_scalar_profile_matches_matrix(helium, fig2a_surface):
    table = build_potential_table(helium, fig2a_surface)
    ch = specular_channel(beam_kinematics(helium), q=fig2a_surface.kappa_x)
    sc = Scaling(mass=helium.mass, kappa=fig2a_surface.kappa_x)
    ev = PotentialMatrixEvaluator(ch, table, sc)
    ys = np.array([0.05, 0.7, 3.0])
    profile = ev.scalar_profile(ys)
    for y, val in zip(ys, profile):
        assert val == pytest.approx(ev.matrix(float(y))[0, 0], rel=1e-14)
