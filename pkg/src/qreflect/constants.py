"""Physical constants and particle presets.

All constants are CODATA 2018 and frozen here so that every number the
package emits is bit-reproducible.  Everything downstream imports from
this table; nothing re-defines ``hbar`` or ``eps0`` locally.
"""

import math

# CODATA 2018 (h, c and e0 are exact by definition since the SI reform)
HBAR = 1.054571817e-34          # J s
C_LIGHT = 299792458.0           # m / s
EPS0 = 8.8541878128e-12         # F / m
E0 = 1.602176634e-19            # C  (elementary charge)

# Fine structure constant, derived from the table above (~1/137.036)
ALPHA_FS = E0 ** 2 / (4.0 * math.pi * EPS0 * HBAR * C_LIGHT)


def polarizability_si(volume_m3: float) -> float:
    """Convert a polarizability volume (m^3) to SI units (C m^2 / V)."""
    return 4.0 * math.pi * EPS0 * volume_m3


# Helium-4 preset: atomic mass 4.002602 u, static polarizability
# volume 0.2050e-30 m^3 (1.383 atomic units).
HELIUM_MASS = 6.6464731e-27             # kg
HELIUM_POLARIZABILITY_VOLUME = 0.2050e-30   # m^3
HELIUM_POLARIZABILITY = polarizability_si(HELIUM_POLARIZABILITY_VOLUME)
