"""Quantum reflection and matter-wave diffraction from periodically doped surfaces."""

from .constants import (
    ALPHA_FS,
    C_LIGHT,
    E0,
    EPS0,
    HBAR,
    HELIUM_MASS,
    HELIUM_POLARIZABILITY,
    HELIUM_POLARIZABILITY_VOLUME,
    polarizability_si,
)
from .errors import ConfigurationError, MatchingError, PropagationError, QReflectError
from .potentials import (
    DopingProfile,
    FourierProfile,
    GaussianProfile,
    HarmonicProfile,
    ParticleParams,
    PotentialTable,
    Scaling,
    StripeProfile,
    SurfaceConfig,
    build_potential_table,
    c4_coefficient,
    cp_potential,
    electro_fourier,
    gaussian_coupling,
    intermediate_region_exists,
    stripe_coupling,
    surface_field,
)
from .channels import (
    BeamKinematics,
    ChannelSet,
    PotentialMatrixEvaluator,
    beam_kinematics,
    build_channels,
    potential_matrix,
)
from .propagator import (
    LogDerivativeState,
    PropagatorConfig,
    ReflectionResult,
    extract_reflection,
    johnson_propagate,
    solve,
    wkb_init,
    wkb_local_momentum,
)

__version__ = "0.1.0"
