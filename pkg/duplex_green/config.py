"""
Configuration module for the dual-field Green-operator toolkit.

This module contains all configuration constants, default values and
tolerances used throughout the package.
"""

from typing import Dict, Final, Tuple

import scipy.constants as const

# Application Settings
APP_NAME: Final[str] = "duplex-green"
APP_VERSION: Final[str] = "1.0.0"
SCHEMA_VERSION: Final[int] = 1
THREADS_ENV_VAR: Final[str] = "DUPLEX_THREADS"

# Physical Constants (CODATA, SI)
HBAR_SI: Final[float] = const.hbar
EPS0_SI: Final[float] = const.epsilon_0
MU0_SI: Final[float] = const.mu_0
C0_SI: Final[float] = const.c
Z0_SI: Final[float] = const.mu_0 * const.c

# Units Modes
UNITS_DIMENSIONLESS: Final[str] = "dimensionless"
UNITS_SI: Final[str] = "si"
UNITS_MODES: Final[Tuple[str, ...]] = (UNITS_DIMENSIONLESS, UNITS_SI)

# Field Layout
FIELD_COMPONENTS: Final[int] = 6
SCALAR_SECTOR: Final[Tuple[int, int]] = (0, 4)
TANGENTIAL_SECTOR: Final[Tuple[int, int, int, int]] = (0, 1, 3, 4)
SECTOR_ELECTRIC: Final[str] = "electric"
SECTOR_MAGNETIC: Final[str] = "magnetic"

# Validation Constraints
UNIT_NORMAL_TOLERANCE: Final[float] = 1e-12
QUADRATURE_MEASURE_TOLERANCE: Final[float] = 1e-12
MIN_CURL_NODES: Final[int] = 4
MIN_QUADRATURE_ORDER: Final[int] = 2
GRAZING_KZ_TOLERANCE: Final[float] = 1e-10
INTERFACE_CLEARANCE: Final[float] = 1e-9
RESIDUAL_FLOOR: Final[float] = 1e-300

# Quadrature Defaults
DEFAULT_VOLUME_ORDER: Final[int] = 64
DEFAULT_SPHERE_ORDERS: Final[Tuple[int, int]] = (32, 64)
DEFAULT_PANEL_ORDER: Final[int] = 16

# Finite-Difference Oracle
FD_MIN_POINTS_PER_WAVELENGTH: Final[int] = 20
FD_DEFAULT_POINTS_PER_WAVELENGTH: Final[int] = 200
FD_ETA_CAP: Final[float] = 1e-6
FD_CONDITION_LIMIT: Final[float] = 1e14
FD_RICHARDSON_FACTOR: Final[int] = 3
FD_MIN_NODE_SEPARATION: Final[int] = 4
FD_MIN_EDGE_NODES: Final[int] = 2

# Three-Dimensional Kernels
MIN_SEPARATION_WAVELENGTHS: Final[float] = 1e-3
QUADRATURE_SEPARATION_WAVELENGTHS: Final[float] = 1e-8
CURL_STEP_WAVELENGTHS: Final[float] = 1e-4
EXCLUSION_RADIUS_WAVELENGTHS: Final[float] = 0.05
PLANE_ENVELOPE_CUTOFF: Final[float] = 1e-12
PLANE_WINDOW_FRACTION: Final[float] = 0.1

# Tolerances
TOL_ANALYTIC: Final[float] = 1e-8
TOL_FINITE_DIFFERENCE: Final[float] = 1e-6
TOL_TRUNCATED: Final[float] = 1e-3
TOL_COMPOSITION: Final[float] = 1e-12
TOL_RECIPROCITY: Final[float] = 1e-10

# Identity Catalog
IDENTITY_CATALOG: Final[Tuple[str, ...]] = (
    "optical_theorem",
    "resolvent",
    "interior",
    "poynting",
    "reciprocity",
    "lorentz_reciprocity",
    "huygens",
    "commutator_closure",
    "io_noise",
    "pseudo_unitarity",
    "cascade",
)

IDENTITY_TOLERANCES: Final[Dict[str, float]] = {
    "optical_theorem": TOL_ANALYTIC,
    "resolvent": TOL_FINITE_DIFFERENCE,
    "interior": TOL_ANALYTIC,
    "poynting": TOL_ANALYTIC,
    "reciprocity": TOL_RECIPROCITY,
    "lorentz_reciprocity": TOL_ANALYTIC,
    "huygens": TOL_COMPOSITION,
    "commutator_closure": TOL_FINITE_DIFFERENCE,
    "io_noise": TOL_FINITE_DIFFERENCE,
    "pseudo_unitarity": TOL_COMPOSITION,
    "cascade": TOL_FINITE_DIFFERENCE,
}

# Quadrature-limited identities use TOL_TRUNCATED on 3D geometries
TRUNCATED_3D_IDENTITIES: Final[Tuple[str, ...]] = (
    "optical_theorem",
    "interior",
    "poynting",
    "lorentz_reciprocity",
    "huygens",
    "commutator_closure",
)

# Kernel Catalog
KERNEL_CATALOG: Final[Tuple[str, ...]] = (
    "homogeneous_1d",
    "finite_difference",
    "stratified",
    "homogeneous_3d",
)

# Exit Codes
EXIT_OK: Final[int] = 0
EXIT_IDENTITY_FAILURE: Final[int] = 1
EXIT_INPUT_ERROR: Final[int] = 2

# Display Settings
FLOAT_FORMAT: Final[str] = "%.17e"
LOG_FORMAT: Final[str] = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
