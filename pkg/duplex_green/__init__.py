"""
duplex_green: first-order dual-field Maxwell Green operators.

Analytic, stratified, finite-difference and 3D homogeneous kernels of the
dual field [E; Z0 H], the identities they satisfy, and the quantized noise
layer built on them.
"""

from .config import APP_VERSION as __version__
from .core import GreenKernel, dual_cross, energy_inner, reciprocal_inner, surface_pairing
from .green1d import (
    FiniteDifferenceGreen,
    HomogeneousGreen1D,
    StratifiedGreen,
    compose,
    fd_green_1d,
    homogeneous_green_1d,
    stratified_green,
    transfer_kernel,
)
from .green3d import Green6, dyadic_gE, first_from_second
from .models import (
    CascadeBudget,
    CommutatorMatrix,
    DualField,
    DualSource,
    Geometry,
    IdentityReport,
    MaterialProfile,
    MaterialTensor,
    Medium,
    TransferKernel,
    UnitsMode,
)
from .quantum import cascade, field_commutator, io_relation

__all__ = [
    "__version__",
    "CascadeBudget",
    "CommutatorMatrix",
    "DualField",
    "DualSource",
    "FiniteDifferenceGreen",
    "Geometry",
    "Green6",
    "GreenKernel",
    "HomogeneousGreen1D",
    "IdentityReport",
    "MaterialProfile",
    "MaterialTensor",
    "Medium",
    "StratifiedGreen",
    "TransferKernel",
    "UnitsMode",
    "cascade",
    "compose",
    "dual_cross",
    "dyadic_gE",
    "energy_inner",
    "fd_green_1d",
    "field_commutator",
    "first_from_second",
    "homogeneous_green_1d",
    "io_relation",
    "reciprocal_inner",
    "stratified_green",
    "surface_pairing",
    "transfer_kernel",
]
