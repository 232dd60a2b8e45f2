"""
Data models for the dual-field Green-operator toolkit.

This module defines the data structures used throughout the package
using dataclasses for type safety and immutability. Array-valued fields
are stored as numpy arrays and are never mutated after construction.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .config import (
    FIELD_COMPONENTS,
    IDENTITY_CATALOG,
    QUADRATURE_MEASURE_TOLERANCE,
    RESIDUAL_FLOOR,
    SECTOR_ELECTRIC,
    SECTOR_MAGNETIC,
    UNIT_NORMAL_TOLERANCE,
)


class UnitsMode(str, Enum):
    """Single switch through which every physical prefactor is computed."""

    DIMENSIONLESS = "dimensionless"
    SI = "si"


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Immutable tensor-product sampling grid.

    Attributes:
        axes: One coordinate array per active dimension (1 or 3 axes)
    """
    axes: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        """Validate axes after initialization."""
        if len(self.axes) not in (1, 3):
            raise ValueError("Grid dimension must be 1 or 3")
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for axis in axes:
            if axis.ndim != 1 or axis.size < 2:
                raise ValueError("Each grid axis needs at least 2 nodes")
            if np.any(np.diff(axis) <= 0.0):
                raise ValueError("Grid coordinates must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform_1d(cls, z_min: float, z_max: float, points: int) -> "Grid":
        """Uniform 1D grid with `points` nodes on [z_min, z_max]."""
        return cls((np.linspace(z_min, z_max, points),))

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def spacing(self) -> Tuple[float, ...]:
        """Mean spacing per axis."""
        return tuple(float(np.mean(np.diff(a))) for a in self.axes)

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates: shape (N,) in 1D, (N, 3) in 3D."""
        if self.dimension == 1:
            return self.axes[0]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def half_nodes(self) -> np.ndarray:
        """Staggered sub-grid of cell midpoints (1D only)."""
        if self.dimension != 1:
            raise ValueError("Half nodes are defined for 1D grids only")
        z = self.axes[0]
        return 0.5 * (z[1:] + z[:-1])


@dataclass(frozen=True, eq=False)
class Quadrature:
    """
    Immutable quadrature rule on an interval, plane patch, sphere or volume.

    Attributes:
        nodes: Points, shape (M,) for 1D rules or (M, 3) otherwise
        weights: Positive weights, shape (M,)
        normals: Unit outward normals for surface rules, shape (M, 3)
        measure: Measure of the domain; checked against sum(weights) when set
        label: Free-form description used in reports
    """
    nodes: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None
    measure: Optional[float] = None
    label: str = ""

    def __post_init__(self) -> None:
        """Validate the rule after initialization."""
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("Quadrature needs at least one node")
        if nodes.shape[0] != weights.size:
            raise ValueError("Quadrature nodes and weights differ in length")
        if np.any(weights <= 0.0):
            raise ValueError("Quadrature weights must be positive")
        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=float)
            if normals.shape != (weights.size, 3):
                raise ValueError("Normals must have shape (M, 3)")
            lengths = np.linalg.norm(normals, axis=1)
            if np.any(np.abs(lengths - 1.0) > UNIT_NORMAL_TOLERANCE):
                raise ValueError("Quadrature normals must be unit vectors")
            object.__setattr__(self, "normals", normals)
        if self.measure is not None:
            total = float(np.sum(weights))
            if abs(total - self.measure) > QUADRATURE_MEASURE_TOLERANCE * max(abs(self.measure), 1.0):
                raise ValueError(
                    f"Quadrature weights sum to {total!r}, expected {self.measure!r}"
                )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def dimension(self) -> int:
        return 1 if self.nodes.ndim == 1 else int(self.nodes.shape[1])


@dataclass(frozen=True, eq=False)
class DualField:
    """
    Six-component dual field [E; Z0*H] sampled on a grid or given pointwise.

    Attributes:
        values: Samples, shape grid.shape + (6,); may be None with an evaluator
        omega: Angular frequency
        grid: Sampling grid of `values`
        evaluator: Callable mapping points of shape (M,) or (M, 3) to (M, 6)
        metadata: Free-form flags (stencil notes, medium label)
    """
    values: Optional[np.ndarray]
    omega: float
    grid: Optional[Grid] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate shape rules after initialization."""
        if self.values is None and self.evaluator is None:
            raise ValueError("A dual field needs samples or an evaluator")
        if self.values is not None:
            values = np.asarray(self.values, dtype=complex)
            if values.shape[-1] != FIELD_COMPONENTS:
                raise ValueError("Dual fields carry exactly 6 components per sample")
            if self.grid is not None and values.shape[:-1] != self.grid.shape:
                raise ValueError("Field samples do not match the grid shape")
            object.__setattr__(self, "values", values)

    def at(self, points: np.ndarray) -> np.ndarray:
        """
        Field values at the given points.

        Args:
            points: Points of shape (M,) (1D) or (M, 3)

        Returns:
            Array of shape (M, 6)

        Raises:
            ValueError: If the field has no evaluator and the points are not
                the grid nodes
        """
        points = np.asarray(points, dtype=float)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(points), dtype=complex).reshape(-1, FIELD_COMPONENTS)
        if self.grid is None:
            raise ValueError("Field has neither a grid nor an evaluator")
        nodes = self.grid.nodes
        if nodes.shape != points.shape or not np.allclose(nodes, points, rtol=0.0, atol=1e-12):
            raise ValueError("Quadrature nodes do not match the field grid")
        return self.values.reshape(-1, FIELD_COMPONENTS)


@dataclass(frozen=True, eq=False)
class DualSource:
    """
    Discrete dual source S = i*[Z0*J_E; J_M] as a weighted point measure.

    Attributes:
        values: Source vectors, shape (M, 6)
        nodes: Source positions, shape (M,) or (M, 3)
        weights: Measure weights (1 for point dipoles, quadrature weights
            for distributed sources)
        omega: Angular frequency
        grid: Optional grid the positions were taken from
    """
    values: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    omega: float
    grid: Optional[Grid] = None

    def __post_init__(self) -> None:
        """Validate shape rules after initialization."""
        values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if values.shape[-1] != FIELD_COMPONENTS:
            raise ValueError("Dual sources carry exactly 6 components per point")
        if values.shape[0] != weights.size or nodes.shape[0] != weights.size:
            raise ValueError("Source values, nodes and weights differ in length")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point(cls, position: Any, vector: Any, omega: float) -> "DualSource":
        """Single point source of unit weight."""
        nodes = np.atleast_1d(np.asarray(position, dtype=float))
        nodes = nodes.reshape(1, 3) if nodes.size == 3 else nodes.reshape(1)
        return cls(np.asarray(vector, dtype=complex).reshape(1, FIELD_COMPONENTS), nodes, np.ones(1), omega)

    @property
    def current(self) -> np.ndarray:
        """Physical current J = -i*S, shape (M, 6)."""
        return -1j * self.values


@dataclass(frozen=True)
class LorentzOscillator:
    """
    Immutable Lorentz oscillator of one material sector.

    Attributes:
        omega0: Resonance frequency (0 gives the Drude limit)
        gamma: Damping rate
        strength: Coupling constant with units of frequency squared
        sector: "electric" or "magnetic"
    """
    omega0: float
    gamma: float
    strength: float
    sector: str = SECTOR_ELECTRIC

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if self.omega0 < 0:
            raise ValueError("Resonance frequency must be non-negative")
        if self.gamma < 0:
            raise ValueError("Damping rate must be non-negative (passive medium)")
        if self.strength < 0:
            raise ValueError("Oscillator strength must be non-negative")
        if self.sector not in (SECTOR_ELECTRIC, SECTOR_MAGNETIC):
            raise ValueError(f"Unknown oscillator sector: {self.sector!r}")


@dataclass(frozen=True, eq=False)
class MaterialTensor:
    """
    Block-diagonal dual material tensor diag(eps, mu).

    Attributes:
        eps: Relative permittivity, 3x3 complex
        mu: Relative permeability, 3x3 complex
    """
    eps: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        """Validate block shapes after initialization."""
        eps = np.asarray(self.eps, dtype=complex)
        mu = np.asarray(self.mu, dtype=complex)
        if eps.shape != (3, 3) or mu.shape != (3, 3):
            raise ValueError("Material blocks must be 3x3")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def isotropic(cls, eps: complex, mu: complex = 1.0) -> "MaterialTensor":
        """Scalar (isotropic) material."""
        return cls(complex(eps) * np.eye(3), complex(mu) * np.eye(3))

    @property
    def matrix(self) -> np.ndarray:
        """Assembled 6x6 tensor."""
        out = np.zeros((6, 6), dtype=complex)
        out[:3, :3] = self.eps
        out[3:, 3:] = self.mu
        return out

    @property
    def is_isotropic(self) -> bool:
        return bool(
            np.allclose(self.eps, self.eps[0, 0] * np.eye(3), rtol=0.0, atol=1e-15)
            and np.allclose(self.mu, self.mu[0, 0] * np.eye(3), rtol=0.0, atol=1e-15)
        )

    @property
    def is_reciprocal(self) -> bool:
        m = self.matrix
        return bool(np.array_equal(m, m.T))


@dataclass(frozen=True)
class Medium:
    """
    Immutable named medium.

    Attributes:
        name: Label used by material files and reports
        oscillators: Lorentz terms summed per sector
        eps_static: Background relative permittivity
        mu_static: Background relative permeability
        fixed: Frequency-independent tensor overriding the oscillator model
    """
    name: str
    oscillators: Tuple[LorentzOscillator, ...] = ()
    eps_static: complex = 1.0
    mu_static: complex = 1.0
    fixed: Optional[MaterialTensor] = None

    @property
    def is_vacuum(self) -> bool:
        return (
            self.fixed is None
            and not self.oscillators
            and self.eps_static == 1.0
            and self.mu_static == 1.0
        )


@dataclass(frozen=True)
class Layer:
    """
    Slab of one medium between two planes.

    Attributes:
        z_min: Lower boundary
        z_max: Upper boundary
        medium: Medium filling the slab
    """
    z_min: float
    z_max: float
    medium: Medium

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if not self.z_max > self.z_min:
            raise ValueError("Layer must satisfy z_min < z_max")

    def contains(self, z: float) -> bool:
        return self.z_min < z < self.z_max


@dataclass(frozen=True)
class MaterialProfile:
    """
    Piecewise-constant material profile along z on a background medium.

    Attributes:
        layers: Non-overlapping slabs, sorted by z_min
        background: Medium outside every layer
    """
    layers: Tuple[Layer, ...]
    background: Medium

    def __post_init__(self) -> None:
        """Validate layer ordering after initialization."""
        ordered = tuple(sorted(self.layers, key=lambda layer: layer.z_min))
        for lower, upper in zip(ordered, ordered[1:]):
            if upper.z_min < lower.z_max:
                raise ValueError(
                    f"Layers overlap: [{lower.z_min}, {lower.z_max}] and [{upper.z_min}, {upper.z_max}]"
                )
        object.__setattr__(self, "layers", ordered)

    @classmethod
    def homogeneous(cls, medium: Medium) -> "MaterialProfile":
        return cls((), medium)

    def medium_at(self, z: float) -> Medium:
        """Medium at height z (points on a boundary take the lower layer)."""
        for layer in self.layers:
            if layer.z_min < z <= layer.z_max:
                return layer.medium
        return self.background

    @property
    def interfaces(self) -> Tuple[float, ...]:
        edges = {layer.z_min for layer in self.layers} | {layer.z_max for layer in self.layers}
        return tuple(sorted(edges))

    @property
    def support(self) -> Optional[Tuple[Tuple[float, float], ...]]:
        """Intervals where the material differs from vacuum (None if unbounded)."""
        if not self.background.is_vacuum:
            return None
        return tuple((layer.z_min, layer.z_max) for layer in self.layers if not layer.medium.is_vacuum)


@dataclass(frozen=True, eq=False)
class StackLayer:
    """
    One finite layer of a planar stack.

    Attributes:
        thickness: Layer thickness
        tensor: Material tensor of the layer at the stack frequency
    """
    thickness: float
    tensor: MaterialTensor

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if not self.thickness > 0:
            raise ValueError("Layer thickness must be positive")


@dataclass(frozen=True, eq=False)
class LayerStack:
    """
    Planar stack between two semi-infinite terminal media.

    Attributes:
        layers: Finite layers from bottom to top
        bottom: Terminal medium below the first interface
        top: Terminal medium above the last interface
        z_start: Position of the lowest interface
        k_perp: Transverse wavevector (kx, ky)
        omega: Angular frequency
        k0: Vacuum wavenumber omega / c
        boundary: Boundary-condition tag ("retarded")
    """
    layers: Tuple[StackLayer, ...]
    bottom: MaterialTensor
    top: MaterialTensor
    z_start: float
    k_perp: Tuple[float, float]
    omega: float
    k0: float
    boundary: str = "retarded"

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if self.boundary != "retarded":
            raise ValueError("Layer stacks are built with the retarded boundary condition")
        if self.k0 <= 0:
            raise ValueError("Vacuum wavenumber must be positive")
        object.__setattr__(self, "k_perp", (float(self.k_perp[0]), float(self.k_perp[1])))

    @property
    def interfaces(self) -> np.ndarray:
        return self.z_start + np.concatenate(([0.0], np.cumsum([layer.thickness for layer in self.layers])))

    @property
    def regions(self) -> Tuple[MaterialTensor, ...]:
        """Bottom terminal, finite layers, top terminal."""
        return (self.bottom,) + tuple(layer.tensor for layer in self.layers) + (self.top,)


@dataclass(frozen=True, eq=False)
class TransferKernel:
    """
    Surface-to-surface map of tangential dual traces.

    Attributes:
        matrix: 4x4 (Ex, Ey, Z0Hx, Z0Hy) or 2x2 (Ex, Z0Hy) complex matrix
        z_source: Source surface z1
        z_target: Target surface z2
        omega: Angular frequency
        k_perp: Transverse wavevector
        label: Stage name used by cascade reports
    """
    matrix: np.ndarray
    z_source: float
    z_target: float
    omega: float
    k_perp: Tuple[float, float] = (0.0, 0.0)
    label: str = ""

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape not in ((2, 2), (4, 4)):
            raise ValueError("Transfer kernels are 2x2 or 4x4")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class Geometry:
    """
    Enclosing surface, interior volume and observation-point policy.

    Attributes:
        dimension: 1 (interval) or 3 (sphere)
        bounds: Interval endpoints for 1D geometries
        center: Sphere center for 3D geometries
        radius: Sphere radius for 3D geometries
        breakpoints: Planes where integrands are not smooth (interfaces)
        volume_order: Gauss-Legendre order per volume panel
        surface_orders: (n_theta, n_phi) of the spherical surface rule
        panel_width: Maximum 1D panel width (None for one panel per piece)
        exclusion: Radius of the bump partition around observation points (3D)
    """
    dimension: int
    bounds: Optional[Tuple[float, float]] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    breakpoints: Tuple[float, ...] = ()
    volume_order: int = 64
    surface_orders: Tuple[int, int] = (32, 64)
    panel_width: Optional[float] = None
    exclusion: float = 0.0

    def __post_init__(self) -> None:
        """Validate the descriptor after initialization."""
        if self.dimension == 1:
            if self.bounds is None or not self.bounds[1] > self.bounds[0]:
                raise ValueError("1D geometries need bounds (a, b) with a < b")
        elif self.dimension == 3:
            if self.center is None or self.radius is None or self.radius <= 0:
                raise ValueError("3D geometries need a center and a positive radius")
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        else:
            raise ValueError("Geometry dimension must be 1 or 3")
        if self.volume_order < 2:
            raise ValueError("Quadrature order below minimum")

    @classmethod
    def interval(cls, a: float, b: float, breakpoints: Tuple[float, ...] = (), **kwargs: Any) -> "Geometry":
        return cls(dimension=1, bounds=(float(a), float(b)), breakpoints=tuple(breakpoints), **kwargs)

    @classmethod
    def sphere(cls, center: Any, radius: float, **kwargs: Any) -> "Geometry":
        return cls(dimension=3, center=np.asarray(center, dtype=float), radius=float(radius), **kwargs)

    def contains(self, r: Any) -> bool:
        """Strict interior test."""
        if self.dimension == 1:
            z = float(np.asarray(r).reshape(-1)[-1])
            return self.bounds[0] < z < self.bounds[1]
        return bool(np.linalg.norm(np.asarray(r, dtype=float) - self.center) < self.radius)


@dataclass(frozen=True)
class IdentityReport:
    """
    Immutable residual report of one identity evaluation.

    Attributes:
        identity: Catalog name
        residual_abs: Max-entry norm of LHS - RHS
        residual_rel: residual_abs / max(|LHS|, |RHS|, term scale, 1e-300)
        lhs_norm: Max-entry norm of the left-hand side
        rhs_norm: Max-entry norm of the right-hand side
        tolerance: Pass threshold on residual_rel
        slope: Measured convergence slope (None when not measured)
        orders: Quadrature orders used
        provenance: Kernel provenance ("analytic", "finite-difference", ...)
        params: Evaluation parameters echoed into the report
        details: Channel breakdowns and secondary residuals
    """
    identity: str
    residual_abs: float
    residual_rel: float
    lhs_norm: float
    rhs_norm: float
    tolerance: float
    slope: Optional[float] = None
    orders: Tuple[int, ...] = ()
    provenance: str = "analytic"
    params: Mapping[str, Any] = field(default_factory=dict)
    details: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_sides(
        cls,
        identity: str,
        lhs: Any,
        rhs: Any,
        tolerance: float,
        scale: float = 0.0,
        **kwargs: Any,
    ) -> "IdentityReport":
        """
        Build a report from the two sides of an identity.

        `scale` is the size of the individual terms when both sides are
        differences that cancel (reciprocity brackets); the relative residual
        is taken against the largest of the two sides and `scale`.
        """
        lhs = np.asarray(lhs, dtype=complex)
        rhs = np.asarray(rhs, dtype=complex)
        lhs_norm = float(np.max(np.abs(lhs))) if lhs.size else 0.0
        rhs_norm = float(np.max(np.abs(rhs))) if rhs.size else 0.0
        residual_abs = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
        residual_rel = residual_abs / max(lhs_norm, rhs_norm, float(scale), RESIDUAL_FLOOR)
        return cls(identity, residual_abs, residual_rel, lhs_norm, rhs_norm, tolerance, **kwargs)

    @property
    def passed(self) -> bool:
        return bool(self.residual_rel <= self.tolerance)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the report to a JSON-ready dictionary."""
        return {
            "identity": self.identity,
            "params": dict(self.params),
            "residual_abs": self.residual_abs,
            "residual_rel": self.residual_rel,
            "lhs_norm": self.lhs_norm,
            "rhs_norm": self.rhs_norm,
            "tolerance": self.tolerance,
            "slope": self.slope,
            "orders": list(self.orders),
            "provenance": self.provenance,
            "pass": self.passed,
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class NoiseCovariance:
    """
    Delta-correlated commutator weight of one noise channel.

    Attributes:
        kind: "volume", "boundary" or "transfer-added"
        weight: Callable returning the matrix weight at a point (and normal)
        prefactor: Scalar prefactor already folded into `weight`
        units: Units mode the prefactor was computed in
    """
    kind: str
    weight: Callable[..., np.ndarray]
    prefactor: float
    units: UnitsMode = UnitsMode.DIMENSIONLESS

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if self.kind not in ("volume", "boundary", "transfer-added"):
            raise ValueError(f"Unknown noise channel kind: {self.kind!r}")


@dataclass(frozen=True, eq=False)
class CommutatorMatrix:
    """
    Field commutator at (r1, r2) split into its two channels.

    Attributes:
        r1: First observation point
        r2: Second observation point
        omega: Angular frequency
        volume: Volume (Langevin) channel
        boundary: Boundary (incoming vacuum) channel
        target: Closure target (hbar k0 / pi eps0) Im g
        projected_boundary: Boundary channel with the incoming-mode projection
    """
    r1: Any
    r2: Any
    omega: float
    volume: np.ndarray
    boundary: np.ndarray
    target: np.ndarray
    projected_boundary: Optional[np.ndarray] = None

    @property
    def total(self) -> np.ndarray:
        return self.volume + self.boundary

    @property
    def residual_rel(self) -> float:
        scale = max(float(np.max(np.abs(self.target))), RESIDUAL_FLOOR)
        return float(np.max(np.abs(self.total - self.target))) / scale

    def to_dict(self) -> Dict[str, Any]:
        """Convert the commutator to a JSON-ready dictionary."""
        from .utils import complex_to_json

        out = {
            "r1": complex_to_json(np.asarray(self.r1, dtype=float)),
            "r2": complex_to_json(np.asarray(self.r2, dtype=float)),
            "omega": self.omega,
            "volume_part": complex_to_json(self.volume),
            "boundary_part": complex_to_json(self.boundary),
            "total": complex_to_json(self.total),
            "target_im_g": complex_to_json(self.target),
            "residual_rel": self.residual_rel,
        }
        if self.projected_boundary is not None:
            out["projected_boundary_part"] = complex_to_json(self.projected_boundary)
        return out


@dataclass(frozen=True, eq=False)
class CascadeBudget:
    """
    Cumulative transfer and added-noise budget of a chain of elements.

    Attributes:
        labels: Stage labels in propagation order
        transfer: Cumulative transfer kernel T_N ... T_1
        added_noise: Cumulative added-noise commutator on the output surface
        contributions: Per-stage added noise conjugated to the output surface
        stage_noise: Per-stage added noise on each stage's own output surface
        output_commutator: Output commutator for canonical input
        canonical: Canonical boundary weight on the output surface
    """
    labels: Tuple[str, ...]
    transfer: TransferKernel
    added_noise: np.ndarray
    contributions: Tuple[np.ndarray, ...]
    stage_noise: Tuple[np.ndarray, ...]
    output_commutator: np.ndarray
    canonical: np.ndarray

    @property
    def closure_residual(self) -> float:
        scale = max(float(np.max(np.abs(self.canonical))), RESIDUAL_FLOOR)
        return float(np.max(np.abs(self.output_commutator - self.canonical))) / scale


@dataclass(frozen=True)
class RunConfig:
    """
    Immutable batch-run configuration.

    Attributes:
        units: Units mode
        frequencies: Angular-frequency grid
        k_perp: Transverse-wavevector grid
        material_file: Material definition file
        geometry: Geometry descriptor (bounds, observation points, sphere)
        identities: Identities selected from the catalog
        tolerances: Per-identity tolerance overrides
        quadrature: Quadrature orders
        output_dir: Output directory
        kernels: Kernel types requested by `green`
        samples: Sample points for kernel dumps
        chain_file: Chain definition used by `cascade`
        finite_difference: Settings of the finite-difference oracle
        figure: Write a PNG of the cascade sweep
        threads: Worker threads for (omega, k_perp) slices
        global_tolerance: Single tolerance overriding every identity
    """
    units: UnitsMode
    frequencies: Tuple[float, ...]
    k_perp: Tuple[Tuple[float, float], ...]
    material_file: Optional[Path]
    geometry: Mapping[str, Any]
    identities: Tuple[str, ...]
    tolerances: Mapping[str, float]
    quadrature: Mapping[str, Any]
    output_dir: Path
    kernels: Tuple[str, ...] = ()
    samples: Mapping[str, Any] = field(default_factory=dict)
    chain_file: Optional[Path] = None
    finite_difference: Mapping[str, Any] = field(default_factory=dict)
    figure: bool = False
    threads: int = 1
    global_tolerance: Optional[float] = None

    def __post_init__(self) -> None:
        """Validate inputs after initialization."""
        if not self.frequencies:
            raise ValueError("Frequency grid must be nonempty")
        if any(w <= 0 for w in self.frequencies):
            raise ValueError("Frequencies must be positive")
        if not self.k_perp:
            raise ValueError("Transverse-wavevector grid must be nonempty")
        unknown = [name for name in self.identities if name not in IDENTITY_CATALOG]
        if unknown:
            raise ValueError(
                f"Unknown identity {unknown[0]!r}; catalog: {', '.join(IDENTITY_CATALOG)}"
            )
        for name, value in self.tolerances.items():
            if not value > 0:
                raise ValueError(f"Tolerance for {name!r} must be positive")
        if self.global_tolerance is not None and not self.global_tolerance > 0:
            raise ValueError("Tolerance must be positive")
        if self.threads < 1:
            raise ValueError("Thread count must be at least 1")


@dataclass
class RunManifest:
    """
    Record of one batch run.

    Attributes:
        command: Subcommand name
        config_hash: sha256 of the canonical configuration
        versions: Package versions
        tasks: Per-task status entries
        wall_time: Elapsed seconds
        outputs: Every emitted file, relative to the output directory
    """
    command: str
    config_hash: str
    versions: Dict[str, str]
    tasks: List[Dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0
    outputs: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the manifest to a JSON-ready dictionary."""
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "versions": dict(self.versions),
            "tasks": list(self.tasks),
            "wall_time": self.wall_time,
            "outputs": sorted(self.outputs),
        }
