"""
Dual-field algebra shared by every other module.

This module provides the surface and symplectic operators acting on the
six-component dual field [E; Z0*H], the energy and reciprocal inner
products, the discrete Maxwell Hamiltonian i*curl, quadrature builders and
the common interface of all Green kernels.

Time dependence is exp(-i*omega*t). The first-order operator is
M = H - k0*eps with H = i*[[0, curl], [-curl, 0]], and M E = S with the
source S = i*[Z0*J_E; J_M].
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .config import (
    C0_SI,
    EPS0_SI,
    FIELD_COMPONENTS,
    HBAR_SI,
    INTERFACE_CLEARANCE,
    MIN_CURL_NODES,
    SCALAR_SECTOR,
    TANGENTIAL_SECTOR,
    UNIT_NORMAL_TOLERANCE,
)
from .models import DualField, DualSource, Geometry, Grid, Quadrature, UnitsMode

logger = logging.getLogger(__name__)


# ------------------------------------------------------------
# Fixed operators
# ------------------------------------------------------------
def cross_matrix(v: Any) -> np.ndarray:
    """Matrix C with C @ a = v x a."""
    x, y, z = np.asarray(v).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]], dtype=np.result_type(x, float))


def dual_cross(n: Any) -> np.ndarray:
    """
    Surface operator (n-bar x) on dual fields.

    Args:
        n: Real unit 3-vector

    Returns:
        Real symmetric 6x6 matrix [[0, C], [-C, 0]] with C the cross-product
        matrix of n, so that [E; V] maps to [n x V; -n x E]

    Raises:
        ValueError: If n is not a unit vector
    """
    n = np.asarray(n, dtype=float).reshape(-1)
    if n.size != 3 or abs(np.linalg.norm(n) - 1.0) > UNIT_NORMAL_TOLERANCE:
        raise ValueError(f"Normal must be a unit 3-vector, got {n.tolist()}")
    c = cross_matrix(n)
    out = np.zeros((6, 6))
    out[:3, 3:] = c
    out[3:, :3] = -c
    return out


def flip_pi() -> np.ndarray:
    """Field-flip operator diag(I3, -I3)."""
    return np.diag([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])


def symplectic_j() -> np.ndarray:
    """2x2 symplectic matrix [[0, 1], [-1, 0]]."""
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def tangential_metric(n_z: float, sector: Sequence[int] = TANGENTIAL_SECTOR) -> np.ndarray:
    """
    Restriction of dual_cross(n_z * z-hat) to a planar trace basis.

    Args:
        n_z: +1 or -1
        sector: Component indices, (Ex, Z0Hy) or (Ex, Ey, Z0Hx, Z0Hy)

    Returns:
        2x2 or 4x4 real matrix squaring to the identity
    """
    if n_z not in (1, -1, 1.0, -1.0):
        raise ValueError("Planar normals must be +z or -z")
    idx = np.asarray(sector)
    return dual_cross([0.0, 0.0, float(n_z)])[np.ix_(idx, idx)]


def embed(vector: Any, components: Sequence[int]) -> np.ndarray:
    """Place a restricted vector (or stack of vectors) into 6-vectors."""
    vector = np.asarray(vector, dtype=complex)
    out = np.zeros(vector.shape[:-1] + (FIELD_COMPONENTS,), dtype=complex)
    out[..., list(components)] = vector
    return out


# ------------------------------------------------------------
# Units
# ------------------------------------------------------------
@dataclass(frozen=True)
class Prefactors:
    """
    Constants table mapping every commutator prefactor to a number.

    Attributes:
        hbar_over_pi_eps0: hbar / (pi eps0), the volume noise weight
        boundary: hbar k0 / (2 pi eps0), the boundary noise weight
        volume: hbar k0^2 / (pi eps0), the volume channel prefactor
        target: hbar k0 / (pi eps0), the closure prefactor of Im g
    """
    hbar_over_pi_eps0: float
    boundary: float
    volume: float
    target: float


def speed_of_light(units: UnitsMode = UnitsMode.DIMENSIONLESS) -> float:
    return 1.0 if UnitsMode(units) is UnitsMode.DIMENSIONLESS else C0_SI


def wavenumber(omega: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> float:
    """Vacuum wavenumber k0 = omega / c."""
    if omega <= 0:
        raise ValueError("Angular frequency must be positive")
    return float(omega) / speed_of_light(units)


def prefactors(k0: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> Prefactors:
    """Commutator prefactors at vacuum wavenumber k0."""
    if UnitsMode(units) is UnitsMode.DIMENSIONLESS:
        hbar, eps0 = 1.0, 1.0
    else:
        hbar, eps0 = HBAR_SI, EPS0_SI
    base = hbar / (np.pi * eps0)
    return Prefactors(
        hbar_over_pi_eps0=base,
        boundary=0.5 * base * k0,
        volume=base * k0 * k0,
        target=base * k0,
    )


# ------------------------------------------------------------
# Inner products
# ------------------------------------------------------------
def _check_compatible(f1: DualField, f2: DualField) -> None:
    if f1.omega != f2.omega:
        raise ValueError("Fields are given at different frequencies")
    if f1.grid is not None and f2.grid is not None and f1.grid is not f2.grid:
        same = f1.grid.shape == f2.grid.shape and all(
            np.array_equal(a, b) for a, b in zip(f1.grid.axes, f2.grid.axes)
        )
        if not same:
            raise ValueError("Fields live on different grids")


def energy_inner(f1: DualField, f2: DualField, q: Quadrature) -> complex:
    """
    Energy (L2) inner product of two dual fields.

    Args:
        f1: Conjugated field
        f2: Second field
        q: Volume quadrature whose nodes the fields can be evaluated at

    Returns:
        Approximation of the integral of f1^H f2

    Raises:
        ValueError: On grid or frequency mismatch
    """
    _check_compatible(f1, f2)
    a = f1.at(q.nodes)
    b = f2.at(q.nodes)
    return complex(np.sum(q.weights * np.einsum("mi,mi->m", a.conj(), b)))


def reciprocal_inner(f1: DualField, f2: DualField, q: Quadrature) -> complex:
    """Bilinear reciprocal pairing: integral of f1^T Pi f2 (no conjugation)."""
    _check_compatible(f1, f2)
    a = f1.at(q.nodes)
    b = f2.at(q.nodes) @ flip_pi()
    return complex(np.sum(q.weights * np.einsum("mi,mi->m", a, b)))


def surface_pairing(
    f1: DualField,
    f2: DualField,
    surface: Quadrature,
    normals: Optional[np.ndarray] = None,
) -> complex:
    """
    Surface pairing: closed-surface integral of f1^H (n-bar x) f2.

    Args:
        f1: Conjugated field
        f2: Second field
        surface: Surface quadrature
        normals: Normals per node; defaults to the rule's own normals

    Returns:
        Complex surface integral

    Raises:
        ValueError: If the surface has no normals or samples are missing
    """
    _check_compatible(f1, f2)
    normals = surface.normals if normals is None else np.asarray(normals, dtype=float)
    if normals is None:
        raise ValueError("Surface pairing needs normals")
    a = f1.at(surface.nodes)
    b = f2.at(surface.nodes)
    metric = np.stack([dual_cross(n) for n in normals])
    return complex(np.sum(surface.weights * np.einsum("mi,mij,mj->m", a.conj(), metric, b)))


# ------------------------------------------------------------
# Dual curl, time reversal, equivalent sources
# ------------------------------------------------------------
def yee_sample(func: Callable[[np.ndarray], np.ndarray], grid: Grid, omega: float) -> DualField:
    """
    Sample a pointwise field on the staggered layout of a 1D grid.

    Electric columns hold node samples. Row j of the magnetic columns holds
    the sample at half node j; the last magnetic row is unused and zero.
    """
    if grid.dimension != 1:
        raise ValueError("Staggered sampling needs a 1D grid")
    z = grid.axes[0]
    values = np.array(np.asarray(func(z), dtype=complex).reshape(z.size, FIELD_COMPONENTS))
    half = np.asarray(func(grid.half_nodes), dtype=complex).reshape(z.size - 1, FIELD_COMPONENTS)
    values[:-1, 3:] = half[:, 3:]
    values[-1, 3:] = 0.0
    return DualField(values, omega, grid=grid, metadata={"layout": "yee"})


def _edge_weights(offsets: np.ndarray) -> np.ndarray:
    """Derivative-at-zero weights from samples at three offsets."""
    offsets = np.asarray(offsets, dtype=float)
    rhs = np.zeros(offsets.size)
    rhs[1] = 1.0
    return np.linalg.solve(np.vander(offsets, increasing=True).T, rhs)


def dual_curl_apply(f: DualField) -> DualField:
    """
    Discrete Maxwell Hamiltonian H f = [i curl V; -i curl E] on a 1D Yee grid.

    The grid is the z axis with fields independent of x and y. Derivatives
    of the node-based electric sector land on half nodes, derivatives of
    the half-node magnetic sector land on nodes. The two edge nodes use a
    one-sided second-order stencil over the first three half nodes
    (flagged in the metadata).

    Args:
        f: Field from yee_sample (or with the same layout) on at least 4 nodes

    Returns:
        DualField in the same staggered layout

    Raises:
        ValueError: If the field is not a staggered 1D sample
    """
    if f.grid is None or f.values is None:
        raise ValueError("dual_curl_apply needs a field sampled on a grid")
    grid = f.grid
    if grid.dimension != 1:
        raise ValueError("The discrete dual curl is provided on 1D grids only")
    if f.metadata.get("layout") != "yee":
        raise ValueError("dual_curl_apply needs a staggered (yee) sample; build one with yee_sample")
    n = grid.shape[0]
    if n < MIN_CURL_NODES:
        raise ValueError(f"Grid needs at least {MIN_CURL_NODES} nodes")
    z = grid.axes[0]
    half = grid.half_nodes
    e = f.values[:, :3]
    v = f.values[:-1, 3:]
    dv = np.empty((n, 3), dtype=complex)
    dv[1:-1] = (v[1:] - v[:-1]) / np.diff(half)[:, None]
    dv[0] = _edge_weights(half[:3] - z[0]) @ v[:3]
    dv[-1] = _edge_weights(half[-3:] - z[-1]) @ v[-3:]
    de = (e[1:] - e[:-1]) / np.diff(z)[:, None]
    out = np.zeros_like(f.values)
    out[:, 0] = -1j * dv[:, 1]
    out[:, 1] = 1j * dv[:, 0]
    out[:-1, 3] = 1j * de[:, 1]
    out[:-1, 4] = -1j * de[:, 0]
    metadata = dict(f.metadata)
    metadata.update({"stencil": "yee-staggered", "one_sided_edges": True})
    return DualField(out, f.omega, grid=grid, metadata=metadata)


def time_reverse(f: DualField) -> DualField:
    """Time-reversed field Pi f* (sampled and pointwise parts)."""
    pi = flip_pi()
    values = None if f.values is None else f.values.conj() @ pi
    evaluator = None
    if f.evaluator is not None:
        source = f.evaluator

        def evaluator(points: np.ndarray) -> np.ndarray:
            return np.asarray(source(points), dtype=complex).conj() @ pi

    return DualField(values, f.omega, grid=f.grid, evaluator=evaluator, metadata=dict(f.metadata))


def love_surface_source(field: DualField, surface: Quadrature) -> DualSource:
    """
    Equivalent surface source -i (n-bar x) E on a closed surface.

    Args:
        field: Field evaluable on the surface nodes
        surface: Surface quadrature with outward normals

    Returns:
        DualSource carried by the surface nodes and weights
    """
    if surface.normals is None:
        raise ValueError("Equivalent sources need surface normals")
    values = field.at(surface.nodes)
    metric = np.stack([dual_cross(n) for n in surface.normals])
    sources = -1j * np.einsum("mij,mj->mi", metric, values)
    return DualSource(sources, surface.nodes, surface.weights, field.omega)


# ------------------------------------------------------------
# Quadrature builders
# ------------------------------------------------------------
@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if order < 1:
        raise ValueError("Quadrature order must be positive")
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(a: float, b: float, breakpoints: Sequence[float] = (), panel_width: Optional[float] = None) -> np.ndarray:
    """Sorted panel edges on [a, b] including interior breakpoints."""
    cuts = sorted({float(a), float(b)} | {float(p) for p in breakpoints if a < p < b})
    if panel_width is None:
        return np.asarray(cuts)
    edges = [cuts[0]]
    for lo, hi in zip(cuts, cuts[1:]):
        count = max(1, int(np.ceil((hi - lo) / panel_width)))
        edges.extend(np.linspace(lo, hi, count + 1)[1:].tolist())
    return np.asarray(edges)


def interval_rule(
    a: float,
    b: float,
    order: int,
    breakpoints: Sequence[float] = (),
    panel_width: Optional[float] = None,
) -> Quadrature:
    """
    Composite Gauss-Legendre rule on [a, b].

    Args:
        a: Left end
        b: Right end
        order: Nodes per panel
        breakpoints: Interior points where the integrand is not smooth
        panel_width: Maximum panel width

    Returns:
        1D Quadrature whose weights sum to b - a
    """
    x, w = gauss_legendre(order)
    edges = panel_edges(a, b, breakpoints, panel_width)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x[None, :]
    weights = 0.5 * (hi - lo) * w[None, :]
    return Quadrature(nodes.ravel(), weights.ravel(), measure=float(b - a), label=f"gauss-{order}x{len(edges) - 1}")


def endpoint_surface(a: float, b: float) -> Quadrature:
    """Two-point 'surface' of the interval [a, b] with outward normals."""
    return Quadrature(
        np.array([a, b], dtype=float),
        np.ones(2),
        normals=np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]]),
        measure=2.0,
        label="interval-ends",
    )


def _frame(axis: Optional[Any]) -> np.ndarray:
    """Orthonormal frame whose third column is `axis` (z-hat by default)."""
    if axis is None:
        return np.eye(3)
    e3 = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3], axis=1)


def unit_sphere_directions(n_theta: int, n_phi: int, axis: Optional[Any] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on the unit sphere: Gauss-Legendre in cos(theta), uniform phi.

    Returns:
        Directions of shape (n_theta * n_phi, 3) and solid-angle weights
        summing to 4 pi
    """
    ct, wt = gauss_legendre(n_theta)
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1.0 - ct ** 2)
    local = np.stack(
        [
            (st[:, None] * np.cos(phi)[None, :]).ravel(),
            (st[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(ct, n_phi),
        ],
        axis=-1,
    )
    weights = np.repeat(wt, n_phi) * (2.0 * np.pi / n_phi)
    return local @ _frame(axis).T, weights


def sphere_surface_rule(center: Any, radius: float, n_theta: int, n_phi: int) -> Quadrature:
    """Product Gauss rule on a sphere with outward normals."""
    directions, weights = unit_sphere_directions(n_theta, n_phi)
    center = np.asarray(center, dtype=float).reshape(3)
    return Quadrature(
        center + radius * directions,
        radius ** 2 * weights,
        normals=directions,
        measure=4.0 * np.pi * radius ** 2,
        label=f"sphere-{n_theta}x{n_phi}",
    )


def spherical_shell_nodes(
    center: Any,
    radial_edges: Sequence[float],
    n_radial: int,
    n_theta: int,
    n_phi: int,
    axis: Optional[Any] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Volume nodes in spherical coordinates about `center`.

    Returns:
        Points (M, 3), volume weights (M,), and the radius of each point
    """
    x, w = gauss_legendre(n_radial)
    edges = np.asarray(radial_edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    radii = (0.5 * (hi + lo) + 0.5 * (hi - lo) * x[None, :]).ravel()
    radial_w = (0.5 * (hi - lo) * w[None, :]).ravel() * radii ** 2
    directions, angular_w = unit_sphere_directions(n_theta, n_phi, axis)
    points = np.asarray(center, dtype=float).reshape(1, 1, 3) + radii[:, None, None] * directions[None, :, :]
    weights = radial_w[:, None] * angular_w[None, :]
    return points.reshape(-1, 3), weights.ravel(), np.repeat(radii, directions.shape[0])


def windowed_plane_rule(
    z0: float,
    radius: float,
    panel_width: float,
    n_radial: int,
    n_phi: int,
    window_fraction: float,
    normal_z: float = 1.0,
) -> Quadrature:
    """
    Polar rule on the plane z = z0 truncated at `radius` with a cosine taper.

    The weights carry the window, so they do not sum to the disk area.
    """
    x, w = gauss_legendre(n_radial)
    edges = panel_edges(0.0, radius, (), panel_width)
    lo, hi = edges[:-1, None], edges[1:, None]
    rho = (0.5 * (hi + lo) + 0.5 * (hi - lo) * x[None, :]).ravel()
    rho_w = (0.5 * (hi - lo) * w[None, :]).ravel() * rho
    start = (1.0 - window_fraction) * radius
    taper = np.where(
        rho < start,
        1.0,
        0.5 * (1.0 + np.cos(np.pi * np.clip((rho - start) / (radius - start), 0.0, 1.0))),
    )
    keep = taper > 0.0
    rho, rho_w = rho[keep], (rho_w * taper)[keep]
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    points = np.stack(
        [
            (rho[:, None] * np.cos(phi)[None, :]).ravel(),
            (rho[:, None] * np.sin(phi)[None, :]).ravel(),
            np.full(rho.size * n_phi, float(z0)),
        ],
        axis=-1,
    )
    weights = np.repeat(rho_w, n_phi) * (2.0 * np.pi / n_phi)
    normals = np.tile([0.0, 0.0, float(np.sign(normal_z))], (weights.size, 1))
    return Quadrature(points, weights, normals=normals, label=f"plane-{rho.size}x{n_phi}")


# ------------------------------------------------------------
# Kernel interface
# ------------------------------------------------------------
class GreenKernel(ABC):
    """
    First-order Green kernel g(r, r') restricted to a set of components.

    Subclasses provide the matrix at a point pair and the material tensor
    at a point; everything the identity and quantum layers need (loss,
    surface metric, field flip, adjoint) is derived here.
    """

    components: Tuple[int, ...] = tuple(range(FIELD_COMPONENTS))
    dimension: int = 3
    provenance: str = "analytic"
    boundary: str = "retarded"
    homogeneous: bool = False
    k0: float
    omega: float

    @abstractmethod
    def __call__(self, r: Any, r_prime: Any) -> np.ndarray:
        """Kernel matrix at (r, r')."""

    @abstractmethod
    def material(self, r: Any) -> np.ndarray:
        """Full 6x6 material tensor at r."""

    def batch(self, rs: np.ndarray, r_prime: Any) -> np.ndarray:
        """Kernel at many observation points, shape (M, d, d)."""
        return np.stack([self(r, r_prime) for r in rs])

    def batch_source(self, r: Any, rps: np.ndarray) -> np.ndarray:
        """Kernel at many source points, shape (M, d, d)."""
        return np.stack([self(r, rp) for rp in rps])

    def contact_term(self) -> Optional[np.ndarray]:
        """Coefficient of the delta term of the kernel, if any."""
        return None

    @property
    def _index(self) -> Tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(self.components)
        return np.ix_(idx, idx)

    def loss(self, r: Any) -> np.ndarray:
        """Anti-Hermitian part of the material, restricted."""
        m = self.material(r)[self._index]
        return (m - m.conj().T) / 2j

    def loss_at(self, nodes: np.ndarray) -> np.ndarray:
        """Restricted loss tensors at many points, shape (M, d, d)."""
        if self.homogeneous:
            loss = self.loss(nodes[0])
            return np.broadcast_to(loss, (nodes.shape[0],) + loss.shape)
        return np.stack([self.loss(r) for r in nodes])

    @property
    def wavelength(self) -> float:
        """Wavelength in the kernel's (reference) medium."""
        return float(2.0 * np.pi / (self.k0 * abs(getattr(self, "n", 1.0))))

    def metric(self, normal: Any) -> np.ndarray:
        """Surface operator (n-bar x), restricted."""
        return dual_cross(normal)[self._index]

    def flip(self) -> np.ndarray:
        """Field flip Pi, restricted."""
        return flip_pi()[self._index]

    def adjoint(self, r1: Any, r2: Any) -> np.ndarray:
        """Kernel adjoint g^dagger(r1, r2) = g(r2, r1)^H."""
        return self(r2, r1).conj().T

    def restrict(self, positions: Sequence[int]) -> "RestrictedKernel":
        """View on a subset of this kernel's components."""
        return RestrictedKernel(self, tuple(positions))

    def embed(self, vector: Any) -> np.ndarray:
        return embed(vector, self.components)

    def project(self, vector6: Any) -> np.ndarray:
        return np.asarray(vector6)[..., list(self.components)]


class RestrictedKernel(GreenKernel):
    """Sub-block view of another kernel."""

    def __init__(self, base: GreenKernel, positions: Tuple[int, ...]):
        self.base = base
        self.positions = positions
        self.components = tuple(base.components[p] for p in positions)
        self.dimension = base.dimension
        self.provenance = base.provenance
        self.boundary = base.boundary
        self.homogeneous = base.homogeneous
        self.k0 = base.k0
        self.omega = base.omega
        self._sub = np.ix_(np.asarray(positions), np.asarray(positions))

    def __call__(self, r: Any, r_prime: Any) -> np.ndarray:
        return self.base(r, r_prime)[self._sub]

    def batch(self, rs: np.ndarray, r_prime: Any) -> np.ndarray:
        return self.base.batch(rs, r_prime)[(slice(None),) + self._sub]

    def batch_source(self, r: Any, rps: np.ndarray) -> np.ndarray:
        return self.base.batch_source(r, rps)[(slice(None),) + self._sub]

    def material(self, r: Any) -> np.ndarray:
        return self.base.material(r)

    def contact_term(self) -> Optional[np.ndarray]:
        term = self.base.contact_term()
        return None if term is None else term[self._sub]

    def __getattr__(self, name: str) -> Any:
        # Kernel-specific helpers (propagator, jump, ...) of the base.
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)


def scalar_sector_positions(components: Sequence[int]) -> Tuple[int, int]:
    """Positions of (Ex, Z0Hy) inside a component tuple."""
    return tuple(list(components).index(c) for c in SCALAR_SECTOR)


def check_placement(geom: Geometry, points: Sequence[Any]) -> None:
    """
    Require observation points strictly inside a geometry and off its interfaces.

    Raises:
        ValueError: If a point is outside or on an interface
    """
    for p in points:
        if not geom.contains(p):
            raise ValueError(f"Observation point {np.asarray(p).tolist()} is not strictly inside the geometry")
        if geom.dimension == 1:
            z = float(np.asarray(p).reshape(-1)[-1])
            if any(abs(z - b) < INTERFACE_CLEARANCE for b in geom.breakpoints):
                raise ValueError(f"Observation point z={z!r} lies on an interface")
