"""
First-order Green kernels of 1D and planar stratified media.

This module contains the analytic kernel of a homogeneous medium in the
(Ex, Z0Hy) sector, the tangential (Ex, Ey, Z0Hx, Z0Hy) kernel of a planar
stack at fixed transverse wavevector built with a scattering-stable
recursion, the staggered finite-difference resolvent used as an oracle,
and the surface-to-surface transfer kernels with their composition.
"""

import logging
import threading
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .config import (
    FD_CONDITION_LIMIT,
    FD_ETA_CAP,
    FD_MIN_EDGE_NODES,
    FD_MIN_NODE_SEPARATION,
    FD_MIN_POINTS_PER_WAVELENGTH,
    FD_RICHARDSON_FACTOR,
    GRAZING_KZ_TOLERANCE,
    INTERFACE_CLEARANCE,
    SCALAR_SECTOR,
    TANGENTIAL_SECTOR,
)
from .core import GreenKernel, tangential_metric, wavenumber
from .media import medium_tensor, refractive_index
from .models import (
    Grid,
    LayerStack,
    MaterialProfile,
    MaterialTensor,
    Medium,
    StackLayer,
    TransferKernel,
    UnitsMode,
)

logger = logging.getLogger(__name__)

# In-plane rotation by +90 degrees: R @ a_t = (z-hat x a)_t
ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])
SCALAR_IN_TANGENTIAL = (0, 3)


def tangential_jump() -> np.ndarray:
    """Jump of the tangential kernel across its source plane, -i N(+z)."""
    return -1j * tangential_metric(1.0)


def scalar_jump() -> np.ndarray:
    """Jump of the (Ex, Z0Hy) kernel across its source point, i sigma_x."""
    return np.array([[0.0, 1j], [1j, 0.0]])


def _sign(x: float) -> float:
    return 0.0 if x == 0 else float(np.sign(x))


# ------------------------------------------------------------
# Homogeneous medium, scalar sector
# ------------------------------------------------------------
def homogeneous_green_1d(
    n_complex: complex,
    omega: float,
    z: float,
    z_prime: float,
    mu: complex = 1.0,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> np.ndarray:
    """
    Outgoing kernel of a homogeneous medium in the (Ex, Z0Hy) sector.

    g = (i/2) exp(i n k0 |z - z'|) [[eta, s], [s, 1/eta]] with eta = mu / n
    and s = sign(z - z'); at coincidence s = 0 (mean of the one-sided limits).

    Args:
        n_complex: Refractive index with Im(n) >= 0
        omega: Angular frequency
        z: Observation point
        z_prime: Source point
        mu: Relative permeability of the medium
        units: Units mode used to convert omega to k0

    Returns:
        2x2 complex matrix

    Raises:
        ValueError: For gain media (Im n < 0)
    """
    n = complex(n_complex)
    if n.imag < 0:
        raise ValueError("Retarded kernels need Im(n) >= 0 (gain media are rejected)")
    k0 = wavenumber(omega, units)
    eta = complex(mu) / n
    s = _sign(z - z_prime)
    phase = np.exp(1j * n * k0 * abs(z - z_prime))
    return 0.5j * phase * np.array([[eta, s], [s, 1.0 / eta]])


class HomogeneousGreen1D(GreenKernel):
    """
    Analytic (Ex, Z0Hy) kernel of a homogeneous isotropic medium.

    The advanced kernel (incoming waves) is available for lossless media.
    """

    components = SCALAR_SECTOR
    dimension = 1
    homogeneous = True

    def __init__(
        self,
        eps: complex,
        mu: complex,
        omega: float,
        units: UnitsMode = UnitsMode.DIMENSIONLESS,
        boundary: str = "retarded",
    ):
        if boundary not in ("retarded", "advanced"):
            raise ValueError(f"Unknown boundary condition: {boundary!r}")
        self.eps = complex(eps)
        self.mu = complex(mu)
        self.omega = float(omega)
        self.units = UnitsMode(units)
        self.k0 = wavenumber(omega, units)
        self.n = refractive_index(self.eps, self.mu)
        self.eta = self.mu / self.n
        self.boundary = boundary
        self.k_perp = (0.0, 0.0)
        if boundary == "advanced" and (self.eps.imag != 0 or self.mu.imag != 0):
            raise ValueError("Advanced kernels are built for lossless media only")

    @classmethod
    def from_medium(cls, medium: Medium, omega: float, **kwargs: Any) -> "HomogeneousGreen1D":
        tensor = medium_tensor(medium, omega)
        return cls(tensor.eps[0, 0], tensor.mu[0, 0], omega, **kwargs)

    def __call__(self, z: Any, z_prime: Any) -> np.ndarray:
        z, z_prime = float(z), float(z_prime)
        if self.boundary == "retarded":
            return homogeneous_green_1d(self.n, self.omega, z, z_prime, self.mu, self.units)
        s = _sign(z - z_prime)
        phase = np.exp(-1j * self.n * self.k0 * abs(z - z_prime))
        return -0.5j * phase * np.array([[self.eta, -s], [-s, 1.0 / self.eta]])

    def material(self, r: Any) -> np.ndarray:
        return MaterialTensor.isotropic(self.eps, self.mu).matrix

    def propagator(self, z2: float, z1: float) -> np.ndarray:
        """Map of the (Ex, Z0Hy) trace from z1 to z2 for source-free fields."""
        phase = self.n * self.k0 * (z2 - z1)
        c, s = np.cos(phase), np.sin(phase)
        return np.array([[c, 1j * self.eta * s], [1j * s / self.eta, c]])

    def jump(self) -> np.ndarray:
        return scalar_jump()

    def branch_difference(self, z: float, z_prime: float) -> np.ndarray:
        """Difference of the two kernel branches continued across z'."""
        return self.propagator(z, z_prime) @ self.jump()

    def plane_wave(self, direction: int, amplitude: complex = 1.0, origin: float = 0.0) -> Any:
        """
        Evaluator of a plane wave travelling along +z (direction=1) or -z.

        Returns:
            Callable mapping z samples to (M, 6) dual-field values
        """
        forward = np.array([1.0, 0.0, 0.0, 0.0, direction / self.eta, 0.0], dtype=complex)

        def evaluate(points: np.ndarray) -> np.ndarray:
            z = np.asarray(points, dtype=float).reshape(-1)
            phase = amplitude * np.exp(1j * direction * self.n * self.k0 * (z - origin))
            return phase[:, None] * forward[None, :]

        return evaluate


# ------------------------------------------------------------
# Planar stratified media, tangential sector
# ------------------------------------------------------------
def _kz(k0: float, eps: complex, mu: complex, kt: float) -> complex:
    kz = complex(np.sqrt(complex(k0 * k0 * eps * mu - kt * kt)))
    if kz.imag < 0 or (kz.imag == 0 and kz.real < 0):
        kz = -kz
    if abs(kz) < GRAZING_KZ_TOLERANCE * k0:
        raise ValueError("Grazing incidence: normal wavenumber vanishes in a layer")
    return kz


def _isotropic_scalars(tensor: MaterialTensor) -> Tuple[complex, complex]:
    if not tensor.is_isotropic:
        raise ValueError("Stratified kernels need isotropic layers")
    return complex(tensor.eps[0, 0]), complex(tensor.mu[0, 0])


def stack_from_profile(
    profile: MaterialProfile,
    omega: float,
    k_perp: Sequence[float] = (0.0, 0.0),
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> LayerStack:
    """
    Layer stack of a material profile at one frequency.

    Gaps between layers are filled with the background medium, which is
    also used for both terminal half-spaces.
    """
    background = medium_tensor(profile.background, omega)
    layers: List[StackLayer] = []
    cursor: Optional[float] = None
    for layer in profile.layers:
        if cursor is not None and layer.z_min > cursor:
            layers.append(StackLayer(layer.z_min - cursor, background))
        layers.append(StackLayer(layer.z_max - layer.z_min, medium_tensor(layer.medium, omega)))
        cursor = layer.z_max
    z_start = profile.layers[0].z_min if profile.layers else 0.0
    return LayerStack(
        layers=tuple(layers),
        bottom=background,
        top=background,
        z_start=z_start,
        k_perp=tuple(k_perp),
        omega=omega,
        k0=wavenumber(omega, units),
    )


class StratifiedGreen(GreenKernel):
    """
    Tangential kernel of a planar stack at fixed transverse wavevector.

    Regions are numbered 0 (bottom half-space) to L + 1 (top half-space);
    interface m separates region m from region m + 1. Reflection maps are
    carried upward (R, no incoming wave from the top) and downward (Q, no
    incoming wave from the bottom), so only decaying exponentials are ever
    evaluated.
    """

    components = TANGENTIAL_SECTOR
    dimension = 1

    def __init__(self, stack: LayerStack):
        self.stack = stack
        self.k0 = stack.k0
        self.omega = stack.omega
        self.k_perp = stack.k_perp
        self.boundary = stack.boundary
        self.interfaces = stack.interfaces
        kt = float(np.hypot(*stack.k_perp))
        e_par = np.array([1.0, 0.0]) if kt == 0 else np.asarray(stack.k_perp) / kt
        rotation = np.array([[e_par[0], -e_par[1]], [e_par[1], e_par[0]]])
        frame = np.zeros((4, 4))
        frame[:2, :2] = rotation
        frame[2:, 2:] = rotation
        self.tensors = stack.regions
        self.kz: List[complex] = []
        self.up: List[np.ndarray] = []
        self.down: List[np.ndarray] = []
        for tensor in self.tensors:
            eps, mu = _isotropic_scalars(tensor)
            kz = _kz(self.k0, eps, mu, kt)
            q_s = kz / (self.k0 * mu)
            q_p = kz / (self.k0 * eps)
            # Local basis (E_par, E_s, V_par, V_s); columns are s then p.
            up = np.array([[0, q_p], [1, 0], [-q_s, 0], [0, 1]], dtype=complex)
            down = np.array([[0, -q_p], [1, 0], [q_s, 0], [0, 1]], dtype=complex)
            self.kz.append(kz)
            self.up.append(frame @ up)
            self.down.append(frame @ down)
        self._recurse()
        logger.debug("Stratified kernel: %d regions, k_perp=%s", len(self.tensors), self.k_perp)

    @classmethod
    def from_profile(
        cls,
        profile: MaterialProfile,
        omega: float,
        k_perp: Sequence[float] = (0.0, 0.0),
        units: UnitsMode = UnitsMode.DIMENSIONLESS,
    ) -> "StratifiedGreen":
        return cls(stack_from_profile(profile, omega, k_perp, units))

    def _phase(self, region: int, distance: float) -> complex:
        return complex(np.exp(1j * self.kz[region] * distance))

    def _thickness(self, region: int) -> float:
        return float(self.interfaces[region] - self.interfaces[region - 1])

    def _recurse(self) -> None:
        count = len(self.interfaces)
        top = count
        zero = np.zeros((2, 2), dtype=complex)
        self.r_top: List[np.ndarray] = [zero] * count
        self.r_bottom: List[np.ndarray] = [zero] * (count + 1)
        self.up_transport: List[np.ndarray] = [zero] * count
        for m in range(count - 1, -1, -1):
            f = self.up[m + 1] + self.down[m + 1] @ self.r_bottom[m + 1]
            solution = np.linalg.solve(np.hstack([self.down[m], -f]), -self.up[m])
            self.r_top[m], self.up_transport[m] = solution[:2], solution[2:]
            if m >= 1:
                phi = self._phase(m, self._thickness(m))
                self.r_bottom[m] = phi * phi * self.r_top[m]
        self.q_bottom: List[np.ndarray] = [zero] * (count + 1)
        self.q_top: List[np.ndarray] = [zero] * (count + 1)
        self.down_transport: List[np.ndarray] = [zero] * count
        for m in range(count):
            g = self.down[m] + self.up[m] @ self.q_top[m]
            solution = np.linalg.solve(np.hstack([self.up[m + 1], -g]), -self.down[m + 1])
            self.q_bottom[m + 1], self.down_transport[m] = solution[:2], solution[2:]
            if m + 1 < top:
                phi = self._phase(m + 1, self._thickness(m + 1))
                self.q_top[m + 1] = phi * phi * self.q_bottom[m + 1]

    def region(self, z: float) -> int:
        """Region index of z (points on an interface are rejected)."""
        z = float(z)
        if np.any(np.abs(self.interfaces - z) < INTERFACE_CLEARANCE):
            raise ValueError(f"Point z={z!r} lies on a layer interface")
        return int(np.searchsorted(self.interfaces, z))

    def _region_of_trace(self, z: float) -> int:
        # Traces are continuous, so interface points may take either side.
        return int(np.searchsorted(self.interfaces, float(z)))

    def _up_reflection(self, region: int, z: float) -> np.ndarray:
        if region == len(self.interfaces):
            return self.r_bottom[region]
        phi = self._phase(region, self.interfaces[region] - z)
        return phi * phi * self.r_top[region]

    def _down_reflection(self, region: int, z: float) -> np.ndarray:
        if region == 0:
            return self.q_top[0]
        phi = self._phase(region, z - self.interfaces[region - 1])
        return phi * phi * self.q_bottom[region]

    def _source_amplitudes(self, region: int, z_prime: float) -> Tuple[np.ndarray, np.ndarray]:
        above = self.up[region] + self.down[region] @ self._up_reflection(region, z_prime)
        below = self.down[region] + self.up[region] @ self._down_reflection(region, z_prime)
        solution = np.linalg.solve(np.hstack([above, -below]), tangential_jump())
        return solution[:2], solution[2:]

    def __call__(self, z: Any, z_prime: Any) -> np.ndarray:
        z, z_prime = float(z), float(z_prime)
        j, m = self.region(z), self.region(z_prime)
        c_up, c_down = self._source_amplitudes(m, z_prime)
        if z == z_prime:
            above = (self.up[m] + self.down[m] @ self._up_reflection(m, z)) @ c_up
            below = (self.down[m] + self.up[m] @ self._down_reflection(m, z)) @ c_down
            return 0.5 * (above + below)
        if z > z_prime:
            amplitude = c_up
            position = z_prime
            for region in range(m, j):
                edge = self.interfaces[region]
                amplitude = self.up_transport[region] @ (self._phase(region, edge - position) * amplitude)
                position = edge
            amplitude = self._phase(j, z - position) * amplitude
            return (self.up[j] + self.down[j] @ self._up_reflection(j, z)) @ amplitude
        amplitude = c_down
        position = z_prime
        for region in range(m, j, -1):
            edge = self.interfaces[region - 1]
            amplitude = self.down_transport[region - 1] @ (self._phase(region, position - edge) * amplitude)
            position = edge
        amplitude = self._phase(j, position - z) * amplitude
        return (self.down[j] + self.up[j] @ self._down_reflection(j, z)) @ amplitude

    def material(self, r: Any) -> np.ndarray:
        return self.tensors[self._region_of_trace(float(r))].matrix

    def _region_propagator(self, region: int, distance: float) -> np.ndarray:
        modes = np.hstack([self.up[region], self.down[region]])
        forward = np.exp(1j * self.kz[region] * distance)
        phases = np.diag([forward, forward, 1.0 / forward, 1.0 / forward])
        return modes @ phases @ np.linalg.inv(modes)

    def propagator(self, z2: float, z1: float) -> np.ndarray:
        """
        Tangential-trace propagator U(z2, z1) of source-free fields.

        Built from per-region modal propagators; traces are continuous
        across interfaces. Grows exponentially for evanescent k_perp.
        """
        z1, z2 = float(z1), float(z2)
        out = np.eye(4, dtype=complex)
        if z2 == z1:
            return out
        step = 1 if z2 > z1 else -1
        cuts = [z for z in self.interfaces if min(z1, z2) < z < max(z1, z2)][::step]
        position = z1
        for edge in cuts + [z2]:
            middle = 0.5 * (position + edge)
            out = self._region_propagator(self._region_of_trace(middle), edge - position) @ out
            position = edge
        return out

    def jump(self) -> np.ndarray:
        return tangential_jump()

    def branch(self, z: float, z_prime: float, side: int) -> np.ndarray:
        """Upper (side=+1) or lower (side=-1) kernel branch continued to z."""
        m = self.region(z_prime)
        c_up, c_down = self._source_amplitudes(m, z_prime)
        if side > 0:
            trace = (self.up[m] + self.down[m] @ self._up_reflection(m, z_prime)) @ c_up
        else:
            trace = (self.down[m] + self.up[m] @ self._down_reflection(m, z_prime)) @ c_down
        return self.propagator(z, z_prime) @ trace

    def branch_difference(self, z: float, z_prime: float) -> np.ndarray:
        return self.propagator(z, z_prime) @ self.jump()


def stratified_green(stack: LayerStack, z: float, z_prime: float) -> np.ndarray:
    """
    Tangential first-order kernel of a planar stack.

    Args:
        stack: Layer stack at fixed (omega, k_perp)
        z: Observation height, off the interfaces
        z_prime: Source height, off the interfaces

    Returns:
        4x4 complex matrix over (Ex, Ey, Z0Hx, Z0Hy)
    """
    return StratifiedGreen(stack)(z, z_prime)


# ------------------------------------------------------------
# Finite-difference oracle
# ------------------------------------------------------------
def _transverse_block(block: np.ndarray) -> np.ndarray:
    """In-plane block with the normal component eliminated (k_perp = 0)."""
    return block[:2, :2] - np.outer(block[:2, 2], block[2, :2]) / block[2, 2]


def staggered_grid(
    z_min: float,
    z_max: float,
    h: float,
    interfaces: Sequence[float] = (),
    anchor: Optional[float] = None,
) -> Grid:
    """
    Uniform grid whose half nodes contain the interfaces.

    Without interfaces the node set contains `anchor` (default z_min).

    Raises:
        ValueError: If interfaces cannot all sit on half nodes
    """
    if h <= 0 or not z_max > z_min:
        raise ValueError("Grid needs h > 0 and z_min < z_max")
    if interfaces:
        reference = float(interfaces[0]) + 0.5 * h
    else:
        reference = float(z_min if anchor is None else anchor)
    first = int(np.ceil((z_min - reference) / h - 1e-9))
    last = int(np.floor((z_max - reference) / h + 1e-9))
    nodes = reference + h * np.arange(first, last + 1)
    for z in interfaces:
        offset = (z - reference) / h + 0.5
        if abs(offset - round(offset)) > 1e-9:
            raise ValueError(f"Interface z={z!r} does not fall on a half node for h={h!r}")
    return Grid((nodes,))


class FiniteDifferenceGreen(GreenKernel):
    """
    Staggered finite-difference resolvent of the tangential first-order system.

    Unknowns interleave (Ex, Ey) on nodes with (Z0Hx, Z0Hy) on half nodes.
    Both ends carry the exact discrete outgoing (Dirichlet-to-Neumann)
    closure of the terminal medium, so the computational window truncates
    nothing. Kernel samples are taken on nodes: magnetic data are moved
    between half nodes and nodes with the four-point midpoint stencil.
    """

    components = TANGENTIAL_SECTOR
    dimension = 1
    provenance = "finite-difference"

    _STENCIL = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0

    def __init__(
        self,
        profile: MaterialProfile,
        grid: Grid,
        omega: float,
        eta: Optional[float] = None,
        units: UnitsMode = UnitsMode.DIMENSIONLESS,
    ):
        if grid.dimension != 1:
            raise ValueError("The finite-difference oracle needs a 1D grid")
        z = grid.axes[0]
        steps = np.diff(z)
        h = float(np.mean(steps))
        if np.max(np.abs(steps - h)) > 1e-9 * h:
            raise ValueError("The finite-difference oracle needs a uniform grid")
        self.profile = profile
        self.grid = grid
        self.h = h
        self.omega = float(omega)
        self.units = UnitsMode(units)
        self.k0 = wavenumber(omega, units)
        self.k_perp = (0.0, 0.0)
        self.eta = min(FD_ETA_CAP, h * h) * self.k0 if eta is None else float(eta)
        self._check_resolution()
        self.matrix = self._assemble()
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            raise ValueError(
                f"Discrete operator is singular (condition estimate inf, eta={self.eta!r})"
            ) from e
        self.condition = self._condition_estimate()
        if not np.isfinite(self.condition) or self.condition > FD_CONDITION_LIMIT:
            raise ValueError(
                f"Discrete operator is ill-conditioned (condition estimate {self.condition:.3e}, eta={self.eta!r})"
            )
        self._columns: Dict[int, np.ndarray] = {}
        self._columns_lock = threading.Lock()
        logger.debug(
            "FD oracle: %d unknowns, h=%.3e, eta=%.3e, cond~%.3e",
            self.matrix.shape[0], h, self.eta, self.condition,
        )

    @property
    def size(self) -> int:
        return int(self.grid.shape[0])

    def _tensor(self, z: float) -> MaterialTensor:
        return medium_tensor(self.profile.medium_at(z), self.omega)

    def _check_resolution(self) -> None:
        media = [self.profile.background] + [layer.medium for layer in self.profile.layers]
        tensors = [medium_tensor(m, self.omega) for m in media]
        n_max = max(abs(refractive_index(t.eps[0, 0], t.mu[0, 0])) for t in tensors)
        shortest = 2.0 * np.pi / (self.k0 * n_max)
        if self.h > shortest / FD_MIN_POINTS_PER_WAVELENGTH:
            raise ValueError(
                f"Grid resolves the shortest wavelength with fewer than {FD_MIN_POINTS_PER_WAVELENGTH} points"
            )

    def _terminal(self, eps_block: np.ndarray, mu_block: np.ndarray, side: str) -> complex:
        if not (np.allclose(eps_block, eps_block[0, 0] * np.eye(2)) and np.allclose(mu_block, mu_block[0, 0] * np.eye(2))):
            raise ValueError("Terminal media of the finite-difference oracle must be isotropic")
        a = self.k0 * eps_block[0, 0] + 1j * self.eta
        b = self.k0 * mu_block[0, 0] + 1j * self.eta
        kappa = np.sqrt(complex(a * b))
        if kappa.imag < 0:
            kappa = -kappa
        theta = 2.0 * np.arcsin(kappa * self.h / 2.0)
        if theta.imag < 0:
            theta = -theta
        rho = np.exp(1j * theta)
        if side == "left":
            rho = 1.0 / rho
        beta = -1j * (rho - 1.0) / (self.h * b)
        return beta if side == "right" else beta / rho

    def _assemble(self) -> sparse.csc_matrix:
        z = self.grid.axes[0]
        h = self.h
        count = z.size
        rows: List[int] = []
        cols: List[int] = []
        vals: List[complex] = []

        def add(r0: int, c0: int, block: np.ndarray) -> None:
            for p in range(2):
                for q in range(2):
                    if block[p, q] != 0:
                        rows.append(r0 + p)
                        cols.append(c0 + q)
                        vals.append(block[p, q])

        curl = 1j * ROTATION / h
        for j in range(count):
            eps_t = _transverse_block(self._tensor(z[j]).eps)
            add(4 * j, 4 * j, -(self.k0 * eps_t + 1j * self.eta * np.eye(2)))
            if j < count - 1:
                add(4 * j, 4 * j + 2, curl)
            if j > 0:
                add(4 * j, 4 * j - 2, -curl)
        for j in range(count - 1):
            middle = 0.5 * (z[j] + z[j + 1])
            mu_t = 0.5 * (
                _transverse_block(self._tensor(middle - 1e-9 * h).mu)
                + _transverse_block(self._tensor(middle + 1e-9 * h).mu)
            )
            add(4 * j + 2, 4 * j + 4, -curl)
            add(4 * j + 2, 4 * j, curl)
            add(4 * j + 2, 4 * j + 2, -(self.k0 * mu_t + 1j * self.eta * np.eye(2)))
        left = self._tensor(z[0] - h)
        right = self._tensor(z[-1] + h)
        ends = ((z[0] - h, z[0], z[1]), (z[-1] + h, z[-1], z[-2]))
        for outside, *inside in ends:
            if any(self.profile.medium_at(p) is not self.profile.medium_at(outside) for p in inside):
                raise ValueError("Layers must stay at least two cells away from the grid ends")
        beta_left = self._terminal(_transverse_block(left.eps), _transverse_block(left.mu), "left")
        beta_right = self._terminal(_transverse_block(right.eps), _transverse_block(right.mu), "right")
        add(0, 0, (1j / h) * beta_left * np.eye(2))
        last = 4 * (count - 1)
        add(last, last, -(1j / h) * beta_right * np.eye(2))
        size = 4 * count - 2
        return sparse.coo_matrix((vals, (rows, cols)), shape=(size, size), dtype=complex).tocsc()

    def _condition_estimate(self) -> float:
        size = self.matrix.shape[0]
        inverse = LinearOperator(
            (size, size),
            matvec=lambda x: self._lu.solve(np.ascontiguousarray(np.ravel(x), dtype=complex)),
            rmatvec=lambda x: self._lu.solve(np.ascontiguousarray(np.ravel(x), dtype=complex), trans="H"),
            dtype=complex,
        )
        return float(onenormest(self.matrix) * onenormest(inverse))

    def node_index(self, z: float) -> int:
        """Index of the grid node at z."""
        z0 = self.grid.axes[0][0]
        index = int(round((float(z) - z0) / self.h))
        if index < 0 or index >= self.size or abs(z0 + index * self.h - z) > 1e-9 * self.h:
            raise ValueError(f"Point z={z!r} is not a node of the finite-difference grid")
        return index

    def _check_interior(self, index: int) -> None:
        if index < FD_MIN_EDGE_NODES or index > self.size - 1 - FD_MIN_EDGE_NODES:
            raise ValueError("Kernel samples must stay at least two nodes away from the grid ends")

    def source_vectors(self, index: int) -> np.ndarray:
        """Right-hand sides of unit point sources (columns Ex, Ey, Z0Hx, Z0Hy)."""
        size = self.matrix.shape[0]
        rhs = np.zeros((size, 4), dtype=complex)
        rhs[4 * index, 0] = 1.0 / self.h
        rhs[4 * index + 1, 1] = 1.0 / self.h
        for weight, half in zip(self._STENCIL, range(index - 2, index + 2)):
            rhs[4 * half + 2, 2] = weight / self.h
            rhs[4 * half + 3, 3] = weight / self.h
        return rhs

    def column(self, z_prime: float) -> np.ndarray:
        """Discrete solutions for the four unit sources at z'."""
        index = self.node_index(z_prime)
        self._check_interior(index)
        with self._columns_lock:
            if index not in self._columns:
                self._columns[index] = self._lu.solve(self.source_vectors(index))
            return self._columns[index]

    def sample(self, solution: np.ndarray, index: int) -> np.ndarray:
        """Field at node `index` from a solution vector (or stack of them)."""
        out = np.empty((4,) + solution.shape[1:], dtype=complex)
        out[0:2] = solution[4 * index: 4 * index + 2]
        out[2:4] = sum(
            weight * solution[4 * half + 2: 4 * half + 4]
            for weight, half in zip(self._STENCIL, range(index - 2, index + 2))
        )
        return out

    def __call__(self, z: Any, z_prime: Any) -> np.ndarray:
        i = self.node_index(z)
        j = self.node_index(z_prime)
        self._check_interior(i)
        if abs(i - j) < FD_MIN_NODE_SEPARATION:
            raise ValueError(
                f"Finite-difference samples need at least {FD_MIN_NODE_SEPARATION} nodes between z and z'"
            )
        return self.sample(self.column(z_prime), i)

    def column_residual(self, z_prime: float) -> float:
        """Max-norm of A x - e/h over the four source columns."""
        index = self.node_index(z_prime)
        x = self.column(z_prime)
        residual = self.matrix @ x - self.source_vectors(index)
        return float(np.max(np.abs(residual)) * self.h)

    def resolvent(self) -> np.ndarray:
        """Dense inverse of the discrete operator (small grids only)."""
        size = self.matrix.shape[0]
        return self._lu.solve(np.eye(size, dtype=complex))

    def material(self, r: Any) -> np.ndarray:
        return self._tensor(float(r)).matrix


def fd_green_1d(
    profile: MaterialProfile,
    grid: Grid,
    eta: Optional[float],
    omega: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> FiniteDifferenceGreen:
    """
    Finite-difference resolvent of a 1D profile at normal incidence.

    Args:
        profile: Piecewise-constant material profile
        grid: Uniform 1D grid, at least 20 points per shortest wavelength
        eta: Uniform regularizing loss; None selects min(1e-6, h^2) k0
        omega: Angular frequency
        units: Units mode

    Returns:
        FiniteDifferenceGreen evaluator over (Ex, Ey, Z0Hx, Z0Hy)

    Raises:
        ValueError: If the discrete operator is singular or ill-conditioned
    """
    return FiniteDifferenceGreen(profile, grid, omega, eta, units)


def fd_richardson(
    profile: MaterialProfile,
    z_min: float,
    z_max: float,
    h: float,
    omega: float,
    z: float,
    z_prime: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> np.ndarray:
    """
    Richardson-extrapolated oracle sample (9 G(h/3) - G(h)) / 8.

    Refinement by 3 keeps both the sample nodes and the interface half
    nodes of the coarse grid.
    """
    factor = FD_RICHARDSON_FACTOR
    interfaces = profile.interfaces
    coarse = FiniteDifferenceGreen(profile, staggered_grid(z_min, z_max, h, interfaces, anchor=z), omega, units=units)
    fine = FiniteDifferenceGreen(
        profile, staggered_grid(z_min, z_max, h / factor, interfaces, anchor=z), omega, units=units
    )
    return (factor ** 2 * fine(z, z_prime) - coarse(z, z_prime)) / (factor ** 2 - 1)


# ------------------------------------------------------------
# Transfer kernels
# ------------------------------------------------------------
def transfer_kernel(
    g: GreenKernel,
    z1: float,
    z2: float,
    normal: float = 1.0,
    sources: Sequence[float] = (),
    label: str = "",
) -> TransferKernel:
    """
    Surface-to-surface transfer kernel of the tangential trace.

    T21 = N U(z2, z1) N with N the planar surface metric. T(z, z) = I,
    the result does not depend on the sign of the normal, and on traces
    that travel from z1 to z2 it coincides with -i (n x) g(z2, z1) for the
    normal pointing back toward z1.

    Args:
        g: Kernel exposing a trace propagator
        z1: Source surface
        z2: Target surface
        normal: Orientation of the planar normals (+1 or -1)
        sources: Source positions; none may lie between the surfaces
        label: Stage name

    Raises:
        ValueError: If a source lies between the surfaces or the kernel has
            no propagator
    """
    low, high = min(z1, z2), max(z1, z2)
    for z in sources:
        if low <= z <= high:
            raise ValueError(f"Source at z={z!r} lies inside the transfer region [{low}, {high}]")
    if not hasattr(g, "propagator"):
        raise ValueError(f"{type(g).__name__} has no trace propagator")
    propagator = g.propagator(z2, z1)
    if propagator.shape[0] == 4 and len(g.components) == 2:
        propagator = scalar_block(propagator)
    sector = SCALAR_SECTOR if propagator.shape[0] == 2 else TANGENTIAL_SECTOR
    metric = tangential_metric(normal, sector)
    matrix = metric @ propagator @ metric
    return TransferKernel(matrix, float(z1), float(z2), g.omega, getattr(g, "k_perp", (0.0, 0.0)), label)


def identity_transfer(z: float, omega: float, dimension: int = 4, k_perp: Tuple[float, float] = (0.0, 0.0)) -> TransferKernel:
    return TransferKernel(np.eye(dimension, dtype=complex), z, z, omega, k_perp, "identity")


def compose(tb: TransferKernel, ta: TransferKernel) -> TransferKernel:
    """
    Composition Tb Ta of two transfer kernels.

    Raises:
        ValueError: On surface, frequency, wavevector or size mismatch
    """
    if abs(ta.z_target - tb.z_source) > INTERFACE_CLEARANCE:
        raise ValueError(
            f"Surfaces do not chain: {ta.label or 'stage'} ends at z={ta.z_target!r}, "
            f"{tb.label or 'stage'} starts at z={tb.z_source!r}"
        )
    if ta.omega != tb.omega:
        raise ValueError("Transfer kernels are given at different frequencies")
    if tuple(ta.k_perp) != tuple(tb.k_perp):
        raise ValueError("Transfer kernels are given at different transverse wavevectors")
    if ta.dimension != tb.dimension:
        raise ValueError("Transfer kernels act on different trace spaces")
    label = "+".join(part for part in (ta.label, tb.label) if part)
    return TransferKernel(tb.matrix @ ta.matrix, ta.z_source, tb.z_target, ta.omega, ta.k_perp, label)


def scalar_block(matrix: np.ndarray) -> np.ndarray:
    """(Ex, Z0Hy) block of a tangential 4x4 matrix."""
    idx = np.asarray(SCALAR_IN_TANGENTIAL)
    return np.asarray(matrix)[np.ix_(idx, idx)]
