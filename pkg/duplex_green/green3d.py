"""
Homogeneous-medium 3D kernels.

This module contains the outgoing dyadics of the electric and magnetic
vector Helmholtz equations, the first-order 6x6 kernel assembled from them
through primed curls, and the numerical-differentiation checks (Maxwell
and Helmholtz residuals, planar angular spectrum) that validate both.
"""

import logging
from typing import Any, Callable, Optional

import numpy as np

from .config import (
    CURL_STEP_WAVELENGTHS,
    DEFAULT_PANEL_ORDER,
    MIN_SEPARATION_WAVELENGTHS,
    PLANE_ENVELOPE_CUTOFF,
    PLANE_WINDOW_FRACTION,
    QUADRATURE_SEPARATION_WAVELENGTHS,
    SECTOR_ELECTRIC,
    SECTOR_MAGNETIC,
)
from .core import GreenKernel, wavenumber, windowed_plane_rule
from .media import medium_tensor, refractive_index
from .models import MaterialTensor, Medium, UnitsMode

logger = logging.getLogger(__name__)

_LEVI_CIVITA = np.zeros((3, 3, 3))
_LEVI_CIVITA[0, 1, 2] = _LEVI_CIVITA[1, 2, 0] = _LEVI_CIVITA[2, 0, 1] = 1.0
_LEVI_CIVITA[0, 2, 1] = _LEVI_CIVITA[2, 1, 0] = _LEVI_CIVITA[1, 0, 2] = -1.0


def _separation(r: Any, r_prime: Any) -> np.ndarray:
    return np.asarray(r, dtype=float).reshape(-1, 3) - np.asarray(r_prime, dtype=float).reshape(-1, 3)


def scalar_green(k: complex, distance: np.ndarray) -> np.ndarray:
    """exp(i k R) / (4 pi R)."""
    return np.exp(1j * k * distance) / (4.0 * np.pi * distance)


def _dyadic_parts(k: complex, delta: np.ndarray) -> tuple:
    """Helmholtz dyadic G_k = (I + grad grad / k^2) g0 and g0' for separations (M, 3)."""
    distance = np.linalg.norm(delta, axis=-1)
    unit = delta / distance[:, None]
    g0 = scalar_green(k, distance)
    kr = k * distance
    transverse = 1.0 + 1j / kr - 1.0 / kr ** 2
    longitudinal = -1.0 - 3j / kr + 3.0 / kr ** 2
    outer = unit[:, :, None] * unit[:, None, :]
    dyadic = g0[:, None, None] * (transverse[:, None, None] * np.eye(3) + longitudinal[:, None, None] * outer)
    derivative = (1j * k - 1.0 / distance) * g0
    cross = np.einsum("ijk,mj->mik", _LEVI_CIVITA, unit)
    return dyadic, derivative, cross, distance


class Dyadic3:
    """
    Outgoing dyadic of one vector Helmholtz equation in a homogeneous medium.

    The electric dyadic is mu G_k and the magnetic one eps G_k, so that
    k0 times either is the matching diagonal block of the first-order kernel.

    Args:
        eps: Relative permittivity
        mu: Relative permeability
        omega: Angular frequency
        sector: "electric" or "magnetic"
        units: Units mode
    """

    def __init__(
        self,
        eps: complex,
        mu: complex,
        omega: float,
        sector: str = SECTOR_ELECTRIC,
        units: UnitsMode = UnitsMode.DIMENSIONLESS,
    ):
        if sector not in (SECTOR_ELECTRIC, SECTOR_MAGNETIC):
            raise ValueError(f"Unknown dyadic sector: {sector!r}")
        self.eps = complex(eps)
        self.mu = complex(mu)
        self.omega = float(omega)
        self.sector = sector
        self.k0 = wavenumber(omega, units)
        self.n = refractive_index(self.eps, self.mu)
        self.k = self.n * self.k0
        self.boundary = "retarded"
        self.scale = self.mu if sector == SECTOR_ELECTRIC else self.eps
        self.min_separation = MIN_SEPARATION_WAVELENGTHS * 2.0 * np.pi / (self.k0 * abs(self.n))

    def _check(self, distance: np.ndarray) -> None:
        if np.any(distance < self.min_separation):
            raise ValueError("Coincident points: |r - r'| is below the minimum separation")

    def __call__(self, r: Any, r_prime: Any) -> np.ndarray:
        delta = _separation(r, r_prime)
        dyadic, _, _, distance = _dyadic_parts(self.k, delta)
        self._check(distance)
        out = self.scale * dyadic
        return out[0] if out.shape[0] == 1 else out

    def primed_curl(self, r: Any, r_prime: Any) -> np.ndarray:
        """Row-wise curl with respect to r' (closed form scale * g0' [R x])."""
        delta = _separation(r, r_prime)
        _, derivative, cross, distance = _dyadic_parts(self.k, delta)
        self._check(distance)
        out = self.scale * derivative[:, None, None] * cross
        return out[0] if out.shape[0] == 1 else out


def dyadic_gE(medium: Medium, omega: float, r: Any, r_prime: Any, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> np.ndarray:
    """
    Electric dyadic of a homogeneous isotropic medium at (r, r').

    Raises:
        ValueError: For coincident points or gain media
    """
    tensor = medium_tensor(medium, omega)
    n = refractive_index(tensor.eps[0, 0], tensor.mu[0, 0])
    if n.imag < 0:
        raise ValueError("Retarded kernels need Im(n) >= 0")
    return Dyadic3(tensor.eps[0, 0], tensor.mu[0, 0], omega, SECTOR_ELECTRIC, units)(r, r_prime)


# ------------------------------------------------------------
# Numerical differentiation
# ------------------------------------------------------------
def numerical_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    point: Any,
    step: float,
    order: int = 4,
    richardson: bool = False,
) -> np.ndarray:
    """
    Central-difference derivatives of f at a point.

    Args:
        f: Callable of a 3-vector returning an array
        point: Evaluation point
        step: Finite-difference step
        order: 2 or 4
        richardson: Combine steps h and h/2 to cancel the leading error

    Returns:
        Array of shape (3,) + f(point).shape with d_j f
    """
    if order not in (2, 4):
        raise ValueError("Central differences are provided at order 2 or 4")
    point = np.asarray(point, dtype=float)

    def once(h: float) -> np.ndarray:
        parts = []
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            if order == 2:
                parts.append((f(point + e) - f(point - e)) / (2.0 * h))
            else:
                parts.append(
                    (-f(point + 2 * e) + 8.0 * f(point + e) - 8.0 * f(point - e) + f(point - 2 * e)) / (12.0 * h)
                )
        return np.stack(parts)

    if not richardson:
        return once(step)
    factor = 2.0 ** order
    return (factor * once(step / 2.0) - once(step)) / (factor - 1.0)


def numerical_curl(
    f: Callable[[np.ndarray], np.ndarray],
    point: Any,
    step: float,
    order: int = 4,
    richardson: bool = False,
    rows: bool = False,
) -> np.ndarray:
    """
    Curl of a matrix-valued field by central differences.

    With rows=False the curl acts on every column (index 0 is the vector
    index); with rows=True it acts on every row (last index is the vector
    index).
    """
    jac = numerical_jacobian(f, point, step, order, richardson)
    if rows:
        return np.einsum("ljk,jik->il", _LEVI_CIVITA, jac)
    return np.einsum("ijk,jk...->i...", _LEVI_CIVITA, jac)


# ------------------------------------------------------------
# First-order kernel
# ------------------------------------------------------------
def first_from_second(
    g_e: Dyadic3,
    g_h: Dyadic3,
    r: Any,
    r_prime: Any,
    method: str = "analytic",
    step: Optional[float] = None,
) -> np.ndarray:
    """
    First-order 6x6 kernel from the two second-order dyadics.

    Blocks: gEJ = k0 gE, gHM = k0 gH, gEM = i [curl' gE] / mu,
    gHJ = -i [curl' gH] / eps, with the primed curl taken row-wise.

    Args:
        g_e: Electric dyadic
        g_h: Magnetic dyadic
        r: Observation point
        r_prime: Source point
        method: "analytic" (closed-form primed curls) or "numerical"
            (fourth-order central differences with Richardson extrapolation)
        step: Finite-difference step; defaults to 1e-4 wavelengths

    Returns:
        6x6 complex matrix
    """
    if g_e.sector != SECTOR_ELECTRIC or g_h.sector != SECTOR_MAGNETIC:
        raise ValueError("first_from_second needs an electric and a magnetic dyadic")
    r = np.asarray(r, dtype=float)
    r_prime = np.asarray(r_prime, dtype=float)
    k0 = g_e.k0
    if method == "analytic":
        curl_e = g_e.primed_curl(r, r_prime)
        curl_h = g_h.primed_curl(r, r_prime)
    elif method == "numerical":
        h = CURL_STEP_WAVELENGTHS * 2.0 * np.pi / k0 if step is None else step
        curl_e = numerical_curl(lambda p: g_e(r, p), r_prime, h, order=4, richardson=True, rows=True)
        curl_h = numerical_curl(lambda p: g_h(r, p), r_prime, h, order=4, richardson=True, rows=True)
    else:
        raise ValueError(f"Unknown primed-curl method: {method!r}")
    out = np.zeros((6, 6), dtype=complex)
    out[:3, :3] = k0 * g_e(r, r_prime)
    out[:3, 3:] = 1j * curl_e / g_e.mu
    out[3:, :3] = -1j * curl_h / g_h.eps
    out[3:, 3:] = k0 * g_h(r, r_prime)
    return out


class Green6(GreenKernel):
    """
    First-order 6x6 kernel of a homogeneous isotropic medium.

    Evaluation is vectorized over observation (or source) points and uses
    the closed forms gEJ = k0 mu G_k, gHM = k0 eps G_k,
    gEM = i g0' [R x] and gHJ = -i g0' [R x].

    Point evaluation refuses separations below 1e-3 wavelengths. The batch
    methods feed volume quadratures whose shells close in on the
    observation point, so they only refuse separations below 1e-8
    wavelengths.
    """

    dimension = 3
    homogeneous = True
    chunk = 8192

    def __init__(
        self,
        eps: complex,
        mu: complex,
        omega: float,
        units: UnitsMode = UnitsMode.DIMENSIONLESS,
    ):
        self.eps = complex(eps)
        self.mu = complex(mu)
        self.omega = float(omega)
        self.units = UnitsMode(units)
        self.k0 = wavenumber(omega, units)
        self.n = refractive_index(self.eps, self.mu)
        if self.n.imag < 0:
            raise ValueError("Retarded kernels need Im(n) >= 0")
        self.k = self.n * self.k0
        self.electric = Dyadic3(eps, mu, omega, SECTOR_ELECTRIC, units)
        self.magnetic = Dyadic3(eps, mu, omega, SECTOR_MAGNETIC, units)
        self.min_separation = self.electric.min_separation
        self.quadrature_separation = QUADRATURE_SEPARATION_WAVELENGTHS * 2.0 * np.pi / (self.k0 * abs(self.n))

    @classmethod
    def from_medium(cls, medium: Medium, omega: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> "Green6":
        tensor = medium_tensor(medium, omega)
        if not tensor.is_isotropic:
            raise ValueError("3D kernels need an isotropic medium")
        return cls(tensor.eps[0, 0], tensor.mu[0, 0], omega, units)

    def _blocks(self, delta: np.ndarray, floor: Optional[float] = None) -> np.ndarray:
        floor = self.min_separation if floor is None else floor
        if np.any(np.linalg.norm(delta, axis=-1) < floor):
            raise ValueError("Coincident points: |r - r'| is below the minimum separation")
        dyadic, derivative, cross, _ = _dyadic_parts(self.k, delta)
        out = np.empty((delta.shape[0], 6, 6), dtype=complex)
        out[:, :3, :3] = self.k0 * self.mu * dyadic
        out[:, 3:, 3:] = self.k0 * self.eps * dyadic
        out[:, :3, 3:] = 1j * derivative[:, None, None] * cross
        out[:, 3:, :3] = -1j * derivative[:, None, None] * cross
        return out

    def __call__(self, r: Any, r_prime: Any) -> np.ndarray:
        return self._blocks(_separation(r, r_prime))[0]

    def _chunked(self, delta: np.ndarray) -> np.ndarray:
        if delta.shape[0] <= self.chunk:
            return self._blocks(delta, self.quadrature_separation)
        return np.concatenate(
            [
                self._blocks(delta[i: i + self.chunk], self.quadrature_separation)
                for i in range(0, delta.shape[0], self.chunk)
            ]
        )

    def batch(self, rs: np.ndarray, r_prime: Any) -> np.ndarray:
        return self._chunked(_separation(rs, r_prime))

    def batch_source(self, r: Any, rps: np.ndarray) -> np.ndarray:
        return self._chunked(_separation(r, rps))

    def material(self, r: Any) -> np.ndarray:
        return MaterialTensor.isotropic(self.eps, self.mu).matrix

    def contact_term(self) -> np.ndarray:
        """Coefficient L of the delta term: g = PV g + L delta(r - r')."""
        out = np.zeros((6, 6), dtype=complex)
        out[:3, :3] = -np.eye(3) / (3.0 * self.k0 * self.eps)
        out[3:, 3:] = -np.eye(3) / (3.0 * self.k0 * self.mu)
        return out


HomogeneousGreen3D = Green6


# ------------------------------------------------------------
# Residual checks
# ------------------------------------------------------------
def _sample_guard(g: GreenKernel, r_prime: Any, points: np.ndarray, step: float) -> None:
    distance = np.linalg.norm(np.asarray(points, dtype=float).reshape(-1, 3) - np.asarray(r_prime, dtype=float), axis=1)
    floor = max(getattr(g, "min_separation", 0.0), 4.0 * step)
    if np.any(distance <= floor):
        raise ValueError("Sample points touch the source point")


def maxwell_residual_6(
    g: GreenKernel,
    r_prime: Any,
    points: Any,
    step: float,
    order: int = 2,
) -> float:
    """
    First-order residual (H - k0 eps) g away from the source.

    Applies the curl by central differences to each kernel column at every
    sample point.

    Args:
        g: 6x6 kernel
        r_prime: Source point
        points: Sample points, shape (M, 3)
        step: Finite-difference step
        order: Difference order (2 or 4)

    Returns:
        max over points of |M g| / max |g|

    Raises:
        ValueError: If a point touches the source point
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    _sample_guard(g, r_prime, points, step)
    worst = 0.0
    for point in points:
        value = g(point, r_prime)
        curl_e = numerical_curl(lambda p: g(p, r_prime)[:3], point, step, order=order)
        curl_v = numerical_curl(lambda p: g(p, r_prime)[3:], point, step, order=order)
        applied = np.vstack([1j * curl_v, -1j * curl_e]) - g.k0 * g.material(point) @ value
        worst = max(worst, float(np.max(np.abs(applied)) / np.max(np.abs(value))))
    logger.debug("Maxwell residual over %d points: %.3e", points.shape[0], worst)
    return worst


def helmholtz_residual(
    dyadic: Dyadic3,
    r_prime: Any,
    points: Any,
    step: float,
) -> float:
    """
    Second-order residual curl curl gE - k^2 gE (column-wise) away from r'.

    Returns:
        max over points of the residual relative to max |k^2 gE|
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    distance = np.linalg.norm(points - np.asarray(r_prime, dtype=float), axis=1)
    if np.any(distance <= max(dyadic.min_separation, 4.0 * step)):
        raise ValueError("Sample points touch the source point")

    def curl_of(p: np.ndarray) -> np.ndarray:
        return numerical_curl(lambda q: dyadic(q, r_prime), p, step, order=4)

    worst = 0.0
    k2 = dyadic.k ** 2
    for point in points:
        value = dyadic(point, r_prime)
        double = numerical_curl(curl_of, point, step, order=4)
        worst = max(worst, float(np.max(np.abs(double - k2 * value)) / np.max(np.abs(k2 * value))))
    return worst


def planar_spectrum(
    g: Green6,
    z: float,
    z_prime: float,
    panel_order: int = DEFAULT_PANEL_ORDER,
    n_phi: int = 8,
) -> np.ndarray:
    """
    Angular spectrum of the 6x6 kernel at k_perp = 0.

    Integrates g((x, y, z), (0, 0, z')) over the transverse plane with a
    polar rule truncated where exp(-Im(k) rho) falls below 1e-12.

    Raises:
        ValueError: For lossless media (the plane integral does not converge
            absolutely)
    """
    if g.k.imag <= 0:
        raise ValueError("Planar spectrum needs a lossy medium")
    radius = float(np.log(1.0 / PLANE_ENVELOPE_CUTOFF) / g.k.imag)
    rule = windowed_plane_rule(
        z,
        radius,
        panel_width=0.5 / g.k0,
        n_radial=panel_order,
        n_phi=n_phi,
        window_fraction=PLANE_WINDOW_FRACTION,
    )
    values = g.batch(rule.nodes, np.array([0.0, 0.0, z_prime]))
    return np.einsum("m,mij->ij", rule.weights, values)

