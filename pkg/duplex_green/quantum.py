"""
Quantized layer of the dual-field Green operator.

Commutators are the c-number matrices that multiply delta(omega - omega')
and, for delta-correlated channels, delta(r - r'). This module builds the
volume and boundary noise weights, assembles the field commutator from
both channels, and tracks the surface-to-surface input-output law and
its noise budget through cascades of transfer kernels.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_VOLUME_ORDER, SCALAR_SECTOR, TANGENTIAL_SECTOR
from .core import (
    GreenKernel,
    check_placement,
    dual_cross,
    interval_rule,
    prefactors,
    tangential_metric,
    wavenumber,
)
from .green1d import compose, identity_transfer, scalar_block
from .identities import (
    forward_surface_integral,
    forward_volume_integral,
    surface_rule,
    volume_rule,
)
from .media import hermitian_split
from .models import CascadeBudget, CommutatorMatrix, Geometry, IdentityReport, NoiseCovariance, TransferKernel, UnitsMode

logger = logging.getLogger(__name__)


# ------------------------------------------------------------
# Noise weights
# ------------------------------------------------------------
def volume_noise_commutator(
    material: np.ndarray,
    k0: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> np.ndarray:
    """
    Volume noise weight (hbar / pi eps0) eps_I at one point.

    The delta(r - r') factor is left to the integrator.

    Args:
        material: 6x6 material tensor at the point
        k0: Vacuum wavenumber
        units: Units mode

    Returns:
        6x6 Hermitian matrix, positive semidefinite for passive media
    """
    _, loss = hermitian_split(material)
    return prefactors(k0, units).hbar_over_pi_eps0 * loss


def boundary_noise_commutator(
    normal: Any,
    k0: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> np.ndarray:
    """
    Surface noise weight of the incoming vacuum fluctuations.

    Equal to -(hbar k0 / 2 pi eps0)(n x) with the inward normal, that is
    +(hbar k0 / 2 pi eps0)(n x) for the outward normal passed here.

    Args:
        normal: Outward unit normal
        k0: Vacuum wavenumber
        units: Units mode

    Returns:
        6x6 Hermitian matrix with eigenvalues c * {1, 1, -1, -1, 0, 0}
    """
    return prefactors(k0, units).boundary * dual_cross(normal)


def noise_covariance(kind: str, k0: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> NoiseCovariance:
    """Channel descriptor with its pointwise weight."""
    table = prefactors(k0, units)
    if kind == "volume":
        return NoiseCovariance(kind, lambda m: volume_noise_commutator(m, k0, units), table.hbar_over_pi_eps0, units)
    if kind == "boundary":
        return NoiseCovariance(kind, lambda n: boundary_noise_commutator(n, k0, units), table.boundary, units)
    if kind == "transfer-added":
        return NoiseCovariance(kind, lambda t: added_noise_deficit(t, k0, units), table.boundary, units)
    raise ValueError(f"Unknown noise channel kind: {kind!r}")


def _trace_modes(eta: complex, direction: float, size: int) -> np.ndarray:
    """Plane-wave traces travelling along direction * z-hat at normal incidence."""
    if size == 2:
        return np.array([[1.0], [direction / eta]], dtype=complex)
    return np.array(
        [[1.0, 0.0], [0.0, 1.0], [0.0, -direction / eta], [direction / eta, 0.0]],
        dtype=complex,
    )


def _impedance(g: GreenKernel, s: Any) -> complex:
    m = g.material(s)
    eps, mu = complex(m[0, 0]), complex(m[3, 3])
    n = np.sqrt(eps * mu)
    if n.imag < 0 or (n.imag == 0 and n.real < 0):
        n = -n
    return mu / n


def incoming_projector(g: GreenKernel, s: Any, normal_z: float) -> np.ndarray:
    """
    Projector onto the incoming traces at a planar surface node.

    Incoming traces travel against the outward normal; the projector
    annihilates outgoing traces. Normal incidence only.
    """
    if tuple(getattr(g, "k_perp", (0.0, 0.0))) != (0.0, 0.0):
        raise ValueError("Incoming-mode projection is implemented at normal incidence only")
    size = len(g.components)
    if size not in (2, 4):
        raise ValueError("Incoming-mode projection needs a planar trace sector")
    eta = _impedance(g, s)
    incoming = _trace_modes(eta, -normal_z, size)
    outgoing = _trace_modes(eta, normal_z, size)
    basis = np.hstack([incoming, outgoing])
    keep = np.zeros(size)
    keep[: incoming.shape[1]] = 1.0
    return basis @ np.diag(keep) @ np.linalg.inv(basis)


def incoming_flux_sign(g: GreenKernel, s: Any, normal_z: float) -> float:
    """
    Quadratic form Psi^H (n_in x) Psi of a unit incoming trace.

    Negative for every incoming trace when taken with the inward normal,
    which is the sign that makes the boundary weight positive on them.
    """
    size = len(g.components)
    eta = _impedance(g, s)
    psi = _trace_modes(eta, -normal_z, size)[:, 0]
    psi = psi / np.linalg.norm(psi)
    metric = g.metric([0.0, 0.0, -normal_z])
    return float(np.real(psi.conj() @ metric @ psi))


# ------------------------------------------------------------
# Field commutator
# ------------------------------------------------------------
def field_commutator(
    g: GreenKernel,
    geom: Geometry,
    r1: Any,
    r2: Any,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
    project_incoming: bool = True,
) -> CommutatorMatrix:
    """
    Field commutator [E(r1), E(r2)^dagger] split into volume and boundary channels.

    volume = (hbar k0^2 / pi eps0) Int g(r1, r) eps_I g(r2, r)^H dV,
    boundary = (hbar k0 / 2 pi eps0) Oint g(r1, s) (n_out x) g(r2, s)^H dS,
    target = (hbar k0 / pi eps0) (g - g^dagger) / 2i.

    Args:
        g: Green kernel
        geom: Enclosing geometry
        r1: First observation point
        r2: Second observation point
        units: Units mode
        project_incoming: Also compute the boundary channel restricted to
            incoming traces (1D planar surfaces only)

    Returns:
        CommutatorMatrix
    """
    check_placement(geom, (r1, r2))
    table = prefactors(g.k0, units)
    q = volume_rule(geom, (r1, r2), g.wavelength)
    if np.all(g.loss_at(q.nodes) == 0):
        volume = np.zeros((len(g.components),) * 2, dtype=complex)
    else:
        volume = table.volume * forward_volume_integral(g, q, r1, r2)
    surface = surface_rule(geom)
    boundary = table.boundary * forward_surface_integral(g, surface, r1, r2)
    projected = None
    if project_incoming and g.dimension == 1 and tuple(getattr(g, "k_perp", (0.0, 0.0))) == (0.0, 0.0):
        weights = []
        for s, n in zip(surface.nodes, surface.normals):
            p = incoming_projector(g, s, n[2])
            weights.append(p @ g.metric(n) @ p.conj().T)
        projected = table.boundary * forward_surface_integral(g, surface, r1, r2, np.stack(weights))
    target = table.target * (g(r1, r2) - g.adjoint(r1, r2)) / 2j
    result = CommutatorMatrix(r1, r2, g.omega, volume, boundary, target, projected)
    logger.debug("Commutator closure at omega=%.6g: residual_rel=%.3e", g.omega, result.residual_rel)
    return result


def commutator_report(commutator: CommutatorMatrix, tolerance: float, provenance: str = "analytic") -> IdentityReport:
    """Closure report of a field commutator."""
    details: Dict[str, Any] = {
        "volume_norm": float(np.max(np.abs(commutator.volume))),
        "boundary_norm": float(np.max(np.abs(commutator.boundary))),
    }
    if commutator.projected_boundary is not None:
        details["projected_deviation"] = float(
            np.max(np.abs(commutator.projected_boundary - commutator.boundary))
        )
    return IdentityReport.from_sides(
        "commutator_closure",
        commutator.total,
        commutator.target,
        tolerance,
        provenance=provenance,
        params={"omega": commutator.omega},
        details=details,
    )


# ------------------------------------------------------------
# Input-output relations
# ------------------------------------------------------------
def _plus_metric(size: int) -> np.ndarray:
    return tangential_metric(1.0, SCALAR_SECTOR if size == 2 else TANGENTIAL_SECTOR)


def canonical_weight(k0: float, size: int = 4, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> np.ndarray:
    """
    Canonical commutator of forward-travelling traces on a plane, -c N(+z).

    c = hbar k0 / 2 pi eps0. Positive on traces that carry power along +z.
    """
    return -prefactors(k0, units).boundary * _plus_metric(size)


def added_noise_deficit(t: TransferKernel, k0: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> np.ndarray:
    """Added-noise commutator -c [N - T N T^H] that restores the canonical output."""
    n = _plus_metric(t.dimension)
    return -prefactors(k0, units).boundary * (n - t.matrix @ n @ t.matrix.conj().T)


def added_noise_direct(
    g: GreenKernel,
    z1: float,
    z2: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
    order: int = DEFAULT_VOLUME_ORDER,
    panel_width: Optional[float] = None,
) -> np.ndarray:
    """
    Added-noise commutator (hbar k0^2 / pi eps0) Int N gd eps_I gd^H N dz over [z1, z2].

    gd(z) = U(z2, z) Jmp is the branch-difference kernel from z to the
    output surface; N is the +z planar metric.
    """
    if not hasattr(g, "propagator"):
        raise ValueError(f"{type(g).__name__} has no trace propagator")
    breaks = tuple(getattr(g, "interfaces", ()))
    q = interval_rule(min(z1, z2), max(z1, z2), order, breaks, panel_width)
    size = len(g.components)
    n = _plus_metric(size)
    jump = g.jump()
    if jump.shape[0] != size:
        jump = scalar_block(jump)
    loss = g.loss_at(q.nodes)
    total = np.zeros((size, size), dtype=complex)
    for weight, z, eps_i in zip(q.weights, q.nodes, loss):
        u = g.propagator(z2, z)
        if u.shape[0] != size:
            u = scalar_block(u)
        gd = n @ u @ jump
        total += weight * gd @ eps_i @ gd.conj().T
    return prefactors(g.k0, units).volume * total


@dataclass(frozen=True, eq=False)
class IoResult:
    """
    Output of the surface-to-surface transfer law.

    Attributes:
        output: T [Psi1, Psi1^dagger] T^H + added noise
        added_direct: Added noise integrated over the inter-surface region
        added_deficit: Added noise from the pseudo-unitarity deficit
    """
    output: np.ndarray
    added_direct: np.ndarray
    added_deficit: np.ndarray

    @property
    def agreement(self) -> float:
        scale = max(float(np.max(np.abs(self.added_deficit))), float(np.max(np.abs(self.added_direct))), 1e-300)
        return float(np.max(np.abs(self.added_direct - self.added_deficit))) / scale


def io_relation(
    t: TransferKernel,
    g: GreenKernel,
    input_commutator: Optional[np.ndarray] = None,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
    order: int = DEFAULT_VOLUME_ORDER,
) -> IoResult:
    """
    Quantum transfer law Psi2 = T21 Psi1 + noise and its commutator budget.

    Args:
        t: Transfer kernel between the two planes
        g: Kernel of the medium between them (provides the propagator)
        input_commutator: Commutator on the input plane (canonical by default)
        units: Units mode
        order: Gauss order of the direct added-noise integral

    Raises:
        ValueError: If the kernel and transfer kernel disagree on geometry
    """
    if t.omega != g.omega or tuple(t.k_perp) != tuple(getattr(g, "k_perp", (0.0, 0.0))):
        raise ValueError("Transfer kernel and medium kernel are given at different (omega, k_perp)")
    k0 = g.k0
    if input_commutator is None:
        input_commutator = canonical_weight(k0, t.dimension, units)
    deficit = added_noise_deficit(t, k0, units)
    direct = added_noise_direct(g, t.z_source, t.z_target, units, order)
    if direct.shape != deficit.shape:
        raise ValueError("Transfer kernel and medium kernel act on different trace spaces")
    output = t.matrix @ input_commutator @ t.matrix.conj().T + deficit
    return IoResult(output, direct, deficit)


def pseudo_unitarity_residual(t: TransferKernel, tolerance: float = 1e-12) -> IdentityReport:
    """Residual of T N T^H - N on the trace space (zero for lossless gaps)."""
    n = _plus_metric(t.dimension)
    return IdentityReport.from_sides(
        "pseudo_unitarity",
        t.matrix @ n @ t.matrix.conj().T,
        n,
        tolerance,
        params={"omega": t.omega, "z_source": t.z_source, "z_target": t.z_target, "k_perp": list(t.k_perp)},
    )


# ------------------------------------------------------------
# Cascades
# ------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class StageRegion:
    """
    One element of a cascade.

    Attributes:
        transfer: Transfer kernel of the stage
        kernel: Kernel of the stage medium, used for the direct noise integral
    """
    transfer: TransferKernel
    kernel: Optional[GreenKernel] = None

    @property
    def label(self) -> str:
        return self.transfer.label


def cascade(
    stages: Sequence[StageRegion],
    omega: Optional[float] = None,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
    dimension: int = 4,
    method: str = "deficit",
) -> CascadeBudget:
    """
    Cumulative transfer and noise budget of a chain of elements.

    Stage noise is conjugated through every downstream transfer and summed;
    with canonical input the output commutator equals the canonical weight.
    The "deficit" noise restores that weight by construction, so only a
    "direct" budget makes the closure residual an independent check.

    Args:
        stages: Stages in propagation order
        omega: Angular frequency (required for an empty chain)
        units: Units mode
        dimension: Trace dimension of an empty chain
        method: "deficit" or "direct" per-stage added noise

    Raises:
        ValueError: If consecutive surfaces do not chain, naming the interface
    """
    if method not in ("deficit", "direct"):
        raise ValueError(f"Unknown added-noise method: {method!r}")
    if not stages:
        if omega is None:
            raise ValueError("An empty chain needs the frequency")
        k0 = wavenumber(omega, units)
        canonical = canonical_weight(k0, dimension, units)
        zero = np.zeros((dimension, dimension), dtype=complex)
        return CascadeBudget((), identity_transfer(0.0, omega, dimension), zero, (), (), canonical, canonical)
    first = stages[0].transfer
    w = first.omega if omega is None else omega
    k0 = wavenumber(w, units)
    cumulative = first
    for stage in stages[1:]:
        cumulative = compose(stage.transfer, cumulative)
    stage_noise: List[np.ndarray] = []
    for stage in stages:
        if method == "direct":
            if stage.kernel is None:
                raise ValueError(f"Stage {stage.label!r} has no kernel for the direct noise integral")
            stage_noise.append(added_noise_direct(stage.kernel, stage.transfer.z_source, stage.transfer.z_target, units))
        else:
            stage_noise.append(added_noise_deficit(stage.transfer, k0, units))
    contributions: List[np.ndarray] = []
    size = first.dimension
    for index, noise in enumerate(stage_noise):
        downstream = np.eye(size, dtype=complex)
        for stage in stages[index + 1:]:
            downstream = stage.transfer.matrix @ downstream
        contributions.append(downstream @ noise @ downstream.conj().T)
    added = sum(contributions, np.zeros((size, size), dtype=complex))
    canonical = canonical_weight(k0, size, units)
    output = cumulative.matrix @ canonical @ cumulative.matrix.conj().T + added
    return CascadeBudget(
        labels=tuple(stage.label for stage in stages),
        transfer=cumulative,
        added_noise=added,
        contributions=tuple(contributions),
        stage_noise=tuple(stage_noise),
        output_commutator=output,
        canonical=canonical,
    )


def transmission_reflection(t: TransferKernel, eta: complex = 1.0) -> Tuple[complex, complex]:
    """
    Amplitude transmission and reflection of a chain at normal incidence.

    Both terminal media have wave impedance eta; only the (Ex, Z0Hy) block
    is used.
    """
    matrix = t.matrix if t.dimension == 2 else scalar_block(t.matrix)
    n = _plus_metric(2)
    propagator = n @ matrix @ n
    modes = np.array([[1.0, 1.0], [1.0 / eta, -1.0 / eta]], dtype=complex)
    m = np.linalg.inv(modes) @ propagator @ modes
    if m[1, 1] == 0:
        raise ValueError("Chain has a zero backward-mode amplitude (no scattering solution)")
    reflection = -m[1, 0] / m[1, 1]
    transmission = np.linalg.det(m) / m[1, 1]
    return complex(transmission), complex(reflection)


def cascade_sweep(
    build_chain: Any,
    frequencies: Sequence[float],
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
    method: str = "direct",
) -> List[Dict[str, float]]:
    """
    Transmission, reflection, added noise and closure residual per frequency.

    Args:
        build_chain: Callable omega -> list of StageRegion (with kernels for "direct")
        frequencies: Angular frequencies
        units: Units mode
        method: Added-noise method passed to cascade

    Returns:
        One row per frequency, in input order
    """
    rows: List[Dict[str, float]] = []
    for w in frequencies:
        budget = cascade(build_chain(w), omega=w, units=units, method=method)
        t, r = transmission_reflection(budget.transfer)
        rows.append({
            "omega": float(w),
            "transmission": float(abs(t) ** 2),
            "reflection": float(abs(r) ** 2),
            "added_noise_trace": float(np.real(np.trace(budget.added_noise))),
            "closure_residual": budget.closure_residual,
        })
    return rows
