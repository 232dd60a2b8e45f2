"""
Dispersive-absorptive material models.

This module contains the Lorentz-oscillator susceptibility, assembly of
the dual material tensor diag(eps, mu), its Hermitian split, the Markov
coupling and noise spectra of the oscillator bath, and the material
definition file loader.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from .config import (
    EPS0_SI,
    HBAR_SI,
    MU0_SI,
    SCHEMA_VERSION,
    SECTOR_ELECTRIC,
    SECTOR_MAGNETIC,
    Z0_SI,
)
from .core import speed_of_light
from .models import Layer, LorentzOscillator, MaterialProfile, MaterialTensor, Medium, UnitsMode

logger = logging.getLogger(__name__)

VACUUM = Medium("vacuum")


def _resonance_denominator(osc: LorentzOscillator, omega: float) -> complex:
    return complex(osc.omega0 ** 2 - omega ** 2, -osc.gamma * omega)


def susceptibility(osc: LorentzOscillator, omega: float) -> complex:
    """
    Lorentz susceptibility strength / (omega0^2 - omega^2 - i gamma omega).

    Args:
        osc: Oscillator
        omega: Real angular frequency

    Returns:
        Complex susceptibility

    Raises:
        ZeroDivisionError: At an exact pole (gamma = 0 and omega = omega0)
    """
    try:
        return osc.strength / _resonance_denominator(osc, omega)
    except ZeroDivisionError as e:
        raise ZeroDivisionError(
            f"Susceptibility pole at omega = {omega!r} (lossless oscillator at resonance)"
        ) from e


def medium_susceptibility(medium: Medium, omega: float, sector: str) -> complex:
    """Sum of the oscillator susceptibilities of one sector."""
    return sum(
        (susceptibility(osc, omega) for osc in medium.oscillators if osc.sector == sector),
        0j,
    )


def material_tensor(chi_e: Any, chi_m: Any) -> MaterialTensor:
    """
    Dual material tensor I + diag(chi_e, chi_m).

    Args:
        chi_e: Scalar or 3x3 electric susceptibility
        chi_m: Scalar or 3x3 magnetic susceptibility

    Returns:
        MaterialTensor
    """
    def block(chi: Any) -> np.ndarray:
        chi = np.asarray(chi, dtype=complex)
        return np.eye(3) + (chi * np.eye(3) if chi.ndim == 0 else chi)

    return MaterialTensor(block(chi_e), block(chi_m))


def medium_tensor(medium: Medium, omega: float) -> MaterialTensor:
    """Material tensor of a medium at one frequency."""
    if medium.fixed is not None:
        return medium.fixed
    chi_e = medium.eps_static - 1.0 + medium_susceptibility(medium, omega, SECTOR_ELECTRIC)
    chi_m = medium.mu_static - 1.0 + medium_susceptibility(medium, omega, SECTOR_MAGNETIC)
    return material_tensor(chi_e, chi_m)


def profile_tensor(profile: MaterialProfile, z: float, omega: float) -> MaterialTensor:
    return medium_tensor(profile.medium_at(z), omega)


def hermitian_split(m: Union[MaterialTensor, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hermitian and anti-Hermitian parts of a material tensor.

    Returns:
        (eps_R, eps_I) with eps = eps_R + i eps_I, both Hermitian
    """
    matrix = m.matrix if isinstance(m, MaterialTensor) else np.asarray(m, dtype=complex)
    herm = 0.5 * (matrix + matrix.conj().T)
    anti = (matrix - matrix.conj().T) / 2j
    return herm, anti


def is_passive(m: MaterialTensor, tolerance: float = 1e-14) -> bool:
    """True if the anti-Hermitian part is positive semidefinite."""
    _, loss = hermitian_split(m)
    return bool(np.min(np.linalg.eigvalsh(loss)) >= -tolerance)


def refractive_index(eps: complex, mu: complex = 1.0) -> complex:
    """Index sqrt(eps mu) on the branch with Im(n) >= 0 (Re(n) > 0 if real)."""
    n = complex(np.sqrt(complex(eps) * complex(mu)))
    if n.imag < 0 or (n.imag == 0 and n.real < 0):
        n = -n
    return n


# ------------------------------------------------------------
# Oscillator bath
# ------------------------------------------------------------
def effective_mass(osc: LorentzOscillator, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> float:
    """
    Effective oscillator mass per sector.

    Electric: eps0 / strength. Magnetic: mu0 / (strength Z0^2).
    Both reduce to 1 / strength in dimensionless units.
    """
    if osc.strength <= 0:
        raise ValueError("Effective mass needs a positive oscillator strength")
    if UnitsMode(units) is UnitsMode.DIMENSIONLESS:
        return 1.0 / osc.strength
    if osc.sector == SECTOR_ELECTRIC:
        return EPS0_SI / osc.strength
    return MU0_SI / (osc.strength * Z0_SI ** 2)


def strength_from_mass(mass: float, sector: str, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> float:
    """Oscillator strength of a sector with the given effective mass."""
    if mass <= 0:
        raise ValueError("Effective mass must be positive")
    if UnitsMode(units) is UnitsMode.DIMENSIONLESS:
        return 1.0 / mass
    if sector == SECTOR_ELECTRIC:
        return EPS0_SI / mass
    if sector == SECTOR_MAGNETIC:
        return MU0_SI / (mass * Z0_SI ** 2)
    raise ValueError(f"Unknown oscillator sector: {sector!r}")


def markov_coupling(
    osc: LorentzOscillator,
    mass_tilde: float,
    omega: float,
    units: UnitsMode = UnitsMode.DIMENSIONLESS,
) -> float:
    """
    Bath coupling |kappa|^2 = mass_tilde hbar gamma omega / (4 pi^3).

    Raises:
        ValueError: If omega <= 0 or mass_tilde <= 0
    """
    if omega <= 0:
        raise ValueError("Markov coupling needs a positive frequency")
    if mass_tilde <= 0:
        raise ValueError("Effective mass must be positive")
    hbar = 1.0 if UnitsMode(units) is UnitsMode.DIMENSIONLESS else HBAR_SI
    return mass_tilde * hbar * osc.gamma * omega / (4.0 * np.pi ** 3)


def noise_spectrum(osc: LorentzOscillator, omega: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> complex:
    """
    Noise spectrum scalar of one oscillator.

    Electric: 2 pi i kappa strength / D. Magnetic: 2 pi i kappa c strength / D,
    with D the resonance denominator and kappa = sqrt(markov_coupling).
    """
    if osc.gamma == 0 or osc.strength == 0:
        return 0j
    kappa = float(np.sqrt(markov_coupling(osc, effective_mass(osc, units), omega, units)))
    scale = 1.0 if osc.sector == SECTOR_ELECTRIC else float(speed_of_light(units))
    try:
        return 2j * np.pi * kappa * scale * osc.strength / _resonance_denominator(osc, omega)
    except ZeroDivisionError as e:
        raise ZeroDivisionError(f"Noise spectrum pole at omega = {omega!r}") from e


def noise_ratio(osc: LorentzOscillator, omega: float, units: UnitsMode = UnitsMode.DIMENSIONLESS) -> float:
    """|chi_N|^2 / Im(chi); constant in omega for a fixed oscillator."""
    im_chi = susceptibility(osc, omega).imag
    if im_chi == 0:
        return 0.0
    return abs(noise_spectrum(osc, omega, units)) ** 2 / im_chi


# ------------------------------------------------------------
# Material definition files
# ------------------------------------------------------------
def parse_medium(name: str, data: Mapping[str, Any]) -> Medium:
    """Build a Medium from its JSON description."""
    oscillators = tuple(
        LorentzOscillator(
            omega0=float(item["omega0"]),
            gamma=float(item["gamma"]),
            strength=float(item["strength"]),
            sector=str(item.get("sector", SECTOR_ELECTRIC)),
        )
        for item in data.get("oscillators", ())
    )
    fixed = None
    if "eps" in data or "mu" in data:
        fixed = MaterialTensor(
            _complex_block(data.get("eps", 1.0)),
            _complex_block(data.get("mu", 1.0)),
        )
    return Medium(
        name=name,
        oscillators=oscillators,
        eps_static=_complex_scalar(data.get("eps_static", 1.0)),
        mu_static=_complex_scalar(data.get("mu_static", 1.0)),
        fixed=fixed,
    )


def _complex_scalar(value: Any) -> complex:
    # [re, im] pairs or plain numbers
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _complex_block(value: Any) -> np.ndarray:
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return np.array([[_complex_scalar(v) for v in row] for row in value], dtype=complex)
    return _complex_scalar(value) * np.eye(3)


def parse_material_document(document: Mapping[str, Any]) -> Tuple[MaterialProfile, Dict[str, Medium]]:
    """
    Build a profile and the named media from a material document.

    Raises:
        ValueError: On schema-version mismatch or unknown material names
    """
    version = document.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"Unsupported material schema_version {version!r}")
    media: Dict[str, Medium] = {"vacuum": VACUUM}
    for name, data in document.get("media", {}).items():
        media[name] = parse_medium(name, data)
    background_name = document.get("background", "vacuum")
    layers = []
    for item in document.get("layers", ()):
        name = item["material"]
        if name not in media:
            raise ValueError(f"Layer refers to unknown material {name!r}")
        layers.append(Layer(float(item["z_min"]), float(item["z_max"]), media[name]))
    if background_name not in media:
        raise ValueError(f"Unknown background material {background_name!r}")
    return MaterialProfile(tuple(layers), media[background_name]), media


def load_material_file(path: Union[str, Path]) -> Tuple[MaterialProfile, Dict[str, Medium]]:
    """
    Load a material definition file.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the document is malformed
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Material file not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        document = json.load(handle)
    profile, media = parse_material_document(document)
    logger.debug("Loaded %d media and %d layers from %s", len(media), len(profile.layers), path)
    return profile, media
