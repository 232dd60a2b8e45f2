"""
Utility functions for the dual-field Green-operator toolkit.

This module contains helpers for JSON and CSV serialization, run
configuration parsing and validation, convergence-slope estimates and the
optional sweep figure.
"""

import hashlib
import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import (
    FLOAT_FORMAT,
    IDENTITY_CATALOG,
    KERNEL_CATALOG,
    RESIDUAL_FLOOR,
    SCHEMA_VERSION,
    UNITS_MODES,
)
from .models import IdentityReport, RunConfig, UnitsMode

logger = logging.getLogger(__name__)


# ------------------------------------------------------------
# Serialization
# ------------------------------------------------------------
def complex_to_json(value: Any) -> Any:
    """
    Convert a complex scalar or array to nested lists of [re, im] pairs.

    Real arrays are returned as plain nested lists.

    Example:
        >>> complex_to_json(np.array([1 + 2j]))
        [[1.0, 2.0]]
    """
    arr = np.asarray(value)
    if np.iscomplexobj(arr):
        return np.stack([arr.real, arr.imag], axis=-1).tolist()
    return arr.tolist()


def json_to_complex(value: Any) -> np.ndarray:
    """Inverse of complex_to_json for complex data."""
    arr = np.asarray(value, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def complex_vector(value: Sequence[Any]) -> np.ndarray:
    """Complex vector from plain numbers or [re, im] pairs."""
    return np.array(
        [complex(float(v[0]), float(v[1])) if isinstance(v, (list, tuple)) else complex(v) for v in value],
        dtype=complex,
    )


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    """Write a JSON document with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a table in full double precision, without the index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def kernel_dataframe(samples: Iterable[Tuple[Any, Any, np.ndarray]], components: Sequence[int]) -> pd.DataFrame:
    """
    Convert kernel samples to a table.

    Args:
        samples: (r, r', matrix) triples
        components: Field components of the matrix rows and columns

    Returns:
        DataFrame with the coordinates of r and r' followed by the real and
        imaginary part of every entry (re_ij, im_ij with i, j field indices)
    """
    rows: List[Dict[str, float]] = []
    for r, r_prime, matrix in samples:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        r_prime = np.atleast_1d(np.asarray(r_prime, dtype=float))
        if r.size == 1:
            row = {"z": float(r[0]), "z_prime": float(r_prime[0])}
        else:
            row = {f"{axis}": float(v) for axis, v in zip("xyz", r)}
            row.update({f"{axis}_prime": float(v) for axis, v in zip("xyz", r_prime)})
        for p, i in enumerate(components):
            for q, j in enumerate(components):
                row[f"re_{i}{j}"] = float(matrix[p, q].real)
                row[f"im_{i}{j}"] = float(matrix[p, q].imag)
        rows.append(row)
    return pd.DataFrame(rows)


def reports_dataframe(reports: Sequence[IdentityReport]) -> pd.DataFrame:
    """Batch summary table of identity reports."""
    columns = ["identity", "omega", "residual_abs", "residual_rel", "tolerance", "slope", "provenance", "pass"]
    if not reports:
        return pd.DataFrame(columns=columns)
    rows = []
    for report in reports:
        rows.append({
            "identity": report.identity,
            "omega": report.params.get("omega"),
            "residual_abs": report.residual_abs,
            "residual_rel": report.residual_rel,
            "tolerance": report.tolerance,
            "slope": report.slope,
            "provenance": report.provenance,
            "pass": report.passed,
        })
    return pd.DataFrame(rows, columns=columns)


def config_hash(document: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def package_versions() -> Dict[str, str]:
    """Versions of the interpreter and numerical stack."""
    import matplotlib
    import scipy

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "matplotlib": matplotlib.__version__,
    }


# ------------------------------------------------------------
# Numerics
# ------------------------------------------------------------
def convergence_slope(orders: Sequence[float], residuals: Sequence[float]) -> Optional[float]:
    """
    Least-squares slope of -log(residual) against log(order).

    Returns:
        The slope, or None when fewer than two residuals are above the floor
    """
    pairs = [(o, r) for o, r in zip(orders, residuals) if r > RESIDUAL_FLOOR and o > 0]
    if len(pairs) < 2 or len({o for o, _ in pairs}) < 2:
        return None
    x = np.log([o for o, _ in pairs])
    y = -np.log([r for _, r in pairs])
    return float(np.polyfit(x, y, 1)[0])


# ------------------------------------------------------------
# Run configuration
# ------------------------------------------------------------
def validate_run_config(document: Mapping[str, Any]) -> Optional[str]:
    """
    Validate a run-configuration document.

    Args:
        document: Parsed JSON configuration

    Returns:
        Error message if validation fails, None otherwise
    """
    if document.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        return f"Unsupported configuration schema_version {document.get('schema_version')!r}."

    units = document.get("units", UnitsMode.DIMENSIONLESS.value)
    if units not in UNITS_MODES:
        return f"Unknown units mode {units!r}; expected one of {', '.join(UNITS_MODES)}."

    frequencies = document.get("frequencies")
    if not frequencies:
        return "Frequency grid must be nonempty."
    if any(not isinstance(w, (int, float)) or w <= 0 for w in frequencies):
        return "Frequencies must be positive numbers."

    k_perp = document.get("k_perp", [[0.0, 0.0]])
    if not k_perp or any(len(k) != 2 for k in k_perp):
        return "k_perp must be a nonempty list of [kx, ky] pairs."

    unknown = [name for name in document.get("identities", []) if name not in IDENTITY_CATALOG]
    if unknown:
        return f"Unknown identity {unknown[0]!r}; catalog: {', '.join(IDENTITY_CATALOG)}."

    kernels = [name for name in document.get("kernels", []) if name not in KERNEL_CATALOG]
    if kernels:
        return f"Unknown kernel {kernels[0]!r}; catalog: {', '.join(KERNEL_CATALOG)}."

    for name, value in document.get("tolerances", {}).items():
        if not isinstance(value, (int, float)) or value <= 0:
            return f"Tolerance for {name!r} must be positive."

    return None


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def build_run_config(
    document: Mapping[str, Any],
    base_dir: Union[str, Path] = ".",
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build a RunConfig from a document, with command-line overrides applied.

    Paths are resolved relative to the configuration file's directory;
    override values that are None are ignored.

    Raises:
        ValueError: If the merged document is invalid
        FileNotFoundError: If a referenced file does not exist
    """
    merged: Dict[str, Any] = dict(document)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    message = validate_run_config(merged)
    if message:
        raise ValueError(message)
    base = Path(base_dir)
    material_file = _resolve(base, merged.get("material_file"))
    chain_file = _resolve(base, merged.get("chain_file"))
    for path in (material_file, chain_file):
        if path is not None and not path.is_file():
            raise FileNotFoundError(f"Referenced file not found: {path}")
    out_override = (overrides or {}).get("output_dir")
    output_dir = Path(out_override) if out_override is not None else _resolve(base, merged.get("output_dir", "results"))
    return RunConfig(
        units=UnitsMode(merged.get("units", UnitsMode.DIMENSIONLESS.value)),
        frequencies=tuple(float(w) for w in merged["frequencies"]),
        k_perp=tuple((float(k[0]), float(k[1])) for k in merged.get("k_perp", [[0.0, 0.0]])),
        material_file=material_file,
        geometry=dict(merged.get("geometry", {})),
        identities=tuple(merged.get("identities", IDENTITY_CATALOG)),
        tolerances=dict(merged.get("tolerances", {})),
        quadrature=dict(merged.get("quadrature", {})),
        output_dir=output_dir,
        kernels=tuple(merged.get("kernels", ())),
        samples=dict(merged.get("samples", {})),
        chain_file=chain_file,
        finite_difference=dict(merged.get("finite_difference", {})),
        figure=bool(merged.get("figure", False)),
        threads=int(merged.get("threads", 1)),
        global_tolerance=merged.get("tol"),
    )


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a JSON document.

    Raises:
        FileNotFoundError: If the file does not exist
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")
    with path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


# ------------------------------------------------------------
# Figures
# ------------------------------------------------------------
def plot_sweep(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Static PNG of transmission and added noise against frequency."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    top.plot(df["omega"], df["transmission"], marker="o", label="|t|^2")
    top.plot(df["omega"], df["reflection"], marker="s", label="|r|^2")
    top.set_ylabel("power fraction")
    top.legend()
    bottom.plot(df["omega"], df["added_noise_trace"], marker="o", color="tab:red")
    bottom.set_xlabel("omega")
    bottom.set_ylabel("added-noise trace")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
