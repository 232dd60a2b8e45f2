"""
Batch command-line front end.

Subcommands:
    green          Dump kernel samples over the frequency and k_perp grids
    verify         Run the identity suite and write residual reports
    cascade        Transfer and noise budget of a chain of elements
    material-info  Susceptibility, loss and noise table of the media

Command-line flags take precedence over configuration-file values, which
take precedence over the built-in defaults.

Exit codes: 0 when every check passes, 1 when an identity fails and 2 for
input errors. Unexpected exceptions are logged with their traceback and
also exit with 2, with the same JSON diagnostic on stderr.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import (
    APP_NAME,
    APP_VERSION,
    DEFAULT_SPHERE_ORDERS,
    DEFAULT_VOLUME_ORDER,
    EXIT_IDENTITY_FAILURE,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    FD_DEFAULT_POINTS_PER_WAVELENGTH,
    PLANE_ENVELOPE_CUTOFF,
    SECTOR_ELECTRIC,
    SECTOR_MAGNETIC,
    THREADS_ENV_VAR,
    UNITS_MODES,
)
from .core import GreenKernel, wavenumber
from .green1d import (
    FiniteDifferenceGreen,
    HomogeneousGreen1D,
    StratifiedGreen,
    fd_richardson,
    staggered_grid,
    transfer_kernel,
)
from .green3d import Green6
from .identities import (
    default_tolerance,
    field_from_source,
    huygens_composition_check,
    interior_representation_check,
    lorentz_reciprocity_check,
    optical_theorem_residual,
    poynting_balance,
    reciprocity_residual,
    resolvent_identity_residual,
    run_identity_suite,
    summarize,
)
from .media import (
    hermitian_split,
    is_passive,
    load_material_file,
    medium_susceptibility,
    medium_tensor,
    noise_ratio,
    parse_material_document,
)
from .models import (
    DualSource,
    Geometry,
    IdentityReport,
    MaterialProfile,
    Medium,
    RunConfig,
    RunManifest,
    UnitsMode,
)
from .quantum import (
    StageRegion,
    cascade,
    cascade_sweep,
    commutator_report,
    field_commutator,
    io_relation,
    pseudo_unitarity_residual,
)
from .utils import (
    build_run_config,
    complex_to_json,
    complex_vector,
    config_hash,
    kernel_dataframe,
    load_json,
    package_versions,
    plot_sweep,
    reports_dataframe,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

PLANAR_ONLY = ("io_noise", "pseudo_unitarity", "cascade")


class InputError(ValueError):
    """Configuration or input problem reported with exit code 2."""


# ------------------------------------------------------------
# Argument parsing
# ------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(prog=APP_NAME, description="Dual-field Maxwell Green-operator toolkit")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Run configuration (JSON)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--tol", type=float, help="Tolerance applied to every identity")
    common.add_argument("--threads", type=int, help=f"Worker threads (fallback: ${THREADS_ENV_VAR})")
    common.add_argument("--identities", help="Comma-separated identity names")
    common.add_argument("--units", choices=UNITS_MODES, help="Units mode")
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("green", parents=[common], help="Dump kernel samples")
    sub.add_parser("verify", parents=[common], help="Run the identity suite")
    sub.add_parser("cascade", parents=[common], help="Cascade transfer and noise budget")
    sub.add_parser("material-info", parents=[common], help="Material table")
    return parser


def _threads(flag: Optional[int]) -> Optional[int]:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV_VAR)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError as e:
        raise InputError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from e


def load_run_config(args: argparse.Namespace) -> Tuple[RunConfig, Dict[str, Any]]:
    """
    Read the configuration file and apply command-line overrides.

    Returns:
        The RunConfig and the merged document used for the manifest hash
    """
    path = Path(args.config)
    document = load_json(path)
    overrides: Dict[str, Any] = {
        "output_dir": args.out,
        "tol": args.tol,
        "threads": _threads(args.threads),
        "units": args.units,
    }
    if args.identities:
        overrides["identities"] = [name.strip() for name in args.identities.split(",") if name.strip()]
    config = build_run_config(document, path.parent, overrides)
    merged = dict(document)
    merged.update({k: v for k, v in overrides.items() if v is not None and k != "output_dir"})
    return config, merged


# ------------------------------------------------------------
# Problem setup
# ------------------------------------------------------------
@dataclass(frozen=True)
class Problem:
    """Materials and geometry of one run."""
    config: RunConfig
    profile: MaterialProfile
    media: Mapping[str, Medium]

    @property
    def units(self) -> UnitsMode:
        return self.config.units

    @property
    def dimension(self) -> int:
        return int(self.config.geometry.get("dimension", 1))

    def medium(self, name: str) -> Medium:
        if name not in self.media:
            raise InputError(f"Unknown material {name!r}; known: {', '.join(sorted(self.media))}")
        return self.media[name]

    def kernel(self, omega: float, k_perp: Sequence[float] = (0.0, 0.0)) -> GreenKernel:
        if self.dimension == 1:
            return StratifiedGreen.from_profile(self.profile, omega, k_perp, self.units)
        name = self.config.geometry.get("medium", self.profile.background.name)
        return Green6.from_medium(self.medium(name), omega, self.units)

    def geometry(self) -> Geometry:
        desc = self.config.geometry
        quad = self.config.quadrature
        kwargs = {
            "volume_order": int(quad.get("volume_order", DEFAULT_VOLUME_ORDER)),
            "surface_orders": tuple(quad.get("surface_orders", DEFAULT_SPHERE_ORDERS)),
            "panel_width": quad.get("panel_width"),
        }
        if self.dimension == 1:
            if "bounds" not in desc:
                raise InputError("1D geometry needs 'bounds'")
            a, b = desc["bounds"]
            breaks = tuple(z for z in self.profile.interfaces if a < z < b)
            return Geometry.interval(a, b, breaks, **kwargs)
        if "radius" not in desc:
            raise InputError("3D geometry needs 'radius'")
        return Geometry.sphere(desc.get("center", [0.0, 0.0, 0.0]), desc["radius"],
                               exclusion=float(desc.get("exclusion", 0.0)), **kwargs)

    def points(self) -> Tuple[Any, Any]:
        pts = self.config.geometry.get("points")
        if not pts or len(pts) < 2:
            raise InputError("Geometry needs two observation 'points'")
        return _point(pts[0], self.dimension), _point(pts[1], self.dimension)

    def source(self, key: str, omega: float) -> DualSource:
        desc = self.config.geometry.get(key)
        if desc is None:
            raise InputError(f"Geometry needs a '{key}' block with position and vector")
        return DualSource.point(_point(desc["position"], self.dimension), complex_vector(desc["vector"]), omega)

    def planes(self, key: str) -> Tuple[float, float]:
        pair = self.config.geometry.get(key)
        if pair is None or len(pair) != 2:
            raise InputError(f"Geometry needs '{key}': [z1, z2]")
        return float(pair[0]), float(pair[1])

    def tolerance(self, name: str) -> float:
        if name in self.config.tolerances:
            return float(self.config.tolerances[name])
        if self.config.global_tolerance is not None:
            return float(self.config.global_tolerance)
        return default_tolerance(name, self.dimension)


def _point(value: Any, dimension: int) -> Any:
    if dimension == 1:
        return float(np.asarray(value, dtype=float).reshape(-1)[-1])
    return np.asarray(value, dtype=float).reshape(3)


def load_problem(config: RunConfig) -> Problem:
    if config.material_file is None:
        profile = MaterialProfile((), Medium("vacuum"))
        return Problem(config, profile, {"vacuum": profile.background})
    profile, media = load_material_file(config.material_file)
    return Problem(config, profile, media)


# ------------------------------------------------------------
# Identity cases
# ------------------------------------------------------------
Case = Callable[[float, Tuple[float, float]], IdentityReport]


def identity_cases(problem: Problem) -> Dict[str, Case]:
    """
    Map every selected identity to a callable(omega, k_perp).

    Raises:
        InputError: If an identity cannot run on the configured geometry
    """
    geom = problem.geometry()
    selected = problem.config.identities
    planar = [name for name in selected if name in PLANAR_ONLY]
    if planar and problem.dimension != 1:
        raise InputError(f"Identity {planar[0]!r} needs a planar (1D) geometry")

    def optical_theorem(w: float, k: Tuple[float, float]) -> IdentityReport:
        r1, r2 = problem.points()
        return optical_theorem_residual(problem.kernel(w, k), geom, r1, r2, problem.tolerance("optical_theorem"))

    def resolvent(w: float, k: Tuple[float, float]) -> IdentityReport:
        desc = problem.config.geometry.get("resolvent", {})
        g = HomogeneousGreen1D.from_medium(problem.medium(desc.get("medium", problem.profile.background.name)), w,
                                           units=problem.units)
        decay = g.k0 * g.n.imag
        if decay <= 0:
            raise InputError("The resolvent identity needs an absorbing medium")
        half = float(np.log(1.0 / PLANE_ENVELOPE_CUTOFF) / (2.0 * decay))
        box = Geometry.interval(-half, half, volume_order=geom.volume_order,
                                panel_width=float(desc.get("panel_width", 1.0 / g.k0)))
        r1, r2 = (float(z) for z in desc.get("points", (-0.3, 0.4)))
        return resolvent_identity_residual(g, box, r1, r2, problem.tolerance("resolvent"))

    def interior(w: float, k: Tuple[float, float]) -> IdentityReport:
        r1, _ = problem.points()
        g = problem.kernel(w, k)
        return interior_representation_check(g, problem.source("source", w), geom, r1,
                                             tolerance=problem.tolerance("interior"))

    def poynting(w: float, k: Tuple[float, float]) -> IdentityReport:
        g = problem.kernel(w, k)
        source = problem.source("source", w)
        return poynting_balance(field_from_source(g, source), source, g, geom, problem.tolerance("poynting"))

    def reciprocity(w: float, k: Tuple[float, float]) -> IdentityReport:
        r1, r2 = problem.points()
        return reciprocity_residual(problem.kernel(w, k), r1, r2, problem.tolerance("reciprocity"))

    def lorentz(w: float, k: Tuple[float, float]) -> IdentityReport:
        return lorentz_reciprocity_check(problem.kernel(w, k), geom, problem.source("source", w),
                                         problem.source("source2", w),
                                         tolerance=problem.tolerance("lorentz_reciprocity"))

    def huygens(w: float, k: Tuple[float, float]) -> IdentityReport:
        desc = problem.config.geometry.get("huygens")
        if desc is None:
            raise InputError("Geometry needs a 'huygens' block with plane, r1 and r3")
        tol = problem.tolerance("huygens")
        return huygens_composition_check(problem.kernel(w, k), float(desc["plane"]),
                                         _point(desc["r1"], problem.dimension),
                                         _point(desc["r3"], problem.dimension), tol)

    def closure(w: float, k: Tuple[float, float]) -> IdentityReport:
        r1, r2 = problem.points()
        g = problem.kernel(w, k)
        commutator = field_commutator(g, geom, r1, r2, problem.units)
        return commutator_report(commutator, problem.tolerance("commutator_closure"), g.provenance)

    def io_noise(w: float, k: Tuple[float, float]) -> IdentityReport:
        z1, z2 = problem.planes("transfer")
        g = problem.kernel(w, k)
        result = io_relation(transfer_kernel(g, z1, z2, label="transfer"), g, units=problem.units,
                             order=geom.volume_order)
        return IdentityReport.from_sides(
            "io_noise", result.added_direct, result.added_deficit, problem.tolerance("io_noise"),
            orders=(geom.volume_order,),
            params={"omega": w, "k_perp": list(k), "z1": z1, "z2": z2},
        )

    def pseudo_unitarity(w: float, k: Tuple[float, float]) -> IdentityReport:
        z1, z2 = problem.planes("gap")
        t = transfer_kernel(problem.kernel(w, k), z1, z2, label="gap")
        return pseudo_unitarity_residual(t, problem.tolerance("pseudo_unitarity"))

    def cascade_closure(w: float, k: Tuple[float, float]) -> IdentityReport:
        z1, z2 = problem.planes("transfer")
        g = problem.kernel(w, k)
        cuts = [z1] + [z for z in problem.profile.interfaces if min(z1, z2) < z < max(z1, z2)] + [z2]
        if z2 < z1:
            cuts = [z1] + sorted(cuts[1:-1], reverse=True) + [z2]
        stages = [
            StageRegion(transfer_kernel(g, a, b, label=f"stage{i}"), g)
            for i, (a, b) in enumerate(zip(cuts, cuts[1:]))
        ]
        budget = cascade(stages, w, problem.units, method="direct")
        single = transfer_kernel(g, z1, z2)
        return IdentityReport.from_sides(
            "cascade", budget.output_commutator, budget.canonical, problem.tolerance("cascade"),
            params={"omega": w, "k_perp": list(k), "stages": list(budget.labels)},
            details={"composition_residual": float(np.max(np.abs(budget.transfer.matrix - single.matrix)))},
        )

    table: Dict[str, Case] = {
        "optical_theorem": optical_theorem,
        "resolvent": resolvent,
        "interior": interior,
        "poynting": poynting,
        "reciprocity": reciprocity,
        "lorentz_reciprocity": lorentz,
        "huygens": huygens,
        "commutator_closure": closure,
        "io_noise": io_noise,
        "pseudo_unitarity": pseudo_unitarity,
        "cascade": cascade_closure,
    }
    return {name: table[name] for name in selected}


# ------------------------------------------------------------
# Commands
# ------------------------------------------------------------
def _k_grid(problem: Problem) -> Tuple[Tuple[float, float], ...]:
    return problem.config.k_perp if problem.dimension == 1 else ((0.0, 0.0),)


def cmd_verify(problem: Problem, manifest: RunManifest) -> int:
    """Run the selected identities and write reports.json and summary.csv."""
    config = problem.config
    cases = identity_cases(problem)
    logger.info("Running %d identities over %d frequencies", len(cases), len(config.frequencies))
    reports = run_identity_suite(cases, config.frequencies, _k_grid(problem), config.threads)
    out = config.output_dir
    write_json({"reports": [r.to_dict() for r in reports], "summary": summarize(reports)}, out / "reports.json")
    write_csv(reports_dataframe(reports), out / "summary.csv")
    manifest.outputs.extend(["reports.json", "summary.csv"])
    for name in cases:
        runs = [r for r in reports if r.identity == name]
        manifest.tasks.append({"task": name, "runs": len(runs), "pass": all(r.passed for r in runs)})
    failed = [r for r in reports if not r.passed]
    for report in failed:
        logger.warning("%s failed at omega=%s: residual_rel=%.3e > %.1e",
                       report.identity, report.params.get("omega"), report.residual_rel, report.tolerance)
    return EXIT_IDENTITY_FAILURE if failed else EXIT_OK


def _green_kernels(problem: Problem, name: str, omega: float, k: Tuple[float, float]) -> Tuple[GreenKernel, List[Any]]:
    samples = problem.config.samples
    medium = problem.medium(samples.get("medium", problem.profile.background.name))
    if name == "homogeneous_3d":
        return Green6.from_medium(medium, omega, problem.units), samples.get("pairs_3d", [])
    pairs = samples.get("pairs", [])
    if name == "homogeneous_1d":
        return HomogeneousGreen1D.from_medium(medium, omega, units=problem.units), pairs
    if name == "stratified":
        return StratifiedGreen.from_profile(problem.profile, omega, k, problem.units), pairs
    fd = problem.config.finite_difference
    if "bounds" not in fd:
        raise InputError("finite_difference needs 'bounds'")
    a, b = fd["bounds"]
    h = float(fd.get("h", 2.0 * np.pi / wavenumber(omega, problem.units) / FD_DEFAULT_POINTS_PER_WAVELENGTH))
    anchor = float(pairs[0][0]) if pairs else None
    interfaces = tuple(problem.profile.interfaces)
    grid = staggered_grid(a, b, h, interfaces, anchor=anchor)
    return FiniteDifferenceGreen(problem.profile, grid, omega, fd.get("eta"), problem.units), pairs


def cmd_green(problem: Problem, manifest: RunManifest) -> int:
    """Write one CSV per (kernel, omega, k_perp) plus a JSON index."""
    config = problem.config
    kernels = config.kernels or ("homogeneous_1d",)
    index: List[Dict[str, Any]] = []
    for name in kernels:
        k_grid = _k_grid(problem) if name == "stratified" else ((0.0, 0.0),)
        for i, w in enumerate(config.frequencies):
            for j, k in enumerate(k_grid):
                g, pairs = _green_kernels(problem, name, w, k)
                if not pairs:
                    raise InputError(f"No sample pairs configured for kernel {name!r}")
                values = []
                for r, r_prime in pairs:
                    if name == "finite_difference" and problem.config.finite_difference.get("richardson"):
                        a, b = problem.config.finite_difference["bounds"]
                        value = fd_richardson(problem.profile, a, b, g.h, w, float(r), float(r_prime), problem.units)
                    else:
                        value = g(r, r_prime)
                    values.append((r, r_prime, value))
                filename = f"green_{name}_w{i}_k{j}.csv"
                write_csv(kernel_dataframe(values, g.components), config.output_dir / filename)
                manifest.outputs.append(filename)
                index.append({"kernel": name, "omega": w, "k_perp": list(k), "file": filename,
                              "provenance": g.provenance, "components": list(g.components)})
        manifest.tasks.append({"task": name, "pass": True})
    write_json({"kernels": index}, config.output_dir / "kernels.json")
    manifest.outputs.append("kernels.json")
    return EXIT_OK


def load_chain(path: Path) -> Tuple[MaterialProfile, List[Dict[str, Any]]]:
    """
    Material profile and stage list of a chain file.

    Raises:
        InputError: If a stage lacks z_in or z_out
    """
    document = load_json(path)
    profile, _ = parse_material_document(document)
    stages = list(document.get("stages", []))
    for i, stage in enumerate(stages):
        if "z_in" not in stage or "z_out" not in stage:
            raise InputError(f"Stage {i} needs z_in and z_out")
    return profile, stages


def cmd_cascade(problem: Problem, manifest: RunManifest) -> int:
    """Write cascade.json, cascade_sweep.csv and optionally cascade_sweep.png."""
    config = problem.config
    if config.chain_file is None:
        raise InputError("cascade needs 'chain_file'")
    profile, stage_specs = load_chain(config.chain_file)

    def build_chain(w: float, k: Tuple[float, float] = (0.0, 0.0)) -> List[StageRegion]:
        g = StratifiedGreen.from_profile(profile, w, k, problem.units)
        return [
            StageRegion(transfer_kernel(g, float(s["z_in"]), float(s["z_out"]), label=str(s.get("label", f"stage{i}"))), g)
            for i, s in enumerate(stage_specs)
        ]

    tolerance = problem.tolerance("cascade")
    entries: List[Dict[str, Any]] = []
    for w in config.frequencies:
        for k in config.k_perp:
            budget = cascade(build_chain(w, k), omega=w, units=problem.units, method="direct")
            entries.append({
                "omega": w,
                "k_perp": list(k),
                "labels": list(budget.labels),
                "transfer": complex_to_json(budget.transfer.matrix),
                "added_noise": complex_to_json(budget.added_noise),
                "contributions": [complex_to_json(c) for c in budget.contributions],
                "stage_noise": [complex_to_json(c) for c in budget.stage_noise],
                "output_commutator": complex_to_json(budget.output_commutator),
                "closure_residual": budget.closure_residual,
                "pass": budget.closure_residual <= tolerance,
            })
    out = config.output_dir
    write_json({"budgets": entries, "tolerance": tolerance}, out / "cascade.json")
    sweep = pd.DataFrame(cascade_sweep(build_chain, config.frequencies, problem.units))
    write_csv(sweep, out / "cascade_sweep.csv")
    manifest.outputs.extend(["cascade.json", "cascade_sweep.csv"])
    if config.figure:
        plot_sweep(sweep, out / "cascade_sweep.png")
        manifest.outputs.append("cascade_sweep.png")
    passed = all(entry["pass"] for entry in entries)
    manifest.tasks.append({"task": "cascade", "runs": len(entries), "pass": passed})
    return EXIT_OK if passed else EXIT_IDENTITY_FAILURE


def material_table(media: Mapping[str, Medium], frequencies: Sequence[float],
                   units: UnitsMode = UnitsMode.DIMENSIONLESS) -> pd.DataFrame:
    """One row per (medium, omega): susceptibilities, loss spectrum, passivity and noise ratio."""
    rows = []
    for name in sorted(media):
        medium = media[name]
        for w in frequencies:
            tensor = medium_tensor(medium, w)
            loss = np.linalg.eigvalsh(hermitian_split(tensor)[1])
            ratios = [noise_ratio(osc, w, units) for osc in medium.oscillators]
            chi_e = medium_susceptibility(medium, w, SECTOR_ELECTRIC)
            chi_m = medium_susceptibility(medium, w, SECTOR_MAGNETIC)
            rows.append({
                "medium": name,
                "omega": w,
                "chi_e_re": chi_e.real,
                "chi_e_im": chi_e.imag,
                "chi_m_re": chi_m.real,
                "chi_m_im": chi_m.imag,
                "loss_min": float(loss[0]),
                "loss_max": float(loss[-1]),
                "passive": is_passive(tensor),
                "noise_ratio": float(max(ratios)) if ratios else 0.0,
            })
    return pd.DataFrame(rows)


def cmd_material_info(problem: Problem, manifest: RunManifest) -> int:
    """Print the material table and write material_info.csv."""
    table = material_table(problem.media, problem.config.frequencies, problem.units)
    print(table.to_string(index=False))
    write_csv(table, problem.config.output_dir / "material_info.csv")
    manifest.outputs.append("material_info.csv")
    manifest.tasks.append({"task": "material-info", "pass": True})
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Problem, RunManifest], int]] = {
    "green": cmd_green,
    "verify": cmd_verify,
    "cascade": cmd_cascade,
    "material-info": cmd_material_info,
}


# ------------------------------------------------------------
# Entry point
# ------------------------------------------------------------
def _diagnostic(error: BaseException, code: int) -> None:
    payload = {"error": type(error).__name__, "message": str(error), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 if every check passed, 1 on identity failure, 2 on input errors
        and on unexpected exceptions (logged with traceback)
    """
    args = build_parser().parse_args(argv)
    logging.getLogger().setLevel(args.log_level)
    start = time.perf_counter()
    try:
        config, document = load_run_config(args)
        problem = load_problem(config)
        manifest = RunManifest(args.command, config_hash(document), package_versions())
        code = COMMANDS[args.command](problem, manifest)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError, ZeroDivisionError) as e:
        logger.error(f"Input error: {e}")
        _diagnostic(e, EXIT_INPUT_ERROR)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        _diagnostic(e, EXIT_INPUT_ERROR)
        return EXIT_INPUT_ERROR
    manifest.wall_time = time.perf_counter() - start
    manifest.outputs.append("manifest.json")
    write_json(manifest.to_dict(), config.output_dir / "manifest.json")
    logger.info("%s finished with exit code %d in %.2f s", args.command, code, manifest.wall_time)
    return code
