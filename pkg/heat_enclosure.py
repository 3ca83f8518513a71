#!/usr/bin/env python3
"""
Heat Enclosure command line tool
Scene validation, indicator sweeps, length extraction, audits and enclosure
reconstruction for cavities inside a heat conductor.

Usage:
    python heat_enclosure.py scene-validate --scene fixtures/concentric.yaml
    python heat_enclosure.py extract --scene fixtures/concentric.yaml --out out/
    python heat_enclosure.py audit --which kernels --scene fixtures/w_audit.yaml
    python heat_enclosure.py reconstruct --scene fixtures/concentric.yaml --oracle
    python heat_enclosure.py fixtures --out fixtures/

Exit codes: 0 success, 1 usage, 2 numerical failure, 3 assumption violation.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import EnclosureError, NumericalError, UsageError
from config_manager import (RunConfig, build_run_config, dump_scene, exit_code_for, load_scene,
                            load_settings, write_fixtures)
from output import voxel_rows, write_csv, write_json, write_vtk
from run_logger import end_session, get_logger, start_session

log = get_logger("cli")

INDICATOR_COLUMNS = ["mu", "im_lambda", "re_I0", "im_I0", "log_abs_I0", "route_residual"]
DECAY_COLUMNS = ["name", "mu", "max_envelope", "fitted_rate"]


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports problems as UsageError (exit 1)."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heat_enclosure", description="Enclosure method toolkit for heat conductors with cavities")
    parser.add_argument("--settings", help="settings YAML (default: ~/.heat-enclosure/settings.yaml)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scene_required=True):
        p.add_argument("--scene", required=scene_required, help="scene YAML file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--refinement", type=int, help="override every surface's refinement")
        p.add_argument("--probe", action="append", help="probe point x,y,z (repeatable)")
        p.add_argument("--workers", type=int, help="concurrent lambda samples")

    def grid(p):
        p.add_argument("--mu-min", type=float)
        p.add_argument("--mu-max", type=float)
        p.add_argument("--count", type=int)
        p.add_argument("--region", choices=["sector", "log", "real"])
        p.add_argument("--delta0", type=float)
        p.add_argument("--delta1", type=float)
        p.add_argument("--noise", type=float, help="relative perturbation of the flux data")
        p.add_argument("--seed", type=int)

    common(sub.add_parser("scene-validate", help="check scene assumptions"))
    for name in ("sweep", "extract"):
        p = sub.add_parser(name, help=f"indicator {name}")
        common(p)
        grid(p)
    p = sub.add_parser("audit", help="kernel, Laplace or density audits")
    common(p, scene_required=False)
    p.add_argument("--which", required=True, choices=["kernels", "laplace", "densities"])
    p = sub.add_parser("reconstruct", help="carve an enclosure from recovered lengths")
    common(p)
    grid(p)
    p.add_argument("--margin", type=float)
    p.add_argument("--resolution", type=float, help="voxel edge length")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--oracle", action="store_true", help="use exact path lengths")
    source.add_argument("--from", dest="from_dir", help="directory of extraction JSON files")
    p = sub.add_parser("fixtures", help="write the shipped scene files")
    p.add_argument("--out", help="output directory (default fixtures/)")
    return parser


# =============================================================================
# Helpers
# =============================================================================

def _scene(cfg: RunConfig):
    if cfg.scene_path is None:
        raise UsageError("--scene is required for this command")
    return load_scene(cfg.scene_path, cfg.refinement)


def _probes(cfg: RunConfig, scene) -> List[np.ndarray]:
    probes = cfg.probes or list(scene.probes)
    if not probes:
        raise UsageError("no probes: pass --probe x,y,z or list probes in the scene")
    return [np.asarray(p, dtype=float) for p in probes]


def _grid(cfg: RunConfig):
    from spectral_extraction import lambda_grid
    return lambda_grid(cfg.region, (cfg.mu_min, cfg.mu_max), cfg.count, cfg.im_profile,
                       cfg.delta0, cfg.delta1)


def _extract_probe(cfg: RunConfig, scene, grid, k: int, p, with_fit: bool) -> Tuple[dict, int]:
    """Sweep (and fit) one probe; returns its record and exit code."""
    from spectral_extraction import extract_length, extraction_record, sweep

    try:
        curve = sweep(scene, p, grid, cfg.workers, noise=cfg.noise, seed=cfg.seed + k, tol=cfg.tolerances)
    except EnclosureError as e:
        print(f"[ERROR] probe {p.tolist()}: {e}")
        return {"p": p.tolist(), "error": str(e)}, e.exit_code
    write_csv(cfg.out_dir / f"indicator_p{k}.csv", curve.rows(), INDICATOR_COLUMNS)
    if not with_fit:
        return {"p": p.tolist(), "samples": len(curve.valid()),
                "failures": {str(i): m for i, m in curve.failures.items()}}, 0
    try:
        extract_length(curve)
    except NumericalError as e:
        record = extraction_record(curve)
        record["error"] = str(e)
        print(f"[ERROR] probe {p.tolist()}: {e}")
        return record, e.exit_code
    record = extraction_record(curve)
    rel = record["rel_error"]
    rel_text = f", rel error {rel:.3%}" if rel is not None else ""
    print(f"[OK] probe {p.tolist()}: l_hat = {record['l_hat']:.6f} +- {record['stderr']:.2g}{rel_text}")
    return record, 0


# =============================================================================
# Commands
# =============================================================================

def cmd_scene_validate(cfg: RunConfig) -> int:
    from path_oracle import check_assumptions, report_rows

    scene = _scene(cfg)
    code, reports = 0, []
    for k, p in enumerate(_probes(cfg, scene)):
        report = check_assumptions(scene, p, cfg.tolerances)
        print(f"[*] probe {p.tolist()}: I1={report.I1} I2={report.I2} I3={report.I3} d1={report.d1}")
        for c in report.convexity:
            print(f"    {c['surface_id']}: M0={c['M0']:.4g} M1={c['M1']:.4g} r0={c['r0']:.4g}")
        for reason in report.reasons:
            print(f"    ! {reason}")
        if report.path is not None:
            write_csv(cfg.out_dir / f"minimizers_p{k}.csv", report_rows(report.path))
        reports.append(report.to_dict())
        if not report.all_hold:
            code = 3
    write_json(cfg.out_dir / "validate.json", {"scene": scene.name, "probes": reports})
    print("[OK] assumptions hold" if code == 0 else "[ERROR] assumptions violated")
    return code


def cmd_sweep_extract(cfg: RunConfig, with_fit: bool) -> int:
    scene = _scene(cfg)
    grid = _grid(cfg)
    code, records = 0, []
    for k, p in enumerate(_probes(cfg, scene)):
        record, c = _extract_probe(cfg, scene, grid, k, p, with_fit)
        records.append(record)
        if with_fit:
            write_json(cfg.out_dir / f"extraction_p{k}.json", record)
        code = max(code, c)
    write_json(cfg.out_dir / ("extraction.json" if with_fit else "sweep.json"),
               {"scene": scene.name, "probes": records})
    return code


def cmd_audit(cfg: RunConfig) -> int:
    if cfg.which == "laplace":
        from laplace_asymptotics import laplace_audit

        result = laplace_audit()
        write_csv(cfg.out_dir / "laplace_audit.csv", result["rows"])
        write_json(cfg.out_dir / "laplace_audit.json", result["summary"])
        passed = result["summary"]["passed"]
    elif cfg.which == "kernels":
        from bie_core import DecayReport, kernel_audit

        scene = _scene(cfg)
        result = kernel_audit(scene, cfg.audit_mu_grid, cfg.audit_delta, tol=cfg.tolerances)
        reports = {k: v for k, v in result.items() if isinstance(v, DecayReport)}
        rows = []
        for name, rep in reports.items():
            for row in rep.rows():
                rows.append({"name": name, **row})
        write_csv(cfg.out_dir / "kernel_decay.csv", rows, DECAY_COLUMNS)
        summary = {k: (vars(v) if isinstance(v, DecayReport) else v) for k, v in result.items()}
        write_json(cfg.out_dir / "kernel_audit.json", summary)
        for name, rep in reports.items():
            print(f"[{'OK' if rep.passed else 'ERROR'}] {name}: rate {rep.fitted_rate:.4g} "
                  f"(threshold {rep.threshold:.4g})")
        passed = all(r.passed for r in reports.values())
        if "norm" in result:
            print(f"[*] |Y22| log-log slope {result['norm']['slope']:.3f}")
    else:
        from forward_indicator import density_audit

        scene = _scene(cfg)
        result = density_audit(scene, cfg.audit_mu_grid if len(cfg.audit_mu_grid) >= 3 else [8, 16, 32, 64])
        write_csv(cfg.out_dir / "density_audit.csv", result["rows"])
        write_json(cfg.out_dir / "density_audit.json", {k: v for k, v in result.items() if k != "rows"})
        print(f"[*] |phi - g| slope {result['deviation_slope']:.3f}")
        passed = result["passed"]
    print("[OK] audit passed" if passed else "[ERROR] audit failed")
    return 0 if passed else 2


def _lengths_from_dir(directory: Path) -> List[Tuple[np.ndarray, float, float]]:
    entries = []
    for path in sorted(directory.glob("extraction_p*.json")):
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("l_hat") is None:
            continue
        entries.append((np.asarray(data["p"], dtype=float), float(data["l_hat"]), float(data.get("stderr") or 0.0)))
    if not entries:
        raise UsageError(f"no extraction results in {directory}")
    return entries


def cmd_reconstruct(cfg: RunConfig) -> int:
    from enclosure_recon import enclose
    from path_oracle import min_broken_path, probes_on_sphere
    from spectral_extraction import extract_length, sweep

    scene = _scene(cfg)
    if cfg.from_dir is not None:
        entries = _lengths_from_dir(cfg.from_dir)
    else:
        if cfg.probes:
            probes = [np.asarray(p, dtype=float) for p in cfg.probes]
        else:
            prim = scene.outer.primitive
            radius = cfg.probe_radius_factor * float(np.max(prim.bounding_half_widths()))
            probes = probes_on_sphere(prim.center, radius)
        entries = []
        if cfg.oracle:
            rng = np.random.default_rng(cfg.seed)
            for p in probes:
                l = min_broken_path(scene, p, cfg.tolerances).l_min
                if cfg.noise > 0:
                    l *= 1.0 + cfg.noise * rng.standard_normal()
                entries.append((p, l, 0.0))
        else:
            grid = _grid(cfg)
            for k, p in enumerate(probes):
                try:
                    curve = sweep(scene, p, grid, cfg.workers, kernel_route=False, noise=cfg.noise,
                                  seed=cfg.seed + k, check=False, tol=cfg.tolerances)
                    fit = extract_length(curve)
                    entries.append((p, fit.l_hat, fit.stderr))
                except NumericalError as e:
                    print(f"[ERROR] probe {p.tolist()}: {e}")

    if not entries:
        raise UsageError("no lengths available for reconstruction")
    grid_, report = enclose(scene, [(p, l) for p, l, _ in entries], cfg.resolution, cfg.margin,
                            [s for _, _, s in entries])
    write_vtk(cfg.out_dir / "enclosure.vtk", grid_)
    write_csv(cfg.out_dir / "voxels.csv", list(voxel_rows(grid_)), ["i", "j", "k", "x", "y", "z", "state"])
    write_csv(cfg.out_dir / "volumes.csv",
              [{"probes": i, "retained_volume": v} for i, v in enumerate(report.volumes)])
    write_json(cfg.out_dir / "soundness.json", report.to_dict())
    print(f"[*] retained volume {report.volumes[0]:.4g} -> {report.volumes[-1]:.4g} over {len(entries)} probes")
    if report.sound:
        print("[OK] no true cavity point carved")
        return 0
    print(f"[ERROR] {report.violations} true cavity points carved")
    return 2


def cmd_fixtures(out_dir: Path) -> int:
    from laplace_asymptotics import SHIPPED_SPECS

    paths = write_fixtures(out_dir)
    specs = {name: factory().description for name, factory in SHIPPED_SPECS.items()}
    paths.append(dump_scene({"laplace_specs": specs}, out_dir / "laplace_specs.yaml"))
    for path in paths:
        print(f"[OK] wrote {path}")
    return 0


# =============================================================================
# Entry point
# =============================================================================

def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    status = "failed"
    try:
        args = build_parser().parse_args(argv)
        start_session(args.command, args.log_level)
        if args.command == "fixtures":
            code = cmd_fixtures(Path(args.out or "fixtures"))
        else:
            settings = load_settings(Path(args.settings) if args.settings else None)
            cfg = build_run_config(args, settings)
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            if args.command == "scene-validate":
                code = cmd_scene_validate(cfg)
            elif args.command in ("sweep", "extract"):
                code = cmd_sweep_extract(cfg, with_fit=args.command == "extract")
            elif args.command == "audit":
                code = cmd_audit(cfg)
            else:
                code = cmd_reconstruct(cfg)
        status = "ok" if code == 0 else f"exit {code}"
        return code
    except EnclosureError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        status = type(e).__name__
        return exit_code_for(e)
    finally:
        end_session(status)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
