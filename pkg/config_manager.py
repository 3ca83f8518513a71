"""
Configuration Manager for Heat Enclosure
Handles YAML scene documents, user settings and run configuration.
"""

import copy
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

# Try to import yaml, fail gracefully if not installed
try:
    import yaml
except ImportError:
    print("ERROR: PyYAML is required but not installed.")
    print("Please install it with: pip install pyyaml")
    sys.exit(1)

from app.errors import EnclosureError, SceneParseError, UsageError
from app.tolerances import DEFAULT_TOLERANCES, Tolerances


def get_config_dir() -> Path:
    """Get the configuration directory path based on platform."""
    if platform.system() == "Windows":
        # Use USERPROFILE on Windows
        home = os.environ.get("USERPROFILE", os.path.expanduser("~"))
    else:
        home = os.path.expanduser("~")

    return Path(home) / ".heat-enclosure"


def get_settings_path() -> Path:
    """Get the full path to the user settings file."""
    return get_config_dir() / "settings.yaml"


def get_default_settings() -> dict:
    """Return the default settings structure."""
    return {
        "grid": {
            "mu_min": 8.0,
            "mu_max": 40.0,
            "count": 9,
            "region": "real",
            "delta0": DEFAULT_TOLERANCES.delta0,
            "delta1": DEFAULT_TOLERANCES.delta1,
        },
        "audit": {
            "delta": DEFAULT_TOLERANCES.audit_delta,
            "mu_grid": [8.0, 16.0, 24.0, 32.0],
        },
        "tolerances": {},
        "recon": {
            "resolution_fraction": 1.0 / 64.0,
            "probe_radius_factor": 1.5,
        },
        "workers": 1,
    }


def _merge(defaults: dict, loaded: dict) -> dict:
    """Merge loaded values key by key over defaults; unknown keys are kept."""
    merged = copy.deepcopy(defaults)
    for key, value in loaded.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(path: Optional[Path] = None) -> dict:
    """Load settings from YAML, or create the user-level default file if missing."""
    user_level = path is None
    path = Path(path) if path is not None else get_settings_path()

    if not path.exists():
        settings = get_default_settings()
        if user_level:
            save_settings(settings)
        return settings

    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise UsageError(f"cannot read settings {path}: {e}") from e

    if loaded is None:
        return get_default_settings()
    if not isinstance(loaded, dict):
        raise UsageError(f"settings {path}: top level must be a mapping")
    return _merge(get_default_settings(), loaded)


def save_settings(settings: dict, path: Optional[Path] = None) -> bool:
    """Save settings to YAML."""
    try:
        path = Path(path) if path is not None else get_settings_path()
        path.parent.mkdir(parents=True, exist_ok=True)

        with open(path, "w", encoding="utf-8") as f:
            yaml.dump(settings, f, default_flow_style=False, sort_keys=False, allow_unicode=True)

        return True
    except OSError:
        return False


# =============================================================================
# Scenes
# =============================================================================

def _line_of(node, path: Sequence) -> Optional[int]:
    """1-based line of the YAML node at a key/index path, or of its deepest existing parent."""
    line = node.start_mark.line + 1 if node is not None else None
    for step in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == step), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(step, int) and step < len(node.value):
            nxt = node.value[step]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


class _SceneReader:
    """Walks a parsed scene document, reporting errors with field paths and lines."""

    def __init__(self, data: dict, root_node):
        self.data = data
        self.root = root_node

    def fail(self, path: Sequence, message: str):
        name = "".join(f"[{p}]" if isinstance(p, int) else (f".{p}" if i else p)
                       for i, p in enumerate(path))
        raise SceneParseError(name or "<root>", message, _line_of(self.root, path))

    def get(self, obj: dict, path: Sequence, key: str, default=...):
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        if key not in obj:
            if default is ...:
                self.fail(list(path) + [key], "missing required field")
            return default
        return obj[key]

    def number(self, value, path, positive=False, nonnegative=False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        value = float(value)
        if not np.isfinite(value):
            self.fail(path, "must be finite")
        if positive and value <= 0:
            self.fail(path, f"must be positive, got {value}")
        if nonnegative and value < 0:
            self.fail(path, f"must be non-negative, got {value}")
        return value

    def vector(self, value, path, positive=False) -> Tuple[float, float, float]:
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            self.fail(path, f"expected 3 numbers, got {value!r}")
        return tuple(self.number(v, list(path) + [i], positive=positive) for i, v in enumerate(value))

    def surface(self, obj, path, refinement):
        from geometry import SurfaceSpec

        kind = self.get(obj, path, "kind")
        center = self.vector(self.get(obj, path, "center", [0.0, 0.0, 0.0]), list(path) + ["center"])
        if kind == "sphere":
            r = self.number(self.get(obj, path, "radius"), list(path) + ["radius"], positive=True)
            radii = (r, r, r)
        elif kind in ("ellipsoid", "peanut"):
            radii = self.vector(self.get(obj, path, "radii"), list(path) + ["radii"], positive=True)
        else:
            self.fail(list(path) + ["kind"], f"unsupported kind {kind!r} (sphere, ellipsoid, peanut)")
        rotation = self.vector(self.get(obj, path, "rotation", [0.0, 0.0, 0.0]), list(path) + ["rotation"])
        ref = self.get(obj, path, "refinement", 3) if refinement is None else refinement
        if isinstance(ref, bool) or not isinstance(ref, int) or ref < 1:
            self.fail(list(path) + ["refinement"], f"must be an integer >= 1, got {ref!r}")
        return SurfaceSpec(kind, center, radii, ref, rotation)

    def flux(self, obj, path):
        from forward_indicator import FluxModel

        if obj is None:
            return FluxModel()
        kind = self.get(obj, path, "kind", "constant")
        kwargs = {"kind": kind}
        for key in ("T", "beta0", "value", "f0", "slope", "modulation"):
            if key in obj:
                kwargs[key] = self.number(obj[key], list(path) + [key])
        if "axis" in obj:
            kwargs["axis"] = self.vector(obj["axis"], list(path) + ["axis"])
        if "source" in obj:
            kwargs["source"] = str(obj["source"])
        try:
            return FluxModel(**kwargs)
        except UsageError as e:
            self.fail(path, str(e))


def parse_scene(text: str, refinement: int = None, base_dir: Path = None):
    """Parse a scene document into the scene specs: (outer, cavities, rho, flux, name, probes)."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else None
        raise SceneParseError("<document>", str(e.problem), line) from e
    if not isinstance(data, dict):
        raise SceneParseError("<root>", "scene must be a mapping", 1)

    reader = _SceneReader(data, root)
    outer = reader.surface(reader.get(data, [], "outer"), ["outer"], refinement)
    cavities, rho = [], []
    raw = reader.get(data, [], "cavities", [])
    if not isinstance(raw, list):
        reader.fail(["cavities"], "expected a list")
    for j, item in enumerate(raw):
        path = ["cavities", j]
        cavities.append(reader.surface(item, path, refinement))
        rho.append(reader.number(item.get("rho", 0.0), path + ["rho"]))
    flux = reader.flux(data.get("flux"), ["flux"])
    if flux.kind == "external" and base_dir is not None and not Path(flux.source).is_absolute():
        from dataclasses import replace
        flux = replace(flux, source=str(Path(base_dir) / flux.source))
    probes_raw = data.get("probes", [])
    if not isinstance(probes_raw, list):
        reader.fail(["probes"], "expected a list of points")
    probes = [reader.vector(p, ["probes", i]) for i, p in enumerate(probes_raw)]
    name = str(data.get("name", "scene"))
    return outer, cavities, rho, flux, name, probes


def load_scene(path, refinement: int = None):
    """
    Load and discretize a scene file.

    Raises:
        UsageError: the file cannot be read
        SceneParseError: a field is missing or invalid
    """
    from geometry import build_scene

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read scene {path}: {e}") from e
    outer, cavities, rho, flux, name, probes = parse_scene(text, refinement, path.parent)
    return build_scene(outer, cavities, rho, flux.T, flux, name, probes)


def _surface_dict(spec, rho: float = None) -> dict:
    out = {"kind": spec.kind, "center": [float(c) for c in spec.center]}
    if spec.kind == "sphere":
        out["radius"] = float(spec.radii[0])
    else:
        out["radii"] = [float(r) for r in spec.radii]
    if any(spec.rotation):
        out["rotation"] = [float(a) for a in spec.rotation]
    out["refinement"] = spec.refinement
    if rho is not None:
        out["rho"] = float(rho)
    return out


def scene_to_dict(scene) -> dict:
    """Scene document for a built scene."""
    doc = {
        "name": scene.name,
        "outer": _surface_dict(scene.outer.spec),
        "cavities": [_surface_dict(c.spec, r) for c, r in zip(scene.cavities, scene.rho)],
        "flux": {k: v for k, v in scene.flux.to_dict().items() if v is not None},
    }
    if scene.probes:
        doc["probes"] = [[float(c) for c in p] for p in scene.probes]
    return doc


def dump_scene(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.dump(document, f, default_flow_style=None, sort_keys=False)
    return path


# =============================================================================
# Run configuration
# =============================================================================

@dataclass
class RunConfig:
    command: str
    scene_path: Optional[Path] = None
    out_dir: Path = Path("out")
    region: str = "real"
    mu_min: float = 8.0
    mu_max: float = 40.0
    count: int = 9
    delta0: float = DEFAULT_TOLERANCES.delta0
    delta1: float = DEFAULT_TOLERANCES.delta1
    im_profile: Optional[str] = None
    probes: List[Tuple[float, float, float]] = field(default_factory=list)
    refinement: Optional[int] = None
    margin: Optional[float] = None
    seed: int = 0
    noise: float = 0.0
    workers: int = 1
    which: Optional[str] = None
    from_dir: Optional[Path] = None
    oracle: bool = False
    resolution: Optional[float] = None
    audit_mu_grid: List[float] = field(default_factory=lambda: [8.0, 16.0, 24.0, 32.0])
    audit_delta: float = DEFAULT_TOLERANCES.audit_delta
    probe_radius_factor: float = 1.5
    tolerances: Tolerances = DEFAULT_TOLERANCES


def parse_probe(text: str) -> Tuple[float, float, float]:
    parts = text.split(",")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        values = ()
    if len(values) != 3:
        raise UsageError(f"probe must be x,y,z, got {text!r}")
    return values


def build_run_config(args, settings: dict) -> RunConfig:
    """
    Merge command line flags over settings and validate ranges.

    Raises:
        UsageError: a value is out of range or a referenced file is missing
    """
    grid = settings.get("grid", {})

    def pick(name, default):
        value = getattr(args, name, None)
        return default if value is None else value

    try:
        tolerances = DEFAULT_TOLERANCES.with_overrides(settings.get("tolerances") or {})
    except (KeyError, ValueError) as e:
        raise UsageError(f"settings.tolerances: {e}") from e

    cfg = RunConfig(
        command=args.command,
        scene_path=Path(args.scene) if getattr(args, "scene", None) else None,
        out_dir=Path(pick("out", "out")),
        region=pick("region", grid.get("region", "real")),
        mu_min=float(pick("mu_min", grid.get("mu_min", 8.0))),
        mu_max=float(pick("mu_max", grid.get("mu_max", 40.0))),
        count=int(pick("count", grid.get("count", 9))),
        delta0=float(pick("delta0", grid.get("delta0", tolerances.delta0))),
        delta1=float(pick("delta1", grid.get("delta1", tolerances.delta1))),
        probes=[parse_probe(p) for p in (getattr(args, "probe", None) or [])],
        refinement=getattr(args, "refinement", None),
        margin=getattr(args, "margin", None),
        seed=int(pick("seed", 0)),
        noise=float(pick("noise", 0.0)),
        workers=int(pick("workers", settings.get("workers", 1))),
        which=getattr(args, "which", None),
        from_dir=Path(args.from_dir) if getattr(args, "from_dir", None) else None,
        oracle=bool(getattr(args, "oracle", False)),
        resolution=getattr(args, "resolution", None),
        audit_mu_grid=[float(m) for m in settings.get("audit", {}).get("mu_grid", [8, 16, 24, 32])],
        audit_delta=float(settings.get("audit", {}).get("delta", tolerances.audit_delta)),
        probe_radius_factor=float(settings.get("recon", {}).get("probe_radius_factor", 1.5)),
        tolerances=tolerances,
    )

    if cfg.count < 3:
        raise UsageError(f"--count must be at least 3, got {cfg.count}")
    if cfg.mu_min <= 0 or cfg.mu_max <= cfg.mu_min:
        raise UsageError(f"need 0 < mu_min < mu_max, got [{cfg.mu_min}, {cfg.mu_max}]")
    if cfg.margin is not None and cfg.margin < 0:
        raise UsageError("--margin must be non-negative")
    if cfg.noise < 0:
        raise UsageError("--noise must be non-negative")
    if cfg.workers < 1:
        raise UsageError("--workers must be at least 1")
    if cfg.refinement is not None and cfg.refinement < 1:
        raise UsageError("--refinement must be at least 1")
    if cfg.scene_path is not None and not cfg.scene_path.exists():
        raise UsageError(f"scene file not found: {cfg.scene_path}")
    if cfg.from_dir is not None and not cfg.from_dir.is_dir():
        raise UsageError(f"--from directory not found: {cfg.from_dir}")
    return cfg


# =============================================================================
# Shipped scenes
# =============================================================================

def _sphere(center, radius, refinement=3, rho=None):
    out = {"kind": "sphere", "center": list(center), "radius": radius, "refinement": refinement}
    if rho is not None:
        out["rho"] = rho
    return out


SHIPPED_SCENES = {
    "concentric": {
        "name": "concentric",
        "outer": _sphere([0.0, 0.0, 0.0], 2.0),
        "cavities": [_sphere([0.0, 0.0, 0.0], 0.5, rho=0.0)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[3.0, 0.0, 0.0]],
    },
    "two_cavity": {
        "name": "two_cavity",
        "outer": _sphere([0.0, 0.0, 0.0], 3.0),
        "cavities": [_sphere([1.2, 0.0, 0.0], 1.0, rho=0.0), _sphere([-1.2, 0.0, 0.0], 1.0, rho=0.0)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[5.0, 0.0, 0.0]],
    },
    "blocking": {
        "name": "blocking",
        "outer": {"kind": "ellipsoid", "center": [0.0, 0.0, 0.0], "radii": [2.0, 5.0, 5.0], "refinement": 3},
        "cavities": [_sphere([-1.2, 0.0, 0.0], 0.5, rho=0.0)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[3.0, 0.0, 0.0]],
    },
    "degenerate_ring": {
        "name": "degenerate_ring",
        "outer": _sphere([0.0, 0.0, 0.0], 2.0),
        "cavities": [_sphere([-1.0, 0.0, 0.0], 0.9, rho=0.0)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[3.0, 0.0, 0.0]],
    },
    "w_audit": {
        "name": "w_audit",
        "outer": _sphere([0.0, 0.0, 0.0], 4.0, refinement=2),
        "cavities": [_sphere([2.0, 0.0, 0.0], 1.0, rho=0.0), _sphere([-2.0, 0.0, 0.0], 1.0, rho=0.0)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[5.0, 0.0, 0.0]],
    },
    "no_cavity": {
        "name": "no_cavity",
        "outer": _sphere([0.0, 0.0, 0.0], 2.0),
        "cavities": [],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[3.0, 0.0, 0.0]],
    },
    "overlapping": {
        "name": "overlapping",
        "outer": _sphere([0.0, 0.0, 0.0], 3.0),
        "cavities": [_sphere([0.5, 0.0, 0.0], 1.0), _sphere([-0.5, 0.0, 0.0], 1.0)],
        "probes": [[4.0, 0.0, 0.0]],
    },
    "ellipsoid_outer": {
        "name": "ellipsoid_outer",
        "outer": {"kind": "ellipsoid", "center": [0.0, 0.0, 0.0], "radii": [3.0, 3.5, 4.0], "refinement": 3},
        "cavities": [_sphere([0.5, 0.0, 0.0], 0.6, rho=0.5)],
        "flux": {"kind": "constant", "value": 1.0, "T": 1.0, "beta0": 2.0},
        "probes": [[4.0, 0.0, 0.0]],
    },
}


def write_fixtures(directory) -> List[Path]:
    """Write every shipped scene as YAML into a directory."""
    directory = Path(directory)
    return [dump_scene(doc, directory / f"{name}.yaml") for name, doc in SHIPPED_SCENES.items()]


def exit_code_for(error: Exception) -> int:
    """Exit code contract: 0 success, 1 usage, 2 numerical, 3 assumption."""
    if isinstance(error, EnclosureError):
        return error.exit_code
    return 2
