"""YAML experiment configs and the preset library.

A config names an experiment, a geometry block, a coupling block and a sweep.
Numbers may be written as arithmetic in ``pi`` and ``sqrt`` (``pi/sqrt(2)``,
``40*pi``). Unknown keys are rejected; every omitted key is filled with its
default and echoed back by :meth:`ExperimentConfig.resolved`.
"""
from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .engine import (
    ABSCISSA,
    EXPERIMENTS,
    LINEWIDTH_T0,
    RunPlan,
    default_realizations,
)
from .geometry import PER_ATOM, SpatialConfig
from .hamiltonian import FULL, CouplingParams
from .propagator import DEFAULT_NOISE_SEGMENTS, DEFAULT_NOISE_SIGMA_FRACTION, LORENTZIAN

LINEAR = "linear"
LOG = "log"
CONFIG_PREFIX = "# config: "


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""


# key -> default; None means "required" or "resolved later"
_TOP = {
    "experiment": None,
    "description": "",
    "geometry": None,
    "coupling": {},
    "noise": {},
    "sweep": None,
    "series": None,
    "realizations": None,
    "seed": 0,
    "output": None,
}
_GEOMETRY = {
    "kind": None,
    "atoms": 2,
    "length": 1.0,
    "separation": 1.0,
    "fwhm": None,
    "fwhm_convention": PER_ATOM,
}
_COUPLING = {
    "theta0": 1.0,
    "delta_t0": 0.0,
    "ddi": FULL,
    "dipole_ratio": 1.0,
    "laser_area": math.pi,
    "delta_laser_t0": 0.0,
    "linewidth_t0": 0.0,
}
_NOISE = {
    "segments": DEFAULT_NOISE_SEGMENTS,
    "calibration": LORENTZIAN,
    "sigma_fraction": DEFAULT_NOISE_SIGMA_FRACTION,
}
_SWEEP = {"parameter": None, "start": None, "stop": None, "count": None, "spacing": LINEAR, "values": None}
_SERIES = {"parameter": None, "values": None}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_NAMES = {"pi": math.pi}
_FUNCS = {"sqrt": math.sqrt}


def _eval(node, field):
    if isinstance(node, ast.Expression):
        return _eval(node.body, field)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, field)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, field), _eval(node.right, field))
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCS
        and len(node.args) == 1
        and not node.keywords
    ):
        return _FUNCS[node.func.id](_eval(node.args[0], field))
    raise ConfigError(f"{field}: unsupported expression")


def parse_number(value, field: str) -> float:
    """A float from a YAML scalar: plain numbers or arithmetic in pi and sqrt."""
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            tree = ast.parse(value.strip(), mode="eval")
        except SyntaxError:
            raise ConfigError(f"{field}: cannot parse {value!r} as a number") from None
        try:
            out = _eval(tree, field)
        except ConfigError:
            raise ConfigError(f"{field}: cannot parse {value!r} as a number") from None
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise ConfigError(f"{field}: cannot evaluate {value!r} ({exc})") from None
    else:
        raise ConfigError(f"{field}: expected a number, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{field}: must be finite, got {value!r}")
    return out


def _int(value, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{field}: expected an integer, got {value!r}")
    return value


def _block(raw, schema: dict, name: str) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        prefix = f"{name}." if name != "config" else ""
        raise ConfigError(f"unknown key {prefix}{unknown[0]!s} (allowed: {', '.join(schema)})")
    return {**schema, **raw}


def _grid(block: dict, field: str) -> tuple[float, ...]:
    if block["values"] is not None:
        if any(block[k] is not None for k in ("start", "stop", "count")):
            raise ConfigError(f"{field}: give either values or start/stop/count, not both")
        values = block["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{field}.values: expected a non-empty list")
        return tuple(parse_number(v, f"{field}.values[{i}]") for i, v in enumerate(values))
    missing = [k for k in ("start", "stop", "count") if block[k] is None]
    if missing:
        raise ConfigError(f"{field}: missing {missing[0]} (or give an explicit values list)")
    start = parse_number(block["start"], f"{field}.start")
    stop = parse_number(block["stop"], f"{field}.stop")
    count = _int(block["count"], f"{field}.count")
    if count < 1:
        raise ConfigError(f"{field}.count: must be >= 1, got {count}")
    if block["spacing"] == LINEAR:
        grid = np.linspace(start, stop, count)
    elif block["spacing"] == LOG:
        if start <= 0 or stop <= 0:
            raise ConfigError(f"{field}: log spacing needs start and stop > 0")
        grid = np.geomspace(start, stop, count)
    else:
        raise ConfigError(f"{field}.spacing: must be {LINEAR!r} or {LOG!r}, got {block['spacing']!r}")
    return tuple(float(x) for x in grid)


@dataclass(frozen=True)
class ExperimentConfig:
    plan: RunPlan
    output: str | None = None
    description: str = ""

    def resolved(self) -> dict:
        """Fully explicit config (JSON-safe); parsing it again gives the same plan."""
        p = self.plan
        g = p.geometry
        c = p.coupling
        geometry = {"kind": g.kind, "atoms": g.atom_count}
        if g.kind == "single_box":
            geometry["length"] = g.length
        else:
            geometry["separation"] = g.separation
            geometry["fwhm"] = list(g.fwhm)
            geometry["fwhm_convention"] = g.fwhm_convention
        out = {
            "experiment": p.experiment,
            "description": self.description,
            "geometry": geometry,
            "coupling": {
                "theta0": c.theta0,
                "delta_t0": c.delta_t0,
                "ddi": c.ddi_mode,
                "dipole_ratio": c.dipole_ratio,
                "laser_area": c.laser_area,
                "delta_laser_t0": c.delta_laser_t0,
                "linewidth_t0": p.linewidth_t0,
            },
            "noise": {
                "segments": p.noise_segments,
                "calibration": p.noise_calibration,
                "sigma_fraction": p.noise_sigma_fraction,
            },
            "sweep": {"parameter": p.abscissa, "values": list(p.sweep)},
            "series": None if p.series_parameter is None else {"parameter": p.series_parameter, "values": list(p.series)},
            "realizations": p.realizations,
            "seed": p.seed,
            "output": self.output,
        }
        return out

    def echo(self) -> str:
        return json.dumps(self.resolved(), sort_keys=False, separators=(", ", ": "))


def build_config(raw) -> ExperimentConfig:
    """Validate a parsed document (dict) into an ExperimentConfig."""
    top = _block(raw, _TOP, "config")
    experiment = top["experiment"]
    if experiment is None:
        raise ConfigError("missing required key experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")
    if top["geometry"] is None:
        raise ConfigError("missing required block geometry")
    geo = _block(top["geometry"], _GEOMETRY, "geometry")
    if geo["kind"] is None:
        raise ConfigError("missing required key geometry.kind")
    cpl = _block(top["coupling"], _COUPLING, "coupling")
    noise = _block(top["noise"], _NOISE, "noise")
    if top["sweep"] is None:
        raise ConfigError("missing required block sweep")
    sweep = _block(top["sweep"], _SWEEP, "sweep")
    abscissa = ABSCISSA[experiment]
    if sweep["parameter"] is not None and sweep["parameter"] != abscissa:
        raise ConfigError(f"sweep.parameter: {experiment} sweeps {abscissa}, got {sweep['parameter']!r}")
    grid = _grid(sweep, "sweep")

    series_name, series_values = None, ()
    if top["series"] is not None:
        ser = _block(top["series"], _SERIES, "series")
        if ser["parameter"] is None:
            raise ConfigError("missing required key series.parameter")
        if ser["values"] is None:
            raise ConfigError("missing required key series.values")
        series_name = ser["parameter"]
        series_values = _grid({**_SWEEP, "values": ser["values"]}, "series")

    fwhm = geo["fwhm"]
    if fwhm is not None:
        items = fwhm if isinstance(fwhm, list) else [fwhm]
        if len(items) not in (1, 3):
            raise ConfigError("geometry.fwhm: give one isotropic value or [x, y, z]")
        fwhm = tuple(parse_number(v, "geometry.fwhm") for v in items)
        if len(fwhm) == 1:
            fwhm = fwhm * 3

    try:
        geometry = SpatialConfig(
            kind=geo["kind"],
            atom_count=_int(geo["atoms"], "geometry.atoms"),
            length=parse_number(geo["length"], "geometry.length"),
            separation=parse_number(geo["separation"], "geometry.separation"),
            fwhm=fwhm,
            fwhm_convention=geo["fwhm_convention"],
        )
        coupling = CouplingParams(
            theta0=parse_number(cpl["theta0"], "coupling.theta0"),
            delta_t0=parse_number(cpl["delta_t0"], "coupling.delta_t0"),
            ddi_mode=cpl["ddi"],
            dipole_ratio=parse_number(cpl["dipole_ratio"], "coupling.dipole_ratio"),
            laser_area=parse_number(cpl["laser_area"], "coupling.laser_area"),
            delta_laser_t0=parse_number(cpl["delta_laser_t0"], "coupling.delta_laser_t0"),
        )
        realizations = top["realizations"]
        realizations = (
            default_realizations(geometry.atom_count) if realizations is None else _int(realizations, "realizations")
        )
        plan = RunPlan(
            experiment=experiment,
            geometry=geometry,
            coupling=coupling,
            sweep=grid,
            series_parameter=series_name,
            series=series_values,
            realizations=realizations,
            seed=_int(top["seed"], "seed"),
            linewidth_t0=parse_number(cpl["linewidth_t0"], "coupling.linewidth_t0"),
            noise_segments=_int(noise["segments"], "noise.segments"),
            noise_sigma_fraction=parse_number(noise["sigma_fraction"], "noise.sigma_fraction"),
            noise_calibration=noise["calibration"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if plan.seed < 0:
        raise ConfigError(f"seed: must be >= 0, got {plan.seed}")
    if plan.linewidth_t0 > 0 and plan.mode != "blockade":
        raise ConfigError("coupling.linewidth_t0: laser noise only applies to blockade experiments")
    if series_name == LINEWIDTH_T0 and plan.mode != "blockade":
        raise ConfigError("series.parameter: linewidth_t0 only applies to blockade experiments")
    output = top["output"]
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string")
    description = top["description"] or ""
    return ExperimentConfig(plan, output, str(description))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse YAML text. A CSV written by this package is also accepted: its
    config echo line is read back instead."""
    for line in text.splitlines():
        if line.startswith(CONFIG_PREFIX):
            text = line[len(CONFIG_PREFIX):]
            source = f"{source} (config echo)"
            break
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        raise ConfigError(f"{source}: YAML syntax error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML error: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    try:
        return build_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def preset_names() -> list[str]:
    root = resources.files(__package__).joinpath("presets")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = resources.files(__package__).joinpath("presets", f"{name}.yaml")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; see 'presets list'")
    return path.read_text(encoding="utf-8")


def load_config(ref: str) -> ExperimentConfig:
    """Load a config file path, or a preset by name when no such file exists."""
    path = Path(ref)
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{ref}: cannot read ({exc.strerror})") from None
        return parse_config(text, str(path))
    if path.suffix or "/" in ref:
        raise ConfigError(f"{ref}: no such config file")
    return parse_config(preset_text(ref), f"preset {ref}")
