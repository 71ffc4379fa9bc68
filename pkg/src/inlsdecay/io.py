"""Run configuration (JSON), CSV time series and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, ParseError, ValidationError
from .experiments import ScenarioConfig
from .model import CoefficientFamily, GridSpec, ModelSpec, PotentialSpec, make_grid
from .solver import SolverConfig

TIMESERIES_HEADER = (
    "t,mass,energy,I,rhs_sum,rhs_kinetic,rhs_phi3,rhs_K1,rhs_K2,rhs_V,"
    "h1_alpha,l2_local,linf_local,tail_mass"
)

SECTIONS = ("grid", "model", "solver", "scenario")
GRID_KEYS = {"L", "N"}
MODEL_KEYS = {"sigma", "b", "mu", "K", "K_sign", "K_epsilon", "V", "V_m", "V_n"}
SOLVER_KEYS = {"dt", "T", "enforce_odd", "observer_stride", "tail_abort_threshold", "keep_snapshots"}
SCENARIO_KEYS = {
    "theorem", "initial_family", "center", "width", "epsilon_small",
    "interval", "horizons", "radii", "decay_factor",
}
_REQUIRED = {
    "grid": {"L", "N"},
    "model": {"sigma", "b"},
    "solver": {"dt", "T"},
    "scenario": {"theorem"},
}
_H_MULTIPLE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*h\s*$")


def _check_keys(section: str, data, allowed: set[str]) -> None:
    if not isinstance(data, dict):
        raise ParseError(f"section {section!r} must be an object")
    for key in data:
        if key not in allowed:
            raise ParseError(f"unknown key {section}.{key}")
    for key in sorted(_REQUIRED.get(section, set()) - set(data)):
        raise ParseError(f"missing required key {section}.{key}")


def smoothing_length(value, grid: GridSpec) -> float:
    """Accept a number or a multiple of the grid spacing written like ``"4h"``."""
    if isinstance(value, str):
        m = _H_MULTIPLE.match(value)
        if not m:
            raise ParseError(f"cannot read smoothing length {value!r}; use a number or e.g. '4h'")
        return float(m.group(1)) * grid.h
    return float(value)


def config_from_dict(data) -> tuple[ScenarioConfig, SolverConfig, GridSpec]:
    _check_keys("<top>", data, set(SECTIONS))
    for s in SECTIONS:
        if s not in data:
            raise ParseError(f"missing section {s!r}")
        _check_keys(s, data[s], {"grid": GRID_KEYS, "model": MODEL_KEYS,
                                 "solver": SOLVER_KEYS, "scenario": SCENARIO_KEYS}[s])
    g, m, so, sc = (data[s] for s in SECTIONS)
    try:
        grid = make_grid(float(g["L"]), int(g["N"]))
        eps = smoothing_length(m.get("K_epsilon", 0.0), grid)
        K = CoefficientFamily.from_name(m.get("K", "K1_pure"), int(m.get("K_sign", 1)), eps)
        V = PotentialSpec(m.get("V", "zero"), float(m.get("V_m", 0.0)), float(m.get("V_n", 0.0)))
        model = ModelSpec(float(m["sigma"]), float(m["b"]), float(m.get("mu", 0.0)), K, V)
        solver = SolverConfig(
            dt=float(so["dt"]),
            T_final=float(so["T"]),
            enforce_odd=bool(so.get("enforce_odd", False)),
            observer_stride=int(so.get("observer_stride", 1)),
            tail_abort_threshold=float(so.get("tail_abort_threshold", 1e-8)),
            keep_snapshots=bool(so.get("keep_snapshots", True)),
        )
        eps_small = sc.get("epsilon_small")
        decay = sc.get("decay_factor")
        scenario = ScenarioConfig(
            theorem_tag=sc["theorem"],
            model=model,
            initial_family=sc.get("initial_family", "odd_gaussian_pair"),
            center=float(sc.get("center", 1.0)),
            width=float(sc.get("width", 1.0)),
            epsilon_small=None if eps_small is None else float(eps_small),
            interval=tuple(float(v) for v in sc.get("interval", (-2.0, 2.0))),
            horizons=tuple(float(v) for v in sc.get("horizons", ())),
            radii=tuple(float(v) for v in sc.get("radii", ())),
            decay_factor=None if decay is None else float(decay),
        )
    except ConfigurationError as err:
        raise ValidationError(str(err)) from err
    except (TypeError, KeyError) as err:
        raise ParseError(f"malformed value: {err}") from err
    if len(scenario.interval) != 2 or not scenario.interval[0] < scenario.interval[1]:
        raise ValidationError(f"interval must be [a, b] with a < b, got {list(scenario.interval)}")
    return scenario, solver, grid


def parse_config(path) -> tuple[ScenarioConfig, SolverConfig, GridSpec]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"cannot read config {path}: {err}") from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: invalid JSON: {err}") from err
    return config_from_dict(data)


def config_to_dict(scenario: ScenarioConfig, solver: SolverConfig, grid: GridSpec) -> dict:
    m = scenario.model
    return {
        "grid": {"L": grid.L, "N": grid.N},
        "model": {
            "sigma": m.sigma, "b": m.b, "mu": m.mu,
            "K": m.K.tag, "K_sign": m.K.sign, "K_epsilon": m.K.epsilon,
            "V": m.V.tag, "V_m": m.V.m, "V_n": m.V.n,
        },
        "solver": {
            "dt": solver.dt, "T": solver.T_final, "enforce_odd": solver.enforce_odd,
            "observer_stride": solver.observer_stride,
            "tail_abort_threshold": solver.tail_abort_threshold,
            "keep_snapshots": solver.keep_snapshots,
        },
        "scenario": {
            "theorem": scenario.theorem_tag,
            "initial_family": scenario.initial_family,
            "center": scenario.center,
            "width": scenario.width,
            "epsilon_small": scenario.epsilon_small,
            "interval": list(scenario.interval),
            "horizons": list(scenario.horizons),
            "radii": list(scenario.radii),
            "decay_factor": scenario.decay_factor,
        },
    }


def _row(rec) -> list[str]:
    r = rec.rhs
    vals = (rec.t, rec.mass, rec.energy, rec.I, r.total, r.kinetic, r.phi3, r.K1, r.K2, r.V,
            rec.h1_alpha, rec.l2_local, rec.linf_local, rec.tail_mass_fraction)
    # repr gives the shortest string that round-trips
    return [repr(float(v)) for v in vals]


def write_timeseries(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMESERIES_HEADER.split(","))
            for rec in records:
                w.writerow(_row(rec))
    except OSError as err:
        raise OSError(f"cannot write time series to {path}: {err}") from err


def read_timeseries(path) -> list[dict[str, float]]:
    with Path(path).open(newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        from dataclasses import asdict
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class RunManifest:
    config: dict
    duration_s: float
    files: dict[str, str] = field(default_factory=dict)
    validity: dict = field(default_factory=dict)
    version: str = __version__

    def add_file(self, path) -> None:
        self.files[os.fspath(path)] = sha256_file(path)

    def verify(self) -> bool:
        return all(Path(p).exists() and sha256_file(p) == h for p, h in self.files.items())

    def to_dict(self) -> dict:
        return {"config": self.config, "version": self.version, "duration_s": self.duration_s,
                "files": dict(sorted(self.files.items())), "validity": self.validity}

    def write(self, path) -> None:
        write_json(self.to_dict(), path)
