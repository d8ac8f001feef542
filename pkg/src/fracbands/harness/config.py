"""Sweep configuration: JSON schema, validation and defaults."""
from dataclasses import dataclass, replace
import itertools
import json
from pathlib import Path

from ..core import DEFAULT_GRID_POINTS, PotentialSpec
from ..exceptions import ConfigurationError, FracBandsError, SchemaError
from ..solver import SolverSettings
from ..validation import check_grid_size, check_order

TOP_LEVEL_KEYS = {"q_values", "geometries", "solver", "n_k", "n_bands", "output_dir", "seed"}
REQUIRED_KEYS = {"q_values", "geometries"}
SOLVER_KEYS = set(SolverSettings.__dataclass_fields__) - {"seed"} | {"n_points"}


@dataclass(frozen=True)
class SweepPlan:
    q_values: tuple
    geometries: tuple
    solver: SolverSettings = SolverSettings()
    n_points: int = DEFAULT_GRID_POINTS
    n_k: int = 25
    n_bands: int = 2
    output_dir: Path = Path("runs")
    seed: int = 0

    def __post_init__(self):
        if not self.q_values:
            raise ConfigurationError("q_values must not be empty")
        if not self.geometries:
            raise ConfigurationError("geometries must not be empty")
        for q in self.q_values:
            check_order(q)
        for geo in self.geometries:
            PotentialSpec(*geo)
        check_grid_size(self.n_points)
        if self.n_k < 3 or self.n_k % 2 == 0:
            raise ConfigurationError("n_k must be odd and >= 3")
        if self.n_bands < 1:
            raise ConfigurationError("n_bands must be >= 1")
        object.__setattr__(self, "solver", replace(self.solver, seed=self.seed))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def cells(self):
        """(index, q, (v0, l, w)) for every cell, geometry-major."""
        pairs = itertools.product(self.geometries, self.q_values)
        return [(i, q, geo) for i, (geo, q) in enumerate(pairs)]


def _expect(value, kind, path):
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise SchemaError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", path)
    return value


def _number_list(value, path):
    _expect(value, list, path)
    return [float(_expect(v, float, f"{path}[{i}]")) for i, v in enumerate(value)]


def _parse_geometries(raw):
    _expect(raw, dict, "geometries")
    if "tuples" in raw:
        extra = set(raw) - {"tuples"}
        if extra:
            raise SchemaError(f"unknown keys {sorted(extra)}", "geometries")
        rows = _expect(raw["tuples"], list, "geometries.tuples")
        out = []
        for i, row in enumerate(rows):
            vals = _number_list(row, f"geometries.tuples[{i}]")
            if len(vals) != 3:
                raise SchemaError("each tuple must be [v0, l, w]", f"geometries.tuples[{i}]")
            out.append(tuple(vals))
        return tuple(out)
    allowed = {"v0", "l", "w", "mode"}
    extra = set(raw) - allowed
    if extra:
        raise SchemaError(f"unknown keys {sorted(extra)}", "geometries")
    missing = {"v0", "l", "w"} - set(raw)
    if missing:
        raise SchemaError(f"missing keys {sorted(missing)}", "geometries")
    mode = raw.get("mode", "product")
    if mode != "product":
        raise SchemaError(f"unknown mode {mode!r}", "geometries.mode")
    lists = [_number_list(raw[name], f"geometries.{name}") for name in ("v0", "l", "w")]
    return tuple(itertools.product(*lists))


def _parse_solver(raw):
    _expect(raw, dict, "solver")
    extra = set(raw) - SOLVER_KEYS
    if extra:
        raise SchemaError(f"unknown keys {sorted(extra)}", "solver")
    kwargs = dict(raw)
    n_points = _expect(kwargs.pop("n_points", DEFAULT_GRID_POINTS), int, "solver.n_points")
    for name, value in kwargs.items():
        kind = str if name == "scheme" else int if name == "max_iterations" else float
        _expect(value, kind, f"solver.{name}")
    return SolverSettings(**kwargs), n_points


def parse_config(data, base_dir=None):
    """Build a :class:`SweepPlan` from an already-decoded JSON object."""
    _expect(data, dict, "<root>")
    extra = set(data) - TOP_LEVEL_KEYS
    if extra:
        raise SchemaError(f"unknown keys {sorted(extra)}", "<root>")
    missing = REQUIRED_KEYS - set(data)
    if missing:
        raise SchemaError(f"missing keys {sorted(missing)}", "<root>")
    q_values = tuple(_number_list(data["q_values"], "q_values"))
    geometries = _parse_geometries(data["geometries"])
    solver, n_points = _parse_solver(data.get("solver", {}))
    output_dir = Path(_expect(data.get("output_dir", "runs"), str, "output_dir"))
    if base_dir is not None and not output_dir.is_absolute():
        output_dir = Path(base_dir) / output_dir
    try:
        return SweepPlan(q_values=q_values, geometries=geometries, solver=solver,
                         n_points=n_points,
                         n_k=_expect(data.get("n_k", 25), int, "n_k"),
                         n_bands=_expect(data.get("n_bands", 2), int, "n_bands"),
                         output_dir=output_dir,
                         seed=_expect(data.get("seed", 0), int, "seed"))
    except SchemaError:
        raise
    except FracBandsError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path):
    """Read and validate a sweep configuration file.

    Relative ``output_dir`` values resolve against the config file's directory.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", str(path)) from exc
    return parse_config(data, base_dir=path.parent)
