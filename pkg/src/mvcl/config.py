"""TOML run configuration: parsing, validation and presets.

A configuration has the sections ``[grid]``, ``[flux]``, ``[initial]``,
``[solver]``, ``[verify]`` and ``[output]``.  Every validation failure is a
:class:`ConfigError`, which the command line maps to exit status 2.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .evolution import SolverConfig
from .flux import BUILTINS, AsymptoticLimit, FluxModel, OscillatingTail, builtin, from_table
from .state import Grid, InitialDataError, MeasureState, from_config

SECTIONS = ("grid", "flux", "initial", "solver", "verify", "output")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class RunConfig:
    grid: Grid
    flux: FluxModel
    solver: SolverConfig
    initial: dict
    verify: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    source: Path | None = None

    def initial_state(self) -> MeasureState:
        return build_initial(self.grid, self.initial, self.solver.u_cap)

    def partner(self) -> "RunConfig | None":
        """Configuration named by ``[verify] partner`` (path relative to this file)."""
        name = self.verify.get("partner")
        if not name:
            return None
        base = self.source.parent if self.source else Path.cwd()
        path = Path(name)
        if not path.is_absolute():
            path = base / path
        if not path.exists() and self.source is not None and _is_preset_path(self.source):
            path = preset_path(Path(name).stem)
        other = load_config(path)
        if other.grid != self.grid:
            raise ConfigError("partner configuration must use the same grid")
        if other.flux.describe() != self.flux.describe():
            raise ConfigError("partner configuration must use the same flux")
        return other


def _section(raw: dict, name: str, required: bool = True) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _number(sec: dict, key: str, where: str, default: Any = None, positive: bool = False) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"[{where}] needs '{key}'")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"[{where}] '{key}' must be a finite number")
    if positive and v <= 0:
        raise ConfigError(f"[{where}] '{key}' must be positive")
    return float(v)


def _parse_tail(sec: dict) -> AsymptoticLimit | OscillatingTail:
    tail = sec.get("tail")
    if not isinstance(tail, dict):
        raise ConfigError("[flux] table fluxes need a [flux.tail] block describing phi at infinity")
    kind = tail.get("kind")
    if kind == "asymptotic":
        return AsymptoticLimit(_number(tail, "limit", "flux.tail"), _number(tail, "monotone_from", "flux.tail"))
    if kind == "oscillating":
        lo = _number(tail, "liminf", "flux.tail")
        hi = _number(tail, "limsup", "flux.tail")
        if lo > hi:
            raise ConfigError("[flux.tail] liminf exceeds limsup")
        return OscillatingTail(lo, hi, _number(tail, "envelope_from", "flux.tail"))
    raise ConfigError("[flux.tail] 'kind' must be 'asymptotic' or 'oscillating'")


def parse_flux(sec: dict) -> FluxModel:
    name = sec.get("name")
    if not isinstance(name, str):
        raise ConfigError("[flux] needs a 'name'")
    try:
        if name == "table":
            return from_table(
                sec.get("u", []),
                sec.get("phi", []),
                _number(sec, "lipschitz_bound", "flux", positive=True),
                _number(sec, "sup_bound", "flux", positive=True),
                _parse_tail(sec),
            )
        if name not in BUILTINS:
            raise ConfigError(f"[flux] unknown name {name!r}; choose from {sorted(BUILTINS)} or 'table'")
        params = {k: v for k, v in sec.items() if k != "name"}
        return builtin(name, **params)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[flux] {exc}") from exc


def parse_solver(sec: dict) -> SolverConfig:
    mode = sec.get("phantom_mode", "exact_tail")
    u_cap = _number(sec, "u_cap", "solver", 1e6, positive=True)
    if mode == "exact_tail":
        phantom = None
    elif mode == "finite_phantom":
        phantom = _number(sec, "phantom_M", "solver")
    else:
        raise ConfigError("[solver] phantom_mode must be 'exact_tail' or 'finite_phantom'")
    snaps = sec.get("snapshot_times", [])
    if not isinstance(snaps, list) or not all(isinstance(t, (int, float)) for t in snaps):
        raise ConfigError("[solver] snapshot_times must be a list of numbers")
    backend = sec.get("backend")
    if backend not in (None, "numba", "numpy"):
        raise ConfigError("[solver] backend must be 'numba' or 'numpy'")
    try:
        return SolverConfig(
            end_time=_number(sec, "T", "solver"),
            cfl=_number(sec, "cfl", "solver", 0.45),
            phantom=phantom,
            u_cap=u_cap,
            snapshot_times=tuple(float(t) for t in snaps),
            store_every=int(sec.get("store_every", 1)),
            backend=backend,
        )
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc


def parse_grid(sec: dict) -> Grid:
    n = sec.get("n_cells")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("[grid] 'n_cells' must be an integer")
    try:
        return Grid(_number(sec, "x_lo", "grid"), _number(sec, "x_hi", "grid"), n)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from exc


def build_initial(grid: Grid, sec: dict, u_cap: float = 1e6) -> MeasureState:
    """Initial measure from an ``[initial]`` table (``regular``/``pieces``/``table`` plus ``atoms``)."""
    given = [k for k in ("regular", "pieces", "table") if k in sec]
    if len(given) > 1:
        raise ConfigError("[initial] give only one of 'regular', 'pieces', 'table'")
    regular: Any = None
    if "regular" in sec:
        regular = sec["regular"]
        if isinstance(regular, bool) or not isinstance(regular, (int, float)):
            raise ConfigError("[initial] 'regular' must be a number")
    elif "pieces" in sec:
        regular = sec["pieces"]
        if not isinstance(regular, list) or not all(isinstance(p, dict) and "value" in p for p in regular):
            raise ConfigError("[initial] pieces need a 'value' (and optional 'from', 'to')")
    elif "table" in sec:
        regular = sec["table"]
        if not isinstance(regular, dict) or "x" not in regular or "u" not in regular:
            raise ConfigError("[initial.table] needs 'x' and 'u' arrays")
    atoms = sec.get("atoms", [])
    if not isinstance(atoms, list) or not all(isinstance(a, dict) and {"x", "mass"} <= set(a) for a in atoms):
        raise ConfigError("[initial] atoms must be a list of {x, mass} tables")
    try:
        return from_config(grid, regular, atoms, u_cap=u_cap)
    except InitialDataError as exc:
        raise ConfigError(f"(H_0) violated: {exc}") from exc
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"[initial] {exc}") from exc


def parse_config(raw: dict, source: Path | None = None) -> RunConfig:
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    grid = parse_grid(_section(raw, "grid"))
    flux = parse_flux(_section(raw, "flux"))
    solver = parse_solver(_section(raw, "solver"))
    initial = _section(raw, "initial")
    cfg = RunConfig(grid, flux, solver, initial, _section(raw, "verify", False),
                    _section(raw, "output", False), raw, source)
    cfg.initial_state()  # validate the data now
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, path)


# -- presets -----------------------------------------------------------------------


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("mvcl.presets").iterdir() if p.name.endswith(".toml"))


def preset_path(name: str) -> Path:
    path = Path(str(resources.files("mvcl.presets").joinpath(f"{name}.toml")))
    if not path.exists():
        raise ConfigError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return path


def _is_preset_path(path: Path) -> bool:
    return path.parent == Path(str(resources.files("mvcl.presets")))


def load_preset(name: str, **overrides) -> RunConfig:
    """Load a shipped preset; ``overrides`` map ``"section.key"`` to replacement values."""
    with preset_path(name).open("rb") as fh:
        raw = tomllib.load(fh)
    for dotted, value in overrides.items():
        sec, key = dotted.split(".", 1)
        raw.setdefault(sec, {})[key] = value
    return parse_config(raw, preset_path(name))
