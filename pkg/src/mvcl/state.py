"""Discrete nonnegative Radon measures on an interval.

The regular part is a vector of cell averages on a uniform grid; the
singular part is a finite list of Dirac atoms sitting on cell interfaces.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class InitialDataError(ValueError):
    """Initial data violating the positivity/atom hypotheses."""


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    n_cells: int

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError("grid needs x_lo < x_hi")
        if self.n_cells < 1:
            raise ValueError("grid needs at least one cell")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_lo + np.arange(self.n_cells + 1) * self.dx

    def interface_x(self, k: int) -> float:
        return self.x_lo + k * self.dx

    def nearest_interface(self, x: float) -> int:
        return int(round((x - self.x_lo) / self.dx))


@dataclass
class Atom:
    """Dirac mass on interface ``index`` of the grid (between cells index-1 and index)."""

    index: int
    position: float
    mass: float
    alive: bool = True
    extinction_time: float | None = None

    def __post_init__(self):
        if self.mass < 0:
            raise InitialDataError("atom mass must be nonnegative")
        if self.mass == 0:
            self.alive = False


@dataclass
class MeasureState:
    grid: Grid
    regular: np.ndarray
    atoms: list[Atom] = field(default_factory=list)
    time: float = 0.0

    def __post_init__(self):
        self.regular = np.asarray(self.regular, dtype=float)
        if self.regular.shape != (self.grid.n_cells,):
            raise ValueError("regular part must have one value per cell")
        if np.any(self.regular < 0):
            raise InitialDataError("regular part must be nonnegative")
        idx = [a.index for a in self.atoms]
        if idx != sorted(idx) or len(set(idx)) != len(idx):
            raise InitialDataError("atoms must sit on distinct interfaces in increasing order")
        for a in self.atoms:
            if not 0 < a.index < self.grid.n_cells:
                raise InitialDataError("atoms must sit on interior interfaces")

    def copy(self) -> "MeasureState":
        return MeasureState(
            self.grid,
            self.regular.copy(),
            [replace(a) for a in self.atoms],
            self.time,
        )

    @property
    def live_atoms(self) -> list[Atom]:
        return [a for a in self.atoms if a.alive]

    def atom_masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms], dtype=float)


def total_mass(state: MeasureState) -> float:
    """Regular mass plus the sum of atom masses."""
    return float(state.regular.sum() * state.grid.dx + sum(a.mass for a in state.atoms))


def _check_same_grid(a: MeasureState, b: MeasureState) -> None:
    if a.grid != b.grid:
        raise ValueError("states live on different grids")


def leq(a: MeasureState, b: MeasureState, tol: float = 0.0) -> bool:
    """Partial order of measures: ``b - a`` is a nonnegative measure (up to ``tol``)."""
    _check_same_grid(a, b)
    if np.any(a.regular > b.regular + tol):
        return False
    b_mass = {atom.index: atom.mass for atom in b.atoms}
    for atom in a.atoms:
        if atom.mass <= tol:
            continue
        if atom.mass > b_mass.get(atom.index, 0.0) + tol:
            return False
    return True


def _window_weights(grid: Grid, x_left: float, x_right: float) -> np.ndarray:
    edges = grid.interfaces
    lo = np.clip(edges[:-1], x_left, x_right)
    hi = np.clip(edges[1:], x_left, x_right)
    return np.maximum(hi - lo, 0.0)


def l1_distance_regular(a: MeasureState, b: MeasureState, x_left: float, x_right: float) -> float:
    """L1 distance of the regular parts over ``[x_left, x_right]``, partial cells by overlap."""
    _check_same_grid(a, b)
    return l1_window(a.regular, b.regular, a.grid, x_left, x_right)


def l1_window(u: np.ndarray, v: np.ndarray, grid: Grid, x_left: float, x_right: float) -> float:
    if x_right <= x_left:
        return 0.0
    w = _window_weights(grid, x_left, x_right)
    return float(np.sum(np.abs(u - v) * w))


# -- construction from configuration -----------------------------------------


def _average_piecewise(grid: Grid, pieces: Sequence[dict]) -> np.ndarray:
    out = np.zeros(grid.n_cells)
    for piece in pieces:
        lo = float(piece.get("from", -math.inf))
        hi = float(piece.get("to", math.inf))
        value = float(piece["value"])
        if value < 0:
            raise InitialDataError("initial density must be nonnegative")
        out += value * _window_weights(grid, lo, hi) / grid.dx
    return out


def _average_function(grid: Grid, func: Callable[[np.ndarray], np.ndarray], sub: int = 16) -> np.ndarray:
    # Gauss-Legendre points per cell
    xg, wg = np.polynomial.legendre.leggauss(sub)
    x = grid.centers[:, None] + 0.5 * grid.dx * xg[None, :]
    vals = np.asarray(func(x), dtype=float)
    if np.any(vals < 0):
        raise InitialDataError("initial density must be nonnegative")
    return 0.5 * (vals * wg[None, :]).sum(axis=1)


def from_config(
    grid: Grid,
    regular: float | Sequence[dict] | dict | Callable | None = None,
    atoms: Iterable[dict | tuple] = (),
    u_cap: float = 1e6,
) -> MeasureState:
    """Build an initial state from a declarative description.

    ``regular`` is a constant, a list of ``{"from", "to", "value"}`` pieces, a
    ``{"x": [...], "u": [...]}`` table (linear interpolation, zero outside) or
    a vectorised callable.  Atoms are ``{"x", "mass"}`` dicts or pairs; each is
    snapped to the nearest cell interface.  The regular part is capped at
    ``u_cap``.
    """
    if regular is None:
        reg = np.zeros(grid.n_cells)
    elif callable(regular):
        reg = _average_function(grid, regular)
    elif isinstance(regular, (int, float)):
        if regular < 0:
            raise InitialDataError("initial density must be nonnegative")
        reg = np.full(grid.n_cells, float(regular))
    elif isinstance(regular, dict):
        xs = np.asarray(regular["x"], dtype=float)
        us = np.asarray(regular["u"], dtype=float)
        if np.any(us < 0):
            raise InitialDataError("initial density must be nonnegative")
        reg = _average_function(grid, lambda x: np.interp(x, xs, us, left=0.0, right=0.0))
    else:
        reg = _average_piecewise(grid, regular)
    reg = np.minimum(reg, u_cap)

    parsed: list[Atom] = []
    for spec in atoms:
        if isinstance(spec, dict):
            x, c = float(spec["x"]), float(spec["mass"])
        else:
            x, c = float(spec[0]), float(spec[1])
        if c < 0:
            raise InitialDataError(f"atom mass at x={x} is negative; atom masses must satisfy c_j > 0")
        if c == 0:
            log.warning("dropping atom at x=%g with zero mass", x)
            continue
        k = grid.nearest_interface(x)
        if not 0 < k < grid.n_cells:
            raise InitialDataError(f"atom at x={x} falls outside the grid interior")
        parsed.append(Atom(k, grid.interface_x(k), c))
    parsed.sort(key=lambda a: a.index)
    seen = [a.index for a in parsed]
    if len(set(seen)) != len(seen):
        raise InitialDataError("two atoms snap to the same interface; refine the grid")
    return MeasureState(grid, reg, parsed, 0.0)


# -- snapshot output -------------------------------------------------------------


def write_snapshot_csv(state: MeasureState, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u_r"])
        for x, u in zip(state.grid.centers, state.regular):
            w.writerow([repr(float(x)), repr(float(u))])


def read_snapshot_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
