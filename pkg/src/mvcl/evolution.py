"""Time marching for measure-valued solutions.

Inside each interval between live atoms the regular part follows the
first-order Godunov scheme.  A live atom splits its interface into two
one-sided boundary fluxes: the cell on its left drains into the atom with
``h_minus`` (the flux at ``s_-`` of that cell's state) and the cell on its
right is fed with ``h_plus`` (the flux at ``s_+``).  The atom mass follows
``C' = h_minus - h_plus``; when it reaches zero the step is cut at that
instant, the atom is retired and its interface reverts to the Godunov flux.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .flux import FluxModel
from .state import Atom, MeasureState, total_mass

log = logging.getLogger(__name__)

_TIME_EPS = 1e-12


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    end_time: float
    cfl: float = 0.45
    phantom: float | None = None  # None: exact tail fluxes; M: boundary datum M
    u_cap: float = 1e6
    snapshot_times: tuple[float, ...] = ()
    store_every: int = 1
    backend: str | None = None

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.end_time < 0:
            raise ValueError("end_time must be nonnegative")
        if self.phantom is not None and not self.phantom > self.u_cap:
            raise ValueError("finite phantom datum M must exceed u_cap")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")

    @property
    def phantom_mode(self) -> str:
        return "exact_tail" if self.phantom is None else "finite_phantom"


@dataclass
class StepRecord:
    t: float
    dt: float
    atom_index: np.ndarray  # positions in state.atoms of atoms alive during the step
    h_minus: np.ndarray
    h_plus: np.ndarray
    outflow: float  # flux out at x_hi minus flux in at x_lo
    mass_residual: float
    mass_before: float
    extinct: list[int] = field(default_factory=list)


@dataclass
class AtomLedger:
    """Per-atom history: mass at every recorded time, trace fluxes per step."""

    positions: np.ndarray
    initial_mass: np.ndarray
    times: list[float] = field(default_factory=list)
    masses: list[np.ndarray] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)
    step_dt: list[float] = field(default_factory=list)
    h_minus: list[np.ndarray] = field(default_factory=list)
    h_plus: list[np.ndarray] = field(default_factory=list)
    extinction_time: list[float | None] = field(default_factory=list)

    def as_arrays(self) -> dict[str, np.ndarray]:
        p = len(self.positions)
        return {
            "times": np.asarray(self.times),
            "masses": np.asarray(self.masses, dtype=float).reshape(len(self.times), p),
            "step_times": np.asarray(self.step_times),
            "step_dt": np.asarray(self.step_dt),
            "h_minus": np.asarray(self.h_minus, dtype=float).reshape(len(self.step_times), p),
            "h_plus": np.asarray(self.h_plus, dtype=float).reshape(len(self.step_times), p),
        }

    def decay_rates(self) -> np.ndarray:
        a = self.as_arrays()
        return a["h_plus"] - a["h_minus"]


@dataclass
class Trajectory:
    grid: object
    flux: FluxModel
    config: SolverConfig
    times: np.ndarray
    regular: np.ndarray  # (n_stored, n_cells)
    atom_mass: np.ndarray  # (n_stored, n_atoms)
    atom_index: np.ndarray  # interface index per atom
    ledger: AtomLedger
    snapshots: dict[float, MeasureState]
    dt_history: np.ndarray
    mass_residuals: np.ndarray
    masses: np.ndarray  # total mass before each step
    outflow: np.ndarray
    stride: int

    @property
    def initial(self) -> MeasureState:
        return self.snapshots[min(self.snapshots)]

    @property
    def final(self) -> MeasureState:
        return self.snapshots[max(self.snapshots)]

    @property
    def atom_positions(self) -> np.ndarray:
        return self.ledger.positions

    def extinction_times(self) -> list[float | None]:
        return list(self.ledger.extinction_time)

    def state_at(self, k: int) -> MeasureState:
        g = self.grid
        atoms = [
            Atom(int(i), float(x), float(m))
            for i, x, m in zip(self.atom_index, self.ledger.positions, self.atom_mass[k])
        ]
        return MeasureState(g, np.maximum(self.regular[k], 0.0), atoms, float(self.times[k]))


# -- single-step pieces ----------------------------------------------------------


def _live(state: MeasureState) -> np.ndarray:
    return np.array([j for j, a in enumerate(state.atoms) if a.alive], dtype=int)


def atom_boundary_fluxes(
    state: MeasureState,
    j: int,
    flux: FluxModel,
    config: SolverConfig,
    tables: kernels.FluxTables | None = None,
) -> tuple[float, float]:
    """``(h_minus, h_plus)`` at live atom ``j`` from its two adjacent cells."""
    atom = state.atoms[j]
    if not atom.alive:
        raise ValueError(f"atom {j} is extinct; its interface uses the ordinary flux")
    tables = tables or kernels.tables_for(flux)
    _, atom_fn, _ = kernels.get_backend(config.backend)
    u = state.regular
    ul = np.array([u[atom.index - 1]])
    ur = np.array([u[atom.index]])
    m = config.phantom or 0.0
    phi_m = flux.eval(m) if config.phantom else 0.0
    hm, hp = atom_fn(ul, flux.eval_unchecked(ul), ur, flux.eval_unchecked(ur), tables, m, phi_m)
    return float(hm[0]), float(hp[0])


def cfl_dt(
    state: MeasureState,
    config: SolverConfig,
    flux: FluxModel,
    decay_rates: np.ndarray | None = None,
    next_stop: float | None = None,
) -> tuple[float, int | None]:
    """Largest admissible step, cut to the next stop time or atom extinction.

    Returns ``(dt, j)`` where ``j`` is the atom (index into ``state.atoms``)
    whose extinction ends the step, or None.
    """
    dt = config.cfl * state.grid.dx / flux.lipschitz_bound
    if next_stop is not None:
        dt = min(dt, max(next_stop - state.time, 0.0))
    hit = None
    if decay_rates is not None:
        live = _live(state)
        for j, rate in zip(live, decay_rates):
            if rate > 0:
                t_ext = state.atoms[j].mass / rate
                if t_ext <= dt:
                    dt, hit = t_ext, int(j)
    return dt, hit


def merge_on_extinction(state: MeasureState, j: int, time: float | None = None) -> MeasureState:
    """Retire atom ``j``; its interface becomes an ordinary Godunov interface."""
    atom = state.atoms[j]
    atom.mass = 0.0
    if atom.alive:
        atom.alive = False
        atom.extinction_time = state.time if time is None else time
    return state


def step(
    state: MeasureState,
    flux: FluxModel,
    config: SolverConfig,
    dt: float | None = None,
    next_stop: float | None = None,
    tables: kernels.FluxTables | None = None,
) -> tuple[MeasureState, list[StepRecord]]:
    """Advance ``state`` by one step (``dt`` from :func:`cfl_dt` unless given).

    A prescribed ``dt`` that overshoots an atom extinction is split at the
    extinction instant, so more than one record may come back.
    """
    tables = tables or kernels.tables_for(flux)
    iface_fn, atom_fn, update_fn = kernels.get_backend(config.backend)
    grid = state.grid
    u = state.regular
    phi_u = flux.eval_unchecked(u)
    f = iface_fn(u, phi_u, tables)

    live = _live(state)
    if live.size:
        k = np.array([state.atoms[j].index for j in live])
        m = config.phantom or 0.0
        phi_m = flux.eval(m) if config.phantom else 0.0
        h_minus, h_plus = atom_fn(u[k - 1], phi_u[k - 1], u[k], phi_u[k], tables, m, phi_m)
        if config.phantom is None and np.any(h_plus < h_minus - 1e-14):
            raise RuntimeError("atom gains mass: h_plus < h_minus")
    else:
        k = np.empty(0, dtype=int)
        h_minus = h_plus = np.empty(0)
    rates = h_plus - h_minus

    dt_max = config.cfl * grid.dx / flux.lipschitz_bound
    if dt is None:
        dt, hit = cfl_dt(state, config, flux, rates, next_stop)
    else:
        if dt > grid.dx / flux.lipschitz_bound * (1 + 1e-12) or dt > dt_max * (1 + 1e-12):
            raise CFLError(f"dt={dt:g} violates the CFL bound {dt_max:g}")
        dt_ext, hit = cfl_dt(state, config, flux, rates, None)
        if hit is not None and dt_ext < dt * (1 - 1e-14):
            first, recs1 = step(state, flux, config, dt_ext, tables=tables)
            rest, recs2 = step(first, flux, config, dt - dt_ext, tables=tables)
            return rest, recs1 + recs2
        if hit is not None and dt_ext > dt:
            hit = None

    mass_before = total_mass(state)
    f_out = f.copy()
    f_in = f.copy()
    f_out[k] = h_minus
    f_in[k] = h_plus
    lam = dt / grid.dx
    u_new = update_fn(u, f_out, f_in, lam)
    scale = max(1.0, float(np.max(np.abs(u))))
    if np.any(u_new < -1e-12 * scale):
        raise RuntimeError("negative cell average: monotonicity lost")
    u_new = np.maximum(u_new, 0.0)

    new = MeasureState.__new__(MeasureState)
    new.grid = grid
    new.regular = u_new
    new.atoms = [Atom(a.index, a.position, a.mass, a.alive, a.extinction_time) for a in state.atoms]
    new.time = state.time + dt
    extinct = []
    for pos, j in enumerate(live):
        atom = new.atoms[j]
        c = atom.mass + dt * (h_minus[pos] - h_plus[pos])
        if hit == j or c <= 1e-14 * max(1.0, atom.mass):
            merge_on_extinction(new, int(j), new.time)
            extinct.append(int(j))
        else:
            atom.mass = c

    outflow = float(f[-1] - f[0])
    residual = (total_mass(new) - mass_before) + dt * outflow
    rec = StepRecord(state.time, dt, live, h_minus, h_plus, outflow, residual, mass_before, extinct)
    return new, [rec]


def max_principle_violation(u_old: np.ndarray, u_new: np.ndarray, atom_interfaces=()) -> float:
    """Worst excursion of ``u_new`` outside its neighbours' range, atom-adjacent cells skipped."""
    pad = np.concatenate([[u_old[0]], u_old, [u_old[-1]]])
    lo = np.minimum(np.minimum(pad[:-2], pad[1:-1]), pad[2:])
    hi = np.maximum(np.maximum(pad[:-2], pad[1:-1]), pad[2:])
    excess = np.maximum(u_new - hi, 0.0) + np.maximum(lo - u_new, 0.0)
    for k in atom_interfaces:
        excess[max(k - 1, 0)] = 0.0
        if k < len(excess):
            excess[k] = 0.0
    return float(excess.max()) if excess.size else 0.0


# -- driver ------------------------------------------------------------------------


def run(initial: MeasureState, flux: FluxModel, config: SolverConfig) -> Trajectory:
    """Evolve ``initial`` to ``config.end_time``, recording every step."""
    tables = kernels.tables_for(flux)
    T = float(config.end_time)
    stops = sorted({float(t) for t in config.snapshot_times if 0 <= t <= T} | {0.0, T})
    state = initial.copy()
    state.time = 0.0
    p = len(state.atoms)
    ledger = AtomLedger(
        positions=np.array([a.position for a in state.atoms]),
        initial_mass=state.atom_masses(),
        extinction_time=[None if a.alive else 0.0 for a in state.atoms],
    )
    ledger.times.append(0.0)
    ledger.masses.append(state.atom_masses())

    times = [0.0]
    regular = [state.regular.copy()]
    atom_mass = [state.atom_masses()]
    snapshots: dict[float, MeasureState] = {0.0: state.copy()}
    dts, residuals, masses, outflows = [], [], [], []
    stop_i = 1
    n_steps = 0

    while stop_i < len(stops):
        target = stops[stop_i]
        if state.time >= target - _TIME_EPS * max(1.0, target):
            snap = state.copy()
            snap.time = target
            snapshots[target] = snap
            stop_i += 1
            continue
        state, recs = step(state, flux, config, next_stop=target, tables=tables)
        for rec in recs:
            n_steps += 1
            dts.append(rec.dt)
            residuals.append(rec.mass_residual)
            masses.append(rec.mass_before)
            outflows.append(rec.outflow)
            hm = np.full(p, np.nan)
            hp = np.full(p, np.nan)
            hm[rec.atom_index] = rec.h_minus
            hp[rec.atom_index] = rec.h_plus
            ledger.step_times.append(rec.t)
            ledger.step_dt.append(rec.dt)
            ledger.h_minus.append(hm)
            ledger.h_plus.append(hp)
            for j in rec.extinct:
                ledger.extinction_time[j] = rec.t + rec.dt
                log.info("atom %d extinct at t=%.6g", j, rec.t + rec.dt)
        ledger.times.append(state.time)
        ledger.masses.append(state.atom_masses())
        if n_steps % config.store_every == 0 or state.time >= target - _TIME_EPS * max(1.0, target):
            times.append(state.time)
            regular.append(state.regular.copy())
            atom_mass.append(state.atom_masses())

    return Trajectory(
        grid=initial.grid,
        flux=flux,
        config=config,
        times=np.asarray(times),
        regular=np.asarray(regular),
        atom_mass=np.asarray(atom_mass).reshape(len(times), p),
        atom_index=np.array([a.index for a in initial.atoms], dtype=int),
        ledger=ledger,
        snapshots=snapshots,
        dt_history=np.asarray(dts),
        mass_residuals=np.asarray(residuals),
        masses=np.asarray(masses),
        outflow=np.asarray(outflows),
        stride=config.store_every,
    )


def run_synchronized(initials, flux: FluxModel, config: SolverConfig, max_rounds: int = 8) -> list[Trajectory]:
    """Run several initial states on one common sequence of time steps.

    Each run stops at every extinction time of every other run, so the step
    sizes coincide and stored time levels can be compared one to one.
    """
    base = tuple(config.snapshot_times)
    extra: set[float] = set()
    for _ in range(max_rounds):
        cfg = replace(config, snapshot_times=tuple(sorted(set(base) | extra)))
        trajs = [run(u0, flux, cfg) for u0 in initials]
        found = {float(t) for tr in trajs for t in tr.extinction_times() if t is not None and t > 0}
        if found <= extra:
            return trajs
        extra |= found
    raise RuntimeError("extinction times did not settle on a common step sequence")
