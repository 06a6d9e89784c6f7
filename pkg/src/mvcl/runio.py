"""Run directories: snapshot CSVs, atom ledger CSVs, dense trajectory and manifest.

Layout of a run directory::

    manifest.json           config echo, versions, grid, flux, file index, dt history
    snapshots/u_t*.csv      x,u_r at each requested time
    atoms.csv               t,atom_index,position,mass after every step
    atom_fluxes.csv         t,dt,atom_index,h_minus,h_plus for every step
    trajectory.npz          every stored time level (read back by ``verify``)

CSV content depends only on the configuration, so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .evolution import AtomLedger, Trajectory
from .state import write_snapshot_csv

MANIFEST = "manifest.json"
TRAJECTORY = "trajectory.npz"


def _fmt(x: float) -> str:
    return repr(float(x))


def snapshot_name(t: float) -> str:
    return f"u_t{t:.6f}.csv"


def write_ledger_csv(traj: Trajectory, path: Path) -> None:
    led = traj.ledger.as_arrays()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "atom_index", "position", "mass"])
        for t, row in zip(led["times"], led["masses"]):
            for j, m in enumerate(row):
                w.writerow([_fmt(t), j, _fmt(traj.ledger.positions[j]), _fmt(m)])


def write_flux_csv(traj: Trajectory, path: Path) -> None:
    led = traj.ledger.as_arrays()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "dt", "atom_index", "h_minus", "h_plus"])
        for t, dt, hm, hp in zip(led["step_times"], led["step_dt"], led["h_minus"], led["h_plus"]):
            for j in range(len(hm)):
                if not math.isnan(hm[j]):
                    w.writerow([_fmt(t), _fmt(dt), j, _fmt(hm[j]), _fmt(hp[j])])


def _versions() -> dict:
    out = {"mvcl": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:  # numba is optional at run time
            out[dist] = None
    return out


def _extinction_list(traj: Trajectory) -> list:
    return [None if t is None else float(t) for t in traj.extinction_times()]


def write_run(traj: Trajectory, cfg: RunConfig, out_dir: str | Path, wall_clock: float,
              backend: str) -> dict:
    out = Path(out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    index = {}
    for t in sorted(traj.snapshots):
        name = snapshot_name(t)
        write_snapshot_csv(traj.snapshots[t], out / "snapshots" / name)
        index[_fmt(t)] = f"snapshots/{name}"
    write_ledger_csv(traj, out / "atoms.csv")
    write_flux_csv(traj, out / "atom_fluxes.csv")

    led = traj.ledger.as_arrays()
    np.savez_compressed(
        out / TRAJECTORY,
        times=traj.times,
        regular=traj.regular,
        atom_mass=traj.atom_mass,
        atom_index=traj.atom_index,
        positions=traj.ledger.positions,
        initial_mass=traj.ledger.initial_mass,
        dt_history=traj.dt_history,
        mass_residuals=traj.mass_residuals,
        masses=traj.masses,
        outflow=traj.outflow,
        ledger_times=led["times"],
        ledger_masses=led["masses"],
        step_times=led["step_times"],
        step_dt=led["step_dt"],
        h_minus=led["h_minus"],
        h_plus=led["h_plus"],
        extinction=np.array([np.nan if t is None else t for t in _extinction_list(traj)]),
        snapshot_times=np.array(sorted(traj.snapshots)),
        stride=np.array(traj.stride),
    )
    manifest = {
        "config": cfg.raw,
        "versions": _versions(),
        "backend": backend,
        "grid": {"x_lo": cfg.grid.x_lo, "x_hi": cfg.grid.x_hi, "n_cells": cfg.grid.n_cells, "dx": cfg.grid.dx},
        "flux": cfg.flux.describe(),
        "solver": {
            "T": cfg.solver.end_time,
            "cfl": cfg.solver.cfl,
            "phantom_mode": cfg.solver.phantom_mode,
            "phantom_M": cfg.solver.phantom,
            "u_cap": cfg.solver.u_cap,
        },
        "snapshots": index,
        "ledger": "atoms.csv",
        "atom_fluxes": "atom_fluxes.csv",
        "trajectory": TRAJECTORY,
        "n_steps": int(len(traj.dt_history)),
        "dt_history": [float(d) for d in traj.dt_history],
        "extinction_times": _extinction_list(traj),
        "max_mass_residual": float(np.max(np.abs(traj.mass_residuals), initial=0.0)),
        "wall_clock_seconds": wall_clock,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, default=_json_default))
    return manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def load_run(run_dir: str | Path) -> tuple[RunConfig, Trajectory, dict]:
    """Rebuild the configuration and the dense trajectory of a run directory."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"{run_dir} is not a run directory (no {MANIFEST})")
    manifest = json.loads(manifest_path.read_text())
    cfg = parse_config(manifest["config"])
    data = np.load(run_dir / manifest["trajectory"])
    ext = [None if math.isnan(t) else float(t) for t in data["extinction"]]
    ledger = AtomLedger(
        positions=data["positions"],
        initial_mass=data["initial_mass"],
        times=list(data["ledger_times"]),
        masses=list(data["ledger_masses"]),
        step_times=list(data["step_times"]),
        step_dt=list(data["step_dt"]),
        h_minus=list(data["h_minus"]),
        h_plus=list(data["h_plus"]),
        extinction_time=ext,
    )
    traj = Trajectory(
        grid=cfg.grid,
        flux=cfg.flux,
        config=cfg.solver,
        times=data["times"],
        regular=data["regular"],
        atom_mass=data["atom_mass"],
        atom_index=data["atom_index"],
        ledger=ledger,
        snapshots={},
        dt_history=data["dt_history"],
        mass_residuals=data["mass_residuals"],
        masses=data["masses"],
        outflow=data["outflow"],
        stride=int(data["stride"]),
    )
    for t in data["snapshot_times"]:
        k = int(np.argmin(np.abs(traj.times - t)))
        traj.snapshots[float(t)] = traj.state_at(k)
    return cfg, traj, manifest
