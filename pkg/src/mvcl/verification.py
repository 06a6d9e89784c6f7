"""Residual checks of computed trajectories against the defining inequalities.

Every check is a pure function of one or two :class:`~mvcl.evolution.Trajectory`
objects.  Space integrals use the midpoint rule on cells, time integrals the
trapezoid rule over stored steps.  Test functions are products
``alpha(x) * beta(t)`` of C^1 bumps ``(1 - r**2)**2``.  Derivatives of the
test function enter as difference quotients across a cell (in x) or a step
(in t), so that the weak form of a constant state telescopes to zero exactly.

Entropy-type residuals are evaluated through the split
``|u - k| = (k - u) + 2 (u - k)_+``: the terms linear in the constant ``k``
integrate to zero exactly and are dropped, which keeps the quadrature stable
for ``k`` up to the state cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .evolution import Trajectory
from .state import l1_window, leq

# Frozen calibration constants (see README, "Verification thresholds").
# C_WEAK: twice the worst weak-form ratio of the example runs at N = 400.
# C_TRACE: sqrt(2.5 / 0.1), the exact near-atom profile of the example read
# in the third cell for windows starting at t = 0.1.
C_WEAK = 0.025
C_TRACE = 5.0
CONTRACTION_SLACK = 1e-12


class VerificationError(ValueError):
    """Inputs on which a check is not defined."""


def _bump(r):
    r = np.asarray(r, dtype=float)
    return np.where(np.abs(r) < 1, (1 - r * r) ** 2, 0.0)


def _bump_d(r):
    r = np.asarray(r, dtype=float)
    return np.where(np.abs(r) < 1, -4 * r * (1 - r * r), 0.0)


_BUMP_D_MAX = 8.0 / (3.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class TestFunctionFamily:
    """Tensor products ``alpha_i(x) beta_j(t)`` on a lattice of centres."""

    x_centers: tuple[float, ...]
    x_width: float
    t_centers: tuple[float, ...]
    t_width: float

    __test__ = False  # not a pytest class

    @classmethod
    def default(cls, x_lo: float, x_hi: float, t_end: float, n: int = 5) -> "TestFunctionFamily":
        wx = (x_hi - x_lo) / 4.0
        wt = t_end / 4.0
        xc = np.linspace(x_lo + wx, x_hi - wx, n)
        tc = np.linspace(0.0, t_end - wt, n)
        return cls(tuple(map(float, xc)), wx, tuple(map(float, tc)), wt)

    def alpha(self, x):
        x = np.asarray(x, dtype=float)
        return _bump((x[..., None] - np.asarray(self.x_centers)) / self.x_width)

    def alpha_x(self, x):
        x = np.asarray(x, dtype=float)
        return _bump_d((x[..., None] - np.asarray(self.x_centers)) / self.x_width) / self.x_width

    def beta(self, t):
        t = np.asarray(t, dtype=float)
        return _bump((t[..., None] - np.asarray(self.t_centers)) / self.t_width)

    def beta_t(self, t):
        t = np.asarray(t, dtype=float)
        return _bump_d((t[..., None] - np.asarray(self.t_centers)) / self.t_width) / self.t_width

    @property
    def c1_norm(self) -> float:
        return 1.0 + _BUMP_D_MAX / self.x_width + _BUMP_D_MAX / self.t_width

    def label(self, i: int, j: int) -> dict:
        return {"x_center": self.x_centers[i], "t_center": self.t_centers[j]}


@dataclass
class CheckResult:
    name: str
    worst: float
    threshold: float
    passed: bool
    location: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)

    def summary(self) -> str:
        lines = [f"{'check':<34} {'worst':>12} {'threshold':>12}  result"]
        for c in self.checks:
            lines.append(
                f"{c.name:<34} {c.worst:>12.4e} {c.threshold:>12.4e}  {'PASS' if c.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


# -- quadrature core ---------------------------------------------------------------


def _time_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _check_stride(traj: Trajectory) -> None:
    if traj.stride > 1:
        raise VerificationError("trajectory must store every step for time quadrature")
    if len(traj.times) < 2:
        raise VerificationError("trajectory has a single time level")


class _Quadrature:
    """Shared arrays for all residuals of one trajectory and one family."""

    def __init__(self, traj: Trajectory, family: TestFunctionFamily):
        _check_stride(traj)
        self.traj = traj
        self.family = family
        g = traj.grid
        self.dx = g.dx
        self.alpha = family.alpha(g.centers)  # (n, nx)
        a_edges = family.alpha(g.interfaces)
        self.alpha_x = np.diff(a_edges, axis=0) / g.dx
        t = traj.times
        w = _time_weights(t)
        beta = family.beta(t)
        self.wb = w[:, None] * beta  # (K, nt)
        # trapezoid average of g over a step times the step increment of beta
        db = np.diff(beta, axis=0)
        self.wbt = np.zeros_like(beta)
        self.wbt[:-1] += 0.5 * db
        self.wbt[1:] += 0.5 * db
        self.beta0 = family.beta(np.array([0.0]))[0]  # (nt,)
        self.U = traj.regular
        self.PhiU = traj.flux.eval_unchecked(self.U)
        self.u0 = self.U[0]
        pos = traj.atom_positions
        self.alpha_atoms = family.alpha(pos) if len(pos) else np.zeros((0, len(family.x_centers)))

    def regular_term(self, dens, flux_dens, init_dens) -> np.ndarray:
        """sum over space-time of dens*zeta_t + flux_dens*zeta_x plus the t=0 term; (nx, nt)."""
        a = (dens @ self.alpha) * self.dx  # (K, nx)
        b = (flux_dens @ self.alpha_x) * self.dx
        out = a.T @ self.wbt + b.T @ self.wb
        out += np.outer((init_dens @ self.alpha) * self.dx, self.beta0)
        return out

    def weak_regular(self) -> np.ndarray:
        return self.regular_term(self.U, self.PhiU, self.u0)

    def atom_term(self) -> np.ndarray:
        if self.alpha_atoms.shape[0] == 0:
            return np.zeros((self.alpha.shape[1], self.wb.shape[1]))
        m = self.traj.atom_mass  # (K, p)
        a = m @ self.alpha_atoms  # (K, nx)
        out = a.T @ self.wbt
        out += np.outer(m[0] @ self.alpha_atoms, self.beta0)
        return out

    def positive_part(self, k: float) -> np.ndarray:
        phik = float(self.traj.flux.eval(k))
        pos = np.maximum(self.U - k, 0.0)
        flux = np.where(self.U > k, self.PhiU - phik, 0.0)
        return self.regular_term(pos, flux, np.maximum(self.u0 - k, 0.0))


def weak_tolerance(traj: Trajectory, family: TestFunctionFamily, c_weak: float = C_WEAK) -> float:
    dt = float(np.max(traj.dt_history)) if len(traj.dt_history) else 0.0
    mass = float(traj.masses[0]) if len(traj.masses) else 1.0
    return c_weak * (traj.grid.dx + dt) * family.c1_norm * max(1.0, mass)


def default_k_grid(traj: Trajectory, n: int = 16) -> np.ndarray:
    u_cap = traj.config.u_cap
    ks = np.concatenate([[0.0], np.logspace(-3, math.log10(u_cap), n - 1), traj.flux.critical_points()])
    return np.unique(ks)


def _argworst(arr: np.ndarray, mode: str):
    idx = np.unravel_index(np.argmax(arr) if mode == "max" else np.argmin(arr), arr.shape)
    return idx, float(arr[idx])


# -- public checks ------------------------------------------------------------------


def weak_form_residuals(traj: Trajectory, family: TestFunctionFamily) -> np.ndarray:
    q = _Quadrature(traj, family)
    return q.weak_regular() + q.atom_term()


def entropy_residuals(traj: Trajectory, family: TestFunctionFamily, k_grid) -> dict[str, np.ndarray]:
    """Residuals (left side minus right side) of the entropy, sub- and supersolution inequalities.

    Arrays have shape ``(len(k_grid), nx, nt)``; admissible solutions give
    values ``>= 0`` up to discretisation error.
    """
    q = _Quadrature(traj, family)
    w_reg = q.weak_regular()
    atoms = q.atom_term()
    pk = np.stack([q.positive_part(float(k)) for k in k_grid])
    return {
        "entropy": 2.0 * pk - w_reg + atoms,
        "sub": pk + atoms,
        "super": pk - w_reg,
    }


def check_weak_form(traj: Trajectory, family: TestFunctionFamily | None = None,
                    c_weak: float = C_WEAK) -> CheckResult:
    family = family or TestFunctionFamily.default(traj.grid.x_lo, traj.grid.x_hi, float(traj.times[-1]))
    res = np.abs(weak_form_residuals(traj, family))
    tol = weak_tolerance(traj, family, c_weak)
    (i, j), worst = _argworst(res, "max")
    return CheckResult("weak_form", worst, tol, worst <= tol, family.label(i, j))


def check_entropy(traj: Trajectory, family: TestFunctionFamily | None = None, k_grid=None,
                  c_weak: float = C_WEAK) -> list[CheckResult]:
    family = family or TestFunctionFamily.default(traj.grid.x_lo, traj.grid.x_hi, float(traj.times[-1]))
    k_grid = default_k_grid(traj) if k_grid is None else np.asarray(k_grid, dtype=float)
    tol = weak_tolerance(traj, family, c_weak)
    out = []
    for name, arr in entropy_residuals(traj, family, k_grid).items():
        (kk, i, j), lowest = _argworst(arr, "min")
        violation = max(-lowest, 0.0)
        loc = family.label(i, j) | {"k": float(k_grid[kk])}
        out.append(CheckResult(f"entropy_{name}" if name != "entropy" else "entropy", violation, tol,
                               violation <= tol, loc, {"min_residual": lowest}))
    return out


def _trace_integrals(traj: Trajectory, cells: np.ndarray, k_grid, beta_w):
    U = traj.regular[:, cells]  # (K, m)
    phi = traj.flux.eval_unchecked(U)
    out = np.empty((len(k_grid), len(cells)))
    for a, k in enumerate(k_grid):
        phik = float(traj.flux.eval(float(k)))
        integrand = np.where(U < k, -(phi - phik), 0.0)  # H_-(u - k)[phi(u) - phi(k)]
        out[a] = beta_w @ integrand
    return out


def trace_tolerance(traj: Trajectory, beta_integral: float, c_trace: float = C_TRACE) -> float:
    return c_trace * math.sqrt(traj.grid.dx) * beta_integral


def check_compatibility(traj: Trajectory, atom: int, window: tuple[float, float], k_grid=None,
                        n_cells: int = 3, c_trace: float = C_TRACE) -> CheckResult:
    """One-sided flux-trace sign conditions at a live atom over a time window."""
    _check_stride(traj)
    t0, t1 = window
    t_ext = traj.ledger.extinction_time[atom]
    if not 0 <= t0 < t1:
        raise VerificationError("window must satisfy 0 <= t0 < t1")
    if (t_ext is not None and t1 >= t_ext) or t1 > traj.times[-1] or traj.ledger.initial_mass[atom] <= 0:
        raise VerificationError("window must lie inside the lifetime of the atom and the run")
    k_grid = default_k_grid(traj) if k_grid is None else np.asarray(k_grid, dtype=float)
    t = traj.times
    center, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    beta = _bump((t - center) / half)
    beta_w = _time_weights(t) * beta
    beta_integral = float(beta_w.sum())
    k_index = int(traj.atom_index[atom])
    n = traj.grid.n_cells
    right = np.arange(k_index, min(k_index + n_cells, n))
    left = np.arange(k_index - 1, max(k_index - 1 - n_cells, -1), -1)
    ir = _trace_integrals(traj, right, k_grid, beta_w)  # must be <= 0
    il = _trace_integrals(traj, left, k_grid, beta_w)  # must be >= 0
    viol_r = float(np.max(ir, initial=0.0))
    viol_l = float(np.max(-il, initial=0.0))
    worst = max(viol_r, viol_l, 0.0)
    tol = trace_tolerance(traj, beta_integral, c_trace)
    side = "right" if viol_r >= viol_l else "left"
    arr = ir if side == "right" else -il
    kk, cell = np.unravel_index(np.argmax(arr), arr.shape)

    fixed = trace_fixed_point(traj, atom, window)
    return CheckResult(
        f"compatibility[{atom}]",
        worst,
        tol,
        worst <= tol,
        {"atom": atom, "side": side, "k": float(k_grid[kk]), "cell_offset": int(cell) + 1},
        {"fixed_point": fixed, "beta_integral": beta_integral},
    )


def trace_fixed_point(traj: Trajectory, atom: int, window: tuple[float, float], samples: int = 25) -> dict:
    """Worst ``|s_-(u_L) - u_L|`` and ``|s_+(u_R) - u_R|`` over the window (finite traces only)."""
    t = traj.times
    ks = np.flatnonzero((t >= window[0]) & (t <= window[1]))
    if ks.size > samples:
        ks = ks[np.linspace(0, ks.size - 1, samples).astype(int)]
    k_index = int(traj.atom_index[atom])
    flux = traj.flux
    left, right = 0.0, 0.0
    right_infinite = left_infinite = False
    for k in ks:
        ul = float(traj.regular[k, k_index - 1])
        ur = float(traj.regular[k, k_index])
        sm = flux.s_minus(ul)
        sp = flux.s_plus(ur)
        if sm.is_finite:
            left = max(left, abs(sm.s_value - ul))
        else:
            left_infinite = True
        if sp.is_finite:
            right = max(right, abs(sp.s_value - ur))
        else:
            right_infinite = True
    return {
        "left": None if left_infinite else left,
        "right": None if right_infinite else right,
    }


def _aligned(ta: np.ndarray, tb: np.ndarray):
    ia, ib = [], []
    j = 0
    for i, t in enumerate(ta):
        while j < len(tb) and tb[j] < t - 1e-12 * max(1.0, t):
            j += 1
        if j < len(tb) and abs(tb[j] - t) <= 1e-12 * max(1.0, t):
            ia.append(i)
            ib.append(j)
    return np.asarray(ia, dtype=int), np.asarray(ib, dtype=int)


def _first_extinction(traj: Trajectory) -> float:
    ts = [t for t in traj.ledger.extinction_time if t is not None]
    return min(ts) if ts else math.inf


def _extended_l1(u: np.ndarray, v: np.ndarray, grid, x0: float, x1: float) -> float:
    """Windowed L1 distance with the edge states extended beyond the domain.

    Boundary fluxes are those of the constant extension of the edge cells, so
    a window reaching past the domain sees that extension.
    """
    d = l1_window(u, v, grid, x0, x1)
    d += abs(u[0] - v[0]) * max(min(grid.x_lo, x1) - x0, 0.0)
    d += abs(u[-1] - v[-1]) * max(x1 - max(grid.x_hi, x0), 0.0)
    return float(d)


def check_contraction(traj_u: Trajectory, traj_v: Trajectory, window: tuple[float, float],
                      t_pairs=None, slack: float = CONTRACTION_SLACK) -> CheckResult:
    """Windowed L1 distance at ``t2`` against the distance at ``t1`` over the left-widened window."""
    if traj_u.grid != traj_v.grid:
        raise VerificationError("trajectories live on different grids")
    if not (np.array_equal(traj_u.atom_index, traj_v.atom_index)
            and np.allclose(traj_u.ledger.initial_mass, traj_v.ledger.initial_mass)):
        raise VerificationError("contraction needs identical atom positions and masses")
    ia, ib = _aligned(traj_u.times, traj_v.times)
    t_stop = min(_first_extinction(traj_u), _first_extinction(traj_v))
    keep = traj_u.times[ia] <= t_stop + 1e-12
    ia, ib = ia[keep], ib[keep]
    times = traj_u.times[ia]
    if t_pairs is None:
        pairs = list(zip(range(len(ia) - 1), range(1, len(ia))))
    else:
        lookup = {round(float(t), 12): n for n, t in enumerate(times)}
        pairs = []
        for t1, t2 in t_pairs:
            try:
                pairs.append((lookup[round(float(t1), 12)], lookup[round(float(t2), 12)]))
            except KeyError:
                raise VerificationError(f"time pair ({t1}, {t2}) not stored in both runs") from None
    L = traj_u.flux.lipschitz_bound
    x0, x1 = window
    worst, where = -math.inf, {}
    g = traj_u.grid
    for n1, n2 in pairs:
        t1, t2 = times[n1], times[n2]
        d2 = _extended_l1(traj_u.regular[ia[n2]], traj_v.regular[ib[n2]], g, x0, x1)
        d1 = _extended_l1(traj_u.regular[ia[n1]], traj_v.regular[ib[n1]], g, x0 - L * (t2 - t1), x1)
        excess = d2 - d1 - slack * max(1.0, d1)
        if excess > worst:
            worst, where = excess, {"t1": float(t1), "t2": float(t2), "d1": d1, "d2": d2}
    worst = max(worst, 0.0) if pairs else 0.0
    return CheckResult("contraction", worst, 0.0, worst <= 0.0, where, {"pairs": len(pairs)})


def check_comparison(traj_u: Trajectory, traj_v: Trajectory, tol: float = 1e-12) -> list[CheckResult]:
    """Order preservation ``u <= v`` and the ordering of the atom trace fluxes."""
    if traj_u.grid != traj_v.grid:
        raise VerificationError("trajectories live on different grids")
    su0, sv0 = traj_u.state_at(0), traj_v.state_at(0)
    if not leq(su0, sv0, tol):
        raise VerificationError("initial data are not ordered")
    ia, ib = _aligned(traj_u.times, traj_v.times)
    t_stop = _first_extinction(traj_v)
    worst_order, where = 0.0, {}
    for a, b in zip(ia, ib):
        t = traj_u.times[a]
        if t > t_stop + 1e-12:
            break
        su, sv = traj_u.state_at(a), traj_v.state_at(b)
        scale = max(1.0, float(np.max(sv.regular)))
        if not leq(su, sv, tol * scale):
            excess = float(np.max(su.regular - sv.regular))
            mv = {x.index: x.mass for x in sv.atoms}
            for x in su.atoms:
                excess = max(excess, x.mass - mv.get(x.index, 0.0))
            if excess > worst_order:
                worst_order, where = excess, {"t": float(t)}
    order = CheckResult("comparison_order", worst_order, 0.0, worst_order == 0.0, where)

    # trace flux ordering at co-located atoms while both are alive
    lu, lv = traj_u.ledger.as_arrays(), traj_v.ledger.as_arrays()
    sa, sb = _aligned(lu["step_times"], lv["step_times"])
    worst_flux, fwhere = 0.0, {}
    v_pos = {int(k): n for n, k in enumerate(traj_v.atom_index)}
    for n_u, k in enumerate(traj_u.atom_index):
        n_v = v_pos.get(int(k))
        if n_v is None:
            continue
        hm_u, hp_u = lu["h_minus"][sa, n_u], lu["h_plus"][sa, n_u]
        hm_v, hp_v = lv["h_minus"][sb, n_v], lv["h_plus"][sb, n_v]
        both = ~(np.isnan(hm_u) | np.isnan(hm_v))
        if not both.any():
            continue
        d_minus = np.max(hm_u[both] - hm_v[both])  # must be <= 0
        d_plus = np.max(hp_v[both] - hp_u[both])  # must be <= 0
        m = max(d_minus, d_plus)
        if m > worst_flux:
            worst_flux, fwhere = float(m), {"atom_interface": int(k)}
    flux_check = CheckResult("comparison_trace_fluxes", worst_flux, tol, worst_flux <= tol, fwhere)
    return [order, flux_check]


def verify_run(traj: Trajectory, family: TestFunctionFamily | None = None, k_grid=None,
               compat_windows: dict[int, tuple[float, float]] | None = None) -> VerificationReport:
    """Weak form, entropy and (for each atom) compatibility checks."""
    report = VerificationReport()
    report.add(check_weak_form(traj, family))
    for c in check_entropy(traj, family, k_grid):
        report.add(c)
    windows = compat_windows if compat_windows is not None else default_compat_windows(traj)
    for j, w in windows.items():
        report.add(check_compatibility(traj, j, w, k_grid))
    return report


def default_compat_windows(traj: Trajectory, start: float = 0.1, fraction: float = 0.8
                           ) -> dict[int, tuple[float, float]]:
    """Window ``(start, fraction * t_j)`` per atom, ``t_j`` capped at the run end."""
    out = {}
    t_end = float(traj.times[-1])
    for j, t_ext in enumerate(traj.ledger.extinction_time):
        if traj.ledger.initial_mass[j] <= 0:
            continue
        life = t_end if t_ext is None else t_ext
        hi = fraction * life
        if hi > start:
            out[j] = (start, hi)
    return out
