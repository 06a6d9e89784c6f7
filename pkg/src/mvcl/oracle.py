"""Reference solutions and grid-refinement studies.

The worked example is the flux ``1 - (1 + u)**-p`` started from a unit Dirac
mass at the origin.  Until ``t = 1`` the atom decays linearly and feeds the
centred rarefaction ``u = (p t / x)**(1/(1+p)) - 1`` on ``0 < x <= p t``.
After extinction the left edge of that fan becomes a shock ``xi(t)``
starting at ``xi(1) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import SolverConfig, run
from .flux import FluxModel, inverse_power, plateau
from .riemann import ModifiedRiemannSolution, solve_modified_riemann
from .state import Grid, MeasureState, from_config


def _s_rhs(t: float, s: float, p: float) -> float:
    # ODE for s = xi**(p/(1+p)); regular at s = 0 unlike the equation for xi itself
    a = 1.0 / (1.0 + p)
    pt_a = (p * t) ** a
    r = max(s, 0.0) ** (1.0 / p) / pt_a
    ratio = p if abs(1.0 - r) < 1e-12 else (1.0 - r**p) / (1.0 - r)
    return (p / (1.0 + p)) / pt_a * ratio


def solve_xi(p: float, T: float, dt_ode: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate the post-extinction shock ``xi(t)`` on ``[1, T]`` with RK4.

    Integrates ``s = xi**(p/(1+p))``, for which the right-hand side stays
    finite at ``s = 0``; ``xi = s**((1+p)/p)``.
    """
    if T <= 1:
        return np.empty(0), np.empty(0)
    n = max(1, int(math.ceil((T - 1.0) / dt_ode)))
    h = (T - 1.0) / n
    ts = 1.0 + h * np.arange(n + 1)
    s = np.zeros(n + 1)

    def rk4(t, y, h):
        k1 = _s_rhs(t, y, p)
        k2 = _s_rhs(t + 0.5 * h, y + 0.5 * h * k1, p)
        k3 = _s_rhs(t + 0.5 * h, y + 0.5 * h * k2, p)
        k4 = _s_rhs(t + h, y + h * k3, p)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    for i in range(n):
        # s ~ (t - 1) + O((t - 1)**(1 + 1/p)) is not smooth at t = 1: substep the start
        sub = 256 if i < 64 else 1
        y = s[i]
        for m in range(sub):
            y = rk4(ts[i] + m * h / sub, y, h / sub)
        s[i + 1] = y
    xi = np.maximum(s, 0.0) ** ((1.0 + p) / p)
    if np.any(np.diff(xi) < 0) or np.any(xi > p * ts):
        raise RuntimeError("xi table violates monotonicity or xi < p t")
    return ts, xi


@dataclass
class ExampleSolution:
    """Exact solution of the worked example for exponent ``p``."""

    p: float = 1.0
    T: float = 2.0
    dt_ode: float = 1e-4
    _t: np.ndarray = field(init=False, repr=False)
    _xi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("p must be positive")
        self._t, self._xi = solve_xi(self.p, self.T, self.dt_ode)

    @property
    def flux(self) -> FluxModel:
        return inverse_power(self.p)

    def xi(self, t: float) -> float:
        if t <= 1:
            return 0.0
        if t > self.T + 1e-12:
            raise ValueError(f"xi tabulated only up to T={self.T}")
        return float(np.interp(t, self._t, self._xi))

    def atom_mass(self, t: float) -> float:
        return max(1.0 - t, 0.0)

    def left_edge(self, t: float) -> float:
        return self.xi(t) if t >= 1 else 0.0

    def regular(self, x, t: float):
        x = np.asarray(x, dtype=float)
        if t <= 0:
            return np.zeros_like(x)
        a = 1.0 / (1.0 + self.p)
        pt = self.p * t
        left = self.left_edge(t)
        inside = (x > left) & (x <= pt) & (x > 0)
        xs = np.where(inside, x, pt)
        return np.where(inside, (pt / xs) ** a - 1.0, 0.0)

    def _antiderivative(self, x, t):
        a = 1.0 / (1.0 + self.p)
        pt = self.p * t
        return pt**a * np.power(x, 1.0 - a) / (1.0 - a) - x

    def cell_averages(self, grid: Grid, t: float) -> np.ndarray:
        """Exact cell averages of the regular part (closed-form antiderivative)."""
        if t <= 0:
            return np.zeros(grid.n_cells)
        e = grid.interfaces
        lo = np.clip(e[:-1], self.left_edge(t), self.p * t)
        hi = np.clip(e[1:], self.left_edge(t), self.p * t)
        lo = np.maximum(lo, 0.0)
        hi = np.maximum(hi, 0.0)
        integral = self._antiderivative(hi, t) - self._antiderivative(lo, t)
        return np.where(hi > lo, integral, 0.0) / grid.dx

    def regular_mass(self, t: float) -> float:
        if t <= 0:
            return 0.0
        lo, hi = self.left_edge(t), self.p * t
        return float(self._antiderivative(hi, t) - self._antiderivative(lo, t))


def exact_example(p: float, x, t: float, solution: ExampleSolution | None = None):
    """``(regular value, atom mass at 0)`` of the worked example at ``(x, t)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.zeros_like(np.asarray(x, dtype=float)), 1.0
    if solution is None or solution.p != p or (t > 1 and solution.T < t):
        solution = ExampleSolution(p, max(2.0, t))
    return solution.regular(x, t), solution.atom_mass(t)


# -- problems with known solutions -------------------------------------------------


class Problem:
    """A configuration with an exact reference solution."""

    name = "problem"
    x_lo = -1.0
    x_hi = 3.0
    end_time = 0.5
    window: tuple[float, float] | None = None
    flux: FluxModel

    def grid(self, n: int) -> Grid:
        return Grid(self.x_lo, self.x_hi, n)

    def initial(self, grid: Grid) -> MeasureState:
        raise NotImplementedError

    def exact_cell_averages(self, grid: Grid, t: float) -> np.ndarray:
        raise NotImplementedError

    def exact_atom_mass(self, t: float) -> np.ndarray:
        raise NotImplementedError


class ExampleProblem(Problem):
    def __init__(self, p: float = 1.0, end_time: float = 0.5, window=(0.05, 3.0)):
        self.name = f"example_p{p:g}"
        self.p = p
        self.end_time = end_time
        self.window = window
        self.solution = ExampleSolution(p, max(2.0, end_time))
        self.flux = inverse_power(p)

    def initial(self, grid):
        return from_config(grid, 0.0, [(0.0, 1.0)])

    def exact_cell_averages(self, grid, t):
        return self.solution.cell_averages(grid, t)

    def exact_atom_mass(self, t):
        return np.array([self.solution.atom_mass(t)])


class ConstantProblem(Problem):
    def __init__(self, value: float = 0.7, flux: FluxModel | None = None, end_time: float = 0.5):
        self.name = "constant"
        self.value = value
        self.flux = flux or inverse_power(1.0)
        self.end_time = end_time

    def initial(self, grid):
        return from_config(grid, self.value)

    def exact_cell_averages(self, grid, t):
        return np.full(grid.n_cells, self.value)

    def exact_atom_mass(self, t):
        return np.empty(0)


class EquilibriumProblem(Problem):
    """Flux constant beyond ``K``, data ``u = K`` and a unit atom: nothing moves."""

    def __init__(self, K: float = 1.0, end_time: float = 1.0):
        self.name = "equilibrium"
        self.K = K
        self.flux = plateau(K)
        self.end_time = end_time

    def initial(self, grid):
        return from_config(grid, self.K, [(0.0, 1.0)])

    def exact_cell_averages(self, grid, t):
        return np.full(grid.n_cells, self.K)

    def exact_atom_mass(self, t):
        return np.array([1.0])


class ModifiedRiemannProblem(Problem):
    """Riemann data with an atom at the origin, exact until extinction or fans reach the edges."""

    def __init__(self, flux: FluxModel, u_minus=0.0, u_plus=0.0, mass=1.0, end_time=0.25,
                 x_lo=-1.0, x_hi=3.0, u_cap=1e6):
        self.name = f"modified_riemann_{flux.name}"
        self.flux = flux
        self.u_minus, self.u_plus, self.mass = u_minus, u_plus, mass
        self.end_time = end_time
        self.x_lo, self.x_hi = x_lo, x_hi
        self.solution: ModifiedRiemannSolution = solve_modified_riemann(
            u_minus, u_plus, mass, flux, u_cap=u_cap
        )

    def initial(self, grid):
        pieces = [
            {"to": 0.0, "value": self.u_minus},
            {"from": 0.0, "value": self.u_plus},
        ]
        return from_config(grid, pieces, [(0.0, self.mass)])

    def exact_cell_averages(self, grid, t, sub: int = 8):
        xg, wg = np.polynomial.legendre.leggauss(sub)
        x = grid.centers[:, None] + 0.5 * grid.dx * xg[None, :]
        vals = np.vectorize(lambda z: self.solution.eval(z, t))(x)
        return 0.5 * (vals * wg[None, :]).sum(axis=1)

    def exact_atom_mass(self, t):
        return np.array([self.solution.atom_mass(t)])


@dataclass
class ConvergenceRow:
    n_cells: int
    dx: float
    l1_error: float
    atom_mass_error: float
    order: float | None
    extinction_time: float | None = None  # first atom, if it died before end_time
    dt: float = 0.0  # largest step of the run


def convergence_study(problem: Problem, grids, cfl: float = 0.45, phantom=None) -> list[ConvergenceRow]:
    """Errors against the exact solution at ``problem.end_time`` over a list of N."""
    rows: list[ConvergenceRow] = []
    for n in grids:
        grid = problem.grid(n)
        traj = run(problem.initial(grid), problem.flux,
                   SolverConfig(end_time=problem.end_time, cfl=cfl, phantom=phantom))
        final = traj.final
        exact = problem.exact_cell_averages(grid, problem.end_time)
        if problem.window is None:
            w = np.full(grid.n_cells, grid.dx)
        else:
            lo = np.clip(grid.interfaces[:-1], *problem.window)
            hi = np.clip(grid.interfaces[1:], *problem.window)
            w = hi - lo
        err = float(np.sum(np.abs(final.regular - exact) * w))
        mass_err = float(np.max(np.abs(final.atom_masses() - problem.exact_atom_mass(problem.end_time)),
                                initial=0.0))
        order = None
        if rows and rows[-1].l1_error > 0 and err > 0:
            order = math.log(rows[-1].l1_error / err) / math.log(rows[-1].dx / grid.dx)
        ext = [t for t in traj.extinction_times() if t is not None]
        rows.append(ConvergenceRow(n, grid.dx, err, mass_err, order, ext[0] if ext else None,
                                   float(np.max(traj.dt_history, initial=0.0))))
    return rows


def extinction_error_bar(rows: list[ConvergenceRow]) -> tuple[float, float] | None:
    """Finest-grid extinction time with a refinement error bar.

    The bar is the change between the two finest grids, floored by the finest
    step since the computed time carries an O(dx + dt) error.
    """
    ts = [(r.extinction_time, r.dt) for r in rows if r.extinction_time is not None]
    if not ts:
        return None
    t_fine, dt_fine = ts[-1]
    bar = dt_fine if len(ts) < 2 else max(abs(t_fine - ts[-2][0]), dt_fine)
    return t_fine, bar
