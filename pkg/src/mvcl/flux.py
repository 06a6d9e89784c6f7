"""Flux functions and every quantity derived from them.

A :class:`FluxModel` wraps a bounded, Lipschitz flux ``phi`` on ``[0, inf)``
together with a declared description of its behaviour at infinity.  From a
dense sample grid on ``[0, u_tail]`` it locates the local extrema of ``phi``
once; all range extrema (Godunov fluxes, the visible points ``s_+``/``s_-``,
their flux values) are then exact combinations of endpoint values, those
extrema and the tail bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

INF = math.inf
_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)

# tail kinds, shared with the compiled kernels
TAIL_ASYMPTOTIC = 0
TAIL_OSCILLATING = 1


class FluxDomainError(ValueError):
    """Raised when a flux is evaluated outside ``[0, inf)``."""


@dataclass(frozen=True)
class AsymptoticLimit:
    """``phi`` is monotone on ``[monotone_from, inf)`` and tends to ``limit``."""

    limit: float
    monotone_from: float

    @property
    def start(self) -> float:
        return self.monotone_from

    @property
    def liminf(self) -> float:
        return self.limit

    @property
    def limsup(self) -> float:
        return self.limit


@dataclass(frozen=True)
class OscillatingTail:
    """``phi`` keeps oscillating between ``liminf`` and ``limsup`` past ``envelope_from``."""

    liminf: float
    limsup: float
    envelope_from: float

    @property
    def start(self) -> float:
        return self.envelope_from


Tail = Union[AsymptoticLimit, OscillatingTail]


@dataclass(frozen=True)
class VisibleResult:
    """Least visible point at or above ``u0`` and the flux value it carries.

    ``s_value`` is ``inf`` when the relevant sup/inf over ``[u0, inf)`` is only
    reached in the limit; then ``attained`` is False and ``flux_at_s`` is that
    limit.  ``bracket`` holds ``(liminf, limsup)`` at infinity when the tail
    oscillates and ``s_value`` is infinite, since only the bracket is known
    there.
    """

    s_value: float
    flux_at_s: float
    attained: bool
    bracket: tuple[float, float] | None = None

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.s_value)


def _golden_extremum(f, a: float, b: float, maximize: bool, iterations: int = 30):
    sgn = -1.0 if maximize else 1.0
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = sgn * f(c)
    fd = sgn * f(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = sgn * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = sgn * f(d)
    if fc < fd:
        return c, sgn * fc
    return d, sgn * fd


def _upper_chain(x: np.ndarray, y: np.ndarray) -> list[int]:
    """Indices of the upper hull of points sorted by x (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


@dataclass(frozen=True)
class Hull:
    """Piecewise-linear envelope of ``phi`` over sample points.

    ``node_index`` points into ``samples_u``; a hull segment joining two
    non-adjacent samples is a chord (a shock in the Riemann fan), a segment
    joining neighbours follows ``phi`` itself.
    """

    samples_u: np.ndarray
    samples_phi: np.ndarray
    node_index: np.ndarray
    kind: str  # "concave" or "convex"

    @property
    def nodes_u(self) -> np.ndarray:
        return self.samples_u[self.node_index]

    @property
    def nodes_phi(self) -> np.ndarray:
        return self.samples_phi[self.node_index]

    def __call__(self, u):
        return np.interp(u, self.nodes_u, self.nodes_phi)

    def slopes(self) -> np.ndarray:
        du = np.diff(self.nodes_u)
        return np.diff(self.nodes_phi) / np.where(du > 0, du, 1.0)

    def is_chord(self) -> np.ndarray:
        return np.diff(self.node_index) > 1


class FluxModel:
    """Bounded Lipschitz flux on ``[0, inf)`` with a declared tail.

    ``func`` must accept numpy arrays.  The model is immutable after
    construction; all methods are pure.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        lipschitz_bound: float,
        sup_bound: float,
        tail: Tail,
        search_resolution: float | None = None,
        name: str = "custom",
        params: dict | None = None,
    ):
        if lipschitz_bound <= 0:
            raise ValueError("lipschitz_bound must be positive")
        if sup_bound < 0:
            raise ValueError("sup_bound must be nonnegative")
        if isinstance(tail, OscillatingTail) and tail.liminf > tail.limsup:
            raise ValueError("OscillatingTail needs liminf <= limsup")
        self._func = func
        self.lipschitz_bound = float(lipschitz_bound)
        self.sup_bound = float(sup_bound)
        self.tail = tail
        self.name = name
        self.params = dict(params or {})
        self.u_tail = max(float(tail.start), 1.0)
        if search_resolution is None:
            search_resolution = 1e-4 * self.u_tail
        if search_resolution <= 0:
            raise ValueError("search_resolution must be positive")
        self.search_resolution = float(search_resolution)

        n = int(math.ceil(self.u_tail / self.search_resolution)) + 1
        self.grid_u = np.linspace(0.0, self.u_tail, n)
        self.grid_phi = np.asarray(func(self.grid_u), dtype=float)
        self._tie_tol = 1e-12 * max(1.0, self.sup_bound)
        self._build_extrema()

    # -- construction helpers -------------------------------------------------

    def _build_extrema(self) -> None:
        u, y = self.grid_u, self.grid_phi
        d = np.sign(np.diff(y))
        # carry the last nonzero slope sign across plateaus
        for i in range(1, len(d)):
            if d[i] == 0:
                d[i] = d[i - 1]
        cand_u = [0.0]
        cand_phi = [float(y[0])]
        for i in range(1, len(d)):
            if d[i - 1] != d[i] and d[i - 1] != 0 and d[i] != 0:
                maximize = d[i - 1] > 0
                uc, pc = _golden_extremum(self._scalar, u[i - 1], u[i + 1], maximize)
                if (maximize and y[i] >= pc) or (not maximize and y[i] <= pc):
                    uc, pc = float(u[i]), float(y[i])
                cand_u.append(float(uc))
                cand_phi.append(float(pc))
        cand_u.append(float(u[-1]))
        cand_phi.append(float(y[-1]))
        self.ext_u = np.asarray(cand_u)
        self.ext_phi = np.asarray(cand_phi)
        # suffix extrema: inf/sup of phi over candidates with index >= i
        self._suffix_min = np.minimum.accumulate(self.ext_phi[::-1])[::-1].copy()
        self._suffix_max = np.maximum.accumulate(self.ext_phi[::-1])[::-1].copy()

    def _scalar(self, u: float) -> float:
        return float(self._func(np.asarray([u], dtype=float))[0])

    # -- kernel-facing data ---------------------------------------------------

    @property
    def tail_kind(self) -> int:
        return TAIL_OSCILLATING if isinstance(self.tail, OscillatingTail) else TAIL_ASYMPTOTIC

    @property
    def tail_low(self) -> float:
        return float(self.tail.liminf)

    @property
    def tail_high(self) -> float:
        return float(self.tail.limsup)

    def kernel_tables(self):
        """Arrays consumed by :mod:`mvcl.kernels`."""
        return (
            self.ext_u,
            self.ext_phi,
            self.tail_kind,
            self.u_tail,
            self.tail_low,
            self.tail_high,
        )

    @property
    def ambiguous_tail(self) -> bool:
        return isinstance(self.tail, OscillatingTail) and self.tail.liminf < self.tail.limsup

    # -- evaluation -----------------------------------------------------------

    def eval(self, u):
        """Evaluate ``phi``; scalars in, scalar out."""
        arr = np.asarray(u, dtype=float)
        if np.any(~np.isfinite(arr)):
            raise FluxDomainError("flux evaluated at a non-finite state")
        if np.any(arr < 0):
            raise FluxDomainError("flux evaluated at a negative state")
        out = np.asarray(self._func(np.atleast_1d(arr)), dtype=float)
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)

    __call__ = eval

    def eval_unchecked(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self._func(u), dtype=float)

    def derivative(self, u, h: float | None = None):
        """Central-difference ``phi'`` (one-sided at 0)."""
        u = np.asarray(u, dtype=float)
        if h is None:
            h = 1e-6 * max(1.0, self.u_tail)
        central = (self._func(u + h) - self._func(np.maximum(u - h, 0.0))) / (u + h - np.maximum(u - h, 0.0))
        forward = (-3.0 * self._func(u) + 4.0 * self._func(u + h) - self._func(u + 2 * h)) / (2 * h)
        return np.where(u >= h, central, forward)

    # -- range extrema --------------------------------------------------------

    def _interior(self, a: float, b: float) -> np.ndarray:
        i0 = np.searchsorted(self.ext_u, a, side="right")
        i1 = np.searchsorted(self.ext_u, b, side="left")
        return self.ext_phi[i0:i1]

    def range_min(self, a: float, b: float) -> float:
        """min of ``phi`` over ``[a, b]`` for finite ``0 <= a <= b``."""
        vals = [self.eval(a), self.eval(b)]
        inner = self._interior(a, b)
        if inner.size:
            vals.append(float(inner.min()))
        if self.tail_kind == TAIL_OSCILLATING and b > self.u_tail:
            vals.append(self.tail_low)
        return min(vals)

    def range_max(self, a: float, b: float) -> float:
        """max of ``phi`` over ``[a, b]`` for finite ``0 <= a <= b``."""
        vals = [self.eval(a), self.eval(b)]
        inner = self._interior(a, b)
        if inner.size:
            vals.append(float(inner.max()))
        if self.tail_kind == TAIL_OSCILLATING and b > self.u_tail:
            vals.append(self.tail_high)
        return max(vals)

    def _finite_tail_extreme(self, u0: float, maximize: bool) -> float:
        """Extreme over the finite candidates in ``[u0, inf)``, tail excluded."""
        i0 = np.searchsorted(self.ext_u, u0, side="right")
        v = self.eval(u0)
        if i0 < len(self.ext_u):
            other = self._suffix_max[i0] if maximize else self._suffix_min[i0]
            v = max(v, other) if maximize else min(v, other)
        return float(v)

    def sup_from(self, u0: float) -> float:
        """``sup`` of ``phi`` over ``[u0, inf)``."""
        return max(self._finite_tail_extreme(u0, True), self.tail_high)

    def inf_from(self, u0: float) -> float:
        """``inf`` of ``phi`` over ``[u0, inf)``."""
        return min(self._finite_tail_extreme(u0, False), self.tail_low)

    # -- visible points -------------------------------------------------------

    def _visible(self, u0: float, maximize: bool) -> VisibleResult:
        u0 = float(u0)
        self.eval(u0)  # domain check
        finite = self._finite_tail_extreme(u0, maximize)
        at_inf = self.tail_high if maximize else self.tail_low
        tol = self._tie_tol
        if maximize:
            reached = finite >= at_inf - tol
            target = max(finite, at_inf)
        else:
            reached = finite <= at_inf + tol
            target = min(finite, at_inf)
        if not reached:
            bracket = (self.tail_low, self.tail_high) if self.ambiguous_tail else None
            return VisibleResult(INF, float(at_inf), False, bracket)

        def hits(v):
            return v >= target - tol if maximize else v <= target + tol

        if hits(self.eval(u0)):
            return VisibleResult(u0, float(self.eval(u0)), True)
        # first candidate extremum reaching the target
        i0 = np.searchsorted(self.ext_u, u0, side="right")
        idx = [i for i in range(i0, len(self.ext_u)) if hits(self.ext_phi[i])]
        if idx:
            c = float(self.ext_u[idx[0]])
        else:
            # reached only beyond the scan window (oscillating envelope attained)
            c = self._scan_beyond(u0, target, hits)
        s = self._first_crossing(u0, c, hits)
        return VisibleResult(s, float(target), True)

    def _scan_beyond(self, u0: float, target: float, hits) -> float:
        start = max(u0, self.u_tail)
        step = self.search_resolution
        u = start
        for _ in range(10_000_000):
            if hits(self.eval(u)):
                return u
            u += step
        raise RuntimeError("declared tail envelope is never attained")

    def _first_crossing(self, u0: float, c: float, hits) -> float:
        """Least sample-grid point in ``(u0, c]`` reaching the target, bisected."""
        grid = self.grid_u
        mask = (grid > u0) & (grid < c)
        cand = grid[mask]
        if cand.size:
            ok = np.flatnonzero([hits(v) for v in self.eval_unchecked(cand)])
        else:
            ok = np.empty(0, dtype=int)
        if ok.size == 0:
            # isolated extremum: the located candidate itself
            return c
        j = int(ok[0])
        right = float(cand[j])
        left = float(cand[j - 1]) if j > 0 else u0
        for _ in range(60):
            mid = 0.5 * (left + right)
            if mid <= left or mid >= right:
                break
            if hits(self.eval(mid)):
                right = mid
            else:
                left = mid
        return right

    def s_plus(self, u0: float) -> VisibleResult:
        """Least ``u >= u0`` at which the running sup of ``phi`` reaches ``sup [u0, inf)``."""
        return self._visible(u0, True)

    def s_minus(self, u0: float) -> VisibleResult:
        """Least ``u >= u0`` at which the running inf of ``phi`` reaches ``inf [u0, inf)``."""
        return self._visible(u0, False)

    # -- two-point flux -------------------------------------------------------

    def godunov_flux(self, a: float, b: float) -> float:
        """Exact Riemann-solver flux; either argument may be ``inf``.

        ``godunov_flux(inf, b)`` is the flux at ``s_+(b)`` and
        ``godunov_flux(a, inf)`` the flux at ``s_-(a)``.
        """
        a_inf, b_inf = math.isinf(a), math.isinf(b)
        if a_inf and b_inf:
            raise ValueError("godunov_flux with both states infinite is undefined")
        if a_inf:
            return self.sup_from(b)
        if b_inf:
            return self.inf_from(a)
        if a <= b:
            return self.range_min(a, b)
        return self.range_max(b, a)

    # -- hulls ----------------------------------------------------------------

    def hull_samples(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Sample points on ``[lo, hi]``: search grid, extrema, endpoints.

        Past ``u_tail`` the spacing grows geometrically.
        """
        parts = [np.array([lo, hi])]
        inner = self.grid_u[(self.grid_u > lo) & (self.grid_u < hi)]
        parts.append(inner)
        parts.append(self.ext_u[(self.ext_u > lo) & (self.ext_u < hi)])
        if hi > self.u_tail:
            a = max(lo, self.u_tail)
            if hi > a:
                parts.append(np.geomspace(max(a, 1e-12), hi, 4001)[1:-1])
        u = np.unique(np.concatenate(parts))
        if len(u) < 2001 and hi > lo:
            u = np.unique(np.concatenate([u, np.linspace(lo, hi, 2001)]))
        return u, self.eval_unchecked(u)

    def _hull(self, lo: float, hi: float, kind: str) -> Hull:
        if not (0 <= lo <= hi):
            raise ValueError("hull needs 0 <= lo <= hi")
        if math.isinf(hi):
            raise ValueError("hull over an unbounded interval is unsupported; use s_plus/s_minus")
        if lo == hi:
            u = np.array([float(lo)])
            return Hull(u, self.eval_unchecked(u), np.array([0]), kind)
        u, y = self.hull_samples(lo, hi)
        sign = 1.0 if kind == "concave" else -1.0
        idx = _upper_chain(u, sign * y)
        return Hull(u, y, np.asarray(idx), kind)

    def concave_hull(self, lo: float, hi: float) -> Hull:
        """Least concave majorant of ``phi`` on ``[lo, hi]``."""
        return self._hull(lo, hi, "concave")

    def convex_hull(self, lo: float, hi: float) -> Hull:
        """Greatest convex minorant of ``phi`` on ``[lo, hi]``."""
        return self._hull(lo, hi, "convex")

    def critical_points(self) -> np.ndarray:
        """Interior local extrema of ``phi`` located on the search grid."""
        return self.ext_u[1:-1].copy()

    def describe(self) -> dict:
        tail = self.tail
        if isinstance(tail, AsymptoticLimit):
            tail_d = {"type": "asymptotic", "limit": tail.limit, "monotone_from": tail.monotone_from}
        else:
            tail_d = {
                "type": "oscillating",
                "liminf": tail.liminf,
                "limsup": tail.limsup,
                "envelope_from": tail.envelope_from,
            }
        return {
            "name": self.name,
            "params": self.params,
            "lipschitz_bound": self.lipschitz_bound,
            "sup_bound": self.sup_bound,
            "tail": tail_d,
            "search_resolution": self.search_resolution,
        }

    def __repr__(self) -> str:
        return f"FluxModel({self.name!r}, L={self.lipschitz_bound:g}, tail={self.tail})"


# -- built-in fluxes ------------------------------------------------------------


def inverse_power(p: float = 1.0) -> FluxModel:
    """``phi(u) = 1 - (1 + u)**(-p)``: increasing, concave, tends to 1."""
    if p <= 0:
        raise ValueError("inverse_power needs p > 0")
    return FluxModel(
        lambda u: 1.0 - (1.0 + u) ** (-p),
        lipschitz_bound=p,
        sup_bound=1.0,
        tail=AsymptoticLimit(1.0, 0.0),
        search_resolution=1e-3,
        name="inverse_power",
        params={"p": p},
    )


def bump() -> FluxModel:
    """``phi(u) = u / (1 + u**2)``: rises to 1/2 at ``u = 1`` then decays to 0."""
    return FluxModel(
        lambda u: u / (1.0 + u * u),
        lipschitz_bound=1.0,
        sup_bound=0.5,
        tail=AsymptoticLimit(0.0, 10.0),
        name="bump",
    )


def monotone_tanh() -> FluxModel:
    """``phi(u) = tanh(u)``."""
    return FluxModel(
        np.tanh,
        lipschitz_bound=1.0,
        sup_bound=1.0,
        tail=AsymptoticLimit(1.0, 0.0),
        search_resolution=1e-3,
        name="monotone_tanh",
    )


def plateau(K: float = 1.0, level: float = 1.0) -> FluxModel:
    """C^2 flux rising on ``[0, K]`` and equal to ``level`` beyond ``K``.

    ``phi(u) = level * (1 - (1 - u/K)**3)`` on ``[0, K]``.
    """
    if K <= 0:
        raise ValueError("plateau needs K > 0")

    def f(u):
        w = np.clip(1.0 - u / K, 0.0, None)
        return level * (1.0 - w**3)

    return FluxModel(
        f,
        lipschitz_bound=3.0 * abs(level) / K,
        sup_bound=abs(level),
        tail=AsymptoticLimit(level, K),
        name="plateau",
        params={"K": K, "level": level},
    )


def decreasing(p: float = 1.0) -> FluxModel:
    """``phi(u) = (1 + u)**(-p)``: decreasing and convex, tends to 0."""
    return FluxModel(
        lambda u: (1.0 + u) ** (-p),
        lipschitz_bound=p,
        sup_bound=1.0,
        tail=AsymptoticLimit(0.0, 0.0),
        search_resolution=1e-3,
        name="decreasing",
        params={"p": p},
    )


def from_table(
    u: np.ndarray,
    phi: np.ndarray,
    lipschitz_bound: float,
    sup_bound: float,
    tail: Tail,
    search_resolution: float | None = None,
) -> FluxModel:
    """Piecewise-cubic flux through sampled values, held constant past the last sample."""
    from scipy.interpolate import CubicSpline

    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if u.ndim != 1 or u.shape != phi.shape or len(u) < 2:
        raise ValueError("flux table needs matching 1-d u and phi columns")
    if u[0] != 0.0 or np.any(np.diff(u) <= 0):
        raise ValueError("flux table must start at u=0 with increasing u")
    spline = CubicSpline(u, phi)
    u_end, phi_end = float(u[-1]), float(phi[-1])

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= u_end, spline(np.minimum(x, u_end)), phi_end)

    return FluxModel(
        f,
        lipschitz_bound=lipschitz_bound,
        sup_bound=sup_bound,
        tail=tail,
        search_resolution=search_resolution,
        name="table",
        params={"n_samples": int(len(u))},
    )


BUILTINS: dict[str, Callable[..., FluxModel]] = {
    "inverse_power": inverse_power,
    "bump": bump,
    "monotone_tanh": monotone_tanh,
    "plateau": plateau,
    "decreasing": decreasing,
}


def builtin(name: str, **params) -> FluxModel:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown flux {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)
