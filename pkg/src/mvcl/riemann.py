"""Self-similar Riemann solutions built from flux hulls.

The standard problem reads its waves off the convex (``u_l < u_r``) or
concave (``u_l > u_r``) hull of the flux between the two states.  The
modified problem places a Dirac atom at the interface: each side then solves
a Riemann problem against the visible point ``s_-(u_-)`` (left) or
``s_+(u_+)`` (right), and the atom loses mass at the constant rate
``phi(s_+(u_+)) - phi(s_-(u_-))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .flux import FluxModel, VisibleResult

_SPEED_TOL = 1e-8


@dataclass(frozen=True)
class Shock:
    left: float
    right: float
    speed: float

    @property
    def speed_lo(self) -> float:
        return self.speed

    @property
    def speed_hi(self) -> float:
        return self.speed

    def to_dict(self) -> dict:
        return {"type": "shock", "left": self.left, "right": self.right, "speed": self.speed}


@dataclass(frozen=True)
class Rarefaction:
    """Centred rarefaction; ``states`` is tabulated against nondecreasing ``speeds``."""

    left: float
    right: float
    speeds: np.ndarray
    states: np.ndarray
    flux: FluxModel = field(repr=False, compare=False)

    @property
    def speed_lo(self) -> float:
        return float(self.speeds[0])

    @property
    def speed_hi(self) -> float:
        return float(self.speeds[-1])

    def state_of_speed(self, xi: float) -> float:
        sp, st = self.speeds, self.states
        if xi <= sp[0]:
            return float(st[0])
        if xi >= sp[-1]:
            return float(st[-1])
        k = int(np.searchsorted(sp, xi, side="right")) - 1
        k = min(max(k, 0), len(sp) - 2)
        s0, s1 = sp[k], sp[k + 1]
        u0, u1 = st[k], st[k + 1]
        if s1 <= s0:
            return float(u1)
        u = u0 + (xi - s0) * (u1 - u0) / (s1 - s0)
        # polish with Newton on phi'(u) = xi, kept inside the bracket
        lo, hi = min(u0, u1), max(u0, u1)
        h = 1e-5 * max(1.0, abs(u))
        for _ in range(3):
            d1 = float(self.flux.derivative(u))
            d2 = (float(self.flux.derivative(u + h)) - float(self.flux.derivative(max(u - h, 0.0)))) / (
                u + h - max(u - h, 0.0)
            )
            if d2 == 0:
                break
            u_new = u - (d1 - xi) / d2
            if not lo <= u_new <= hi:
                break
            u = u_new
        return float(u)

    def to_dict(self) -> dict:
        return {
            "type": "rarefaction",
            "left": self.left,
            "right": self.right,
            "speed_lo": self.speed_lo,
            "speed_hi": self.speed_hi,
        }


Wave = Union[Shock, Rarefaction]


@dataclass(frozen=True)
class WaveFan:
    far_left: float
    far_right: float
    waves: tuple[Wave, ...] = ()
    # a side whose constant state is an infinite trace truncated for evaluation
    infinite_left: bool = False
    infinite_right: bool = False

    def speeds(self) -> list[float]:
        out = []
        for w in self.waves:
            out.extend([w.speed_lo, w.speed_hi])
        return out

    def to_dict(self) -> dict:
        return {
            "far_left": "inf" if self.infinite_left else self.far_left,
            "far_right": "inf" if self.infinite_right else self.far_right,
            "truncated_at": self.far_left if self.infinite_left else (
                self.far_right if self.infinite_right else None
            ),
            "waves": [w.to_dict() for w in self.waves],
        }


def eval_fan(fan: WaveFan, xi: float) -> float:
    """State of a self-similar solution at ``x/t = xi`` (right state on a shock)."""
    for w in fan.waves:
        if xi < w.speed_lo:
            return w.left
        if isinstance(w, Rarefaction) and xi <= w.speed_hi:
            return w.state_of_speed(xi)
    return fan.far_right


def _rarefaction(nodes_u, flux: FluxModel, lo_speed: float, hi_speed: float) -> Rarefaction:
    states = np.asarray(nodes_u, dtype=float)
    speeds = np.asarray(flux.derivative(states), dtype=float)
    speeds = np.clip(np.maximum.accumulate(speeds), lo_speed, hi_speed)
    return Rarefaction(float(states[0]), float(states[-1]), speeds, states, flux)


def solve_standard_riemann(u_l: float, u_r: float, flux: FluxModel) -> WaveFan:
    """Entropy solution of the Riemann problem with states ``u_l | u_r``."""
    if u_l < 0 or u_r < 0 or not (math.isfinite(u_l) and math.isfinite(u_r)):
        raise ValueError("Riemann states must be finite and nonnegative")
    if u_l == u_r:
        return WaveFan(u_l, u_r)
    if abs(u_r - u_l) <= 1e-9 * (1.0 + max(u_l, u_r)):
        # hull sampling is ill-conditioned here; a tiny jump is one near-characteristic wave
        L = flux.lipschitz_bound
        speed = (float(flux.eval(u_r)) - float(flux.eval(u_l))) / (u_r - u_l)
        return WaveFan(float(u_l), float(u_r), (Shock(float(u_l), float(u_r), min(max(speed, -L), L)),))
    if u_l < u_r:
        hull = flux.convex_hull(u_l, u_r)
        idx = list(hull.node_index)
    else:
        hull = flux.concave_hull(u_r, u_l)
        idx = list(hull.node_index)[::-1]
    su, sp = hull.samples_u, hull.samples_phi

    # split the node path into chords (shocks) and runs of adjacent samples
    segments = []
    for a, b in zip(idx[:-1], idx[1:]):
        chord = abs(b - a) > 1
        slope = (sp[b] - sp[a]) / (su[b] - su[a])
        segments.append((a, b, chord, slope))

    waves: list[Wave] = []
    i = 0
    while i < len(segments):
        a, b, chord, slope = segments[i]
        if chord:
            waves.append(Shock(float(su[a]), float(su[b]), float(slope)))
            i += 1
            continue
        run = [a, b]
        j = i + 1
        while j < len(segments) and not segments[j][2]:
            run.append(segments[j][1])
            j += 1
        lo_speed = waves[-1].speed_hi if waves else -math.inf
        hi_speed = segments[j][3] if j < len(segments) else math.inf
        waves.append(_rarefaction(su[run], flux, lo_speed, hi_speed))
        i = j
    # tangency points may leave speeds out of order at the 1e-8 level
    for k in range(1, len(waves)):
        prev = waves[k - 1]
        w = waves[k]
        if isinstance(w, Shock) and w.speed < prev.speed_hi:
            waves[k] = Shock(w.left, w.right, prev.speed_hi)
    return WaveFan(float(u_l), float(u_r), tuple(waves))


@dataclass(frozen=True)
class ModifiedRiemannSolution:
    left_fan: WaveFan
    right_fan: WaveFan
    left_trace: VisibleResult
    right_trace: VisibleResult
    atom_decay_rate: float
    tau: float
    mass: float

    @property
    def extinction_time(self) -> float:
        if self.atom_decay_rate <= 0:
            return math.inf
        return self.mass / self.atom_decay_rate

    def atom_mass(self, t: float) -> float:
        return max(self.mass - self.atom_decay_rate * t, 0.0)

    def eval(self, x: float, t: float) -> float:
        """Regular part at ``(x, t)``; only valid before extinction."""
        if t <= 0:
            raise ValueError("evaluate the composite solution at t > 0")
        if t > self.extinction_time:
            raise ValueError("composite solution is only exposed before extinction")
        xi = x / t
        if x < 0:
            return eval_fan(self.left_fan, xi)
        return eval_fan(self.right_fan, xi)

    def to_dict(self) -> dict:
        def trace(v: VisibleResult):
            return {
                "s": "inf" if not v.is_finite else v.s_value,
                "flux": v.flux_at_s,
                "attained": v.attained,
                "bracket": list(v.bracket) if v.bracket else None,
            }

        return {
            "left_fan": self.left_fan.to_dict(),
            "right_fan": self.right_fan.to_dict(),
            "left_trace": trace(self.left_trace),
            "right_trace": trace(self.right_trace),
            "atom_decay_rate": self.atom_decay_rate,
            "tau": "inf" if math.isinf(self.tau) else self.tau,
            "mass": self.mass,
            "extinction_time": "inf" if math.isinf(self.extinction_time) else self.extinction_time,
        }


def solve_modified_riemann(
    u_minus: float,
    u_plus: float,
    mass: float,
    flux: FluxModel,
    u_cap: float = 1e6,
) -> ModifiedRiemannSolution:
    """Riemann data ``u_- | u_+`` with an atom of mass ``mass`` at the origin.

    An infinite visible point is represented by truncating the adjacent fan at
    ``u_cap``; only its flux value enters the decay rate.
    """
    if mass <= 0:
        raise ValueError("atom mass must be positive; use solve_standard_riemann otherwise")
    sm = flux.s_minus(u_minus)
    sp = flux.s_plus(u_plus)
    if sm.is_finite:
        left = solve_standard_riemann(u_minus, sm.s_value, flux)
    else:
        f = solve_standard_riemann(u_minus, max(u_cap, u_minus), flux)
        left = WaveFan(f.far_left, f.far_right, f.waves, infinite_right=True)
    if sp.is_finite:
        right = solve_standard_riemann(sp.s_value, u_plus, flux)
    else:
        f = solve_standard_riemann(max(u_cap, u_plus), u_plus, flux)
        right = WaveFan(f.far_left, f.far_right, f.waves, infinite_left=True)

    # waves of the left fan stay in x < 0 and those of the right fan in x > 0
    if any(s > _SPEED_TOL for s in left.speeds()):
        raise RuntimeError("left fan emits waves into x > 0")
    if any(s < -_SPEED_TOL for s in right.speeds()):
        raise RuntimeError("right fan emits waves into x < 0")

    rate = sp.flux_at_s - sm.flux_at_s
    if rate < 0:
        if rate < -1e-12:
            raise RuntimeError("negative atom decay rate")
        rate = 0.0
    tau = 1.0 / rate if rate > 0 else math.inf
    return ModifiedRiemannSolution(left, right, sm, sp, float(rate), tau, float(mass))
