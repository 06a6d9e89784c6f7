"""Hot loops of the finite-volume scheme.

Two interchangeable implementations live here: compiled loops (numba) and
vectorised numpy.  ``MVCL_BACKEND=numpy`` forces the numpy path; the default
is numba when it imports, numpy otherwise.  Both consume the flux tables
produced by :meth:`mvcl.flux.FluxModel.kernel_tables` plus the suffix extrema,
and give identical results up to rounding in the last bit.
"""

from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

from .flux import TAIL_OSCILLATING, FluxModel


class FluxTables(NamedTuple):
    ext_u: np.ndarray
    ext_phi: np.ndarray
    suffix_min: np.ndarray
    suffix_max: np.ndarray
    tail_kind: int
    u_tail: float
    tail_low: float
    tail_high: float


def tables_for(flux: FluxModel) -> FluxTables:
    ext_u, ext_phi, kind, u_tail, lo, hi = flux.kernel_tables()
    return FluxTables(
        np.ascontiguousarray(ext_u),
        np.ascontiguousarray(ext_phi),
        np.ascontiguousarray(flux._suffix_min),
        np.ascontiguousarray(flux._suffix_max),
        int(kind),
        float(u_tail),
        float(lo),
        float(hi),
    )


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _godunov_np(a, b, fa, fb, t: FluxTables):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    inside = (t.ext_u[:, None] > lo[None, :]) & (t.ext_u[:, None] < hi[None, :])
    ext = t.ext_phi[:, None]
    inner_min = np.where(inside, ext, np.inf).min(axis=0)
    inner_max = np.where(inside, ext, -np.inf).max(axis=0)
    gmin = np.minimum(np.minimum(fa, fb), inner_min)
    gmax = np.maximum(np.maximum(fa, fb), inner_max)
    if t.tail_kind == TAIL_OSCILLATING:
        beyond = hi > t.u_tail
        gmin = np.where(beyond, np.minimum(gmin, t.tail_low), gmin)
        gmax = np.where(beyond, np.maximum(gmax, t.tail_high), gmax)
    return np.where(a <= b, gmin, gmax)


def _inf_from_np(a, fa, t: FluxTables):
    i0 = np.searchsorted(t.ext_u, a, side="right")
    n = len(t.ext_u)
    suffix = np.where(i0 < n, t.suffix_min[np.minimum(i0, n - 1)], np.inf)
    return np.minimum(np.minimum(fa, suffix), t.tail_low)


def _sup_from_np(b, fb, t: FluxTables):
    i0 = np.searchsorted(t.ext_u, b, side="right")
    n = len(t.ext_u)
    suffix = np.where(i0 < n, t.suffix_max[np.minimum(i0, n - 1)], -np.inf)
    return np.maximum(np.maximum(fb, suffix), t.tail_high)


def interface_fluxes_numpy(u, phi_u, t: FluxTables):
    n = len(u)
    f = np.empty(n + 1)
    f[0] = phi_u[0]
    f[n] = phi_u[n - 1]
    if n > 1:
        f[1:n] = _godunov_np(u[:-1], u[1:], phi_u[:-1], phi_u[1:], t)
    return f


def atom_fluxes_numpy(u_left, phi_left, u_right, phi_right, t: FluxTables, phantom, phi_phantom):
    if phantom > 0:
        m = np.full_like(u_left, phantom)
        fm = np.full_like(u_left, phi_phantom)
        h_minus = _godunov_np(u_left, m, phi_left, fm, t)
        h_plus = _godunov_np(m, u_right, fm, phi_right, t)
    else:
        h_minus = _inf_from_np(u_left, phi_left, t)
        h_plus = _sup_from_np(u_right, phi_right, t)
    return h_minus, h_plus


def update_numpy(u, f_out, f_in, lam):
    return u - lam * (f_out[1:] - f_in[:-1])


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------


def _range_extreme(a, b, fa, fb, ext_u, ext_phi, tail_kind, u_tail, tail_low, tail_high):
    if a <= b:
        lo, hi = a, b
        m = min(fa, fb)
    else:
        lo, hi = b, a
        m = max(fa, fb)
    n = ext_u.shape[0]
    # first candidate strictly above lo
    left, right = 0, n
    while left < right:
        mid = (left + right) // 2
        if ext_u[mid] <= lo:
            left = mid + 1
        else:
            right = mid
    i = left
    while i < n and ext_u[i] < hi:
        v = ext_phi[i]
        if a <= b:
            if v < m:
                m = v
        elif v > m:
            m = v
        i += 1
    if tail_kind == 1 and hi > u_tail:
        if a <= b:
            m = min(m, tail_low)
        else:
            m = max(m, tail_high)
    return m


def _suffix_index(x, ext_u):
    n = ext_u.shape[0]
    left, right = 0, n
    while left < right:
        mid = (left + right) // 2
        if ext_u[mid] <= x:
            left = mid + 1
        else:
            right = mid
    return left


def _interface_fluxes_loop(u, phi_u, ext_u, ext_phi, tail_kind, u_tail, tail_low, tail_high):
    n = u.shape[0]
    f = np.empty(n + 1)
    f[0] = phi_u[0]
    f[n] = phi_u[n - 1]
    for k in range(1, n):
        f[k] = _range_extreme(
            u[k - 1], u[k], phi_u[k - 1], phi_u[k],
            ext_u, ext_phi, tail_kind, u_tail, tail_low, tail_high,
        )
    return f


def _atom_fluxes_loop(
    u_left, phi_left, u_right, phi_right,
    ext_u, ext_phi, suffix_min, suffix_max,
    tail_kind, u_tail, tail_low, tail_high,
    phantom, phi_phantom,
):
    m = u_left.shape[0]
    n_ext = ext_u.shape[0]
    h_minus = np.empty(m)
    h_plus = np.empty(m)
    for j in range(m):
        if phantom > 0:
            h_minus[j] = _range_extreme(
                u_left[j], phantom, phi_left[j], phi_phantom,
                ext_u, ext_phi, tail_kind, u_tail, tail_low, tail_high,
            )
            h_plus[j] = _range_extreme(
                phantom, u_right[j], phi_phantom, phi_right[j],
                ext_u, ext_phi, tail_kind, u_tail, tail_low, tail_high,
            )
        else:
            v = min(phi_left[j], tail_low)
            i0 = _suffix_index(u_left[j], ext_u)
            if i0 < n_ext:
                v = min(v, suffix_min[i0])
            h_minus[j] = v
            w = max(phi_right[j], tail_high)
            i1 = _suffix_index(u_right[j], ext_u)
            if i1 < n_ext:
                w = max(w, suffix_max[i1])
            h_plus[j] = w
    return h_minus, h_plus


def _update_loop(u, f_out, f_in, lam):
    n = u.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = u[i] - lam * (f_out[i + 1] - f_in[i])
    return out


def _compile():
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return None
    jit = numba.njit(cache=False, nogil=True)
    g = globals()
    g["_range_extreme"] = jit(_range_extreme)
    g["_suffix_index"] = jit(_suffix_index)
    return {
        "interface": jit(_interface_fluxes_loop),
        "atoms": jit(_atom_fluxes_loop),
        "update": jit(_update_loop),
    }


_JIT: dict | None = None


def _jit():
    global _JIT
    if _JIT is None:
        _JIT = _compile()
        if _JIT is None:
            raise RuntimeError("numba backend unavailable")
    return _JIT


def _pick_backend() -> str:
    requested = os.environ.get("MVCL_BACKEND", "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"MVCL_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:  # pragma: no cover
            return "numpy"
    return requested


BACKEND = _pick_backend()


def interface_fluxes_numba(u, phi_u, t: FluxTables):
    return _jit()["interface"](u, phi_u, t.ext_u, t.ext_phi, t.tail_kind, t.u_tail, t.tail_low, t.tail_high)


def atom_fluxes_numba(u_left, phi_left, u_right, phi_right, t: FluxTables, phantom, phi_phantom):
    return _jit()["atoms"](
        u_left, phi_left, u_right, phi_right,
        t.ext_u, t.ext_phi, t.suffix_min, t.suffix_max,
        t.tail_kind, t.u_tail, t.tail_low, t.tail_high,
        float(phantom), float(phi_phantom),
    )


def update_numba(u, f_out, f_in, lam):
    return _jit()["update"](u, f_out, f_in, float(lam))


def get_backend(name: str | None = None):
    """Return ``(interface_fluxes, atom_fluxes, update)`` for a backend."""
    name = name or BACKEND
    if name == "numba":
        _jit()
        return interface_fluxes_numba, atom_fluxes_numba, update_numba
    if name == "numpy":
        return interface_fluxes_numpy, atom_fluxes_numpy, update_numpy
    raise ValueError(f"unknown backend {name!r}")
