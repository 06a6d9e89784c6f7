"""Property tests of the evolution invariants on random small configurations."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from mvcl.evolution import SolverConfig, max_principle_violation, run, run_synchronized
from mvcl.flux import bump, inverse_power, monotone_tanh, plateau
from mvcl.state import Grid, from_config
from mvcl.verification import check_comparison, check_contraction

G = Grid(-1.0, 1.0, 40)
FLUXES = [inverse_power(1.0), inverse_power(0.5), bump(), plateau(1.0), monotone_tanh()]
SETTINGS = settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])

values = st.floats(0.0, 2.0, allow_nan=False)
masses = st.floats(0.05, 1.0, allow_nan=False)


@st.composite
def pieces(draw):
    """Three piecewise-constant pieces on [-1, 1]."""
    cuts = sorted(draw(st.lists(st.floats(-0.9, 0.9), min_size=2, max_size=2)))
    vals = draw(st.lists(values, min_size=3, max_size=3))
    edges = [-1.0, *cuts, 1.0]
    return [{"from": a, "to": b, "value": v} for a, b, v in zip(edges, edges[1:], vals)]


atom_sets = st.lists(st.tuples(st.sampled_from([-0.5, 0.0, 0.5]), masses), max_size=2,
                     unique_by=lambda a: a[0])


@SETTINGS
@given(pieces(), atom_sets, st.sampled_from(range(len(FLUXES))))
def test_conservation_monotone_atoms_and_max_principle(reg, atoms, which):
    tr = run(from_config(G, reg, atoms), FLUXES[which], SolverConfig(end_time=0.3))
    assert np.all(np.abs(tr.mass_residuals) <= 1e-12 * np.maximum(tr.masses, 1.0))
    assert np.all(np.diff(tr.atom_mass, axis=0) <= 1e-15)
    assert np.all(tr.atom_mass >= 0) and np.all(tr.regular >= -1e-14)
    led = tr.ledger.as_arrays()
    live = ~np.isnan(led["h_minus"])
    assert np.all(led["h_plus"][live] >= led["h_minus"][live] - 1e-14)
    worst = max((max_principle_violation(tr.regular[i], tr.regular[i + 1], tr.atom_index)
                 for i in range(len(tr.times) - 1)), default=0.0)
    assert worst <= 1e-12


@SETTINGS
@given(pieces(), pieces(), st.lists(masses, min_size=1, max_size=1), st.sampled_from(range(len(FLUXES))))
def test_contraction_with_shared_atoms(reg_u, reg_v, mass, which):
    atoms = [(0.5, mass[0])]
    a, b = run_synchronized([from_config(G, reg_u, atoms), from_config(G, reg_v, atoms)], FLUXES[which],
                            SolverConfig(end_time=0.3))
    # the window ends at the atom: the inequality holds between atoms
    assert check_contraction(a, b, (-1.0, 0.5)).passed


@SETTINGS
@given(pieces(), st.lists(values, min_size=3, max_size=3), atom_sets, st.lists(masses, min_size=2, max_size=2),
       st.sampled_from(range(len(FLUXES))))
def test_comparison_is_preserved(reg, extra, atoms, extra_mass, which):
    bigger = [dict(p, value=p["value"] + e) for p, e in zip(reg, extra)]
    big_atoms = [(x, m + e) for (x, m), e in zip(atoms, extra_mass)]
    u, v = run_synchronized([from_config(G, reg, atoms), from_config(G, bigger, big_atoms)], FLUXES[which],
                            SolverConfig(end_time=0.3))
    assert all(c.passed for c in check_comparison(u, v))
