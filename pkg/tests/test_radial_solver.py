import json
import math

import numpy as np
import pytest

from hardy_ground_states import radial_solver as rs
from hardy_ground_states.constraint_checker import TwoComponentSpec
from hardy_ground_states.coupled_ground_states import (solve_gamma_system, solve_two_component,
                                                       two_component_coupling_spec)
from hardy_ground_states.extremals import Bubble, DomainError, HardyParams, theta_single
from hardy_ground_states.grid import GridError, RadialGrid
from hardy_ground_states.nehari import (BubbleTuple, CouplingSpec, PredicateNotApplicable,
                                        StateTuple, existence_energy_bound)


def test_pde_residual_small_for_bubble_pair():
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 0.0)
    grid = RadialGrid(4, 1e-4, 1e4, 1024)
    u = BubbleTuple.of_spec(spec).sample(grid)
    res = rs.pde_residual(u)
    u2 = BubbleTuple.of_spec(spec).sample(grid.refined())
    assert np.all(res / rs.pde_residual(u2) > 3.5)


def test_minimizer_recovers_gamma_level(gamma3, grid4):
    spec = gamma3.coupling_spec()
    exact = solve_gamma_system(gamma3).energy
    rep = rs.minimize_theta(spec, grid4, "coupled-bubble")
    assert rep.converged
    assert abs(rep.theta_estimate / exact - 1) < 1e-3
    assert np.all(np.abs(rep.nehari_defects) < 1e-6 * rep.per_component_norms**2)
    assert abs(rep.diagonal_defect) < 1e-8 * exact


def test_minimizer_from_noisy_start(gamma3, grid4):
    spec = gamma3.coupling_spec()
    rng = np.random.default_rng(7)
    base = rs.initial_profiles(spec, grid4, "random", seed=3)
    # smooth multiplicative noise, kept positive
    modes = np.array([np.sin((k + 1) * np.pi * (grid4.s - grid4.s[0]) / (grid4.s[-1] - grid4.s[0]))
                      for k in range(6)])
    V = base * (1 + 0.3 * np.tanh(rng.normal(size=(spec.r, 6)) @ modes))
    init = StateTuple.from_profiles(spec, grid4, V)
    rep = rs.minimize_theta(spec, grid4, init)
    rep0 = rs.minimize_theta(spec, grid4, "coupled-bubble")
    assert rep.converged
    assert rep.theta_estimate == pytest.approx(rep0.theta_estimate, rel=1e-7)


def test_history_decreasing(gamma3, grid4):
    rep = rs.minimize_theta(gamma3.coupling_spec(), grid4, "independent-bubbles",
                            rs.MinimizeOptions(checkpoint_every=1))
    Q = np.array([h[1] for h in rep.history])
    assert np.all(np.diff(Q) <= 64 * np.finfo(float).eps * Q[:-1])


def test_decoupled_levels_add(grid4):
    spec = CouplingSpec.uniform(4, [0.5, 0.7], 0.0)
    rep = rs.minimize_theta(spec, grid4)
    want = theta_single(HardyParams(4, 0.5)) + theta_single(HardyParams(4, 0.7))
    assert rep.theta_estimate == pytest.approx(want, rel=1e-3)
    assert rs.nonexistence_infimum(spec) == pytest.approx(want)


def test_bound_holds_for_asymmetric_pair(grid4):
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    rep = rs.minimize_theta(spec, grid4, "random")
    assert rep.converged
    assert rep.theta_estimate < existence_energy_bound(spec)
    assert np.all(rep.per_component_norms > 0)


def test_two_component_level(grid5):
    ts = TwoComponentSpec.from_alpha(5, 1.5, 2.0)
    gs = solve_two_component(ts, 0.5)
    spec = two_component_coupling_spec(ts, 0.5)
    rep = rs.minimize_theta(spec, grid5)
    assert rep.theta_estimate == pytest.approx(gs.energy, rel=2e-3)
    assert rep.theta_estimate <= gs.energy * (1 + 1e-3)


def test_richardson_tightens(gamma3, grid4):
    exact = solve_gamma_system(gamma3).energy
    rr = rs.richardson_theta(gamma3.coupling_spec(), grid4)
    assert abs(rr.extrapolated - exact) < 0.1 * abs(rr.fine - exact)
    assert rr.M == grid4.M


def test_repulsive_rejected(grid4):
    with pytest.raises(PredicateNotApplicable):
        rs.minimize_theta(CouplingSpec.uniform(4, [0.5, 0.6], -0.5), grid4)


def test_grid_mismatch(gamma3, grid5):
    with pytest.raises(GridError):
        rs.minimize_theta(gamma3.coupling_spec(), grid5)


def test_bad_preset(gamma3, grid4):
    with pytest.raises(ValueError):
        rs.initial_profiles(gamma3.coupling_spec(), grid4, "sideways")


def test_report_json_roundtrip(gamma3, grid4):
    rep = rs.minimize_theta(gamma3.coupling_spec(), grid4, "coupled-bubble")
    back = rs.MinimizeReport.from_dict(json.loads(rep.to_json()))
    assert back.theta_estimate == rep.theta_estimate
    np.testing.assert_array_equal(back.nehari_defects, rep.nehari_defects)
    assert back.history == [tuple(h) for h in rep.history]


def test_minimizer_deterministic(gamma3, grid4):
    a = rs.minimize_theta(gamma3.coupling_spec(), grid4, "random")
    b = rs.minimize_theta(gamma3.coupling_spec(), grid4, "random")
    assert a.to_json() == b.to_json()


def test_separated_bubbles_approach_infimum():
    spec = CouplingSpec.uniform(4, [0.25, 0.25], -0.5)
    rows = rs.separated_bubble_experiment(spec, (4, 16, 64))
    J = np.array([r.J for r in rows])
    inf = rs.nonexistence_infimum(spec)
    assert np.all(J > inf)
    assert np.all(np.diff(J) < 0)
    assert all(r.solvable for r in rows)
    assert rows[-1].certified
    with pytest.raises(PredicateNotApplicable):
        rs.separated_bubble_experiment(CouplingSpec.uniform(4, [0.5, 0.5], 0.5))


def test_symmetry_diagnostic():
    b = Bubble(HardyParams(4, 0.5))
    radial = lambda x: b(np.linalg.norm(x, axis=1))
    tilted = lambda x: b(np.linalg.norm(x, axis=1)) * (1 + 0.3 * x[:, 0] / np.linalg.norm(x, axis=1))
    assert rs.symmetry_diagnostic(radial, N=4) < 1e-12
    assert rs.symmetry_diagnostic(tilted, N=4) > 0.1
    shifted = lambda x: b(np.linalg.norm(x - np.array([0.5, 0, 0, 0]), axis=1))
    assert rs.symmetry_diagnostic(shifted, probe_count=12, N=4) > 1e-2
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 0.0)
    assert rs.symmetry_diagnostic(BubbleTuple.of_spec(spec)) == 0.0
    with pytest.raises(DomainError):
        rs.symmetry_diagnostic(radial)
    with pytest.raises(DomainError):
        rs.symmetry_diagnostic(radial, probe_count=1, N=4)


def test_probe_directions_unit():
    d = rs.probe_directions(5, 20, seed=2)
    assert d.shape == (20, 5)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)


def test_fields_csv():
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    grid = RadialGrid(4, 1e-2, 1e2, 64)
    u = BubbleTuple.of_spec(spec).sample(grid)
    lines = rs.fields_csv(u).splitlines()
    assert lines[0] == "r,u1,u2"
    assert len(lines) == 65
    r0, u10, _ = map(float, lines[1].split(","))
    assert r0 == grid.r[0] and u10 == u.components[0].values[0]


def test_interpolate_profiles_exact_on_nodes():
    coarse = RadialGrid(4, 1e-2, 1e2, 64)
    fine = coarse.refined()
    V = np.vstack([np.cos(coarse.s), np.exp(-coarse.s**2)])
    W = rs.interpolate_profiles(V, coarse, fine)
    np.testing.assert_allclose(W[:, ::2], V, atol=1e-14)


def test_componentwise_projection(grid4):
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    u = BubbleTuple.of_spec(spec, mus=[1.0, 3.0]).sample(grid4)
    t, v = rs.nehari_project_componentwise(u)
    assert np.all(t > 0)
    from hardy_ground_states.nehari import nehari_defect
    assert np.max(np.abs(nehari_defect(v)) / v.integrals().norms) < 1e-12
    rep = rs.minimize_theta(spec, grid4, "random", rs.MinimizeOptions(refine=True))
    assert rep.init.endswith("+componentwise")
    assert np.max(np.abs(rep.nehari_defects)) < 1e-12


def test_zero_tuple_residual(grid4):
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    u = StateTuple.from_profiles(spec, grid4, np.zeros((2, grid4.M)))
    np.testing.assert_array_equal(rs.pde_residual(u), 0.0)


def test_exact_solution_sampled_on_rays_is_symmetric(gamma3):
    gs = solve_gamma_system(gamma3)
    z = Bubble(HardyParams(4, 0.5))
    sampled = lambda x: np.sqrt(gs.c)[None, :] * z(np.linalg.norm(x, axis=1))[:, None]
    assert rs.symmetry_diagnostic(sampled, probe_count=10, N=4) < 1e-12


def test_stop_reason_recorded(gamma3, grid4):
    rep = rs.minimize_theta(gamma3.coupling_spec(), grid4, "coupled-bubble")
    assert rep.stop_reason in ("gradient", "energy-stagnation")
    rep = rs.minimize_theta(gamma3.coupling_spec(), grid4, "coupled-bubble",
                            rs.MinimizeOptions(max_iter=1, tol=1e-15, ftol=0.0))
    assert not rep.converged and rep.stop_reason == "max-iter"
