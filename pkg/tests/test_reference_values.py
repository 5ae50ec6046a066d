import math

import numpy as np
import pytest

from hardy_ground_states import extremals as ex
from hardy_ground_states import nehari as nh
from hardy_ground_states import scaling_system as ss
from hardy_ground_states.constraint_checker import TwoComponentSpec, check_matrix_F_conditions
from hardy_ground_states.coupled_ground_states import (GammaSpec, HypothesisError, assemble_state,
                                                       solve_gamma_system, solve_two_component,
                                                       symmetric_two_component_c)
from hardy_ground_states.extremals import Bubble, HardyParams
from hardy_ground_states.grid import RadialGrid
from hardy_ground_states.nehari import BubbleTuple, CouplingSpec
from hardy_ground_states.radial_solver import separated_bubble_experiment


# -- single bubble ------------------------------------------------------------

def test_lambda_zero_exponent_and_amplitude():
    assert HardyParams(4, 0.0).a == 0.0
    b = Bubble(HardyParams(4, 0.0), 1.0, ex.TALENTI_POWER)
    assert float(b(1e-9)) == pytest.approx(math.sqrt(8.0), rel=1e-12)


@pytest.mark.parametrize("N,lam", [(4, 0.5), (5, 1.2), (3, 0.2)])
def test_dilation_identity(N, lam):
    p = HardyParams(N, lam)
    r = np.geomspace(1e-3, 1e3, 17)
    b1, b2 = Bubble(p, 1.0), Bubble(p, 2.0)
    np.testing.assert_allclose(b2(r), 2 ** (-(N - 2) / 2) * b1(r / 2), rtol=1e-13)


def test_singular_limit_at_origin():
    b = Bubble(HardyParams(4, 0.75))
    vals = [float(b(r)) * r**0.5 for r in (1e-6, 1e-8, 1e-10)]
    assert vals[-1] > 0
    assert vals[0] == pytest.approx(vals[-1], rel=1e-5)


def test_S_lambda_examples():
    S = ex.sharp_sobolev_constant(4)
    assert ex.sobolev_constants(HardyParams(4, 0.5)).S_lambda == pytest.approx(0.5**0.75 * S)
    near = [ex.sobolev_constants(HardyParams(4, 1 - e)).S_lambda for e in (1e-4, 1e-8, 1e-12)]
    assert near[0] > near[1] > near[2]
    assert near[2] == pytest.approx(1e-9 * S, rel=1e-6)  # factor (4 eps)^(3/4) / 4^(3/4)
    assert ex.bubble_energy(Bubble(HardyParams(4, 0.0))) == pytest.approx(S**2 / 4, rel=1e-9)
    th = ex.theta_single(HardyParams(4, 0.5))
    assert ex.bubble_energy(Bubble(HardyParams(4, 0.5))) == pytest.approx(th, rel=1e-9)
    S_half = ex.sobolev_constants(HardyParams(4, 0.5)).S_lambda
    assert th == pytest.approx(S_half**2 / 4, rel=1e-14)


# -- functionals ----------------------------------------------------------------

def test_zero_tuple_energy():
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    assert nh.energy(BubbleTuple.of_spec(spec, amplitudes=[0.0, 0.0])) == 0.0


def test_decoupled_energy_is_sum():
    spec = CouplingSpec.uniform(4, [0.3, 0.7], 0.0)
    want = ex.theta_single(HardyParams(4, 0.3)) + ex.theta_single(HardyParams(4, 0.7))
    assert nh.energy(BubbleTuple.of_spec(spec)) == pytest.approx(want, rel=1e-9)


def test_two_by_two_gamma_energy():
    spec = GammaSpec(0.4, [[1.0, 0.5], [0.5, 2.0]])
    gs = solve_gamma_system(spec)
    bt = BubbleTuple.of_spec(spec.coupling_spec(), amplitudes=np.sqrt(gs.c))
    th = ex.theta_single(HardyParams(4, 0.4))
    assert nh.energy(bt) == pytest.approx(gs.c.sum() * th, rel=1e-9)


def test_defect_signs_after_doubling():
    spec = CouplingSpec.uniform(4, [0.5, 0.5], 1.0)
    t = (1 / 3) ** 0.5
    u = BubbleTuple.of_spec(spec, amplitudes=[t, t])
    assert np.max(np.abs(nh.nehari_defect(u))) < 1e-9
    assert np.all(nh.nehari_defect(u.scaled(2.0)) < 0)
    assert np.all(nh.nehari_defect(u.scaled(0.5)) > 0)
    assert nh.diagonal_scaling(u) == pytest.approx(1.0, rel=1e-10)


def test_projection_invariant_under_scaling():
    spec = CouplingSpec.uniform(5, [0.5, 1.0, 1.5], 0.4)
    u = BubbleTuple.of_spec(spec, mus=[1.0, 2.0, 0.5], amplitudes=[1.0, 0.3, 2.0])
    levels = []
    for c in (0.1, 1.0, 7.0):
        _, v = nh.nehari_project_diagonal(u.scaled(c))
        levels.append(nh.energy(v))
    assert levels[0] == pytest.approx(levels[1], rel=1e-12)
    assert levels[2] == pytest.approx(levels[1], rel=1e-12)
    assert nh.theta_prime_quotient(u) == pytest.approx(levels[1], rel=1e-10)


def test_positive_coupling_lowers_diagonal_scaling():
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 0.5)
    assert nh.diagonal_scaling(BubbleTuple.of_spec(spec)) < 1.0


def test_single_bubble_quotient():
    spec = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    u = BubbleTuple.of_spec(spec, amplitudes=[1.3, 0.0])
    assert nh.theta_prime_quotient(u) == pytest.approx(ex.theta_single(HardyParams(4, 0.5)),
                                                        rel=1e-9)


def test_gamma_quotient_value():
    spec = GammaSpec(0.5, np.array([[1.0, 2, 2], [2, 1, 2], [2, 2, 1]]))
    gs = solve_gamma_system(spec)
    u = BubbleTuple.of_spec(spec.coupling_spec(), amplitudes=[1.0, 1.0, 1.0])
    assert nh.theta_prime_quotient(u) == pytest.approx(gs.energy, rel=1e-9)


def test_predicate_extremes():
    big = nh.existence_threshold_predicate(CouplingSpec.uniform(4, [0.5, 0.5], 100.0))
    assert big.holds and big.rhs == pytest.approx(4.0)
    small = nh.existence_threshold_predicate(CouplingSpec.uniform(4, [0.5, 0.5], 1e-9))
    assert not small.holds
    assert small.lhs == pytest.approx(2.0)


def test_b_table_three_components():
    # only one index k survives the exclusion of j and l
    spec = CouplingSpec.uniform(4, [0.5, 0.5, 0.5], 1.0)
    B = nh.b_table(spec)
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(B[off], 1 + spec.crit / 2)


def test_nonexistence_level_three():
    spec = CouplingSpec.uniform(4, [0.1, 0.2, 0.3], -1.0)
    want = sum(ex.theta_single(HardyParams(4, l)) for l in (0.1, 0.2, 0.3))
    assert nh.nonexistence_level(spec) == pytest.approx(want)


# -- scaling system ---------------------------------------------------------------

@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_small_coupling_certificate_linear(eps):
    al = np.full((2, 2), 2.0)
    p = ss.ScalingProblem(4, [1.0, 1.0], [1.0, 1.0], [[0, eps], [eps, 0]], al)
    rep = ss.check_solvability(p)
    assert rep.solvable
    assert 0.5 * eps < rep.d < 20 * eps


def test_large_coupling_makes_C_nonpositive():
    al = np.array([[0.0, 2.5], [1.5, 0.0]])
    p = ss.ScalingProblem(4, [1.0, 1.0], [1.0, 1.0], [[0, 40.0], [40.0, 0]], al)
    assert np.min(p.C()) <= 0
    rep = ss.check_solvability(p)
    assert not rep.solvable and np.isnan(rep.box[1])


def test_uncoupled_newton_single_root():
    p = ss.ScalingProblem(5, [1.0, 3.0, 2.0], [2.0, 1.0, 1.0], np.zeros((3, 3)),
                          np.full((3, 3), 5 / 3))
    roots = ss.solve_newton_oracle(p, starts=32)
    assert len(roots) == 1
    np.testing.assert_allclose(roots[0], p.base_point, rtol=1e-13)


def test_solution_family_monotone_in_coupling():
    p = ss.random_admissible_problem(np.random.default_rng(9), 3, 4)
    ts = [ss.solve_picard(p.scaled_coupling(s), require_certificate=False).t
          for s in (1.0, 0.5, 0.25, 0.0)]
    for a, b in zip(ts, ts[1:]):
        assert np.all(a >= b)
    np.testing.assert_allclose(ts[-1], p.base_point, rtol=1e-14)


# -- thresholds and constructions ------------------------------------------------

def test_uncoupled_determinant_positive():
    spec = TwoComponentSpec.from_alpha(5, 1.5, 0.0)
    c = check_matrix_F_conditions(spec, 0.7, 1.9)
    assert not c.detF_neg
    assert np.linalg.det(spec.F(0.7, 1.9)) == pytest.approx(
        (spec.p - 1) ** 2 * (0.7 * 1.9) ** (spec.p - 2))


@pytest.mark.parametrize("r,b", [(2, 0.5), (3, 0.7), (4, 2.5)])
def test_equal_off_diagonal_gamma(r, b):
    G = np.full((r, r), b)
    np.fill_diagonal(G, 1.0)
    gs = solve_gamma_system(GammaSpec(0.5, G))
    np.testing.assert_allclose(gs.c, 1 / (1 + (r - 1) * b), rtol=1e-14)


def test_tridiagonal_gamma_is_semi_trivial():
    # gamma c = 1 gives c = (1/2, 0, 1/2): a vanishing component, so no positive ground state
    G = np.array([[2.0, 1, 0], [1, 2, 1], [0, 1, 2]])
    c = np.linalg.solve(G, np.ones(3))
    assert np.max(np.abs(G @ c - 1)) < 1e-14
    np.testing.assert_allclose(c, [0.5, 0.0, 0.5], atol=1e-15)
    with pytest.raises(HypothesisError):
        solve_gamma_system(GammaSpec(0.5, G))


def test_weak_coupling_decouples():
    gs = solve_two_component(TwoComponentSpec.from_alpha(5, 1.5, 1e-8), 0.5)
    np.testing.assert_allclose(gs.c, 1.0, rtol=1e-6)


def test_bisection_example():
    spec = TwoComponentSpec.from_alpha(5, 1.4, 1.0)
    gs = solve_two_component(spec, 0.5)
    assert np.max(np.abs(spec.f(gs.c) - 1)) < 1e-12


def test_symmetric_two_component_state_scaled_by_sqrt_c():
    spec = TwoComponentSpec(6, 1.5, 1.5, 1.0)
    gs = solve_two_component(spec, 1.0)
    c = symmetric_two_component_c(6, 1.0)
    grid = RadialGrid(6, 1e-3, 1e3, 128)
    u = assemble_state(gs, grid, spec)
    z = Bubble(HardyParams(6, 1.0))(grid.r)
    for comp in u.components:
        np.testing.assert_allclose(comp.values, math.sqrt(c) * z, rtol=1e-10)


def test_weaker_repulsion_closer_to_infimum():
    spec = CouplingSpec.uniform(4, [0.25, 0.25], -0.5)
    weak = spec.with_betas([[0, -0.05], [-0.05, 0]])
    inf = nh.nonexistence_level(spec)
    strong_row = separated_bubble_experiment(spec, (16,))[0]
    weak_row = separated_bubble_experiment(weak, (16,))[0]
    assert inf < weak_row.J < strong_row.J
