import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trussoa.cases import gen_case
from trussoa.catalog import MATERIALS, CatalogEntry, CatalogSet, default_profiles
from trussoa.exceptions import InconsistentKKTError, QualificationError
from trussoa.fem import TrussModel
from trussoa.gradcheck import check_psi_gradient
from trussoa.model import ChoiceMatrix, evaluate
from trussoa.postopt import (ActiveSets, QualificationWarning, detect_active, kkt_multipliers,
                             post_optimal_gradient, psi_gradient)
from trussoa.slave import solve_slave


def fake_solution(model, catalogs, a, B, lower, upper):
    ev = evaluate(model, catalogs, a, B, want_gradients=True)
    ubar = np.abs(model.disp_bounds)
    return SimpleNamespace(constraint_values=ev, a_star=np.asarray(a, float), stress_scale=200.0,
                           disp_scale=np.where(ubar > 0, ubar, 1.0),
                           lower=np.full(len(a), lower), upper=np.full(len(a), upper))


@pytest.fixture(scope="module")
def two_bar():
    case = gen_case("two-bar")
    m, c = case.to_model(), case.to_catalogs()
    s0 = solve_slave(m, c, case.b0(), case.a_init(), case.bounds)
    s1 = solve_slave(m, c, ChoiceMatrix.from_catalogs([0, 1], 2), case.a_init(), case.bounds)
    return s0, s1


def test_active_sets_invariants():
    assert ActiveSets(stress=[5, 1]).stress == (1, 5)
    with pytest.raises(ValueError):
        ActiveSets(lower=[0], upper=[0])


def test_interior_point_has_no_active_constraints():
    case = gen_case("ten-bar", ubar=60)
    m, c = case.to_model(), case.to_catalogs()
    sol = fake_solution(m, c, np.full(10, 700.0), ChoiceMatrix.from_catalogs([1] * 10, 2), 100.0, 1300.0)
    assert detect_active(sol).size == 0


def test_unloaded_lower_bound_point():
    case = gen_case("ten-bar")
    full = case.to_model()
    m = TrussModel(full.nodes, full.bars, full.fixed_dofs, None, full.disp_selector, full.disp_bounds)
    c = case.to_catalogs()
    B = ChoiceMatrix.from_catalogs([0] * 10, 2)
    sol = fake_solution(m, c, np.full(10, 100.0), B, 100.0, 1300.0)
    act = detect_active(sol)
    assert act.lower == tuple(range(10)) and not act.stress and not act.disp and not act.upper
    ev = sol.constraint_values
    mults = kkt_multipliers(ev.dw_da, ev.ds_da, ev.ddelta_da, act)
    assert np.allclose(mults.lambda_lb, ev.dw_da, rtol=1e-12)
    grad = psi_gradient(ev.dw_dB, ev.ds_dB, ev.ddelta_dB, mults, act)
    # only the direct weight term survives: rho_c l_i a_lb
    expected = (c.density[None, :] * m.lengths[:, None] * 100.0).reshape(-1)
    assert np.allclose(grad, expected, rtol=1e-12)


def test_two_bar_active_sets_and_multipliers(two_bar):
    s0, _ = two_bar
    act, mults, grad = post_optimal_gradient(s0)
    assert act.lower == (0,)
    assert act.stress == (4,)  # tension limit of the second bar
    assert not act.disp and not act.upper
    assert mults.lambda_lb[0] == pytest.approx(6.26e-3, rel=1e-2)
    # multiplier of the tension limit expressed per 100 MPa
    assert 100.0 * mults.lambda_s[0] == pytest.approx(2.49, rel=1e-2)
    assert np.allclose(grad, [1.2, 1.9, 3.7, -17.7], atol=0.05)


def test_two_bar_gradient_at_second_point(two_bar):
    _, s1 = two_bar
    _, _, grad = post_optimal_gradient(s1)
    assert np.allclose(grad, [1.19, 1.88, 1.19, 1.88], atol=5e-3)


def test_empty_active_set():
    n = 3
    m = kkt_multipliers(np.zeros(n), np.zeros((4 * n, n)), np.zeros((0, n)), ActiveSets())
    assert m.lambda_s.size == m.lambda_delta.size == m.lambda_lb.size == m.lambda_ub.size == 0
    with pytest.raises(InconsistentKKTError):
        kkt_multipliers(np.ones(n), np.zeros((4 * n, n)), np.zeros((0, n)), ActiveSets())


def test_dependent_gradients():
    n = 2
    ds = np.zeros((4 * n, n))
    ds[0] = [-1.0, -1.0]
    ds[4] = [-2.0, -2.0]
    act = ActiveSets(stress=[0, 4])
    with pytest.raises(QualificationError):
        kkt_multipliers(np.array([1.0, 1.0]), ds, np.zeros((0, n)), act, on_dependent="raise")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mults = kkt_multipliers(np.array([1.0, 1.0]), ds, np.zeros((0, n)), act)
    assert any(issubclass(w.category, QualificationWarning) for w in caught)
    assert mults.degraded and mults.residual <= 1e-12
    assert np.all(mults.lambda_s >= 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_multipliers_invariant_under_reordering(seed):
    rng = np.random.default_rng(seed)
    n, k = 6, 3
    J = rng.normal(size=(k, n))
    lam_true = rng.uniform(0.1, 2.0, k)
    dw = -J.T @ lam_true
    rows = rng.choice(4 * n, size=k, replace=False)
    ds = np.zeros((4 * n, n))
    ds[rows] = J
    base = kkt_multipliers(dw, ds, np.zeros((0, n)), ActiveSets(stress=rows))
    perm = rng.permutation(4 * n)
    inv = np.argsort(perm)
    ds_p = ds[perm]  # row r of ds_p is row perm[r] of ds
    moved = kkt_multipliers(dw, ds_p, np.zeros((0, n)), ActiveSets(stress=inv[rows]))
    by_row = dict(zip(ActiveSets(stress=rows).stress, base.lambda_s))
    by_row_p = {int(perm[r]): v for r, v in zip(ActiveSets(stress=inv[rows]).stress, moved.lambda_s)}
    for r in by_row:
        assert by_row[r] == pytest.approx(by_row_p[r], abs=1e-8)
        assert by_row[r] == pytest.approx(lam_true[list(rows).index(r)], rel=1e-8)


def test_single_bar_at_lower_bound_gradient():
    profiles = default_profiles()
    c = CatalogSet((CatalogEntry(MATERIALS["AL2139"], profiles["I1"]),
                    CatalogEntry(MATERIALS["TA6V"], profiles["I1"])))
    m = TrussModel(nodes=[[0, 0], [1000, 0]], bars=[[0, 1]], fixed_dofs=[(0, 0), (0, 1), (1, 1)],
                   loads=[[0, 0], [1e3, 0]])
    sol = solve_slave(m, c, [[1.0, 0.0]], bounds=(300.0, 2000.0))
    act, _, grad = post_optimal_gradient(sol)
    assert act.lower == (0,) and not act.stress
    assert np.allclose(grad, c.density * 1000.0 * 300.0, rtol=1e-12)


def test_psi_gradient_dimension_checks(two_bar):
    s0, _ = two_bar
    act, mults, _ = post_optimal_gradient(s0)
    ev = s0.constraint_values
    with pytest.raises(ValueError):
        psi_gradient(ev.dw_dB, ev.ds_dB[:, :2], ev.ddelta_dB, mults, act)
    with pytest.raises(ValueError):
        psi_gradient(ev.dw_dB, ev.ds_dB, ev.ddelta_dB, mults, ActiveSets())


def test_psi_gradient_matches_resolved_finite_differences():
    case = gen_case("ten-bar", ubar=22)
    m, c = case.to_model(), case.to_catalogs()
    B = ChoiceMatrix.from_catalogs([1, 1, 0, 0, 0, 1, 1, 0, 1, 0], 2)
    rows = check_psi_gradient(m, c, B.values, case.bounds, case.a_init(), bars=[0, 3, 7])
    stable = [r for r in rows if r.stable]
    assert stable
    for r in stable:
        assert r.rel_error <= 1e-2, r
