import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trussoa.cases import gen_case
from trussoa.exceptions import DegenerateBarError, DomainError, UnderRestrainedError
from trussoa.fem import FemCounter, TrussModel, assemble_and_solve, element_geometry, state_sensitivity


def single_bar(load=7100.0):
    return TrussModel(nodes=[[0, 0], [1000, 0]], bars=[[0, 1]],
                      fixed_dofs=[(0, 0), (0, 1), (1, 1)], loads=[[0, 0], [load, 0]])


def triangle():
    return TrussModel(nodes=[[-1000, 0], [1000, 0], [0, -1000]], bars=[[0, 2], [1, 2]],
                      fixed_dofs=[(0, 0), (0, 1), (1, 0), (1, 1)],
                      loads=[[0, 0], [0, 0], [0, -5e4]])


def test_element_geometry_examples():
    m = TrussModel(nodes=[[0, 0], [1000, 0], [1000, 1000]], bars=[[0, 1], [0, 2]])
    ell, cos = element_geometry(m, 0)
    assert ell == 1000.0 and np.allclose(cos, [1, 0])
    ell, cos = element_geometry(m, 1)
    assert ell == pytest.approx(1414.2136, rel=1e-7)
    assert np.allclose(cos, [np.sqrt(0.5)] * 2)
    m3 = TrussModel(nodes=[[0, 0, 0], [300, 400, 0]], bars=[[0, 1]])
    ell, cos = element_geometry(m3, 0)
    assert ell == 500.0 and np.allclose(cos, [0.6, 0.8, 0.0])
    with pytest.raises(IndexError):
        element_geometry(m3, 1)


def test_degenerate_bar_rejected():
    with pytest.raises(DegenerateBarError):
        TrussModel(nodes=[[0, 0], [0, 0]], bars=[[0, 1]])
    with pytest.raises(DegenerateBarError):
        TrussModel(nodes=[[0, 0], [1, 0]], bars=[[1, 1]])


def test_free_dof_count():
    m = gen_case("ten-bar").to_model()
    assert m.n_free == m.dim * m.n_nodes - len(m.fixed_dofs)


def test_single_bar_closed_form():
    m = single_bar()
    c = FemCounter()
    st_ = assemble_and_solve(m, [71000.0 * 100.0], counter=c)
    assert c.count == 1
    assert st_.u[m.dof_map[1, 0]] == pytest.approx(1.0, rel=1e-12)
    assert st_.phi[0] == pytest.approx(7100.0, rel=1e-12)
    du, dphi = state_sensitivity(m, st_, [71000.0])
    assert c.count == 1
    assert du[m.dof_map[1, 0]] == pytest.approx(-0.01, rel=1e-12)
    assert dphi[0] == pytest.approx(0.0, abs=1e-9)


def test_zero_load_and_null_direction():
    m = single_bar(load=0.0)
    s = assemble_and_solve(m, [1e6])
    assert np.all(s.u == 0) and np.all(s.phi == 0)
    du, dphi = state_sensitivity(single_bar(), assemble_and_solve(single_bar(), [1e6]), [0.0])
    assert np.all(du == 0) and np.all(dphi == 0)


def test_symmetric_triangle_equal_forces():
    s = assemble_and_solve(triangle(), [7e6, 7e6])
    assert s.phi[0] == pytest.approx(s.phi[1], rel=1e-12)
    # each bar carries F / (2 cos 45deg), in tension under a downward load
    assert s.phi[0] == pytest.approx(5e4 / np.sqrt(2), rel=1e-12)


def test_errors():
    with pytest.raises(DomainError):
        assemble_and_solve(single_bar(), [0.0])
    with pytest.raises(ValueError):
        assemble_and_solve(single_bar(), [1.0, 2.0])
    loose = TrussModel(nodes=[[0, 0], [1000, 0]], bars=[[0, 1]], fixed_dofs=[(0, 0), (0, 1)],
                       loads=[[0, 0], [1, 0]])
    with pytest.raises(UnderRestrainedError):
        assemble_and_solve(loose, [1e6])
    s = assemble_and_solve(single_bar(), [1e6])
    with pytest.raises(ValueError):
        state_sensitivity(single_bar(), s, [1.0, 1.0])


def test_model_is_immutable():
    m = single_bar()
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 3.0
    with pytest.raises(AttributeError):
        m.nodes = np.zeros((2, 2))


def _random_ea(m, rng):
    return rng.uniform(0.5, 2.0, m.n_bars) * 7e4 * 500


def test_state_invariants_and_nodal_equilibrium():
    m = gen_case("ten-bar").to_model()
    rng = np.random.default_rng(1)
    s = assemble_and_solve(m, _random_ea(m, rng))
    K = (m.connectivity * (s.axial_stiffness / m.lengths)) @ m.connectivity.T
    assert np.array_equal(K, K.T)
    assert s.residual <= 1e-8
    assert np.allclose(s.phi, s.axial_stiffness / m.lengths * (m.connectivity.T @ s.u), rtol=1e-14)
    # bar forces pushed onto the free dofs balance the applied load
    assert np.linalg.norm(m.connectivity @ s.phi - m.f) <= 1e-8 * np.linalg.norm(m.f)


def test_sensitivity_matches_finite_differences_on_ten_bar():
    m = gen_case("ten-bar").to_model()
    rng = np.random.default_rng(2)
    for _ in range(100):
        EA = _random_ea(m, rng)
        d = rng.normal(size=m.n_bars) * EA
        s = assemble_and_solve(m, EA)
        du, dphi = state_sensitivity(m, s, d)
        h = 1e-6
        sp, sm = assemble_and_solve(m, EA + h * d), assemble_and_solve(m, EA - h * d)
        fd_u = (sp.u - sm.u) / (2 * h)
        fd_phi = (sp.phi - sm.phi) / (2 * h)
        assert np.max(np.abs(fd_u - du)) <= 1e-5 * np.max(np.abs(du))
        assert np.max(np.abs(fd_phi - dphi)) <= 1e-5 * np.max(np.abs(dphi))


def test_sensitivity_matrix_direction_matches_columns():
    m = gen_case("cantilever", blocks=2).to_model()
    rng = np.random.default_rng(3)
    s = assemble_and_solve(m, _random_ea(m, rng))
    D = rng.normal(size=(m.n_bars, 3))
    du, dphi = state_sensitivity(m, s, D)
    for j in range(3):
        duj, dphij = state_sensitivity(m, s, D[:, j])
        assert np.allclose(du[:, j], duj, rtol=1e-13, atol=0)
        assert np.allclose(dphi[:, j], dphij, rtol=1e-13, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(blocks=st.integers(1, 4), seed=st.integers(0, 2**31 - 1))
def test_sensitivity_property_random_cantilevers(blocks, seed):
    m = gen_case("cantilever", blocks=blocks).to_model()
    rng = np.random.default_rng(seed)
    EA = _random_ea(m, rng)
    d = rng.normal(size=m.n_bars) * EA
    s = assemble_and_solve(m, EA)
    du, _ = state_sensitivity(m, s, d)
    h = 1e-6
    fd = (assemble_and_solve(m, EA + h * d).u - assemble_and_solve(m, EA - h * d).u) / (2 * h)
    assert np.max(np.abs(fd - du)) <= 1e-5 * np.max(np.abs(du))


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(0.1, 10.0))
def test_displacements_scale_inversely_with_stiffness(scale):
    m = gen_case("ten-bar").to_model()
    EA = np.full(m.n_bars, 7e4 * 500)
    s1, s2 = assemble_and_solve(m, EA), assemble_and_solve(m, scale * EA)
    assert np.allclose(s2.u * scale, s1.u, rtol=1e-10)
    assert np.allclose(s2.phi, s1.phi, rtol=1e-9, atol=1e-6)
