import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trussoa.cases import gen_case
from trussoa.catalog import (MATERIALS, CatalogEntry, CatalogSet, Material, ProfileShape, default_catalogs,
                             default_profiles, profile_area, profile_inertia, reference_inertia)
from trussoa.exceptions import DomainError
from trussoa.fem import TrussModel, assemble_and_solve
from trussoa.gradcheck import check_model_gradients, random_state
from trussoa.model import ChoiceMatrix, evaluate, relaxed_modulus, weight, weight_gradients

PROFILES = default_profiles()


def cats(*names):
    return CatalogSet(tuple(CatalogEntry(MATERIALS[m], PROFILES[p]) for m, p in
                            (n.split("-") for n in names)))


def one_bar(load=0.0):
    return TrussModel(nodes=[[0, 0], [1000, 0]], bars=[[0, 1]],
                      fixed_dofs=[(0, 0), (0, 1), (1, 1)], loads=[[0, 0], [load, 0]])


# -- profiles and catalogs ---------------------------------------------------

def test_profile_areas():
    assert profile_area(ProfileShape("x", "I", 5, 50, 40)) == 650.0
    assert profile_area(ProfileShape("x", "T", 5, 50, 40)) == 450.0
    assert profile_area(ProfileShape("x", "C", 10, 110, 40)) == 1900.0


def test_reference_inertia_of_small_i_profile():
    # web t h^3 / 12 plus two flanges w t at distance h / 2
    shape = ProfileShape("x", "I", 5, 50, 40)
    assert reference_inertia(shape) == pytest.approx(5 * 50**3 / 12 + 2 * 40 * 5 * 25**2)
    assert reference_inertia(shape) == pytest.approx(906250 / 3, rel=1e-14)


def test_profile_inertia_scaling():
    e = CatalogEntry(MATERIALS["AL2139"], PROFILES["I1"])
    assert profile_inertia(e.a0, e) == pytest.approx(e.I0, rel=1e-15)
    assert profile_inertia(4 * e.a0, e) == pytest.approx(16 * e.I0, rel=1e-15)
    with pytest.raises(DomainError):
        profile_inertia(0.0, e)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(0, 29), s=st.floats(0.05, 20.0))
def test_inertia_is_homothetic(k, s):
    """Scaling every length by sqrt(s) multiplies the area by s and I by s^2."""
    base = list(PROFILES.values())[k]
    r = np.sqrt(s)
    scaled = ProfileShape("y", base.kind, base.thickness * r, base.height * r, base.width * r)
    e = CatalogEntry(MATERIALS["TA6V"], base)
    assert profile_area(scaled) == pytest.approx(s * e.a0, rel=1e-12)
    assert reference_inertia(scaled) == pytest.approx(profile_inertia(s * e.a0, e), rel=1e-12)


def test_type_invariants():
    with pytest.raises(ValueError):
        Material("bad", 1.0, 1.0, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        Material("bad", -1.0, 1.0, 0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        ProfileShape("bad", "I", 50, 50, 40)
    with pytest.raises(ValueError):
        ProfileShape("bad", "Z", 5, 50, 40)
    with pytest.raises(ValueError):
        CatalogSet((CatalogEntry(MATERIALS["TA6V"], PROFILES["I1"], kratio_override=1.5),))


def test_default_catalog_layout():
    c = default_catalogs()
    assert c.p == 90
    assert c.names[0] == "AL2139-I1" and c.names[30] == "TA6V-I1" and c.names[89] == "AL2024-T10"
    assert np.all(c.a0 > 0) and np.all(c.I0 > 0)
    assert np.all((c.kratio > 0) & (c.kratio < 1))
    assert c.young_modulus[30] == 110000.0


# -- choice matrix -----------------------------------------------------------

def test_choice_matrix_invariants():
    B = ChoiceMatrix.from_catalogs([1, 0], 2)
    assert B.binary and B.catalog_vector().tolist() == [1, 0]
    with pytest.raises(ValueError):
        ChoiceMatrix([[0.6, 0.6]])
    with pytest.raises(ValueError):
        ChoiceMatrix([[1.5, -0.5]])
    with pytest.raises(ValueError):
        ChoiceMatrix([[0.5, 0.5]], binary=True)
    relaxed = ChoiceMatrix([[0.25, 0.75]])
    assert not relaxed.binary
    with pytest.raises(ValueError):
        relaxed.catalog_vector()
    assert ChoiceMatrix.from_catalogs([0, 1], 2) == ChoiceMatrix([[1, 0], [0, 1]])
    assert len({ChoiceMatrix.from_catalogs([0, 1], 2), ChoiceMatrix([[1.0, 0.0], [0.0, 1.0]])}) == 1


# -- weight and moduli -------------------------------------------------------

def test_weight_examples():
    m, c = one_bar(), cats("AL2139-I1", "TA6V-I1")
    assert weight(m, c, [300.0], [[1, 0]]) == pytest.approx(0.84, rel=1e-12)
    assert weight(m, c, [0.0], [[1, 0]]) == 0.0
    assert weight(m, c, [300.0], [[0.5, 0.5]]) == pytest.approx(1.0845, rel=1e-12)
    dw_da, dw_dB = weight_gradients(m, c, [300.0], [[1, 0]])
    assert dw_da[0] == pytest.approx(2.8e-3, rel=1e-12)
    assert dw_dB[1] == pytest.approx(1.329, rel=1e-12)
    assert np.all(weight_gradients(m, c, [0.0], [[1, 0]])[1] == 0)


def test_relaxed_modulus_examples():
    c2 = cats("AL2139-I1", "TA6V-I1")
    assert relaxed_modulus(c2, [[0, 1]])[0] == 110000.0
    assert relaxed_modulus(c2, [[0.5, 0.5]])[0] == pytest.approx(90500.0, rel=1e-15)
    c3 = cats("AL2139-I1", "AL2024-I1", "TA6V-I1")
    # (71000 + 74000 + 110000) / 3 from the material table
    assert relaxed_modulus(c3, [[1 / 3] * 3])[0] == pytest.approx(85000.0, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(0.01, 100.0), seed=st.integers(0, 2**31 - 1))
def test_weight_is_bilinear(alpha, seed):
    case = gen_case("ten-bar")
    m, c = case.to_model(), case.to_catalogs()
    rng = np.random.default_rng(seed)
    a, B = random_state(m, c, case.bounds, rng, relaxed=True)
    B2 = rng.dirichlet(np.ones(c.p), size=m.n_bars)
    w = weight(m, c, a, B)
    assert weight(m, c, alpha * a, B) == pytest.approx(alpha * w, rel=1e-12)
    mix = weight(m, c, a, 0.3 * B + 0.7 * B2)
    assert mix == pytest.approx(0.3 * w + 0.7 * weight(m, c, a, B2), rel=1e-12)
    dw_da, dw_dB = weight_gradients(m, c, a, B)
    assert dw_da @ a == pytest.approx(w, rel=1e-12)
    assert dw_dB @ B.reshape(-1) == pytest.approx(w, rel=1e-12)


# -- constraint evaluation ---------------------------------------------------

def test_tension_constraint_active_at_allowable():
    m, c = one_bar(load=150.0 * 300.0), cats("AL2139-I1", "TA6V-I1")
    ev = evaluate(m, c, [300.0], [[1, 0]])
    assert ev.s[0, 0] == pytest.approx(0.0, abs=1e-10)


def test_unloaded_structure_is_strictly_feasible():
    case = gen_case("ten-bar")
    m0 = TrussModel(case.to_model().nodes, case.to_model().bars, case.to_model().fixed_dofs, None,
                    case.to_model().disp_selector, case.to_model().disp_bounds)
    c = case.to_catalogs()
    B = ChoiceMatrix.from_catalogs([0, 1] * 5, 2)
    ev = evaluate(m0, c, np.full(10, 500.0), B)
    assert np.allclose(ev.s[:, 0], -c.sigma_t[B.catalog_vector()])
    assert np.all(ev.s[:, 2] < 0) and np.all(ev.s[:, 3] < 0)
    assert np.allclose(ev.delta, -np.abs(m0.disp_bounds))
    assert ev.is_feasible()


def _independent_constraints(model, entries, a):
    """Raw constraints of a design built bar by bar from catalog entries."""
    E = np.array([e.material.young_modulus for e in entries])
    state = assemble_and_solve(model, E * a)
    sig = state.phi / a
    out = np.zeros((model.n_bars, 4))
    for i, e in enumerate(entries):
        mat = e.material
        inertia = profile_inertia(a[i], e)
        ell = model.lengths[i]
        out[i] = [sig[i] - mat.sigma_t, -sig[i] - mat.sigma_c,
                  -sig[i] - np.pi**2 * mat.young_modulus * inertia / (a[i] * ell**2),
                  -sig[i] - 4 * np.pi**2 * mat.young_modulus * e.kratio**2 / (12 * (1 - mat.poisson**2))]
    delta = model.projector @ state.u - model.disp_bounds
    return out, delta


def test_one_hot_matches_independent_physical_model():
    case = gen_case("ten-bar", p=4)
    m, c = case.to_model(), case.to_catalogs()
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, B = random_state(m, c, case.bounds, rng)
        ev = evaluate(m, c, a, B)
        s_ref, d_ref = _independent_constraints(m, [c[k] for k in np.argmax(B, axis=1)], a)
        assert np.allclose(ev.s, s_ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(s_ref)))
        assert np.allclose(ev.delta, d_ref, rtol=1e-12, atol=1e-12)
        assert ev.weight == pytest.approx(weight(m, c, a, B), rel=1e-15)


def test_local_buckling_bound_independent_of_area():
    m, c = one_bar(load=-1e4), cats("TA6V-I1")
    e1 = evaluate(m, c, [300.0], [[1.0]])
    e2 = evaluate(m, c, [900.0], [[1.0]])
    sig1, sig2 = e1.phi[0] / 300.0, e2.phi[0] / 900.0
    assert e1.s[0, 3] + sig1 == pytest.approx(e2.s[0, 3] + sig2, rel=1e-13)


def test_gradient_block_shapes():
    case = gen_case("ten-bar", p=3)
    m, c = case.to_model(), case.to_catalogs()
    a, B = random_state(m, c, case.bounds, np.random.default_rng(0), relaxed=True)
    ev = evaluate(m, c, a, B, want_gradients=True)
    n, p, d = m.n_bars, c.p, m.n_disp
    assert ev.s.shape == (n, 4)
    assert ev.ds_da.shape == (4 * n, n) and ev.ds_dB.shape == (4 * n, n * p)
    assert ev.ddelta_da.shape == (d, n) and ev.ddelta_dB.shape == (d, n * p)
    assert ev.dw_da.shape == (n,) and ev.dw_dB.shape == (n * p,)
    plain = evaluate(m, c, a, B)
    assert plain.ds_da is None


def test_gradients_match_finite_differences_on_random_states():
    case = gen_case("ten-bar", p=3)
    m, c = case.to_model(), case.to_catalogs()
    rng = np.random.default_rng(11)
    for relaxed in (False, True):
        for _ in range(5):
            a, B = random_state(m, c, case.bounds, rng, relaxed=relaxed)
            for row in check_model_gradients(m, c, a, B):
                assert row.max_rel_error <= 1e-5, row


def test_nan_input_raises():
    m, c = one_bar(load=1e3), cats("AL2139-I1")
    with pytest.raises(Exception):
        evaluate(m, c, [np.nan], [[1.0]])
