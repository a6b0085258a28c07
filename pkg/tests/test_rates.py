import numpy as np
import pytest
from hypothesis import given, settings

from nessrates import vsystem as vs
from nessrates.errors import DimensionError, ValidationError
from nessrates.ness import solve_ness
from nessrates.operators import HilbertSpace, Operator, assemble_liouvillian, devectorize, ket_bra, lindblad_pair, vectorize
from nessrates.partition import Partition, liouville_partition, validate
from nessrates.rates import (RateMatrix, balance_report, complement_response, qlq_restricted_solve, rate_matrix,
                             route_agreement)

from conftest import random_lindblad, random_partition, seeds


def test_reference_standard_rates_match_closed_form(reference):
    k = reference["k"]
    k21, k12 = vs.analytic_rates_standard(vs.VParams())
    # closed-form values at the reference parameters
    assert k21 == pytest.approx(2.056274982e-9, rel=1e-9)
    assert k12 == pytest.approx(5.6274982e-11, rel=1e-7)
    assert k.rate("2", "1") == pytest.approx(k21, rel=1e-8)
    assert k.rate("1", "2") == pytest.approx(k12, rel=1e-8)


def test_reference_eigenvalues(reference):
    ev = reference["k"].eigenvalues().real
    assert abs(ev[0]) <= 1e-14 * reference["k"].scale()
    assert ev[1] == pytest.approx(-2.58e-9, rel=0.02)
    assert ev[2] == pytest.approx(-1.21e-5, rel=0.02)


def test_routes_agree_on_reference(reference):
    assert route_agreement(reference["k"], reference["k_direct"]) <= 1e-8
    assert reference["k"].route == "linear-solve" and reference["k_direct"].route == "direct"


def test_complement_solutions_live_on_coherences(reference):
    m = reference["model"]
    X = complement_response(m.L, reference["lp"])
    for n in range(3):
        x = devectorize(X[:, n], m.space).matrix
        np.testing.assert_allclose(np.diag(x), 0, atol=1e-14)
    assert np.max(np.abs(X)) > 0


def test_single_component_network_has_no_transitions(reference):
    m = reference["model"]
    rho = reference["ness"].rho_s
    lp = liouville_partition(Partition.from_groups(m.space, {"all": ["g", "1", "2"]}), rho)
    k = rate_matrix(m.L, lp)
    assert k.k.shape == (1, 1) and abs(k.k[0, 0]) <= 1e-20
    x = qlq_restricted_solve(m.L, lp, 0)
    np.testing.assert_allclose(x, lp.apply_q(vectorize(rho)), atol=1e-9)


def test_rates_do_not_depend_on_hot_bath():
    ref = None
    for gh in (1e-6, 1e-5, 1e-4):
        m = vs.build(vs.VParams(Gamma_H1=gh))
        lp = liouville_partition(m.standard, solve_ness(m.L).rho_s)
        k = rate_matrix(m.L, lp)
        pair = np.array([k.rate("2", "1"), k.rate("1", "2")])
        if ref is None:
            ref = pair
        np.testing.assert_allclose(pair, ref, rtol=1e-10)


def test_decoupled_excited_states_have_zero_transfer():
    p = vs.VParams(J=0.0, Gamma_Df=0.0, Gamma_Db=0.0, Gamma_H2=1e-6)
    m = vs.build(p)
    k = rate_matrix(m.L, liouville_partition(m.standard, solve_ness(m.L).rho_s))
    assert k.rate("2", "1") == 0.0 or abs(k.rate("2", "1")) <= 1e-12 * k.scale()
    assert abs(k.rate("1", "2")) <= 1e-12 * k.scale()


def test_equilibrium_two_level_has_no_net_pair_flux():
    sp = HilbertSpace.from_labels(["g", "e"])
    L = assemble_liouvillian(Operator(sp, np.diag([0.0, 0.01])), [lindblad_pair(ket_bra(sp, "g", "e"), 1e-3, 0.3)])
    lp = liouville_partition(Partition.from_labels(sp), solve_ness(L).rho_s)
    k = rate_matrix(L, lp)
    rep = balance_report(k, lp.steady_populations)
    assert rep.max_pair_flux <= 1e-15 * k.scale()
    assert k.rate("e", "g") == pytest.approx(1e-3 * 0.3, rel=1e-10)
    assert k.rate("g", "e") == pytest.approx(1e-3 * 1.3, rel=1e-10)


def test_circular_flow_has_cyclic_pair_fluxes():
    p = vs.VParams(Gamma_H1=1e-5, Gamma_H2=1e-9, Gamma_Df=1e-6, Gamma_Db=1e-9, Gamma_C2=1e-6)
    m = vs.build(p)
    lp = liouville_partition(m.standard, solve_ness(m.L).rho_s)
    rep = balance_report(rate_matrix(m.L, lp), lp.steady_populations)
    g, one, two = 0, 1, 2
    # net flow g -> 1 -> 2 -> g
    flows = [rep.pair_flux[one, g], rep.pair_flux[two, one], rep.pair_flux[g, two]]
    assert all(f > 0 for f in flows)
    np.testing.assert_allclose(flows, flows[0], rtol=1e-8)


def test_balance_report_shape_check(reference):
    with pytest.raises(DimensionError):
        balance_report(reference["k"], [0.5, 0.5])


def test_rate_matrix_validation():
    with pytest.raises(DimensionError):
        RateMatrix(("a", "b"), np.zeros((3, 3)), "direct")


def test_unknown_route_and_index(reference):
    m = reference["model"]
    with pytest.raises(ValidationError):
        rate_matrix(m.L, reference["lp"], "magic")
    with pytest.raises(ValidationError):
        qlq_restricted_solve(m.L, reference["lp"], 5)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_rate_matrix_properties_on_random_models(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    L = random_lindblad(rng, d)
    rho_s = solve_ness(L).rho_s
    part = random_partition(rng, L.space, rotate=bool(rng.integers(0, 2)))
    lp = liouville_partition(part, rho_s)
    k = rate_matrix(L, lp, "linear-solve")
    kd = rate_matrix(L, lp, "direct")
    p = lp.steady_populations
    if lp.size == 1:
        # k = [0] up to rounding in L
        assert k.scale() <= 1e-13 * np.linalg.norm(L.matrix, 1)
    else:
        scale = k.scale()
        assert route_agreement(k, kd) <= 1e-8
        assert np.max(np.abs(k.k.sum(axis=0))) <= 1e-12 * scale
        assert np.max(np.abs(k.k @ p)) <= 1e-10 * scale * np.linalg.norm(p)
        assert k.imag_residue <= 1e-10 * scale
    # complement solutions: inside range(Q), solve the restricted system, recover Q[rho_s]
    X = complement_response(L, lp)
    np.testing.assert_allclose(lp.apply_q(X), X, atol=1e-9 * max(1.0, np.abs(X).max()))
    rhs = -lp.apply_q(L.matrix @ lp.steady_vectors)
    res = lp.apply_q(L.matrix @ X) - rhs
    assert np.linalg.norm(res) <= 1e-9 * max(np.linalg.norm(rhs), 1e-14)
    np.testing.assert_allclose(X @ p, lp.apply_q(vectorize(rho_s)), atol=1e-9)
