import numpy as np
import pytest
from hypothesis import given, settings

from nessrates import vsystem as vs
from nessrates.errors import SteadyStateError
from nessrates.ness import numerical_nullity, solve_ness
from nessrates.operators import (HilbertSpace, Operator, SuperOperator, assemble_liouvillian, ket_bra,
                                 lindblad_pair, vectorize)

from conftest import random_lindblad, seeds


def test_dark_ground_state():
    sp = HilbertSpace.from_labels(["g", "e"])
    H = Operator(sp, np.diag([0.0, 1.0]))
    L = assemble_liouvillian(H, [lindblad_pair(ket_bra(sp, "g", "e"), 0.2)])
    res = solve_ness(L)
    np.testing.assert_allclose(res.rho_s.matrix, np.diag([1.0, 0.0]), atol=1e-14)
    assert res.null_dim == 1


def test_pure_hamiltonian_is_not_unique():
    sp = HilbertSpace.numbered(3)
    L = assemble_liouvillian(Operator(sp, np.diag([0.0, 1.0, 3.0])))
    assert numerical_nullity(L)[0] == 3
    with pytest.raises(SteadyStateError, match="steady state not unique"):
        solve_ness(L)


def test_non_physical_state_rejected():
    # a trace-preserving generator whose unique fixed point has a negative eigenvalue
    sp = HilbertSpace.numbered(2)
    pop = np.array([[-1.0, 3.0], [1.0, -3.0]])
    M = np.zeros((4, 4))
    M[np.ix_([0, 3], [0, 3])] = pop
    M[1, 1] = M[2, 2] = -1.0
    # push the fixed point outside the simplex by a shear that keeps the trace functional
    shear = np.eye(4)
    shear[0, 0], shear[3, 0] = 3.0, -2.0
    Ls = SuperOperator(sp, shear @ M @ np.linalg.inv(shear))
    assert Ls.trace_defect() < 1e-12
    with pytest.raises(SteadyStateError, match="non-physical steady state"):
        solve_ness(Ls)


def test_vsystem_steady_state_structure(reference):
    res = reference["ness"]
    rho = res.rho_s.matrix
    assert abs(rho[0, 1]) == 0 and abs(rho[0, 2]) == 0
    assert res.rho_s.trace() == pytest.approx(1.0, abs=1e-15)
    assert res.residual <= 1e-9 * np.linalg.norm(reference["model"].L.matrix, 2)
    assert res.min_eig >= -1e-8


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_ness_is_basis_order_independent(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    L = random_lindblad(rng, d)
    res = solve_ness(L)
    assert np.linalg.norm(L.matrix @ vectorize(res.rho_s)) <= 1e-9 * np.linalg.norm(L.matrix, 2)
    perm = rng.permutation(d)
    Pm = np.eye(d)[perm]
    # relabel the basis: rho -> P rho P^T is vec -> kron(P, P) vec
    K = np.kron(Pm, Pm)
    Lp = SuperOperator(L.space, K @ L.matrix @ K.T)
    rho_p = solve_ness(Lp).rho_s.matrix
    np.testing.assert_allclose(Pm.T @ rho_p @ Pm, res.rho_s.matrix, atol=1e-9)


def test_steady_coherence_matches_closed_form_off_degeneracy():
    # the reference point has rho_11 = rho_22 exactly; use Gamma_H2 > 0 to make the coherence nonzero
    p = vs.VParams(Gamma_H2=7e-7)
    m = vs.build(p)
    rho = solve_ness(m.L).rho_s
    expected = vs.steady_coherence(p, rho)
    assert abs(expected) > 1e-6 * rho.matrix[1, 1].real
    assert abs(rho.matrix[1, 2] - expected) <= 1e-10 * abs(expected)
