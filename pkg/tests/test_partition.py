import numpy as np
import pytest
from hypothesis import given, settings

from nessrates import vsystem as vs
from nessrates.errors import DimensionError, PartitionError
from nessrates.ness import solve_ness
from nessrates.operators import HilbertSpace, Operator, projector, vectorize
from nessrates.partition import Partition, liouville_partition, populations, validate

from conftest import random_lindblad, random_partition, random_state, seeds

V3 = vs.space()


def test_standard_and_grouped_partitions_validate():
    std = validate([projector(V3, [s]) for s in ("g", "1", "2")], ("g", "1", "2"))
    assert std.size == 3
    grp = Partition.from_groups(V3, {"A": ["g", "1"], "2": ["2"]})
    assert grp.names == ("A", "2")
    assert Partition.from_groups(V3, [["g", "1"], ["2"]]).names == ("g+1", "2")


def test_overlapping_and_incomplete_partitions_rejected():
    Pg = projector(V3, ["g"])
    with pytest.raises(PartitionError, match="overlapping components"):
        validate([Pg, Pg, projector(V3, ["1", "2"])])
    with pytest.raises(PartitionError, match="incomplete partition"):
        validate([Pg, projector(V3, ["1"])])
    with pytest.raises(PartitionError, match="not Hermitian"):
        validate([Operator(V3, np.triu(np.ones((3, 3))))])
    with pytest.raises(PartitionError):
        validate([Pg, projector(V3, ["1", "2"])], ["a", "a"])


def test_populations_examples():
    std = Partition.from_labels(V3)
    np.testing.assert_allclose(populations(std, projector(V3, ["2"])), [0, 0, 1])
    grp = Partition.from_groups(V3, {"A": ["g", "1"], "2": ["2"]})
    np.testing.assert_allclose(populations(grp, Operator(V3, np.eye(3) / 3)), [2 / 3, 1 / 3], atol=1e-15)
    with pytest.raises(DimensionError):
        populations(grp, Operator(HilbertSpace.numbered(2), np.eye(2) / 2))


def test_standard_steady_components_are_the_projectors(reference):
    lp = reference["lp"]
    for P, v in zip(lp.partition.projectors, lp.steady_components):
        np.testing.assert_allclose(v.matrix, P.matrix, atol=1e-14)
    assert lp.steady_populations.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(lp.steady_populations >= 0)


def test_grouped_component_is_ground_share_mixture(reference):
    rho = reference["ness"].rho_s
    m = reference["model"]
    lp = liouville_partition(m.grouped, rho)
    r = vs.derived(m.params, rho).r
    np.testing.assert_allclose(lp.steady_components[0].matrix, np.diag([r, 1 - r, 0]), atol=1e-14)


def test_unpopulated_component_rejected():
    rho = Operator(V3, np.diag([0.5, 0.5, 0.0]))
    with pytest.raises(PartitionError, match="degenerate component: unpopulated projector"):
        liouville_partition(Partition.from_labels(V3), rho)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_liouville_projector_algebra(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    L = random_lindblad(rng, d)
    rho_s = solve_ness(L).rho_s
    part = random_partition(rng, L.space, rotate=bool(rng.integers(0, 2)))
    lp = liouville_partition(part, rho_s)
    eye = np.eye(d * d)
    Q = lp.q.matrix
    np.testing.assert_allclose(Q, eye - sum(p.matrix for p in lp.pi), atol=1e-12)
    np.testing.assert_allclose(Q @ Q, Q, atol=1e-9)
    for m, Pm in enumerate(lp.pi):
        assert np.linalg.matrix_rank(Pm.matrix, tol=1e-10) == 1
        np.testing.assert_allclose(Q @ Pm.matrix, 0, atol=1e-9)
        np.testing.assert_allclose(Pm.matrix @ Q, 0, atol=1e-9)
        for n, Pn in enumerate(lp.pi):
            np.testing.assert_allclose(Pm.matrix @ Pn.matrix, Pn.matrix if m == n else 0, atol=1e-9)
    # steady components: Hermitian, PSD, unit trace
    for v in lp.steady_components:
        assert v.hermiticity_error() <= 1e-10
        assert v.min_eigenvalue() >= -1e-8
        assert v.trace().real == pytest.approx(1.0, abs=1e-10)
    assert lp.steady_populations.sum() == pytest.approx(1.0, abs=1e-10)
    # Pi_n[rho_s] = varrho_n p_n and tr(P_m Pi_m[rho]) = p_m for a random state
    x_s = vectorize(rho_s)
    rho = random_state(rng, d)
    p = populations(part, Operator(L.space, rho))
    for n, Pn in enumerate(lp.pi):
        np.testing.assert_allclose(Pn.matrix @ x_s, vectorize(lp.steady_components[n]) * lp.steady_populations[n],
                                   atol=1e-10)
        out = Pn.apply(Operator(L.space, rho))
        assert np.trace(part.projectors[n].matrix @ out.matrix).real == pytest.approx(p[n], abs=1e-10)
    # the orthonormal complement basis spans range(Q)
    B = lp.complement_basis
    np.testing.assert_allclose(B.conj().T @ B, np.eye(d * d - part.size), atol=1e-12)
    np.testing.assert_allclose(lp.apply_q(B), B, atol=1e-9)
