"""Shared fixtures: reference models and random Lindblad/partition generators."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from nessrates import vsystem as vs
from nessrates.ness import solve_ness
from nessrates.operators import HilbertSpace, Operator, assemble_liouvillian, lindblad_pair
from nessrates.partition import liouville_partition, validate
from nessrates.rates import rate_matrix

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_lindblad(rng, d, n_jumps=None):
    """Generic Lindblad model on ``d`` levels; generically has a unique full-rank NESS."""
    space = HilbertSpace.numbered(d)
    H = Operator(space, random_hermitian(rng, d))
    n_jumps = n_jumps or int(rng.integers(1, 4))
    diss = []
    for _ in range(n_jumps):
        S = Operator(space, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        diss.append(lindblad_pair(S, float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.0, 0.5))))
    return assemble_liouvillian(H, diss)


def random_partition(rng, space, rotate=False):
    """Random grouping of basis states into 1..d components, optionally in a rotated basis."""
    d = space.dim
    n = int(rng.integers(1, d + 1))
    assign = np.concatenate([np.arange(n), rng.integers(0, n, size=d - n)])
    rng.shuffle(assign)
    U = random_unitary(rng, d) if rotate else np.eye(d)
    projs = []
    for c in range(n):
        cols = U[:, assign == c]
        projs.append(Operator(space, cols @ cols.conj().T))
    return validate(projs, [f"c{c}" for c in range(n)])


@pytest.fixture(scope="session")
def reference():
    """Reference V-system with its NESS and standard-partition rates."""
    m = vs.build()
    res = solve_ness(m.L)
    lp = liouville_partition(m.standard, res.rho_s)
    return {"model": m, "ness": res, "lp": lp, "k": rate_matrix(m.L, lp),
            "k_direct": rate_matrix(m.L, lp, "direct")}


@pytest.fixture(scope="session")
def reference_grouped(reference):
    m = reference["model"]
    lp = liouville_partition(m.grouped, reference["ness"].rho_s)
    return {"lp": lp, "k": rate_matrix(m.L, lp)}
