import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nessrates import vsystem as vs
from nessrates.errors import ValidationError
from nessrates.ness import solve_ness
from nessrates.operators import Operator, ket_bra
from nessrates.partition import liouville_partition
from nessrates.rates import rate_matrix

gammas = st.floats(min_value=-9, max_value=-4).map(lambda e: 10.0 ** e)
couplings = st.floats(min_value=-6, max_value=-4).map(lambda e: 10.0 ** e)
splittings = st.floats(min_value=-0.05, max_value=0.05)


def _params(gs, J, delta):
    return vs.VParams(eps_2=0.02 + delta, J=J, **dict(zip(vs.GAMMA_FIELDS, gs)))


def _numeric(p, grouped=False):
    m = vs.build(p)
    rho = solve_ness(m.L).rho_s
    lp = liouville_partition(m.grouped if grouped else m.standard, rho)
    return rate_matrix(m.L, lp), rho


def test_reference_derived_quantities():
    d = vs.derived(vs.VParams())
    assert d.gamma_star == pytest.approx(4.502e-6, rel=1e-12)
    assert d.delta == pytest.approx(-0.008, rel=1e-12)
    assert d.beta == pytest.approx(2.8137491e-11, rel=1e-7)
    assert d.r is None


@given(st.lists(gammas, min_size=6, max_size=6), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_diagonal_action_matches_population_equations(gs, frac):
    p = vs.VParams(**dict(zip(vs.GAMMA_FIELDS, gs)))
    m = vs.build(p)
    pops = np.array([frac, (1 - frac) * 0.3, (1 - frac) * 0.7])
    out = np.diag(m.L.apply(Operator(m.space, np.diag(pops))).matrix).real
    gg, s1, s2 = pops
    expected = [
        -2 * (p.Gamma_H1 + p.Gamma_H2) * gg + 2 * p.Gamma_C1 * s1 + 2 * p.Gamma_C2 * s2,
        2 * p.Gamma_H1 * gg - 2 * (p.Gamma_C1 + p.Gamma_Df) * s1 + 2 * p.Gamma_Db * s2,
        2 * p.Gamma_H2 * gg + 2 * p.Gamma_Df * s1 - 2 * (p.Gamma_C2 + p.Gamma_Db) * s2,
    ]
    np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-14 * max(gs))


def test_excited_coherence_equation_of_motion():
    p = vs.VParams(Gamma_Db=3e-7, Gamma_H2=2e-7)
    m = vs.build(p)
    d = vs.derived(p)
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    rho[1, 2], rho[2, 1] = 0.01 + 0.02j, 0.01 - 0.02j
    out = m.L.apply(Operator(m.space, rho)).matrix
    expected = (1j * d.delta - d.gamma_star) * rho[1, 2] + 1j * p.J * (rho[1, 1] - rho[2, 2])
    assert out[1, 2] == pytest.approx(expected, rel=1e-12)


def test_hot_channels_use_distinct_jump_operators():
    m = vs.build(vs.VParams(Gamma_H1=1e-6, Gamma_H2=2e-6))
    out = m.L.apply(ket_bra(m.space, "g", "g")).matrix
    np.testing.assert_allclose(np.diag(out).real, [-6e-6, 2e-6, 4e-6], rtol=1e-12)


def test_invalid_parameters():
    with pytest.raises(ValidationError):
        vs.VParams(Gamma_C1=-1.0)
    with pytest.raises(ValidationError):
        vs.VParams(Gamma_C1=0.0, Gamma_C2=0.0, Gamma_Df=0.0, Gamma_Db=0.0)
    with pytest.raises(ValidationError):
        vs.analytic_rates_grouped(vs.VParams(), 1.5)


@given(couplings, splittings, gammas)
@settings(max_examples=50, deadline=None)
def test_beta_properties(J, delta, g):
    p = vs.VParams(J=J, eps_2=0.02 + delta, Gamma_C2=g, Gamma_Df=g)
    d = vs.derived(p)
    flipped = vs.derived(p.replace(eps_2=0.02 - delta))
    assert d.beta == pytest.approx(flipped.beta, rel=1e-12)
    assert 0 <= d.beta <= J ** 2 / d.gamma_star * (1 + 1e-12)
    at_zero = vs.derived(p.replace(eps_2=0.02))
    assert at_zero.beta == pytest.approx(J ** 2 / at_zero.gamma_star, rel=1e-12)
    assert vs.derived(p.replace(Gamma_C1=1e3)).beta < d.beta


def test_equal_transfer_rates_give_symmetric_rates():
    k21, k12 = vs.analytic_rates_standard(vs.VParams(Gamma_Db=1e-9))
    assert k21 == k12


def test_analytic_standard_rates_on_j_delta_grid():
    for J in np.geomspace(1e-6, 1e-4, 5):
        for delta in np.linspace(-0.05, 0.05, 5):
            p = vs.VParams(J=J, eps_2=0.02 + delta)
            k, _ = _numeric(p)
            k21, k12 = vs.analytic_rates_standard(p)
            assert k.rate("2", "1") == pytest.approx(k21, rel=1e-8)
            assert k.rate("1", "2") == pytest.approx(k12, rel=1e-8)


@given(st.lists(gammas, min_size=6, max_size=6), couplings, splittings)
@settings(max_examples=40, deadline=None)
def test_numeric_rates_match_closed_forms(gs, J, delta):
    p = _params(gs, J, delta)
    k, _ = _numeric(p)
    k21, k12 = vs.analytic_rates_standard(p)
    assert k.rate("2", "1") == pytest.approx(k21, rel=1e-8)
    assert k.rate("1", "2") == pytest.approx(k12, rel=1e-8)
    kg, rho = _numeric(p, grouped=True)
    r = vs.derived(p, rho).r
    assert 0.0 <= r <= 1.0
    k2A, kA2 = vs.analytic_rates_grouped(p, r)
    assert kg.rate("2", "A") == pytest.approx(k2A, rel=1e-8)
    assert kg.rate("A", "2") == pytest.approx(kA2, rel=1e-8)


def test_grouped_forward_rate_vanishes_without_pumping():
    p = vs.VParams(Gamma_H1=0.0, Gamma_H2=0.0)
    k2A, _ = vs.analytic_rates_grouped(p, 1.0)
    assert k2A == 0.0


def test_grouped_limits_reached_at_strong_pumping():
    # the approach is ~1/Gamma_H; at Gamma_H = 1 every limit is within 1e-3
    p = vs.VParams()
    lim = vs.grouped_limits(p)
    cases = [("k2A_H1_inf", dict(Gamma_H1=1.0), ("2", "A")), ("kA2_H1_inf", dict(Gamma_H1=1.0), ("A", "2")),
             ("k2A_H2_inf", dict(Gamma_H2=1.0), ("2", "A")), ("kA2_H2_inf", dict(Gamma_H2=1.0), ("A", "2")),
             ("kA2_dark", dict(Gamma_H1=1e-12), ("A", "2"))]
    for key, change, entry in cases:
        k, _ = _numeric(p.replace(**change), grouped=True)
        assert k.rate(*entry) == pytest.approx(lim[key], rel=1e-3), key


def test_grouped_rates_saturate_monotonically():
    p = vs.VParams()
    vals = [_numeric(p.replace(Gamma_H1=g), grouped=True)[0].rate("2", "A") for g in np.geomspace(1e-7, 1e-3, 9)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] == pytest.approx(vs.grouped_limits(p)["k2A_H1_inf"], rel=1e-2)


def test_sweep_beta_trends():
    deltas = np.array([0.0, 1e-3, 1e-2, 0.1])
    gs = np.geomspace(1e-6, 0.1, 6)
    b = vs.sweep_beta(deltas, gs)
    assert b.shape == (4, 6)
    assert np.all(np.diff(b[0]) < 0)
    assert np.all(np.diff(b[:, 0]) < 0)
    # at Delta = 0.1 stronger dephasing raises beta; closed form gives the size of the rise
    p = vs.VParams()
    gs_lo = p.Gamma_C1 + 2e-6 + p.Gamma_Db
    gs_hi = p.Gamma_C1 + 0.2 + p.Gamma_Db
    expected = (gs_hi / (gs_hi ** 2 + 0.01)) / (gs_lo / (gs_lo ** 2 + 0.01))
    assert b[3, -1] / b[3, 0] == pytest.approx(expected, rel=1e-10)
    assert b[3, -1] / b[3, 0] > 1
