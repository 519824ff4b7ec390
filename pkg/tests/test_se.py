import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotopt.pilots import PilotAllocation, PilotAssignment, from_assignment
from pilotopt.se import (
    CorrelationModel,
    SinrReport,
    link_trace_products,
    se_from_sinr,
    sinr_approx_all,
    sinr_assignment_all,
    sinr_asymptotic_all,
    sinr_corr_all,
    sinr_hw_all,
    sinr_proposed,
    sinr_proposed_all,
    trace_product_dense,
    trace_products,
)

ONE = np.ones((1, 1, 1))


def _instance(seed, L=3, K=2, tau=3):
    rng = np.random.default_rng(seed)
    beta = 10 ** rng.uniform(-3, 0, (L, L, K))
    for l in range(L):
        beta[l, l] *= 10
    alloc = PilotAllocation(rng.uniform(0, 2, (L, K, tau)) * (rng.random((L, K, tau)) < 0.8))
    data = rng.uniform(0.1, 2, (L, K))
    return beta, alloc, data, float(rng.uniform(0.01, 1))


def _weights(alloc):
    return alloc.powers / alloc.energy()[:, :, None]


def test_single_user_hand_value():
    assert sinr_proposed(ONE, PilotAllocation(ONE), np.ones((1, 1)), 1.0, 2, 0, 0) == pytest.approx(0.5)


def test_zero_data_power_gives_zero():
    beta, alloc, data, s2 = _instance(0)
    data[1, 0] = 0.0
    assert sinr_proposed_all(beta, alloc, data, s2, 100)[1, 0] == 0.0


def test_orthogonal_pilots_have_no_coherent_term():
    beta = np.array([[[1.0, 0.3]]])
    alloc = PilotAllocation(np.array([[[1.0, 0.0], [0.0, 1.0]]]))
    data = np.ones((1, 2))
    s = sinr_proposed_all(beta, alloc, data, 0.1, 100)
    # without coherent interference the SINR is exactly linear in M
    np.testing.assert_allclose(sinr_proposed_all(beta, alloc, data, 0.1, 200), 2 * s, rtol=1e-13)
    assert np.all(np.isinf(sinr_asymptotic_all(beta, alloc, data)))


def test_singleton_reuse_sets_scale_linearly():
    beta, _, data, s2 = _instance(1, L=1, K=3)
    a = PilotAssignment(np.array([[2, 0, 1]]), 3.0)
    s = sinr_assignment_all(beta, a, data, s2, 50)
    np.testing.assert_allclose(sinr_assignment_all(beta, a, data, s2, 100), 2 * s, rtol=1e-13)


@pytest.mark.parametrize("seed", range(10))
def test_assignment_matches_general_form(seed):
    rng = np.random.default_rng(seed)
    beta, _, data, s2 = _instance(seed, L=3, K=3)
    a = PilotAssignment(np.array([rng.permutation(3) for _ in range(3)]), rng.uniform(0.5, 6, (3, 3)))
    np.testing.assert_allclose(sinr_assignment_all(beta, a, data, s2, 64),
                               sinr_proposed_all(beta, from_assignment(a), data, s2, 64), rtol=1e-12)


def test_shared_pilot_symmetry():
    beta = np.array([[[1.0]], [[0.2]]]) * np.ones((2, 2, 1))
    beta[0, 0, 0] = beta[1, 1, 0] = 1.0
    beta[0, 1, 0] = beta[1, 0, 0] = 0.2
    a = PilotAssignment(np.zeros((2, 1), int), 1.0)
    s = sinr_assignment_all(beta, a, np.ones((2, 1)), 0.5, 10)
    assert s[0, 0] == pytest.approx(s[1, 0], rel=1e-15)


def test_approx_single_basis_is_exact():
    beta, alloc, data, s2 = _instance(2, tau=1)
    alloc = PilotAllocation(alloc.powers + 0.1)
    np.testing.assert_allclose(sinr_approx_all(beta, alloc, data, s2, 30, np.ones(alloc.shape)),
                               sinr_proposed_all(beta, alloc, data, s2, 30), rtol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_approx_tight_at_expansion_point(seed):
    beta, alloc, data, s2 = _instance(seed)
    alloc = PilotAllocation(alloc.powers + 0.05)
    np.testing.assert_allclose(sinr_approx_all(beta, alloc, data, s2, 30, _weights(alloc)),
                               sinr_proposed_all(beta, alloc, data, s2, 30), rtol=1e-10)


def test_approx_rejects_bad_weights():
    beta, alloc, data, s2 = _instance(0)
    with pytest.raises(ValueError):
        sinr_approx_all(beta, alloc, data, s2, 30, np.full(alloc.shape, 0.5))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 20))
def test_approx_is_a_lower_bound(seed, scale):
    beta, alloc, data, s2 = _instance(seed)
    x0 = PilotAllocation(alloc.powers + 0.05)
    w = _weights(x0)
    rng = np.random.default_rng(seed + 1)
    x = PilotAllocation(x0.powers * rng.uniform(0.01, 1, x0.shape) * scale)
    lo = sinr_approx_all(beta, x, data, s2, 30, w)
    hi = sinr_proposed_all(beta, x, data, s2, 30)
    assert np.all(lo <= hi * (1 + 1e-12))


@pytest.mark.parametrize("seed", range(5))
def test_hardware_ideal_reduction(seed):
    beta, alloc, data, s2 = _instance(seed)
    np.testing.assert_allclose(sinr_hw_all(beta, alloc, data, s2, 40, 0.0),
                               sinr_proposed_all(beta, alloc, data, s2, 40), rtol=1e-12)


def test_hardware_full_impairment_is_zero():
    beta, alloc, data, s2 = _instance(3)
    assert np.all(sinr_hw_all(beta, alloc, data, s2, 40, 1.0) == 0.0)


@given(st.floats(0, 0.99), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 3), st.integers(1, 500))
def test_hardware_single_user_hand_form(eps, ph, p, b, M):
    s2 = 0.7
    e2 = eps * eps
    num = M * (1 - e2) ** 2 * p * b * b * ph * ph
    eta = M * e2 * p * b * b * ph * ph + M * e2 * (1 - e2) * ph * ph * p * b * b
    den = (b * ph * ph + s2 * ph) * (b * p + s2) + eta
    got = sinr_hw_all(np.full((1, 1, 1), b), PilotAllocation(np.full((1, 1, 1), ph)),
                      np.full((1, 1), p), s2, M, eps)[0, 0]
    assert got == pytest.approx(num / den, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_uncorrelated_limit(seed):
    beta, alloc, data, s2 = _instance(seed)
    np.testing.assert_allclose(
        sinr_corr_all(beta, CorrelationModel(0.0, 0.3), alloc, data, s2, 16),
        sinr_proposed_all(beta, alloc, data, s2, 16), rtol=1e-10)


@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
def test_correlation_changes_only_noncoherent_part(rho):
    beta, alloc, data, s2 = _instance(7)
    M = 12
    L, K, _ = alloc.shape
    rng = np.random.default_rng(0)
    corr = CorrelationModel(rho, rng.uniform(-np.pi, np.pi, beta.shape))
    r = corr.coefficients(beta.shape)
    num = M * beta[range(L), range(L)] ** 2 * data * alloc.energy() ** 2
    d_corr = num / sinr_corr_all(beta, corr, alloc, data, s2, M)
    d_prop = num / sinr_proposed_all(beta, alloc, data, s2, M)
    G2 = np.einsum("lkb,itb->lkit", np.sqrt(alloc.powers), np.sqrt(alloc.powers)) ** 2
    extra = np.zeros((L, K))
    for l in range(L):
        for k in range(K):
            for i in range(L):
                for t in range(K):
                    for u in range(L):
                        for v in range(K):
                            T = trace_product_dense(beta[l, i, t], r[l, i, t], beta[l, u, v], r[l, u, v], M)
                            extra[l, k] += data[i, t] * G2[l, k, u, v] * (T - M * beta[l, i, t] * beta[l, u, v]) / M
    np.testing.assert_allclose(d_corr - d_prop, extra, rtol=1e-8, atol=1e-12 * np.abs(d_prop).max())


@given(st.floats(0, 1), st.floats(0.1, 5))
def test_two_antenna_trace(rho, b):
    assert trace_products(b, rho, b, rho, 2) == pytest.approx(b * b * (2 + 2 * rho * rho), rel=1e-12)


@settings(max_examples=40)
@given(st.integers(1, 64), st.floats(0, 1), st.floats(-4, 4), st.floats(0, 1), st.floats(-4, 4))
def test_trace_fast_matches_dense(M, ra, ta, rb, tb):
    za, zb = ra * np.exp(1j * ta), rb * np.exp(1j * tb)
    fast = float(trace_products(1.3, za, 0.4, zb, M))
    dense = trace_product_dense(1.3, za, 0.4, zb, M)
    assert fast == pytest.approx(dense, rel=1e-10, abs=1e-12 * M)


def test_link_traces_shape():
    beta, *_ = _instance(0)
    T = link_trace_products(beta, CorrelationModel(0.5), 8)
    assert T.shape == (3, 3, 2, 3, 2)


def test_correlation_magnitude_checked():
    with pytest.raises(ValueError):
        CorrelationModel(1.2)


def test_asymptotic_two_users_shared_pilot():
    beta = np.ones((2, 2, 1))
    alloc = PilotAllocation(np.ones((2, 1, 1)))
    np.testing.assert_allclose(sinr_asymptotic_all(beta, alloc, np.ones((2, 1))), 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_large_antenna_consistency(seed):
    beta, alloc, data, s2 = _instance(seed)
    lim = sinr_asymptotic_all(beta, alloc, data)
    big = sinr_proposed_all(beta, alloc, data, s2, 10**6)
    finite = np.isfinite(lim) & (lim > 0)
    np.testing.assert_allclose(big[finite], lim[finite], rtol=1e-2)


@pytest.mark.parametrize("sinr, tp, tc, expected", [
    (0.0, 1, 200, 0.0),
    (1.0, 100, 200, 0.5),
    (0.5, 1, 200, 0.995 * math.log2(1.5)),
])
def test_se_examples(sinr, tp, tc, expected):
    assert se_from_sinr(sinr, tp, tc) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(1e-3, 1e3))
def test_scale_covariance(seed, c):
    beta, alloc, data, s2 = _instance(seed)
    alloc = PilotAllocation(alloc.powers + 0.01)
    scaled = PilotAllocation(alloc.powers * c)
    w = _weights(alloc)
    corr = CorrelationModel(0.4, 0.7)
    pairs = [
        (sinr_proposed_all(beta, alloc, data, s2, 30), sinr_proposed_all(beta, scaled, data * c, s2 * c, 30)),
        (sinr_approx_all(beta, alloc, data, s2, 30, w), sinr_approx_all(beta, scaled, data * c, s2 * c, 30, w)),
        (sinr_hw_all(beta, alloc, data, s2, 30, 0.2), sinr_hw_all(beta, scaled, data * c, s2 * c, 30, 0.2)),
        (sinr_corr_all(beta, corr, alloc, data, s2, 30), sinr_corr_all(beta, corr, scaled, data * c, s2 * c, 30)),
    ]
    for a, b in pairs:
        np.testing.assert_allclose(b, a, rtol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_monotone_in_antennas(seed):
    beta, alloc, data, s2 = _instance(seed)
    vals = [sinr_proposed_all(beta, alloc, data, s2, M) for M in (10**2, 10**4, 10**6)]
    assert np.all(vals[1] >= vals[0] * (1 - 1e-12))
    assert np.all(vals[2] >= vals[1] * (1 - 1e-12))


def test_report_flags_unbounded():
    beta = np.array([[[1.0, 0.3]]])
    alloc = PilotAllocation(np.array([[[1.0, 0.0], [0.0, 1.0]]]))
    r = SinrReport.build(sinr_asymptotic_all(beta, alloc, np.ones((1, 2))), 2, 200, "asymptotic")
    assert r.unbounded.all()
    assert json.loads(r.to_json())["sinr"] == [["inf", "inf"]]
    with pytest.raises(ValueError):
        SinrReport.build(np.ones((1, 1)), 2, 200, "nope")


def test_report_min_user():
    r = SinrReport.build(np.array([[3.0, 1.0], [2.0, 5.0]]), 2, 200, "proposed")
    assert r.min_user == (0, 1)
    assert r.min_se == pytest.approx(0.99 * 1.0)
    assert r.to_csv().splitlines()[0] == "l,k,variant,sinr,se"
