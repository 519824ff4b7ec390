import itertools
import json

import numpy as np
import pytest

from pilotopt.network import NetworkConfig, NetworkRealization, generate_layout
from pilotopt.optimize import (
    OptConfig,
    OptResult,
    baseline_random,
    baseline_smart,
    build_maxmin_gp_assignment,
    build_maxmin_gp_sca,
    exact_sinr,
    smart_assignment,
    solve_exhaustive,
    solve_sca,
)
from pilotopt.pilots import PilotAllocation, PilotAssignment, UnsupportedStructureError
from pilotopt.se import se_from_sinr, sinr_assignment_all, sinr_proposed_all

SMALL = NetworkConfig(num_cells=2, users_per_cell=2, pilot_len=2, bs_antennas=20)


@pytest.fixture(scope="module")
def small_net():
    return generate_layout(SMALL, seed=4)


def test_single_user_assignment_goes_to_caps():
    net = generate_layout(NetworkConfig(num_cells=1, users_per_cell=1, pilot_len=1, bs_antennas=50), 0)
    c = net.config
    res = solve_exhaustive(net, OptConfig())
    at_caps = sinr_assignment_all(net.beta, PilotAssignment(np.zeros((1, 1), int), c.max_pilot_power),
                                  np.full((1, 1), c.max_data_power), c.noise_power, c.bs_antennas)
    assert res.xi == pytest.approx(at_caps[0, 0], rel=1e-6)
    assert len(res.trace) == 1


def test_assignment_gp_dimensions(small_net):
    L, K = SMALL.shape
    prob = build_maxmin_gp_assignment(small_net, np.array([[0, 1], [1, 0]]), OptConfig())
    assert prob.nvars == 2 * K * L + 1
    assert len(prob.all_constraints()) == 3 * K * L
    pilot_only = build_maxmin_gp_assignment(small_net, np.array([[0, 1], [1, 0]]),
                                            OptConfig(power_mode="pilot_only_full_data"))
    assert pilot_only.nvars == K * L + 1
    assert all(not n.startswith("p_") for n in pilot_only.names)


def test_assignment_requires_square_pilots():
    net = generate_layout(NetworkConfig(num_cells=2, users_per_cell=2, pilot_len=3), 0)
    with pytest.raises(UnsupportedStructureError):
        build_maxmin_gp_assignment(net, np.array([[0, 1], [0, 1]]), OptConfig())


def test_exhaustive_two_patterns(small_net):
    res = solve_exhaustive(small_net, OptConfig())
    assert len(res.trace) == 2
    assert res.xi == pytest.approx(max(res.trace), rel=1e-12)
    assert res.solver_statuses == ["optimal", "optimal"]
    assert res.xi == pytest.approx(float(res.sinr.min()))


def test_exhaustive_threads_match_serial(small_net):
    a = solve_exhaustive(small_net, OptConfig())
    b = solve_exhaustive(small_net, OptConfig(workers=2))
    assert a.trace == b.trace


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_beats_baselines(seed):
    net = generate_layout(SMALL, seed)
    cfg = OptConfig()
    best = solve_exhaustive(net, cfg).xi
    assert best >= baseline_smart(net, cfg).min_sinr * (1 - 1e-7)
    for s in range(5):
        assert best >= baseline_random(net, cfg, s).min_sinr * (1 - 1e-7)


def test_returned_points_respect_caps(small_net):
    c = small_net.config
    for res in (solve_exhaustive(small_net, OptConfig()), solve_sca(small_net, OptConfig())):
        mean_pilot = res.pilot_alloc.powers.mean(axis=2)
        assert np.all(mean_pilot <= c.max_pilot_power * (1 + 1e-8))
        assert np.all(res.data_p <= c.max_data_power * (1 + 1e-8))


def test_grid_oracle_two_cells_single_user():
    beta = np.array([[[1e-7], [4e-9]], [[2e-9], [3e-8]]])
    net = NetworkRealization.from_beta(beta, bs_antennas=30, pilot_len=1)
    c = net.config
    res = solve_exhaustive(net, OptConfig())
    g = np.logspace(-3, 0, 61)
    pt1, pt2, p1, p2 = np.meshgrid(g, g, g, g, indexing="ij", sparse=False)
    pt = np.stack([pt1.ravel(), pt2.ravel()], 1) * c.max_pilot_power
    p = np.stack([p1.ravel(), p2.ravel()], 1) * c.max_data_power
    s2, M = c.noise_power, c.bs_antennas
    best = 0.0
    for l in range(2):
        o = 1 - l
        est_den = beta[l, l, 0] * pt[:, l] + beta[l, o, 0] * pt[:, o] + s2
        rx = beta[l, l, 0] * p[:, l] + beta[l, o, 0] * p[:, o] + s2
        num = M * beta[l, l, 0] ** 2 * pt[:, l] * p[:, l]
        den = est_den * rx + M * beta[l, o, 0] ** 2 * pt[:, o] * p[:, o]
        sinr = num / den
        best = sinr if l == 0 else np.minimum(best, sinr)
    grid = float(best.max())
    assert res.xi >= grid * (1 - 1e-7)
    assert res.xi <= grid * 1.01


def test_sca_dimensions(small_net):
    L, K, tau = 2, 2, 2
    alloc = PilotAllocation(np.full((L, K, tau), 50.0))
    prob, alpha = build_maxmin_gp_sca(small_net, alloc, np.full((L, K), 100.0), OptConfig())
    assert prob.nvars == K * L * (tau + 1) + 1
    assert len(prob.all_constraints()) == 3 * K * L
    np.testing.assert_allclose(alpha, 0.5)


def _sinr_lhs(prob, alloc, data_p):
    x = np.concatenate([[1.0], alloc.powers.ravel(), np.asarray(data_p).ravel()])
    L, K = data_p.shape
    return np.array([prob.constraints[j].evaluate(x) for j in range(L * K)]).reshape(L, K)


def test_sca_tight_at_expansion_point(small_net):
    rng = np.random.default_rng(0)
    alloc = PilotAllocation(rng.uniform(1, 200, (2, 2, 2)))
    data_p = rng.uniform(1, 200, (2, 2))
    prob, _ = build_maxmin_gp_sca(small_net, alloc, data_p, OptConfig())
    c = small_net.config
    exact = sinr_proposed_all(small_net.beta, alloc, data_p, c.noise_power, c.bs_antennas)
    np.testing.assert_allclose(_sinr_lhs(prob, alloc, data_p), 1 / exact, rtol=1e-10)
    moved = PilotAllocation(alloc.powers * rng.uniform(0.2, 1.0, alloc.shape))
    exact_moved = sinr_proposed_all(small_net.beta, moved, data_p, c.noise_power, c.bs_antennas)
    assert np.all(_sinr_lhs(prob, moved, data_p) >= 1 / exact_moved * (1 - 1e-12))


def test_sca_single_basis_is_exact():
    net = generate_layout(NetworkConfig(num_cells=2, users_per_cell=1, pilot_len=1, bs_antennas=40), 1)
    c = net.config
    alloc = PilotAllocation(np.array([[[30.0]], [[90.0]]]))
    data_p = np.array([[20.0], [150.0]])
    prob, _ = build_maxmin_gp_sca(net, alloc, data_p, OptConfig())
    other = PilotAllocation(np.array([[[5.0]], [[180.0]]]))
    exact = sinr_proposed_all(net.beta, other, data_p, c.noise_power, c.bs_antennas)
    np.testing.assert_allclose(_sinr_lhs(prob, other, data_p), 1 / exact, rtol=1e-10)


def test_sca_rejects_bad_expansion_point(small_net):
    with pytest.raises(ValueError):
        build_maxmin_gp_sca(small_net, PilotAllocation(np.full((2, 2, 2), 500.0)),
                            np.full((2, 2), 10.0), OptConfig())
    with pytest.raises(ValueError):
        build_maxmin_gp_sca(small_net, PilotAllocation(np.zeros((2, 2, 2))),
                            np.full((2, 2), 10.0), OptConfig())


def test_sca_single_user_converges_to_caps():
    net = generate_layout(NetworkConfig(num_cells=1, users_per_cell=1, pilot_len=1, bs_antennas=50), 2)
    c = net.config
    res = solve_sca(net, OptConfig())
    assert len(res.trace) <= 2
    assert res.pilot_alloc.powers[0, 0, 0] == pytest.approx(c.max_pilot_power, rel=1e-5)
    assert res.data_p[0, 0] == pytest.approx(c.max_data_power, rel=1e-5)


@pytest.mark.parametrize("seed", range(4))
def test_sca_trace_nondecreasing(seed, small_net):
    res = solve_sca(small_net, OptConfig(init_seed=seed))
    start = res.metadata["initial_xi"]
    seq = [start] + res.trace
    for a, b in zip(seq, seq[1:]):
        assert b >= a * (1 - 1e-6)
    # exact SINR dominates the bound the last GP optimized
    assert res.xi >= res.metadata["gp_xi"][-1] * (1 - 1e-6)


def test_sca_pilot_only_keeps_full_data(small_net):
    res = solve_sca(small_net, OptConfig(power_mode="pilot_only_full_data"))
    np.testing.assert_array_equal(res.data_p, small_net.config.data_caps())
    assert res.method == "sca_pilot_only"


@pytest.mark.parametrize("mode", [dict(objective_mode="hardware", epsilon=0.0),
                                  dict(objective_mode="correlated", rho=0.0)])
def test_mode_reductions(mode, small_net):
    ideal = solve_exhaustive(small_net, OptConfig())
    other = solve_exhaustive(small_net, OptConfig(**mode))
    assert other.xi == pytest.approx(ideal.xi, rel=1e-5)


def test_hardware_mode_exact_sinr_is_used(small_net):
    cfg = OptConfig(objective_mode="hardware", epsilon=0.2)
    res = solve_exhaustive(small_net, cfg)
    np.testing.assert_allclose(res.sinr, exact_sinr(small_net, res.pilot_alloc, res.data_p, cfg))
    assert res.xi < solve_exhaustive(small_net, OptConfig()).xi


def test_random_baseline_single_cell_is_clean():
    net = generate_layout(NetworkConfig(num_cells=1, users_per_cell=3, pilot_len=3, bs_antennas=100), 0)
    c = net.config
    r = baseline_random(net, OptConfig(), seed=9)
    a = PilotAssignment(np.array([[0, 1, 2]]), 3 * c.max_pilot_power)
    expected = sinr_assignment_all(net.beta, a, c.data_caps(), c.noise_power, c.bs_antennas)
    np.testing.assert_allclose(r.sinr, expected, rtol=1e-12)


def test_random_baseline_reproducible(small_net):
    a = baseline_random(small_net, OptConfig(), 17)
    b = baseline_random(small_net, OptConfig(), 17)
    assert a.metadata["assignment"] == b.metadata["assignment"]
    np.testing.assert_array_equal(a.sinr, b.sinr)


def test_smart_single_cell_metric_is_zero():
    beta = np.array([[[1.0, 3.0, 2.0]]])
    assert sorted(smart_assignment(beta)[0]) == [0, 1, 2]


def test_smart_splits_dominant_pair():
    beta = np.full((2, 2, 2), 1e-9)
    beta[0, 0] = [1e-6, 2e-6]
    beta[1, 1] = [1e-6, 2e-6]
    beta[1, 0, 0] = 5e-7  # user (0,0) is loud at BS 1
    beta[0, 1, 0] = 5e-7  # user (1,0) is loud at BS 0
    idx = smart_assignment(beta)
    assert idx[0, 0] != idx[1, 0]
    net = NetworkRealization.from_beta(beta, bs_antennas=100)
    c = net.config
    min_sinr = {}
    for rows in itertools.product(itertools.permutations(range(2)), repeat=2):
        a = PilotAssignment(np.array(rows), 2 * c.max_pilot_power)
        min_sinr[rows] = sinr_assignment_all(beta, a, c.data_caps(), c.noise_power, 100).min()
    chosen = tuple(tuple(r) for r in idx)
    assert min_sinr[chosen] == max(min_sinr.values())


def test_smart_flags_approximation(small_net):
    assert baseline_smart(small_net, OptConfig()).metadata["approximate"] is True


def test_smart_beats_random_on_average():
    cfg = NetworkConfig(num_cells=4, users_per_cell=2, pilot_len=2, bs_antennas=300)
    smart, rand = [], []
    for seed in range(100):
        net = generate_layout(cfg, seed)
        smart.append(baseline_smart(net, OptConfig()).min_se)
        rand.append(baseline_random(net, OptConfig(), seed).min_se)
    assert np.mean(smart) >= np.mean(rand)


def test_config_validation():
    with pytest.raises(ValueError):
        OptConfig(objective_mode="magic")
    with pytest.raises(ValueError):
        OptConfig(power_mode="nope")
    with pytest.raises(ValueError):
        OptConfig(epsilon=1.0)


def test_result_json(small_net):
    res = solve_exhaustive(small_net, OptConfig())
    data = json.loads(res.to_json())
    assert data["method"] == "exhaustive_joint"
    assert len(data["trace"]) == 2
    rep = res.report(small_net)
    assert rep.min_se == pytest.approx(float(se_from_sinr(res.xi, 2, 200)))
    assert isinstance(res, OptResult)
