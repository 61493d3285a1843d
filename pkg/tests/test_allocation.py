import numpy as np
import pytest

from conftest import qp_slot_groups, random_qp_instance
from flexbeam.allocation import (
    AllocationSolution,
    TwtaPairing,
    discretize_carriers,
    solve_bandwidth_qp,
)
from flexbeam.oracles import qp_first_order_oracle, qp_first_order_oracle_batch


def _as_oracle_instance(inst):
    group, n_groups = qp_slot_groups(inst["cand_beams"], inst["n_beams"], inst["mode"])
    limit = inst["total_bandwidth_mhz"] if inst["mode"] == "paired" else inst["per_beam_cap_mhz"]
    return dict(demands=inst["demands"], eff=inst["cand_eff"], slot_group=group,
                group_limits=np.full(n_groups, limit), user_cap=inst["user_cap_mhz"])


def _oracle_objective(inst, iterations=20_000):
    o = _as_oracle_instance(inst)
    _, obj = qp_first_order_oracle(o["demands"], o["eff"], o["slot_group"],
                                   o["group_limits"], o["user_cap"],
                                   iterations=iterations)
    return obj


def test_pairing_partitions_beams():
    pairing = TwtaPairing(6)
    assert pairing.pairs == [(0, 1), (2, 3), (4, 5)]
    assert [pairing.group_of(k) for k in range(6)] == [0, 0, 1, 1, 2, 2]
    with pytest.raises(ValueError):
        TwtaPairing(5)


def test_single_user_meets_demand_exactly():
    sol = solve_bandwidth_qp(np.array([100.0]), np.array([[4.0, 0.0]]),
                             np.array([[0, -1]]), 2, mode="paired")
    assert sol.user_bandwidth[0, 0] == pytest.approx(25.0, abs=1e-6)
    assert sol.objective_value == pytest.approx(0.0, abs=1e-8)


def test_symmetric_overload_splits_equally():
    sol = solve_bandwidth_qp(np.array([300.0, 300.0]),
                             np.array([[4.0, 0.0], [4.0, 0.0]]),
                             np.array([[0, -1], [0, -1]]), 2,
                             mode="per_beam", per_beam_cap_mhz=100.0)
    assert sol.user_bandwidth[0, 0] == pytest.approx(sol.user_bandwidth[1, 0], rel=1e-9)
    assert sol.beam_bandwidth[0] == pytest.approx(100.0, abs=1e-9)
    assert sol.objective_value == pytest.approx(20_000.0, rel=1e-6)


def test_matches_first_order_oracle_on_fixed_instance():
    # the 3-beam, 8-user reference instance; expected value frozen from the
    # projected-gradient oracle run to convergence
    rng = np.random.default_rng(2024)
    demands = rng.uniform(10.0, 50.0, 8)
    cand = np.array([[0, 1], [1, 2], [0, 2], [1, -1], [2, 0], [0, 1], [2, 1], [1, 0]])
    eff = np.where(cand >= 0, rng.uniform(0.5, 4.0, (8, 2)), 0.0)
    inst = dict(demands=demands, cand_eff=eff, cand_beams=cand, n_beams=4,
                mode="per_beam", total_bandwidth_mhz=500.0, user_cap_mhz=20.0,
                per_beam_cap_mhz=40.0)
    sol = solve_bandwidth_qp(**inst)
    oracle_obj = _oracle_objective(inst)
    scale = max(sol.objective_value, oracle_obj, 1e-6 * float((demands ** 2).sum()))
    assert abs(sol.objective_value - oracle_obj) <= 1e-4 * scale


def test_matches_first_order_oracle_on_random_instances():
    rng = np.random.default_rng(7)
    instances = [random_qp_instance(rng) for _ in range(25)]
    _, oracle_objs = qp_first_order_oracle_batch(
        [_as_oracle_instance(i) for i in instances])
    for inst, oracle_obj in zip(instances, oracle_objs):
        sol = solve_bandwidth_qp(**inst)
        scale = max(sol.objective_value, oracle_obj,
                    1e-6 * float((inst["demands"] ** 2).sum()))
        assert abs(sol.objective_value - oracle_obj) <= 1e-4 * scale


def test_kkt_residuals_and_feasibility():
    rng = np.random.default_rng(13)
    for _ in range(50):
        inst = random_qp_instance(rng)
        sol = solve_bandwidth_qp(**inst)
        assert sol.converged
        assert sol.stationarity_residual <= 1e-6
        assert sol.complementarity_residual <= 1e-6
        assert sol.primal_violation_mhz <= 1e-9
        # explicit constraint recheck in MHz
        assert np.all(sol.user_bandwidth >= -1e-12)
        assert np.all(sol.user_bandwidth.sum(axis=1) <= inst["user_cap_mhz"] + 1e-9)
        if inst["mode"] == "paired":
            pair_sums = sol.beam_bandwidth.reshape(-1, 2).sum(axis=1)
            assert np.all(pair_sums <= inst["total_bandwidth_mhz"] + 1e-9)
        else:
            assert np.all(sol.beam_bandwidth <= inst["per_beam_cap_mhz"] + 1e-9)


def test_objective_not_worse_than_uniform_allocation():
    rng = np.random.default_rng(29)
    for _ in range(20):
        inst = random_qp_instance(rng)
        sol = solve_bandwidth_qp(**inst)
        uniform_obj = _uniform_point_objective(inst)
        assert sol.objective_value <= uniform_obj * (1 + 1e-9) + 1e-9


def _uniform_point_objective(inst):
    # equal bandwidth split across each best-candidate beam's users
    cand, eff = inst["cand_beams"], inst["cand_eff"]
    n_beams = inst["n_beams"]
    best_slot = np.argmax(np.where(cand >= 0, eff, -1.0), axis=1)
    rows = np.arange(len(cand))
    beam = cand[rows, best_slot]
    w_beam = (inst["total_bandwidth_mhz"] / 2.0 if inst["mode"] == "paired"
              else inst["per_beam_cap_mhz"])
    counts = np.bincount(beam[beam >= 0], minlength=n_beams)
    offered = np.zeros(len(cand))
    for n in rows:
        if beam[n] >= 0:
            share = min(inst["user_cap_mhz"], w_beam / counts[beam[n]])
            offered[n] = share * eff[n, best_slot[n]]
    return float(((inst["demands"] - offered) ** 2).sum())


def test_relaxing_per_beam_caps_to_pair_budget_never_hurts():
    rng = np.random.default_rng(31)
    for _ in range(15):
        inst = random_qp_instance(rng)
        inst["mode"] = "per_beam"
        inst["per_beam_cap_mhz"] = 100.0
        tight = solve_bandwidth_qp(**inst)
        inst2 = dict(inst)
        inst2["mode"] = "paired"
        inst2["total_bandwidth_mhz"] = 200.0  # pair budget = sum of the two caps
        loose = solve_bandwidth_qp(**inst2)
        assert loose.objective_value <= tight.objective_value * (1 + 1e-7) + 1e-9


def test_restarts_agree():
    # convexity sanity: the optimum value is unique even though the
    # minimizer may not be; different regularization magnitudes must agree
    rng = np.random.default_rng(3)
    inst = random_qp_instance(rng)
    objs = [solve_bandwidth_qp(**inst, reg=r).objective_value
            for r in (1e-9, 3e-9, 1e-10, 1e-8, 5e-9)]
    base = max(max(objs), 1e-6)
    assert max(objs) - min(objs) <= 1e-6 * base


def test_infeasible_slots_get_no_bandwidth():
    sol = solve_bandwidth_qp(np.array([40.0, 30.0]),
                             np.array([[2.0, 1.0], [3.0, 0.0]]),
                             np.array([[0, 1], [1, -1]]), 2, mode="paired")
    assert sol.user_bandwidth[1, 1] == 0.0
    assert sol.cand_beams[1, 1] == -1


def test_beam_bandwidth_consistent_with_shares():
    rng = np.random.default_rng(97)
    inst = random_qp_instance(rng)
    sol = solve_bandwidth_qp(**inst)
    want = np.zeros(inst["n_beams"])
    for n in range(len(inst["demands"])):
        for c in range(2):
            b = inst["cand_beams"][n, c]
            if b >= 0:
                want[b] += sol.user_bandwidth[n, c]
    assert np.allclose(sol.beam_bandwidth, want, atol=1e-12)


def test_offered_rate_upper_is_eff_times_bandwidth():
    sol = solve_bandwidth_qp(np.array([50.0]), np.array([[2.0, 1.0]]),
                             np.array([[0, 1]]), 2, mode="paired")
    assert np.allclose(sol.offered_rate_upper, sol.user_bandwidth * np.array([[2.0, 1.0]]))
    assert sol.offered_relaxed()[0] == pytest.approx(50.0, abs=1e-6)


def test_dense_rates_masks_non_candidates():
    sol = solve_bandwidth_qp(np.array([50.0]), np.array([[2.0, 0.0]]),
                             np.array([[1, -1]]), 4, mode="paired")
    dense = sol.dense_rates(4)
    assert dense.shape == (1, 4)
    assert np.isneginf(dense[0, [0, 2, 3]]).all()
    assert dense[0, 1] == pytest.approx(50.0, abs=1e-6)


def test_discretize_carriers():
    counts = discretize_carriers(np.array([130.0, 0.0, 500.0, 62.5, 249.99999999999997]))
    assert counts.tolist() == [2, 0, 8, 1, 4]
    with pytest.raises(ValueError):
        discretize_carriers(np.array([-1.0]))


def test_zero_candidate_users_contribute_constant():
    sol = solve_bandwidth_qp(np.array([30.0, 40.0]),
                             np.array([[2.0, 0.0], [0.0, 0.0]]),
                             np.array([[0, -1], [-1, -1]]), 2, mode="paired")
    assert sol.objective_value == pytest.approx(40.0 ** 2, abs=1e-6)
