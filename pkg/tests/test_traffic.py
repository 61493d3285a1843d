import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.traffic import (
    PopulationGrid,
    TrafficScenario,
    User,
    generate_users,
    largest_remainder_counts,
    load_population_grid,
    parse_population_grid,
    sample_dirichlet,
    sample_positions_from_grid,
    save_population_grid,
    uniform_beam_centers,
)


def _reference_largest_remainder(shares, total):
    # independent reimplementation: floor everything, then hand out the
    # leftover seats by descending fractional part, lower index first
    raw = [s * total for s in shares]
    base = [int(np.floor(r)) for r in raw]
    left = total - sum(base)
    order = sorted(range(len(shares)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def test_dirichlet_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = sample_dirichlet([1.0] * 6, rng)
        assert abs(s.sum() - 1.0) <= 1e-12
        assert np.all(s >= 0.0)


def test_dirichlet_mean_matches_concentration():
    rng = np.random.default_rng(1)
    alpha = np.array([4.0, 4.0, 1.0, 1.0, 1.0, 1.0])
    draws = np.array([sample_dirichlet(alpha, rng) for _ in range(100_000)])
    want = alpha / alpha.sum()
    assert np.all(np.abs(draws.mean(axis=0) - want) < 0.01)


def test_dirichlet_rejects_nonpositive_alpha():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        sample_dirichlet([0.0, 1.0], rng)


def test_dirichlet_seeded_reproducibility():
    a = sample_dirichlet([2.0, 3.0, 4.0], np.random.default_rng(77))
    b = sample_dirichlet([2.0, 3.0, 4.0], np.random.default_rng(77))
    assert np.array_equal(a, b)


def test_largest_remainder_exact_shares():
    counts = largest_remainder_counts(np.full(6, 1.0 / 6.0), 272)
    # frozen from the reference rounding rule on exact shares
    assert counts.tolist() == [46, 46, 45, 45, 45, 45]
    assert counts.sum() == 272


def test_largest_remainder_matches_reference_on_random_shares():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = int(rng.integers(2, 9))
        shares = sample_dirichlet(np.full(k, 1.0), rng)
        total = int(rng.integers(1, 500))
        got = largest_remainder_counts(shares, total)
        assert got.tolist() == _reference_largest_remainder(shares, total)
        assert got.sum() == total


def test_uniform_beam_centers_layout():
    centers = uniform_beam_centers(3, 2, 100.0)
    assert centers.shape == (6, 2)
    # row-major: beams 0 and 1 are horizontal neighbours 100 km apart
    assert centers[1, 0] - centers[0, 0] == pytest.approx(100.0)
    assert centers[1, 1] == centers[0, 1]
    assert np.allclose(centers.mean(axis=0), [0.0, 0.0])


def test_generate_users_ht_counts_and_geometry():
    scenario = TrafficScenario.ht()
    centers = uniform_beam_centers(3, 2, 100.0)
    rng = np.random.default_rng(5)
    users = generate_users(scenario, centers, rng)
    assert len(users) == 272
    total = sum(u.demand_mbps for u in users)
    assert total == pytest.approx(6800.0)
    assert total == pytest.approx(scenario.total_demand_mbps)
    # every user lies within the nominal radius of some beam center
    xy = np.array([u.position for u in users])
    d = np.hypot(xy[:, None, 0] - centers[None, :, 0], xy[:, None, 1] - centers[None, :, 1])
    assert np.all(d.min(axis=1) <= scenario.beam_radius_km + 1e-9)


def test_generate_users_is_seed_deterministic():
    scenario = TrafficScenario.whs()
    centers = uniform_beam_centers(3, 2, 100.0)
    a = generate_users(scenario, centers, np.random.default_rng(9))
    b = generate_users(scenario, centers, np.random.default_rng(9))
    assert a == b


def test_generate_users_validates_beam_count():
    scenario = TrafficScenario.ht()
    with pytest.raises(ValueError):
        generate_users(scenario, np.zeros((4, 2)), np.random.default_rng(0))


def test_population_grid_single_hot_cell():
    grid = PopulationGrid(np.array([[1.0, 0.0], [0.0, 0.0]]), 0.0, 200.0, 0.0, 100.0)
    xy = sample_positions_from_grid(grid, 500, np.random.default_rng(4))
    assert np.all(xy[:, 0] >= 0.0) and np.all(xy[:, 0] <= 100.0)
    assert np.all(xy[:, 1] >= 0.0) and np.all(xy[:, 1] <= 50.0)


def test_population_grid_frequencies_match_weights():
    weights = np.array([[1.0, 2.0, 3.0], [4.0, 0.0, 2.0]])
    grid = PopulationGrid(weights, 0.0, 300.0, 0.0, 200.0)
    n = 1_000_000
    xy = sample_positions_from_grid(grid, n, np.random.default_rng(6))
    cols = np.clip((xy[:, 0] / 100.0).astype(int), 0, 2)
    rows = np.clip((xy[:, 1] / 100.0).astype(int), 0, 1)
    counts = np.zeros_like(weights)
    np.add.at(counts, (rows, cols), 1)
    p = weights / weights.sum()
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3.0 * np.maximum(sigma, 1.0))


def test_grid_rejects_bad_inputs():
    with pytest.raises(ValueError, match="negative"):
        PopulationGrid(np.array([[1.0, -0.5]]), 0, 1, 0, 1)
    with pytest.raises(ValueError, match="all-zero"):
        PopulationGrid(np.zeros((2, 2)), 0, 1, 0, 1)
    with pytest.raises(ValueError):
        parse_population_grid("2 2 0 1 0 1\n1 0 0\n")
    with pytest.raises(ValueError):
        parse_population_grid("2 x 0 1 0 1\n1 0 0 0\n")


def test_grid_round_trip(tmp_path):
    grid = PopulationGrid(np.array([[1.0, 0.25], [0.0, 7.5]]), -10.0, 10.0, 0.0, 40.0)
    path = tmp_path / "grid.txt"
    save_population_grid(grid, path)
    loaded = load_population_grid(path)
    assert np.array_equal(loaded.weights, grid.weights)
    assert (loaded.x_min, loaded.x_max, loaded.y_min, loaded.y_max) == (-10.0, 10.0, 0.0, 40.0)


def test_rt_scenario_generation():
    grid = PopulationGrid(np.array([[0.0, 1.0], [3.0, 0.0]]), 0.0, 690.0, 0.0, 800.0)
    scenario = TrafficScenario.rt(grid, user_count=100)
    centers = uniform_beam_centers(8, 8, 100.0, center_xy=(345.0, 400.0))
    users = generate_users(scenario, centers, np.random.default_rng(10))
    assert len(users) == 100
    assert sum(u.demand_mbps for u in users) == pytest.approx(2500.0)


def test_user_rejects_nonpositive_demand():
    with pytest.raises(ValueError):
        User((0.0, 0.0), 0.0)


@settings(max_examples=50, deadline=None, derandomize=True)
@given(
    st.lists(st.floats(0.05, 20.0), min_size=2, max_size=10),
    st.integers(0, 2**31 - 1),
)
def test_dirichlet_property_simplex(alpha, seed):
    s = sample_dirichlet(alpha, np.random.default_rng(seed))
    assert abs(s.sum() - 1.0) <= 1e-12
    assert np.all((s >= 0.0) & (s <= 1.0))
