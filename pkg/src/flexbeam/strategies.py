"""End-to-end scheduling strategies for the multibeam downlink.

Five strategies cover the flexibility spectrum:

* ``SR``      -- flexible user mapping plus movable, resizable service ranges
                 at fixed per-beam bandwidth;
* ``BW-SR``   -- SR plus bandwidth pooled within each amplifier pair and
                 per-beam carrier counts;
* ``MAP``     -- flexible user mapping only, beams fixed;
* ``BW-MAP``  -- MAP plus pooled bandwidth and carrier counts;
* ``BW-POW``  -- rigid dominant-beam mapping with a genetic search over
                 per-beam carrier counts and power multipliers.

The iterative strategies repeat: solve the bandwidth program over each
user's two strongest feasible beams, reassign every user to its best-rate
candidate, discretize carrier counts (bandwidth-flexible modes), recenter and
resize beams to the smallest circle enclosing their users (range-flexible
modes), refresh the SNR matrix, and recompute the load-balancing degree. The
loop stops as soon as that degree fails to strictly decrease and the last
improving state is returned.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import AllocationSolution, discretize_carriers, solve_bandwidth_qp
from .geometry import Point
from .intra_beam import CarrierSchedule, schedule_carriers
from .link_budget import AntennaModel, LinkParams, carrier_snr_matrix, spectral_efficiency
from .mapping import (
    BeamState,
    BeamUserMapping,
    dominant_beam_mapping,
    load_balancing_degree,
    per_beam_demand,
    remap_users,
    update_beam_geometry,
)
from .metrics import UniformBaseline

STRATEGY_NAMES = ("BW-POW", "MAP", "BW-MAP", "SR", "BW-SR")


@dataclass(frozen=True)
class SystemParams:
    """Physical and algorithmic parameters shared by all strategies."""

    antenna: AntennaModel
    link: LinkParams                      # with calibrated carrier power
    max_service_radius_km: float = 70.962
    total_bandwidth_mhz: float = 500.0
    carriers_per_color: int = 4
    candidates_per_user: int = 2
    max_rounds: int = 50
    map_iterative: bool = True
    qp_tol: float = 1e-9
    qp_reg: float = 1e-9
    qp_max_iter: int = 100

    @property
    def carrier_bandwidth_mhz(self) -> float:
        return self.link.carrier_bandwidth_mhz

    @property
    def uniform_beam_bandwidth_mhz(self) -> float:
        return self.carriers_per_color * self.carrier_bandwidth_mhz


@dataclass(frozen=True)
class GaParams:
    """Genetic-search settings for the power-and-bandwidth baseline.

    `max_carriers_per_beam` reflects the architecture this baseline models:
    without the digital channelizer of the repeater-flexible strategies, a
    beam can switch carriers of its own color slice on or off but cannot
    radiate its amplifier partner's slice. None means one color slice.
    """

    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    elites: int = 2
    tournament: int = 3
    power_mult_max: float = 4.0
    max_carriers_per_beam: int | None = None


@dataclass
class StrategyOutcome:
    """Final state and diagnostics of one strategy run."""

    strategy: str
    mapping: BeamUserMapping
    beam_states: list[BeamState]
    allocation: AllocationSolution | None
    schedules: list[CarrierSchedule]
    offered_scheduled: np.ndarray      # (N,) Mbps after carrier scheduling
    offered_relaxed: np.ndarray        # (N,) Mbps continuous relaxation
    iterations: int
    imbalance_trace: list[float]       # load-balancing degree per round
    wall_time_s: float
    ga_best_fitness: list[float] | None = None   # per-generation, BW-POW only


@dataclass(frozen=True)
class _Geometry:
    snr: np.ndarray        # (K, N)
    eff: np.ndarray        # (K, N)
    feasible: np.ndarray   # (K, N)
    dist: np.ndarray       # (K, N)


def _evaluate_geometry(user_xy, centers, params: SystemParams) -> _Geometry:
    mat = carrier_snr_matrix(user_xy, centers, params.antenna, params.link,
                             params.max_service_radius_km)
    centers = np.asarray(centers, dtype=float)
    user_xy = np.asarray(user_xy, dtype=float)
    dist = np.hypot(centers[:, None, 0] - user_xy[None, :, 0],
                    centers[:, None, 1] - user_xy[None, :, 1])
    return _Geometry(mat.snr, spectral_efficiency(mat.snr), mat.feasible, dist)


def _build_candidates(geo: _Geometry, max_candidates: int):
    """Each user's strongest feasible beams, best first.

    Users report their strongest downlink channels, so only the top
    `max_candidates` feasible beams enter the allocation. A user outside
    every service radius falls back to its nearest beam so its unmet demand
    stays visible to the metrics.
    """
    n_beams, n_users = geo.eff.shape
    score = np.where(geo.feasible, geo.eff, -np.inf)
    order = np.argsort(-score, axis=0, kind="stable")
    cand = np.full((n_users, max_candidates), -1, dtype=int)
    ceff = np.zeros((n_users, max_candidates))
    take = order[:max_candidates, :]
    for c in range(min(max_candidates, n_beams)):
        beams = take[c]
        ok = geo.feasible[beams, np.arange(n_users)]
        cand[ok, c] = beams[ok]
        ceff[ok, c] = geo.eff[beams[ok], np.nonzero(ok)[0]]
    orphan = ~geo.feasible.any(axis=0)
    if np.any(orphan):
        nearest = np.argmin(geo.dist[:, orphan], axis=0)
        cand[orphan, 0] = nearest
        ceff[orphan, 0] = geo.eff[nearest, np.nonzero(orphan)[0]]
    return cand, ceff


def _schedule_state(mapping: BeamUserMapping, geo: _Geometry, demands,
                    carriers, params: SystemParams, power_mult=None):
    """Carrier schedules and per-user offered rates for a frozen state.

    Per-beam service targets come from the quadratic-optimal continuous
    allocation over the beam's discrete bandwidth; the carrier packer then
    realizes each target as a time share (a bandwidth share of one carrier
    equals the same fraction of its airtime). Shortfall in an overloaded
    beam is therefore spread across its users instead of being dumped on
    whoever packs last.
    """
    n_users = len(demands)
    n_beams = geo.snr.shape[0]
    offered = np.zeros(n_users)
    schedules: list[CarrierSchedule] = []
    wtil = params.carrier_bandwidth_mhz
    for k in range(n_beams):
        users = mapping.users_of(k)
        p = 1.0 if power_mult is None else float(power_mult[k])
        eff = np.log2(1.0 + p * geo.snr[k, users])
        rates = wtil * eff
        targets = beam_service_targets(demands[users], eff,
                                       int(carriers[k]) * wtil, wtil)
        sched = schedule_carriers(targets, rates, int(carriers[k]))
        schedules.append(sched)
        offered[users] = sched.offered_mbps
    return schedules, offered


def beam_service_targets(demands, eff, bandwidth_mhz: float,
                         user_cap_mhz: float) -> np.ndarray:
    """Quadratic-optimal per-user service rates within one beam's band.

    Minimizes the beam's quadratic unmet demand subject to the per-user
    carrier-bandwidth cap and the beam bandwidth; the resulting rates are the
    targets handed to the carrier scheduler.
    """
    demands = np.asarray(demands, dtype=float)
    if len(demands) == 0:
        return demands.copy()
    eff = np.asarray(eff, dtype=float)
    shares = _waterfill_shares(demands, eff[None, :],
                               np.array([float(bandwidth_mhz)]), user_cap_mhz)[0]
    return eff * shares


def _beam_states(centers, radii, bandwidth, carriers) -> list[BeamState]:
    return [BeamState(Point(float(c[0]), float(c[1])), float(r), float(w), int(m))
            for c, r, w, m in zip(centers, radii, bandwidth, carriers)]


def uniform_baseline(user_xy, demands, centers, params: SystemParams) -> UniformBaseline:
    """Offered rates of the rigid reference system on one realization.

    Uniform beam grid, even bandwidth split, calibrated carrier power,
    dominant-beam mapping, and the standard carrier scheduling. Used to
    normalize the quadratic unmet metric.
    """
    user_xy = np.asarray(user_xy, dtype=float)
    demands = np.asarray(demands, dtype=float)
    geo = _evaluate_geometry(user_xy, centers, params)
    mapping = dominant_beam_mapping(user_xy, centers)
    carriers = np.full(len(centers), params.carriers_per_color)
    _, offered = _schedule_state(mapping, geo, demands, carriers, params)
    return UniformBaseline(offered)


def run_sr(user_xy, demands, centers, params: SystemParams, rng) -> StrategyOutcome:
    """Flexible mapping and service range at fixed per-beam bandwidth."""
    return _run_iterative("SR", user_xy, demands, centers, params, rng,
                          flexible_bandwidth=False, move_beams=True)


def run_bw_sr(user_xy, demands, centers, params: SystemParams, rng) -> StrategyOutcome:
    """Joint load and capacity scheduling: SR plus pooled bandwidth."""
    return _run_iterative("BW-SR", user_xy, demands, centers, params, rng,
                          flexible_bandwidth=True, move_beams=True)


def run_map(user_xy, demands, centers, params: SystemParams, rng) -> StrategyOutcome:
    """Flexible user mapping with fixed beams and fixed bandwidth."""
    return _run_iterative("MAP", user_xy, demands, centers, params, rng,
                          flexible_bandwidth=False, move_beams=False,
                          single_pass=not params.map_iterative)


def run_bw_map(user_xy, demands, centers, params: SystemParams, rng) -> StrategyOutcome:
    """Flexible user mapping and pooled bandwidth with fixed beams."""
    return _run_iterative("BW-MAP", user_xy, demands, centers, params, rng,
                          flexible_bandwidth=True, move_beams=False,
                          single_pass=not params.map_iterative)


def _pair_carrier_counts(beam_bandwidth, params: SystemParams) -> np.ndarray:
    """Carrier counts from allocated bandwidths, spending each pair's band.

    Flooring both members of an amplifier pair usually strands one carrier of
    the shared band; the leftover carriers are granted within the pair by
    largest fractional remainder (ties toward the lower beam index) so the
    full band stays in service.
    """
    wtil = params.carrier_bandwidth_mhz
    counts = discretize_carriers(beam_bandwidth, wtil)
    pair_total = 2 * params.carriers_per_color
    frac = np.asarray(beam_bandwidth, dtype=float) / wtil - counts
    for j in range(len(counts) // 2):
        a, b = 2 * j, 2 * j + 1
        leftover = pair_total - counts[a] - counts[b]
        while leftover > 0:
            pick = a if frac[a] >= frac[b] else b
            counts[pick] += 1
            frac[pick] -= 1.0
            leftover -= 1
    return counts


def _run_iterative(name, user_xy, demands, centers, params: SystemParams, rng, *,
                   flexible_bandwidth: bool, move_beams: bool,
                   single_pass: bool = False) -> StrategyOutcome:
    t_start = time.perf_counter()
    user_xy = np.asarray(user_xy, dtype=float)
    demands = np.asarray(demands, dtype=float)
    centers0 = np.asarray(centers, dtype=float)
    n_beams = len(centers0)
    design_capacity = float(demands.sum()) / n_beams
    sec_seed = int(rng.integers(2 ** 31)) if rng is not None else 0

    uniform_w = params.uniform_beam_bandwidth_mhz
    state_centers = centers0.copy()
    state_radii = np.full(n_beams, params.antenna.beam_radius_km)
    state_carriers = np.full(n_beams, params.carriers_per_color)
    state_mapping = dominant_beam_mapping(user_xy, centers0)
    state_alloc: AllocationSolution | None = None

    trace = [load_balancing_degree(per_beam_demand(state_mapping, demands, n_beams),
                                   design_capacity)]

    for _ in range(params.max_rounds):
        geo = _evaluate_geometry(user_xy, state_centers, params)
        cand, ceff = _build_candidates(geo, params.candidates_per_user)
        sol = solve_bandwidth_qp(
            demands, ceff, cand, n_beams,
            mode="paired" if flexible_bandwidth else "per_beam",
            total_bandwidth_mhz=params.total_bandwidth_mhz,
            user_cap_mhz=params.carrier_bandwidth_mhz,
            per_beam_cap_mhz=uniform_w,
            reg=params.qp_reg, tol=params.qp_tol, max_iter=params.qp_max_iter)
        if state_alloc is None:
            state_alloc = sol    # matches the initial geometry by construction

        rates = sol.dense_rates(n_beams)
        new_mapping = remap_users(rates, np.isfinite(rates), user_xy, state_centers)
        if flexible_bandwidth:
            new_carriers = _pair_carrier_counts(sol.beam_bandwidth, params)
        else:
            new_carriers = state_carriers
        if move_beams:
            prev = _beam_states(state_centers, state_radii,
                                np.full(n_beams, uniform_w), state_carriers)
            geometry = update_beam_geometry(new_mapping, user_xy, prev,
                                            params.max_service_radius_km, sec_seed)
            new_centers = np.array([[c.x, c.y] for c, _ in geometry])
            new_radii = np.array([r for _, r in geometry])
        else:
            new_centers, new_radii = state_centers, state_radii

        kappa = load_balancing_degree(per_beam_demand(new_mapping, demands, n_beams),
                                      design_capacity)
        trace.append(kappa)
        improved = kappa < trace[-2]
        if improved or single_pass:
            state_mapping = new_mapping
            state_centers, state_radii = new_centers, new_radii
            state_carriers = new_carriers
            state_alloc = sol
        if single_pass or not improved:
            break

    geo = _evaluate_geometry(user_xy, state_centers, params)
    schedules, offered = _schedule_state(state_mapping, geo, demands,
                                         state_carriers, params)
    assert state_alloc is not None
    bandwidth = (state_alloc.beam_bandwidth if flexible_bandwidth
                 else np.minimum(state_alloc.beam_bandwidth, uniform_w))
    return StrategyOutcome(
        strategy=name,
        mapping=state_mapping,
        beam_states=_beam_states(state_centers, state_radii, bandwidth, state_carriers),
        allocation=state_alloc,
        schedules=schedules,
        offered_scheduled=offered,
        offered_relaxed=state_alloc.offered_relaxed(),
        iterations=len(trace) - 1,
        imbalance_trace=trace,
        wall_time_s=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# Genetic power-and-bandwidth baseline
# ---------------------------------------------------------------------------

def run_bw_pow(user_xy, demands, centers, params: SystemParams,
               rng, ga: GaParams | None = None) -> StrategyOutcome:
    """Genetic search over per-beam carrier counts and power multipliers.

    Mapping stays dominant-beam and geometry stays uniform; the genome sets
    each beam's carrier count (amplifier pairs share their band) and a power
    multiplier under a total power budget equal to the fully loaded
    calibrated system. Fitness is the continuous-relaxation quadratic unmet
    demand of the genome.
    """
    t_start = time.perf_counter()
    ga = ga or GaParams()
    user_xy = np.asarray(user_xy, dtype=float)
    demands = np.asarray(demands, dtype=float)
    centers = np.asarray(centers, dtype=float)
    n_beams = len(centers)
    beam_cap = (ga.max_carriers_per_beam if ga.max_carriers_per_beam is not None
                else params.carriers_per_color)
    pair_cap = 2 * params.carriers_per_color
    power_budget = float(n_beams * params.carriers_per_color)

    geo = _evaluate_geometry(user_xy, centers, params)
    mapping = dominant_beam_mapping(user_xy, centers)
    design_capacity = float(demands.sum()) / n_beams
    trace = [load_balancing_degree(per_beam_demand(mapping, demands, n_beams),
                                   design_capacity)]

    beam_users = [mapping.users_of(k) for k in range(n_beams)]
    beam_snr = [geo.snr[k, beam_users[k]] for k in range(n_beams)]
    beam_demand = [demands[beam_users[k]] for k in range(n_beams)]

    def repair(m, p):
        m = np.clip(np.rint(m).astype(int), 0, beam_cap)
        for j in range(n_beams // 2):
            a, b = 2 * j, 2 * j + 1
            while m[a] + m[b] > pair_cap:
                if m[a] >= m[b]:
                    m[a] -= 1
                else:
                    m[b] -= 1
        p = np.clip(p, 0.0, ga.power_mult_max)
        used = float((m * p).sum())
        if used > power_budget:
            p = p * (power_budget / used)
        return m, p

    def fitness_batch(ms, ps):
        total = np.zeros(len(ms))
        wtil = params.carrier_bandwidth_mhz
        for k in range(n_beams):
            snr = beam_snr[k]
            if len(snr) == 0:
                continue
            eff = np.log2(1.0 + ps[:, k][:, None] * snr[None, :])
            budget = ms[:, k] * wtil
            total += _quadratic_unmet_waterfill(beam_demand[k], eff, budget, wtil)
        return total

    pop_m = np.empty((ga.population, n_beams), dtype=int)
    pop_p = np.empty((ga.population, n_beams))
    pop_m[0] = params.carriers_per_color
    pop_p[0] = 1.0
    for i in range(1, ga.population):
        m = rng.integers(0, beam_cap + 1, n_beams)
        p = rng.uniform(0.2, min(2.0, ga.power_mult_max), n_beams)
        pop_m[i], pop_p[i] = repair(m, p)

    fit = fitness_batch(pop_m, pop_p)
    best_hist = []
    for _ in range(ga.generations):
        order = np.argsort(fit, kind="stable")
        elites_m = pop_m[order[: ga.elites]].copy()
        elites_p = pop_p[order[: ga.elites]].copy()
        best_hist.append(float(fit[order[0]]))

        next_m = [elites_m[i] for i in range(ga.elites)]
        next_p = [elites_p[i] for i in range(ga.elites)]
        while len(next_m) < ga.population:
            pa = _tournament(fit, ga.tournament, rng)
            pb = _tournament(fit, ga.tournament, rng)
            m_child = pop_m[pa].copy()
            p_child = pop_p[pa].copy()
            if rng.uniform() < ga.crossover_rate:
                swap = rng.uniform(size=n_beams) < 0.5
                m_child[swap] = pop_m[pb][swap]
                p_child[swap] = pop_p[pb][swap]
            mutate = rng.uniform(size=n_beams) < ga.mutation_rate
            if np.any(mutate):
                m_child[mutate] += rng.choice([-1, 1], size=int(mutate.sum()))
                p_child[mutate] += rng.normal(0.0, 0.25, size=int(mutate.sum()))
            m_child, p_child = repair(m_child, p_child)
            next_m.append(m_child)
            next_p.append(p_child)
        pop_m = np.array(next_m)
        pop_p = np.array(next_p)
        fit = fitness_batch(pop_m, pop_p)

    best = int(np.argmin(fit))
    best_m, best_p = pop_m[best], pop_p[best]
    best_hist.append(float(fit[best]))

    schedules, offered = _schedule_state(mapping, geo, demands, best_m, params,
                                         power_mult=best_p)
    relaxed = _relaxed_rates(mapping, geo, demands, best_m, best_p, params)
    states = _beam_states(centers, np.full(n_beams, params.antenna.beam_radius_km),
                          best_m * params.carrier_bandwidth_mhz, best_m)
    return StrategyOutcome(
        strategy="BW-POW",
        mapping=mapping,
        beam_states=states,
        allocation=None,
        schedules=schedules,
        offered_scheduled=offered,
        offered_relaxed=relaxed,
        iterations=ga.generations,
        imbalance_trace=trace,
        wall_time_s=time.perf_counter() - t_start,
        ga_best_fitness=best_hist,
    )


def _tournament(fit, size, rng) -> int:
    idx = rng.integers(0, len(fit), size)
    return int(idx[np.argmin(fit[idx])])


def _waterfill_shares(demands, eff, budgets, user_cap):
    """Exact per-beam continuous allocation, batched over budget rows.

    Minimizes sum (demand - eff * v)^2 with 0 <= v <= user_cap and
    sum v <= budget for each row of (eff, budgets). The optimum is
    v(theta) = clip(d/e - theta/(2 e^2), 0, cap); theta is found by
    bisection on the monotone budget usage. Returns the shares (P, n).
    """
    demands = np.asarray(demands, dtype=float)
    mask = eff > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(mask, demands[None, :] / eff, 0.0)
        inv2e2 = np.where(mask, 1.0 / (2.0 * eff ** 2), 0.0)
    v0 = np.where(mask, np.minimum(base, user_cap), 0.0)
    need = v0.sum(axis=1) > budgets
    v = v0
    if np.any(need):
        theta_lo = np.zeros(int(need.sum()))
        theta_hi = np.max(2.0 * eff[need] * demands[None, :] * mask[need],
                          axis=1) + 1.0
        sub_base = base[need]
        sub_inv = inv2e2[need]
        sub_mask = mask[need]
        sub_budget = budgets[need]
        for _ in range(60):
            theta = 0.5 * (theta_lo + theta_hi)
            vv = np.clip(sub_base - theta[:, None] * sub_inv, 0.0, user_cap)
            vv = np.where(sub_mask, vv, 0.0)
            over = vv.sum(axis=1) > sub_budget
            theta_lo = np.where(over, theta, theta_lo)
            theta_hi = np.where(over, theta_hi, theta)
        vv = np.clip(sub_base - theta_hi[:, None] * sub_inv, 0.0, user_cap)
        v = v0.copy()
        v[need] = np.where(sub_mask, vv, 0.0)
    return v


def _quadratic_unmet_waterfill(demands, eff, budgets, user_cap):
    """Objective value of the per-beam allocation, batched over genomes."""
    demands = np.asarray(demands, dtype=float)
    v = _waterfill_shares(demands, eff, budgets, user_cap)
    resid = demands[None, :] - eff * v
    return (resid ** 2).sum(axis=1)


def _relaxed_rates(mapping, geo, demands, carriers, power_mult, params) -> np.ndarray:
    """Continuous-relaxation per-user rates for the genome's configuration."""
    offered = np.zeros(len(demands))
    wtil = params.carrier_bandwidth_mhz
    for k in range(geo.snr.shape[0]):
        users = mapping.users_of(k)
        if len(users) == 0:
            continue
        eff = np.log2(1.0 + power_mult[k] * geo.snr[k, users])
        offered[users] = beam_service_targets(demands[users], eff,
                                              carriers[k] * wtil, wtil)
    return offered


def run_strategy(name: str, user_xy, demands, centers, params: SystemParams,
                 rng, ga: GaParams | None = None) -> StrategyOutcome:
    """Dispatch a strategy by its label."""
    if name == "SR":
        return run_sr(user_xy, demands, centers, params, rng)
    if name == "BW-SR":
        return run_bw_sr(user_xy, demands, centers, params, rng)
    if name == "MAP":
        return run_map(user_xy, demands, centers, params, rng)
    if name == "BW-MAP":
        return run_bw_map(user_xy, demands, centers, params, rng)
    if name == "BW-POW":
        return run_bw_pow(user_xy, demands, centers, params, rng, ga)
    raise ValueError(f"unknown strategy {name!r}")
