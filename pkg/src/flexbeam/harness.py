"""Experiment orchestration: configuration, Monte-Carlo runs, persistence.

An experiment executes `runs` independent realizations of one traffic
scenario, applies the selected strategies to each, and writes:

* ``results.jsonl``  -- one JSON record per realization (metrics, traces,
  flags, and the uniform-reference reductions), byte-deterministic for a
  fixed config and seed;
* ``summary.txt``    -- per-strategy means in a delimited table;
* ``cdf_<metric>_<strategy>.txt`` -- two-column empirical CDFs;
* ``timings.txt``    -- wall-clock per strategy run, kept out of the
  deterministic record set because it is machine-dependent.

Randomness is keyed as (master seed, run index, stream) so results are
independent of worker count and execution order; the environment variable
``FLEXBEAM_OUT`` overrides the output directory.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .link_budget import AntennaModel, LinkParams, calibrated_link
from .metrics import UniformBaseline, empirical_cdf
from .strategies import (
    STRATEGY_NAMES,
    GaParams,
    StrategyOutcome,
    SystemParams,
    run_strategy,
    uniform_baseline,
)
from .traffic import (
    PopulationGrid,
    TrafficScenario,
    bundled_population_grid,
    generate_users,
    load_population_grid,
    uniform_beam_centers,
)

#: stable per-strategy stream offsets; adding strategies must not renumber
STRATEGY_STREAM = {name: i + 1 for i, name in enumerate(STRATEGY_NAMES)}

CDF_METRICS = ("nqu", "nu", "offered", "min_rate", "iterations", "user_rates")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "HT"
    runs: int = 200
    seed: int = 20240817
    strategies: tuple[str, ...] = STRATEGY_NAMES
    out_dir: str = "results"
    jobs: int = 1

    # traffic
    users: int = 272
    demand_mbps: float = 25.0
    grid_rows: int = 3
    grid_cols: int = 2
    beam_radius_km: float = 50.0
    alpha: tuple[float, ...] | None = None
    rt_users: int = 2897
    rt_grid_rows: int = 8
    rt_grid_cols: int = 8
    population_grid: str = ""          # path; empty uses the bundled grid

    # link budget
    max_gain_dbi: float = 52.0
    g_over_t_db: float = 16.25
    free_space_loss_db: float = 210.0
    atmospheric_loss_db: float = 0.4
    depointing_loss_db: float = 0.5
    total_bandwidth_mhz: float = 500.0
    carriers_per_color: int = 4
    max_service_radius_km: float = 70.962

    # solver / iteration
    qp_tol: float = 1e-9
    qp_reg: float = 1e-9
    qp_max_iter: int = 100
    max_rounds: int = 50
    map_iterative: bool = True
    candidates_per_user: int = 2

    # genetic baseline
    ga_population: int = 50
    ga_generations: int = 100
    ga_crossover: float = 0.8
    ga_mutation: float = 0.1
    ga_elites: int = 2
    ga_power_mult_max: float = 4.0

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("experiment.runs must be >= 1")
        if self.scenario not in ("HT", "WHS", "RT"):
            raise ConfigError(f"experiment.scenario: unknown scenario {self.scenario!r}")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ConfigError(f"experiment.strategies: unknown strategy {s!r}")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read an INI config; omitted keys keep their defaults.

    Keyword overrides (CLI flags) win over the file.
    """
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        values.update(_section(parser, "experiment", {
            "scenario": str, "runs": int, "seed": int, "out": str,
            "strategies": _csv_str, "jobs": int}))
        if "out" in values:
            values["out_dir"] = values.pop("out")
        values.update(_section(parser, "traffic", {
            "users": int, "demand_mbps": float, "grid_rows": int,
            "grid_cols": int, "beam_radius_km": float, "alpha": _csv_float,
            "rt_users": int, "rt_grid_rows": int, "rt_grid_cols": int,
            "population_grid": str}))
        values.update(_section(parser, "link", {
            "max_gain_dbi": float, "g_over_t_db": float,
            "free_space_loss_db": float, "atmospheric_loss_db": float,
            "depointing_loss_db": float, "total_bandwidth_mhz": float,
            "carriers_per_color": int, "max_service_radius_km": float}))
        values.update(_section(parser, "solver", {
            "qp_tol": float, "qp_reg": float, "qp_max_iter": int,
            "max_rounds": int, "map_iterative": _boolean,
            "candidates_per_user": int}))
        values.update(_section(parser, "ga", {
            "ga_population": int, "ga_generations": int, "ga_crossover": float,
            "ga_mutation": float, "ga_elites": int, "ga_power_mult_max": float}))
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if "strategies" in values:
        values["strategies"] = tuple(values["strategies"])
    if "alpha" in values and values["alpha"] is not None:
        values["alpha"] = tuple(values["alpha"])
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _section(parser, name, fields):
    out = {}
    if not parser.has_section(name):
        return out
    for key, conv in fields.items():
        if parser.has_option(name, key):
            raw = parser.get(name, key)
            try:
                out[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{name}.{key}: {exc}") from exc
    return out


def _csv_str(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _csv_float(raw: str) -> list[float]:
    return [float(tok) for tok in raw.split(",") if tok.strip()]


def _boolean(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# ---------------------------------------------------------------------------
# scenario and parameter assembly
# ---------------------------------------------------------------------------

def build_scenario(config: ExperimentConfig):
    """(scenario, beam centers) for the configured traffic kind."""
    pitch = 2.0 * config.beam_radius_km
    if config.scenario == "HT":
        scenario = TrafficScenario.ht(config.users, config.demand_mbps,
                                      config.grid_rows, config.grid_cols,
                                      config.beam_radius_km)
        if config.alpha is not None:
            scenario = TrafficScenario("HT", tuple(config.alpha),
                                       config.grid_rows, config.grid_cols,
                                       config.beam_radius_km, config.users,
                                       config.demand_mbps)
        centers = uniform_beam_centers(config.grid_rows, config.grid_cols, pitch)
        return scenario, centers
    if config.scenario == "WHS":
        scenario = TrafficScenario.whs(config.users, config.demand_mbps,
                                       config.grid_rows, config.grid_cols,
                                       config.beam_radius_km,
                                       alpha=config.alpha)
        centers = uniform_beam_centers(config.grid_rows, config.grid_cols, pitch)
        return scenario, centers
    grid = (load_population_grid(config.population_grid)
            if config.population_grid else bundled_population_grid())
    scenario = TrafficScenario.rt(grid, config.rt_users, config.demand_mbps,
                                  config.rt_grid_rows, config.rt_grid_cols,
                                  config.beam_radius_km)
    mid = ((grid.x_min + grid.x_max) / 2.0, (grid.y_min + grid.y_max) / 2.0)
    centers = uniform_beam_centers(config.rt_grid_rows, config.rt_grid_cols,
                                   pitch, center_xy=mid)
    return scenario, centers


def build_system_params(config: ExperimentConfig, scenario: TrafficScenario) -> SystemParams:
    antenna = AntennaModel(g_max=10.0 ** (config.max_gain_dbi / 10.0),
                           beam_radius_km=config.beam_radius_km)
    base = LinkParams(
        receive_gain_over_temp_db=config.g_over_t_db,
        free_space_loss_db=config.free_space_loss_db,
        atmospheric_loss_db=config.atmospheric_loss_db,
        depointing_loss_db=config.depointing_loss_db,
        carrier_bandwidth_mhz=config.total_bandwidth_mhz / (2 * config.carriers_per_color),
    )
    link = calibrated_link(scenario.total_demand_mbps, scenario.n_beams,
                           config.carriers_per_color, antenna, base)
    return SystemParams(
        antenna=antenna,
        link=link,
        max_service_radius_km=config.max_service_radius_km,
        total_bandwidth_mhz=config.total_bandwidth_mhz,
        carriers_per_color=config.carriers_per_color,
        candidates_per_user=config.candidates_per_user,
        max_rounds=config.max_rounds,
        map_iterative=config.map_iterative,
        qp_tol=config.qp_tol,
        qp_reg=config.qp_reg,
        qp_max_iter=config.qp_max_iter,
    )


def build_ga_params(config: ExperimentConfig) -> GaParams:
    return GaParams(population=config.ga_population,
                    generations=config.ga_generations,
                    crossover_rate=config.ga_crossover,
                    mutation_rate=config.ga_mutation,
                    elites=config.ga_elites,
                    power_mult_max=config.ga_power_mult_max)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def run_realization(config: ExperimentConfig, run_index: int) -> dict:
    """One Monte-Carlo realization: all strategies on one user draw.

    Returns a JSON-serializable record; wall times ride along separately
    under the "timings" key and are stripped from the deterministic output.
    """
    scenario, centers = build_scenario(config)
    params = build_system_params(config, scenario)
    ga = build_ga_params(config)

    rng_users = np.random.default_rng([config.seed, run_index, 0])
    users = generate_users(scenario, centers, rng_users)
    xy = np.array([u.position for u in users])
    demands = np.array([u.demand_mbps for u in users])
    total_demand = float(demands.sum())
    # quadratic reference of the uniform design point (capacity == demand);
    # the realization-dependent reductions are recorded alongside
    design_quadratic = float((demands ** 2).sum())

    baseline = uniform_baseline(xy, demands, centers, params)

    record: dict = {
        "run": run_index,
        "seed": config.seed,
        "baseline": {
            "total_offered_mbps": baseline.total_offered,
            "quadratic_offered": baseline.quadratic_offered,
            "design_quadratic": design_quadratic,
        },
        "total_demand_mbps": total_demand,
        "strategies": {},
    }
    timings: dict = {}
    for name in config.strategies:
        rng = np.random.default_rng([config.seed, run_index, STRATEGY_STREAM[name]])
        try:
            outcome = run_strategy(name, xy, demands, centers, params, rng, ga)
        except Exception as exc:    # recorded, the experiment continues
            record["strategies"][name] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        gaps = demands - outcome.offered_scheduled
        record["strategies"][name] = {
            "nqu": float((gaps ** 2).sum() / design_quadratic),
            "nu": float(gaps.sum() / total_demand),
            "total_offered_mbps": float(outcome.offered_scheduled.sum()),
            "min_user_rate_mbps": float(outcome.offered_scheduled.min()),
            "offered_relaxed_mbps": float(outcome.offered_relaxed.sum()),
            "iterations": outcome.iterations,
            "imbalance_trace": [float(k) for k in outcome.imbalance_trace],
            "unassignable_users": int(outcome.mapping.unassignable.sum()),
            "per_user_rates": [float(r) for r in outcome.offered_scheduled],
        }
        timings[name] = outcome.wall_time_s
    record["timings"] = timings
    return record


def run_experiment(config: ExperimentConfig, out_dir=None, progress=None) -> dict:
    """Execute all realizations and write the result files.

    Returns {"records": [...], "summary": {...}, "out_dir": Path}. Run-level
    parallelism (config.jobs) cannot change any output byte: every stream is
    keyed by run index and records are assembled in index order.
    """
    out = Path(os.environ.get("FLEXBEAM_OUT") or out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    indices = list(range(config.runs))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_for_pool, [(config, i) for i in indices]))
    else:
        records = []
        for i in indices:
            records.append(run_realization(config, i))
            if progress:
                progress(i + 1, config.runs)

    timings = [{**{"run": r["run"]}, **r.pop("timings")} for r in records]
    summary = summarize(records, config.strategies)

    with open(out / "results.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    _write_summary(out / "summary.txt", summary, config)
    for metric in CDF_METRICS:
        emit_plot_data(records, metric, out)
    with open(out / "timings.txt", "w") as fh:
        fh.write("# wall seconds per strategy run; machine-dependent\n")
        for t in timings:
            parts = [f"run={t['run']}"]
            parts += [f"{k}={v:.3f}" for k, v in t.items() if k != "run"]
            fh.write(" ".join(parts) + "\n")

    return {"records": records, "summary": summary, "out_dir": out}


def _run_for_pool(args):
    config, index = args
    return run_realization(config, index)


def summarize(records: list[dict], strategies) -> dict:
    """Per-strategy means of the headline metrics over successful runs."""
    summary: dict = {}
    for name in strategies:
        rows = [r["strategies"][name] for r in records
                if name in r["strategies"] and "error" not in r["strategies"][name]]
        failed = sum(1 for r in records
                     if "error" in r["strategies"].get(name, {}))
        if not rows:
            summary[name] = {"runs": 0, "failed": failed}
            continue
        summary[name] = {
            "runs": len(rows),
            "failed": failed,
            "nqu": float(np.mean([r["nqu"] for r in rows])),
            "nu": float(np.mean([r["nu"] for r in rows])),
            "total_offered_mbps": float(np.mean([r["total_offered_mbps"] for r in rows])),
            "min_user_rate_mbps": float(np.mean([r["min_user_rate_mbps"] for r in rows])),
            "iterations": float(np.mean([r["iterations"] for r in rows])),
        }
    return summary


def _write_summary(path: Path, summary: dict, config: ExperimentConfig) -> None:
    cols = ("nqu", "nu", "total_offered_mbps", "min_user_rate_mbps", "iterations")
    with open(path, "w") as fh:
        fh.write(f"# scenario={config.scenario} runs={config.runs} "
                 f"seed={config.seed} config={config.digest()}\n")
        fh.write("strategy\t" + "\t".join(cols) + "\truns\tfailed\n")
        for name in config.strategies:
            s = summary[name]
            if s["runs"] == 0:
                fh.write(f"{name}\t" + "\t".join("nan" for _ in cols)
                         + f"\t0\t{s['failed']}\n")
                continue
            fh.write(name + "\t" + "\t".join(f"{s[c]:.10g}" for c in cols)
                     + f"\t{s['runs']}\t{s['failed']}\n")


def emit_plot_data(records: list[dict], metric: str, out_dir) -> list[Path]:
    """Write one two-column CDF file per strategy for the chosen metric."""
    if not records:
        raise ValueError("no records to plot")
    if metric not in CDF_METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {CDF_METRICS}")
    key = {"offered": "total_offered_mbps", "min_rate": "min_user_rate_mbps"}.get(metric, metric)
    out_dir = Path(out_dir)
    strategies = sorted({name for r in records for name in r["strategies"]})
    written = []
    for name in strategies:
        samples: list[float] = []
        for r in records:
            row = r["strategies"].get(name)
            if row is None or "error" in row:
                continue
            if metric == "user_rates":
                samples.extend(row["per_user_rates"])
            else:
                samples.append(row[key])
        if not samples:
            continue
        path = out_dir / f"cdf_{metric}_{name}.txt"
        with open(path, "w") as fh:
            for value, prob in empirical_cdf(samples):
                fh.write(f"{value:.10g} {prob:.10g}\n")
        written.append(path)
    return written
