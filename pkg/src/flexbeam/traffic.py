"""User populations and demand generation for the evaluation scenarios.

Three scenario families are supported:

* HT  -- homogeneous traffic: per-beam demand shares drawn from a symmetric
  Dirichlet, users placed uniformly inside each beam's nominal disc.
* WHS -- wide hot-spot: same machinery with a concentration vector that
  overloads the first two (amplifier-paired) beams.
* RT  -- real traffic: user positions drawn from a population-density grid
  over a large region served by an 8x8 beam layout.

Every active user demands the same rate, so the aggregate demand is exactly
`user_count * demand`.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class User:
    position: tuple[float, float]   # km
    demand_mbps: float

    def __post_init__(self):
        if self.demand_mbps <= 0:
            raise ValueError("demand must be positive")


@dataclass(frozen=True)
class TrafficScenario:
    """Scenario parameters; use the ht()/whs()/rt() constructors."""

    kind: str                       # "HT" | "WHS" | "RT"
    alpha: tuple[float, ...]        # Dirichlet concentration (HT/WHS)
    grid_rows: int
    grid_cols: int
    beam_radius_km: float
    user_count: int
    demand_mbps: float
    region_km: tuple[float, float] | None = None   # (width, height), RT only
    population: "PopulationGrid | None" = None

    def __post_init__(self):
        if self.kind in ("HT", "WHS") and any(a <= 0 for a in self.alpha):
            raise ValueError("alpha entries must be positive")
        if self.user_count <= 0:
            raise ValueError("user_count must be positive")

    @property
    def n_beams(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def total_demand_mbps(self) -> float:
        return self.user_count * self.demand_mbps

    @staticmethod
    def ht(user_count: int = 272, demand_mbps: float = 25.0,
           grid_rows: int = 3, grid_cols: int = 2,
           beam_radius_km: float = 50.0) -> "TrafficScenario":
        k = grid_rows * grid_cols
        return TrafficScenario("HT", (1.0,) * k, grid_rows, grid_cols,
                               beam_radius_km, user_count, demand_mbps)

    @staticmethod
    def whs(user_count: int = 272, demand_mbps: float = 25.0,
            grid_rows: int = 3, grid_cols: int = 2,
            beam_radius_km: float = 50.0,
            alpha: tuple[float, ...] | None = None) -> "TrafficScenario":
        """Wide hot-spot: one amplifier pair of beams takes four times the
        concentration of the rest.

        The default places the hot entries on beams 2 and 3, the middle row
        of the bottom-up 3x2 grid, so the overloaded pair is adjacent and
        surrounded by colder beams on both sides.
        """
        if alpha is None:
            alpha = tuple(4.0 if k in (2, 3) else 1.0
                          for k in range(grid_rows * grid_cols))
        if len(alpha) != grid_rows * grid_cols:
            raise ValueError("alpha length must equal the beam count")
        return TrafficScenario("WHS", tuple(alpha), grid_rows, grid_cols,
                               beam_radius_km, user_count, demand_mbps)

    @staticmethod
    def rt(population: "PopulationGrid", user_count: int = 2897,
           demand_mbps: float = 25.0, grid_rows: int = 8, grid_cols: int = 8,
           beam_radius_km: float = 50.0) -> "TrafficScenario":
        width = population.x_max - population.x_min
        height = population.y_max - population.y_min
        return TrafficScenario("RT", (), grid_rows, grid_cols, beam_radius_km,
                               user_count, demand_mbps,
                               region_km=(width, height), population=population)


@dataclass(frozen=True)
class PopulationGrid:
    """Nonnegative weights on a rectangular raster, row-major bottom-up."""

    weights: np.ndarray             # (rows, cols)
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2 or w.size == 0:
            raise ValueError("weights must be a non-empty 2-D array")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("negative cell weight")
        if not np.any(w > 0):
            raise ValueError("all-zero grid")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("degenerate grid bounds")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        rows, cols = self.weights.shape
        dx = (self.x_max - self.x_min) / cols
        dy = (self.y_max - self.y_min) / rows
        x0 = self.x_min + col * dx
        y0 = self.y_min + row * dy
        return x0, x0 + dx, y0, y0 + dy


def uniform_beam_centers(grid_rows: int, grid_cols: int, pitch_km: float,
                         center_xy: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Beam centers on a rectangular grid, row-major from the bottom-left.

    Adjacent beams sit `pitch_km` apart; the grid is centered on `center_xy`.
    Row-major indexing makes beams (2j, 2j+1) horizontal neighbours, which is
    also how they are paired onto amplifiers.
    """
    xs = (np.arange(grid_cols) - (grid_cols - 1) / 2.0) * pitch_km + center_xy[0]
    ys = (np.arange(grid_rows) - (grid_rows - 1) / 2.0) * pitch_km + center_xy[1]
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def sample_dirichlet(alpha, rng: np.random.Generator) -> np.ndarray:
    """One draw from Dir(alpha) via normalized Gamma(alpha_i, 1) variates."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha entries must be positive")
    g = rng.standard_gamma(alpha)
    total = g.sum()
    while total == 0.0:     # only reachable for extreme alpha underflow
        g = rng.standard_gamma(alpha)
        total = g.sum()
    return g / total


def largest_remainder_counts(shares: np.ndarray, total: int) -> np.ndarray:
    """Integer counts proportional to `shares`, summing exactly to `total`.

    Ties on equal fractional remainders are resolved toward lower indices.
    """
    shares = np.asarray(shares, dtype=float)
    raw = shares * total
    base = np.floor(raw).astype(int)
    remainder = total - int(base.sum())
    frac = raw - base
    order = np.lexsort((np.arange(len(shares)), -frac))
    base[order[:remainder]] += 1
    return base


def generate_users(scenario: TrafficScenario, beam_centers: np.ndarray,
                   rng: np.random.Generator) -> list[User]:
    """Draw one realization of user positions and demands.

    HT/WHS: Dirichlet shares -> largest-remainder per-beam counts -> uniform
    placement inside each beam's nominal disc. RT: inverse-CDF sampling over
    population-grid cell weights, uniform within a cell.
    """
    beam_centers = np.asarray(beam_centers, dtype=float)
    if scenario.kind in ("HT", "WHS"):
        if len(beam_centers) != len(scenario.alpha):
            raise ValueError("beam count does not match alpha length")
        shares = sample_dirichlet(scenario.alpha, rng)
        counts = largest_remainder_counts(shares, scenario.user_count)
        users: list[User] = []
        for center, count in zip(beam_centers, counts):
            r = scenario.beam_radius_km * np.sqrt(rng.uniform(size=count))
            theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
            for dx, dy in zip(r * np.cos(theta), r * np.sin(theta)):
                users.append(User((center[0] + dx, center[1] + dy), scenario.demand_mbps))
        return users
    if scenario.kind == "RT":
        grid = scenario.population
        if grid is None:
            raise ValueError("RT scenario requires a population grid")
        xy = sample_positions_from_grid(grid, scenario.user_count, rng)
        return [User((float(x), float(y)), scenario.demand_mbps) for x, y in xy]
    raise ValueError(f"unknown scenario kind {scenario.kind!r}")


def sample_positions_from_grid(grid: PopulationGrid, count: int,
                               rng: np.random.Generator) -> np.ndarray:
    """Positions drawn with probability proportional to cell weight."""
    rows, cols = grid.shape
    flat = grid.weights.ravel()
    cdf = np.cumsum(flat)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.uniform(size=count), side="right")
    cells = np.minimum(cells, rows * cols - 1)
    r, c = np.divmod(cells, cols)
    dx = (grid.x_max - grid.x_min) / cols
    dy = (grid.y_max - grid.y_min) / rows
    x = grid.x_min + (c + rng.uniform(size=count)) * dx
    y = grid.y_min + (r + rng.uniform(size=count)) * dy
    return np.column_stack([x, y])


def load_population_grid(path) -> PopulationGrid:
    """Read a population grid from its plain-text format.

    Line 1: `rows cols x_min_km x_max_km y_min_km y_max_km`; the remainder is
    rows*cols whitespace-separated weights, row-major with row 0 at y_min.
    Lines starting with `#` are ignored.
    """
    text = Path(path).read_text()
    return parse_population_grid(text)


def parse_population_grid(text: str) -> PopulationGrid:
    tokens: list[str] = []
    for line in io.StringIO(text):
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if len(tokens) < 6:
        raise ValueError("population grid header is incomplete")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        bounds = [float(t) for t in tokens[2:6]]
        values = np.array([float(t) for t in tokens[6:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"malformed population grid: {exc}") from exc
    if rows <= 0 or cols <= 0:
        raise ValueError("grid dimensions must be positive")
    if values.size != rows * cols:
        raise ValueError(f"expected {rows * cols} weights, found {values.size}")
    return PopulationGrid(values.reshape(rows, cols), *bounds)


def save_population_grid(grid: PopulationGrid, path) -> None:
    """Write a grid in the format read by load_population_grid."""
    rows, cols = grid.shape
    with open(path, "w") as fh:
        fh.write(f"{rows} {cols} {grid.x_min!r} {grid.x_max!r} {grid.y_min!r} {grid.y_max!r}\n")
        for row in grid.weights:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def bundled_population_grid() -> PopulationGrid:
    """The population grid shipped with the package for RT demonstrations."""
    from importlib import resources

    ref = resources.files("flexbeam").joinpath("data/region_population_grid.txt")
    return parse_population_grid(ref.read_text())
