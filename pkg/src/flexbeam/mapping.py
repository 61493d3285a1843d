"""Flexible beam-user mapping and service-range geometry updates.

Users are reassigned to whichever candidate beam offers them the highest
relaxed rate; each beam is then recentered and resized to the smallest
enclosing circle of the users it serves. The load-balancing degree summarises
how far per-beam demand sits from the per-beam design capacity and drives the
iteration stopping rule of the scheduling strategies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Point, smallest_enclosing_circle


@dataclass(frozen=True)
class BeamState:
    """Current service geometry and band assignment of one beam."""

    center: Point
    radius_km: float
    bandwidth_mhz: float
    carriers: int

    def __post_init__(self):
        if self.radius_km < 0 or self.bandwidth_mhz < 0 or self.carriers < 0:
            raise ValueError("beam state fields must be nonnegative")


@dataclass(frozen=True)
class BeamUserMapping:
    """Dense assignment: beam_of[n] is the serving beam of user n.

    `unassignable[n]` flags users that were outside the maximum service
    radius of every beam and fell back to the nearest center.
    """

    beam_of: np.ndarray
    unassignable: np.ndarray

    def __post_init__(self):
        if self.beam_of.shape != self.unassignable.shape:
            raise ValueError("mapping arrays must align")

    def users_of(self, beam: int) -> np.ndarray:
        return np.nonzero(self.beam_of == beam)[0]


def remap_users(rates: np.ndarray, feasible: np.ndarray, user_xy: np.ndarray,
                centers: np.ndarray) -> BeamUserMapping:
    """Assign each user to the feasible beam offering its highest rate.

    rates/feasible are (N, K); infeasible entries are ignored. Ties break
    toward the lowest beam index. A user with no feasible beam is attached to
    the nearest center and flagged, so that no demand silently disappears
    from the unmet-capacity accounting.
    """
    rates = np.asarray(rates, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    masked = np.where(feasible, rates, -np.inf)
    assignment = np.argmax(masked, axis=1)

    orphan = ~feasible.any(axis=1)
    if np.any(orphan):
        user_xy = np.asarray(user_xy, dtype=float)
        centers = np.asarray(centers, dtype=float)
        d = np.hypot(user_xy[orphan, None, 0] - centers[None, :, 0],
                     user_xy[orphan, None, 1] - centers[None, :, 1])
        assignment[orphan] = np.argmin(d, axis=1)
    return BeamUserMapping(assignment, orphan)


def update_beam_geometry(mapping: BeamUserMapping, user_xy: np.ndarray,
                         previous: list[BeamState], max_radius_km: float,
                         sec_seed: int = 0) -> list[tuple[Point, float]]:
    """New (center, radius) per beam from the enclosing circle of its users.

    Radii are clamped to the maximum service radius while keeping the circle
    center, leaving any stragglers to the next remap pass. Empty beams keep
    their previous center with a zero radius so they can re-acquire users
    later.
    """
    user_xy = np.asarray(user_xy, dtype=float)
    out: list[tuple[Point, float]] = []
    for k, prev in enumerate(previous):
        users = mapping.users_of(k)
        if len(users) == 0:
            out.append((prev.center, 0.0))
            continue
        circle = smallest_enclosing_circle(user_xy[users], seed=sec_seed)
        out.append((circle.center, min(circle.radius, max_radius_km)))
    return out


def dominant_beam_mapping(user_xy: np.ndarray, centers: np.ndarray) -> BeamUserMapping:
    """Initial mapping: every user attaches to its nearest beam center."""
    user_xy = np.asarray(user_xy, dtype=float)
    centers = np.asarray(centers, dtype=float)
    d = np.hypot(user_xy[:, None, 0] - centers[None, :, 0],
                 user_xy[:, None, 1] - centers[None, :, 1])
    return BeamUserMapping(np.argmin(d, axis=1), np.zeros(len(user_xy), dtype=bool))


def per_beam_demand(mapping: BeamUserMapping, demands: np.ndarray,
                    n_beams: int) -> np.ndarray:
    """Aggregate demanded rate currently mapped onto each beam, Mbps."""
    return np.bincount(mapping.beam_of, weights=np.asarray(demands, dtype=float),
                       minlength=n_beams)


def load_balancing_degree(beam_demand: np.ndarray, design_capacity: float) -> float:
    """Normalized total deviation of per-beam demand from design capacity.

    Zero means demand is perfectly balanced at the design point; the
    scheduling loops stop once this measure no longer decreases.
    """
    if design_capacity <= 0:
        raise ValueError("design capacity must be positive")
    beam_demand = np.asarray(beam_demand, dtype=float)
    return float(np.abs(beam_demand - design_capacity).sum() / design_capacity)
