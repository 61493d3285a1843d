"""Carrier assignment and time sharing inside one beam.

Receive terminals operate on a single carrier, so each user joins at most one
of the beam's carriers and gets a time fraction of it. The packing is a
longest-processing-time greedy: users are sorted by the carrier time their
demand requires and placed on the carrier with the most residual time. That
keeps the schedule deterministic and close to optimal at realistic loads.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CarrierSchedule:
    """Activation and time shares of one beam's users on its carriers.

    `carrier_of[i]` is the carrier serving local user i (-1 if unserved) and
    `share[i]` its time fraction; every user occupies at most one carrier and
    no carrier is oversubscribed.
    """

    carrier_of: np.ndarray     # (n,) int
    share: np.ndarray          # (n,) in [0, 1]
    offered_mbps: np.ndarray   # (n,)
    n_carriers: int

    def activation_matrix(self) -> np.ndarray:
        """Binary (n_carriers, n) matrix of which user is active where."""
        n = len(self.carrier_of)
        u = np.zeros((self.n_carriers, n))
        served = self.carrier_of >= 0
        u[self.carrier_of[served], np.nonzero(served)[0]] = 1.0
        return u


def schedule_carriers(demands_mbps, full_carrier_rates_mbps,
                      n_carriers: int) -> CarrierSchedule:
    """Pack one beam's users onto its carriers under single-carrier terminals.

    demands/full_carrier_rates are per-user (local to the beam); a user's
    required time fraction is demand / full-carrier rate. Users are placed in
    decreasing order of that requirement, each onto the carrier with the most
    residual time, receiving min(required, residual). Offered rate never
    exceeds demand, and a zero-carrier beam offers nothing.
    """
    demands = np.asarray(demands_mbps, dtype=float)
    rates = np.asarray(full_carrier_rates_mbps, dtype=float)
    if demands.shape != rates.shape:
        raise ValueError("demand and rate vectors must align")
    n = len(demands)
    carrier_of = np.full(n, -1, dtype=int)
    share = np.zeros(n)
    if n_carriers <= 0 or n == 0:
        return CarrierSchedule(carrier_of, share, np.zeros(n), max(n_carriers, 0))

    with np.errstate(divide="ignore"):
        required = np.where(rates > 0.0, demands / rates, np.inf)
    order = np.argsort(-np.minimum(required, 1.0), kind="stable")

    # max-heap of (residual time, carrier); index breaks exact ties low-first
    heap = [(-1.0, c) for c in range(n_carriers)]
    heapq.heapify(heap)
    for i in order:
        if rates[i] <= 0.0:
            continue
        neg_resid, c = heapq.heappop(heap)
        resid = -neg_resid
        w = min(required[i], resid, 1.0)
        if w > 0.0:
            carrier_of[i] = c
            share[i] = w
        heapq.heappush(heap, (-(resid - w), c))
    offered = share * rates
    return CarrierSchedule(carrier_of, share, offered, n_carriers)
