"""Independent reference implementations used to cross-check the fast paths.

Everything here favours transparency over speed: candidate enumeration for
enclosing circles, a plain first-order method for the bandwidth program, and
exhaustive search for carrier packing. The fast implementations are validated
against these routines; the two sides share no code.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .geometry import Circle, Point


def brute_force_enclosing_circle(points) -> Circle:
    """Smallest enclosing circle by enumerating 2- and 3-point candidates.

    Every enclosing-circle boundary set is a subset of the convex hull, so for
    larger inputs the candidate enumeration is restricted to hull vertices
    (containment is still checked against all points). Complexity is O(h^3 n).
    """
    pts = np.asarray([(float(p[0]), float(p[1])) for p in points], dtype=float)
    if pts.size == 0:
        raise ValueError("no points")
    n = len(pts)
    if n == 1:
        return Circle(Point(pts[0, 0], pts[0, 1]), 0.0)

    cand = pts
    if n > 25:
        cand = _hull_points(pts)

    best: Circle | None = None
    for i, j in itertools.combinations(range(len(cand)), 2):
        c = _diameter(cand[i], cand[j])
        if _contains_all(c, pts) and (best is None or c.radius < best.radius):
            best = c
    if best is None:
        for i, j, k in itertools.combinations(range(len(cand)), 3):
            c = _circum(cand[i], cand[j], cand[k])
            if c is not None and _contains_all(c, pts) and (best is None or c.radius < best.radius):
                best = c
        # also re-admit diameter circles in case of exact ties
        for i, j in itertools.combinations(range(len(cand)), 2):
            c = _diameter(cand[i], cand[j])
            if _contains_all(c, pts) and (best is None or c.radius < best.radius):
                best = c
    else:
        for i, j, k in itertools.combinations(range(len(cand)), 3):
            c = _circum(cand[i], cand[j], cand[k])
            if c is not None and c.radius < best.radius and _contains_all(c, pts):
                best = c
    assert best is not None
    return best


def _hull_points(pts: np.ndarray) -> np.ndarray:
    try:
        from scipy.spatial import ConvexHull

        return pts[ConvexHull(pts).vertices]
    except Exception:
        return pts  # degenerate (e.g. collinear) inputs fall back to all points


def _contains_all(c: Circle, pts: np.ndarray) -> bool:
    d2 = (pts[:, 0] - c.center.x) ** 2 + (pts[:, 1] - c.center.y) ** 2
    lim = c.radius * (1.0 + 1e-12) + 1e-12
    return bool(np.all(d2 <= lim * lim))


def _diameter(a, b) -> Circle:
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    r = math.hypot(a[0] - cx, a[1] - cy)
    return Circle(Point(cx, cy), r)


def _circum(a, b, c) -> Circle | None:
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        return None
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    r = max(math.hypot(a[0] - ux, a[1] - uy), math.hypot(b[0] - ux, b[1] - uy), math.hypot(c[0] - ux, c[1] - uy))
    return Circle(Point(ux, uy), r)


# ---------------------------------------------------------------------------
# First-order oracle for the bandwidth allocation program
# ---------------------------------------------------------------------------

def qp_first_order_oracle(demands, eff, slot_group, group_limits, user_cap,
                          iterations: int = 20_000, dykstra_passes: int = 10):
    """Solve one bandwidth program by accelerated projected gradient descent.

    minimize sum_n (demand_n - sum_c eff[n,c] * x[n,c])^2
    s.t.     x >= 0,  sum_c x[n,c] <= user_cap,
             sum over slots of group g of x <= group_limits[g].

    `slot_group[n,c]` gives the budget-group index of each slot (-1 marks an
    unused slot, restricted to two slots per user). Returns (x, objective).
    Intended as a slow, independent check of the interior-point path.
    """
    inst = dict(demands=demands, eff=eff, slot_group=slot_group,
                group_limits=group_limits, user_cap=user_cap)
    xs, objs = qp_first_order_oracle_batch([inst], iterations=iterations,
                                           dykstra_passes=dykstra_passes)
    return xs[0], objs[0]


def qp_first_order_oracle_batch(instances, iterations: int = 20_000,
                                dykstra_passes: int = 10):
    """Vectorized variant of qp_first_order_oracle over many instances.

    Each instance is a dict with keys demands, eff, slot_group, group_limits,
    user_cap (shapes (N,), (N,2), (N,2), (G,), scalar). Instances are padded
    to common shapes and iterated in lockstep; FISTA steps use each
    instance's own Lipschitz constant, and projections onto the intersection
    of the row caps and the group budgets run Dykstra's alternating scheme.
    Returns (list of solutions, array of objectives).
    """
    b = len(instances)
    n_max = max(len(np.atleast_1d(i["demands"])) for i in instances)
    g_max = max(len(np.atleast_1d(i["group_limits"])) for i in instances)

    demands = np.zeros((b, n_max))
    eff = np.zeros((b, n_max, 2))
    group = np.full((b, n_max, 2), -1, dtype=int)
    limits = np.full((b, g_max), np.inf)
    caps = np.zeros(b)
    sizes = []
    for i, inst in enumerate(instances):
        d = np.atleast_1d(np.asarray(inst["demands"], dtype=float))
        e = np.asarray(inst["eff"], dtype=float).reshape(len(d), -1)
        g = np.asarray(inst["slot_group"]).reshape(len(d), -1)
        lim = np.atleast_1d(np.asarray(inst["group_limits"], dtype=float))
        sizes.append(len(d))
        demands[i, :len(d)] = d
        eff[i, :len(d), :e.shape[1]] = np.where(g >= 0, e, 0.0)
        group[i, :len(d), :g.shape[1]] = g
        limits[i, :len(lim)] = lim
        caps[i] = float(inst["user_cap"])

    valid = group >= 0
    eff = np.where(valid, eff, 0.0)
    onehot = (group[..., None] == np.arange(g_max)).astype(float)  # (b,n,2,g)
    counts = np.maximum(onehot.sum(axis=(1, 2)), 1.0)              # (b,g)

    lip = 2.0 * np.maximum((eff ** 2).sum(axis=2).max(axis=1), 1e-12)
    step = (1.0 / lip)[:, None, None]
    cap_col = caps[:, None]

    def project(x, passes):
        x = np.where(valid, x, 0.0)
        p = np.zeros_like(x)
        q = np.zeros_like(x)
        for _ in range(passes):
            y = _rows_project(x + p, valid, cap_col)
            p = x + p - y
            w = y + q
            used = np.einsum("bncg,bnc->bg", onehot, w)
            over = np.maximum(used - limits, 0.0) / counts
            x = w - np.einsum("bncg,bg->bnc", onehot, over)
            q = w - x
        return _rows_project(x, valid, cap_col)

    x = np.zeros_like(eff)
    y = x.copy()
    t = 1.0
    for _ in range(iterations):
        resid = demands - (eff * y).sum(axis=2)
        grad = -2.0 * eff * resid[:, :, None]
        z = project(y - step * grad, dykstra_passes)
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = z + ((t - 1.0) / t_next) * (z - x)
        x = z
        t = t_next
    x = project(x, 60 * dykstra_passes)
    objs = (((demands - (eff * x).sum(axis=2)) ** 2) * (np.arange(n_max) < np.array(sizes)[:, None])).sum(axis=1)
    xs = [x[i, :sizes[i], :] for i in range(b)]
    return xs, objs


def _rows_project(x, valid, cap_col):
    """Projection of each (user) row onto {v >= 0, v1 + v2 <= cap}.

    Rows carry at most two valid slots, so the simplex case is closed form.
    """
    x = np.where(valid, x, 0.0)
    pos = np.maximum(x, 0.0)
    total = pos.sum(axis=2)
    fits = total <= cap_col
    # two-slot simplex projection onto v1 + v2 = cap
    theta = (x[..., 0] + x[..., 1] - cap_col) / 2.0
    v0 = x[..., 0] - theta
    v1 = x[..., 1] - theta
    neg0 = v0 < 0.0
    neg1 = v1 < 0.0
    v0 = np.where(neg0, 0.0, np.where(neg1, np.minimum(np.maximum(x[..., 0], 0.0), cap_col), v0))
    v1 = np.where(neg1, 0.0, np.where(neg0, np.minimum(np.maximum(x[..., 1], 0.0), cap_col), v1))
    proj = np.stack([v0, v1], axis=2)
    # single-slot rows reduce to a clip
    single = valid.sum(axis=2) == 1
    clipped = np.clip(x, 0.0, cap_col[..., None])
    out = np.where(fits[..., None], pos, np.where(single[..., None], clipped, proj))
    return np.where(valid, out, 0.0)


# ---------------------------------------------------------------------------
# Exhaustive carrier-packing oracle
# ---------------------------------------------------------------------------

def exhaustive_schedule_oracle(time_fractions, rates, n_carriers: int) -> float:
    """Best total offered rate over all user-to-carrier assignments.

    Each user joins at most one carrier (or none). Given an assignment, the
    optimal time shares on a carrier serve the highest-rate users first, each
    up to its demand-meeting fraction. Exponential in the user count; meant
    for <= 8 users.
    """
    tf = np.minimum(np.asarray(time_fractions, dtype=float), 1.0)
    rates = np.asarray(rates, dtype=float)
    n = len(tf)
    if n_carriers == 0 or n == 0:
        return 0.0
    best = 0.0
    for assign in itertools.product(range(n_carriers + 1), repeat=n):
        total = 0.0
        for c in range(1, n_carriers + 1):
            users = [i for i in range(n) if assign[i] == c]
            users.sort(key=lambda i: -rates[i])
            left = 1.0
            for i in users:
                w = min(tf[i], left)
                total += w * rates[i]
                left -= w
                if left <= 0.0:
                    break
        best = max(best, total)
    return best
