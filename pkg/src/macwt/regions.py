"""Rate pentagons, convex hulls over input laws, and the key-recycling ramp."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_rate_pairs
from .channel import InfoTerms, InputDistribution, info_terms_batch

RATE_ATOL = 1e-12


@dataclass(frozen=True)
class RatePentagon:
    """``{R1 <= r1_max, R2 <= r2_max, R1 + R2 <= rsum_max, R >= 0}``."""

    r1_max: float
    r2_max: float
    rsum_max: float

    def __post_init__(self):
        if min(self.r1_max, self.r2_max, self.rsum_max) < 0:
            raise ValueError("pentagon bounds must be nonnegative")
        tol = RATE_ATOL * max(1.0, self.rsum_max)
        if max(self.r1_max, self.r2_max) > self.rsum_max + tol:
            raise ValueError("per-user bound exceeds the sum bound")
        if self.rsum_max > self.r1_max + self.r2_max + tol:
            raise ValueError("sum bound exceeds r1_max + r2_max")

    @classmethod
    def from_bounds(cls, r1, r2, rsum):
        """Clip raw bounds to the feasible set they describe."""
        r1, r2, rsum = max(r1, 0.0), max(r2, 0.0), max(rsum, 0.0)
        r1, r2 = min(r1, rsum), min(r2, rsum)
        return cls(r1, r2, min(rsum, r1 + r2))

    @property
    def empty(self):
        """True when the region collapses to the origin."""
        return self.rsum_max <= 0.0

    def vertices(self):
        """Counterclockwise corner points starting at the origin, duplicates removed."""
        pts = [
            (0.0, 0.0),
            (self.r1_max, 0.0),
            (self.r1_max, self.rsum_max - self.r1_max),
            (self.rsum_max - self.r2_max, self.r2_max),
            (0.0, self.r2_max),
        ]
        out = []
        for p in pts:
            if not out or not np.allclose(p, out[-1], atol=1e-15, rtol=0):
                out.append(p)
        if len(out) > 1 and np.allclose(out[0], out[-1], atol=1e-15, rtol=0):
            out.pop()
        return out

    def contains(self, rates, tol=RATE_ATOL):
        r = check_rate_pairs(rates)
        ok = (
            (r[:, 0] >= -tol)
            & (r[:, 1] >= -tol)
            & (r[:, 0] <= self.r1_max + tol)
            & (r[:, 1] <= self.r2_max + tol)
            & (r.sum(axis=1) <= self.rsum_max + tol)
        )
        return ok

    def issubset(self, other, tol=RATE_ATOL):
        return (
            self.r1_max <= other.r1_max + tol
            and self.r2_max <= other.r2_max + tol
            and self.rsum_max <= other.rsum_max + tol
        )


def secrecy_pentagon(t: InfoTerms) -> RatePentagon:
    return RatePentagon.from_bounds(
        t.i_x1_y_given_x2 - t.i_x1_z,
        t.i_x2_y_given_x1 - t.i_x2_z,
        t.i_x12_y - t.i_x1_z - t.i_x2_z,
    )


def capacity_pentagon(t: InfoTerms) -> RatePentagon:
    return RatePentagon.from_bounds(t.i_x1_y_given_x2, t.i_x2_y_given_x1, t.i_x12_y)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _turns_left(o, a, b):
    # keep ``a`` only if it turns left and sits more than 1e-12 from the chord o -> b
    if _cross(o, a, b) <= 0.0:
        return False
    dx, dy = b[0] - o[0], b[1] - o[1]
    t = min(max(((a[0] - o[0]) * dx + (a[1] - o[1]) * dy) / (dx * dx + dy * dy), 0.0), 1.0)
    return math.hypot(a[0] - o[0] - t * dx, a[1] - o[1] - t * dy) > 1e-12


def convex_hull(points):
    """Andrew's monotone chain; counterclockwise, points within 1e-12 of an edge dropped.

    Starts at the smallest ``(x, y)`` point, which is the origin for any rate region.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and not _turns_left(lower[-2], lower[-1], p):
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and not _turns_left(upper[-2], upper[-1], p):
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class RateRegion:
    """Convex polygon of rate pairs, vertices counterclockwise from the origin."""

    vertices: tuple = field(default_factory=tuple)

    @classmethod
    def from_points(cls, points):
        return cls(tuple(convex_hull(points)))

    @classmethod
    def from_pentagons(cls, pentagons):
        pts = [v for p in pentagons for v in p.vertices()]
        return cls.from_points(pts)

    def __len__(self):
        return len(self.vertices)

    def contains(self, rates, tol=1e-9):
        r = check_rate_pairs(rates)
        v = np.asarray(self.vertices, dtype=float)
        if len(v) == 0:
            return np.zeros(len(r), dtype=bool)
        if len(v) == 1:
            return np.all(np.abs(r - v[0]) <= tol, axis=1)
        if len(v) == 2:
            d = v[1] - v[0]
            if d @ d == 0.0:
                return np.all(np.abs(r - v[0]) <= tol, axis=1)
            t = np.clip(((r - v[0]) @ d) / (d @ d), 0.0, 1.0)
            return np.linalg.norm(r - (v[0] + t[:, None] * d), axis=1) <= tol
        ok = np.ones(len(r), dtype=bool)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            edge = b - a
            cross = edge[0] * (r[:, 1] - a[1]) - edge[1] * (r[:, 0] - a[0])
            ok &= cross >= -tol * max(1.0, np.linalg.norm(edge))
        return ok

    def to_csv_rows(self):
        return [{"r1": repr(x), "r2": repr(y)} for x, y in self.vertices]


def _point_polygon_distance(points, poly):
    """Euclidean distance from each point to a convex polygon (0 inside)."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 1:
        return np.linalg.norm(points - poly[0], axis=1)
    inside = RateRegion(tuple(map(tuple, poly))).contains(points, tol=0.0) if len(poly) >= 3 else None
    best = np.full(len(points), np.inf)
    edges = zip(poly, np.roll(poly, -1, axis=0)) if len(poly) >= 3 else [(poly[0], poly[1])]
    for a, b in edges:
        d = b - a
        t = np.clip(((points - a) @ d) / (d @ d), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + t[:, None] * d), axis=1))
    if inside is not None:
        best[inside] = 0.0
    return best


def hausdorff_distance(a, b):
    """Hausdorff distance between two convex polygons given by their vertices.

    For convex sets the supremum is attained at a vertex of one polygon.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    return float(max(_point_polygon_distance(a, b).max(), _point_polygon_distance(b, a).max()))


def _simplex_lattice(size, steps):
    """All probability vectors of length ``size`` with entries in multiples of 1/steps."""
    if size == 1:
        return [np.ones(1)]
    out = []
    for combo in itertools.combinations(range(steps + size - 1), size - 1):
        parts = np.diff((-1,) + combo + (steps + size - 1,)) - 1
        out.append(parts / steps)
    return out


def uniform_grid(ch, points_per_user=11):
    """Cartesian product of uniform simplex lattices for the two input laws.

    For binary inputs this is ``points_per_user`` evenly spaced values of P(X=1).
    """
    steps = check_positive_int(points_per_user, "points_per_user", minimum=2) - 1
    l1 = _simplex_lattice(ch.x1_size, steps)
    l2 = _simplex_lattice(ch.x2_size, steps)
    return [InputDistribution(p1, p2) for p1 in l1 for p2 in l2]


def pentagons_over_inputs(ch, grid, which="secrecy"):
    if which not in ("secrecy", "capacity"):
        raise ValueError(f"which must be 'secrecy' or 'capacity', got {which!r}")
    if len(grid) == 0:
        raise ValueError("input-distribution grid is empty")
    terms = info_terms_batch(ch, [q.p1 for q in grid], [q.p2 for q in grid])
    make = secrecy_pentagon if which == "secrecy" else capacity_pentagon
    return [make(InfoTerms(*row)) for row in terms]


def hull_over_inputs(ch, grid, which="secrecy") -> RateRegion:
    """Convex hull of the union of pentagons over the input-distribution grid."""
    return RateRegion.from_pentagons(pentagons_over_inputs(ch, grid, which))


class RateRegionEstimator(BaseEstimator):
    """Fit the secrecy or capacity region of a channel over a grid of input laws.

    ``predict`` labels rate pairs as inside (1) or outside (0) the fitted region.

    Parameters
    ----------
    which : {"secrecy", "capacity"}
    points_per_user : int
        Resolution of the uniform input grid when ``grid`` is not supplied.
    grid : list of InputDistribution, optional
    """

    def __init__(self, which="secrecy", points_per_user=11, grid=None):
        self.which = which
        self.points_per_user = points_per_user
        self.grid = grid

    def fit(self, channel, y=None):
        grid = self.grid if self.grid is not None else uniform_grid(channel, self.points_per_user)
        self.pentagons_ = pentagons_over_inputs(channel, grid, self.which)
        self.region_ = RateRegion.from_pentagons(self.pentagons_)
        self.n_inputs_ = len(grid)
        return self

    def predict(self, rates):
        check_is_fitted(self, "region_")
        return self.region_.contains(rates).astype(int)

    def decision_function(self, rates):
        """Signed slack to the nearest hull edge; nonnegative inside."""
        check_is_fitted(self, "region_")
        r = check_rate_pairs(rates)
        v = np.asarray(self.region_.vertices, dtype=float)
        if len(v) < 3:
            return np.where(self.region_.contains(r), 0.0, -np.inf)
        slack = np.full(len(r), np.inf)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            edge = b - a
            normal = np.array([-edge[1], edge[0]]) / np.linalg.norm(edge)
            slack = np.minimum(slack, (r - a) @ normal)
        return slack


# ---------------------------------------------------------------------------
# ramp schedule


def ramp_index(capacity_term, eve_term):
    """``ceil(C / (C - E))``; infinite when the secrecy margin is not positive."""
    margin = capacity_term - eve_term
    if margin <= 0:
        return math.inf
    # absorb round-off so 1 / (1 - 0.9) counts as 10, not 11
    return max(math.ceil(capacity_term / margin - 1e-9), 1)


@dataclass(frozen=True)
class RampStep:
    step: int
    second_part: tuple
    first_part: tuple


@dataclass(frozen=True)
class RampSchedule:
    """Second-part rates as key from earlier slots accumulates.

    ``per_slot[k - 1]`` is the pair reachable with ``k`` slots' worth of recycled
    key; a protocol uses step ``k`` in slot ``k + 1`` because slot 1 has no key.
    ``lambda_star`` is counted in protocol slots: the first slot from which the
    second-part pair no longer changes.
    """

    lambda1: float
    lambda2: float
    lambda_star: int
    per_slot: tuple
    saturated: tuple
    first_part: tuple

    def second_part_at(self, step):
        """Second-part pair for ramp step ``step >= 1`` (constant past the table)."""
        if step < 1:
            return (0.0, 0.0)
        if step > len(self.per_slot):
            return self.saturated
        return self.per_slot[step - 1].second_part


def _ramp_step(k, secrecy, capacity, previous):
    """Clip ``k * secrecy`` per user, then to the sum bound.

    Sum slack beyond the previous step is shared in proportion to each user's
    remaining per-user headroom, which keeps the pair nondecreasing in ``k``.
    """
    a1 = min(k * secrecy.r1_max, capacity.r1_max)
    a2 = min(k * secrecy.r2_max, capacity.r2_max)
    cap_sum = min(k * secrecy.rsum_max, capacity.rsum_max)
    if a1 + a2 <= cap_sum:
        return (a1, a2)
    p1, p2 = previous
    slack = max(cap_sum - p1 - p2, 0.0)
    head1, head2 = max(a1 - p1, 0.0), max(a2 - p2, 0.0)
    if head1 + head2 <= 0:
        return (p1, p2)
    return (p1 + slack * head1 / (head1 + head2), p2 + slack * head2 / (head1 + head2))


def ramp_schedule(t: InfoTerms, max_steps=100_000) -> RampSchedule:
    """Per-step second-part rates, the ramp indices and the saturated pair."""
    secrecy = secrecy_pentagon(t)
    capacity = capacity_pentagon(t)
    lam1 = ramp_index(t.i_x1_y_given_x2, t.i_x1_z)
    lam2 = ramp_index(t.i_x2_y_given_x1, t.i_x2_z)
    first = _ramp_step(1, secrecy, capacity, (0.0, 0.0))

    steps = []
    prev = (0.0, 0.0)
    for k in range(1, max_steps + 1):
        pair = _ramp_step(k, secrecy, capacity, prev)
        if steps and max(abs(pair[0] - prev[0]), abs(pair[1] - prev[1])) <= RATE_ATOL:
            break
        steps.append(RampStep(k, pair, first))
        prev = pair
    else:
        raise RuntimeError(f"ramp did not saturate within {max_steps} steps")
    # the last appended step repeats forever; it is first reached in slot len(steps) + 1
    return RampSchedule(
        lambda1=lam1,
        lambda2=lam2,
        lambda_star=len(steps) + 1,
        per_slot=tuple(steps),
        saturated=prev,
        first_part=first,
    )


def slot_average_rate(second_part, first_part, l):
    """Rate over a slot of ``n1 + l * n1`` uses: ``(l * second + first) / (l + 1)``."""
    l = check_positive_int(l, "l")
    return tuple((l * s + f) / (l + 1) for s, f in zip(second_part, first_part))


def schedule_rows(schedule, l, extra_steps=1):
    """CSV rows ``slot,r1_part2,r2_part2,r1_avg,r2_avg`` for the ramp and one saturated step."""
    rows = []
    for k in range(1, len(schedule.per_slot) + 1 + extra_steps):
        second = schedule.second_part_at(k)
        avg = slot_average_rate(second, schedule.first_part, l)
        rows.append(
            {
                "slot": k,
                "r1_part2": repr(second[0]),
                "r2_part2": repr(second[1]),
                "r1_avg": repr(avg[0]),
                "r2_avg": repr(avg[1]),
            }
        )
    return rows
