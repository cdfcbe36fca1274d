"""Expected delivery rates, closed-form curves, and the memory-rate region.

Expectations are taken over i.i.d. user requests: ``R = sum_d P(d) R(d)``
with ``P(d)`` the product of per-file request probabilities.  When the
popularity is given as exact rationals every expectation here is an exact
``Fraction``; floats appear only for float popularities and plotting
grids.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .delivery import DeliverySchedule, Scheduler, exhaustive_schedule
from .errors import LimitExceededError, ValidationError
from .placement import (
    CacheState,
    PlacementConfig,
    make_config,
    place,
    place_alpha,
)

Number = Fraction | float

ENUMERATION_LIMIT = 10**6
ROOT_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# Expectation over request vectors
# ---------------------------------------------------------------------------


def _demand_multisets(num_files: int, users: int):
    """Sorted representative, per-file counts, and permutation multiplicity."""
    for rep in itertools.combinations_with_replacement(range(1, num_files + 1), users):
        counts = Counter(rep)
        weight = math.factorial(users)
        for c in counts.values():
            weight //= math.factorial(c)
        yield rep, counts, weight


def _probability(popularity: Sequence[Number], counts: Mapping[int, int], exact: bool):
    prob = Fraction(1) if exact else 1.0
    for f, c in counts.items():
        prob *= popularity[f - 1] ** c
    return prob


def expected_rate_exact(
    cfg: PlacementConfig,
    scheduler: Scheduler,
    *,
    symmetric: bool = True,
    limit: int = ENUMERATION_LIMIT,
):
    """Exact expected rate of `scheduler` on the placement of `cfg`.

    With ``symmetric=True`` (the scheduler is permutation-equivariant,
    true for all shipped schedulers) demand vectors are grouped by
    multiset, shrinking the enumeration from ``N**K`` to the number of
    multisets.  Exact rational popularity gives an exact rational result.
    """
    n, k = cfg.num_files, cfg.users
    if n**k > limit:
        raise LimitExceededError(
            f"{n}**{k} request vectors exceed the limit {limit}; "
            "use expected_rate_mc instead"
        )
    cache = place(cfg)
    exact = all(isinstance(p, Fraction) for p in cfg.popularity)
    total = Fraction(0) if exact else 0.0
    if symmetric:
        for rep, counts, weight in _demand_multisets(n, k):
            prob = _probability(cfg.popularity, counts, exact)
            if prob == 0:
                continue
            total += weight * prob * _sched_rate(scheduler(cache, rep))
    else:
        for vec in itertools.product(range(1, n + 1), repeat=k):
            prob = _probability(cfg.popularity, Counter(vec), exact)
            if prob == 0:
                continue
            total += prob * _sched_rate(scheduler(cache, vec))
    return total


def _sched_rate(result) -> Fraction:
    """Schedulers may return a schedule or a bare rate."""
    return result.rate if isinstance(result, DeliverySchedule) else result


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    samples: int


def expected_rate_mc(
    cfg: PlacementConfig, scheduler: Scheduler, samples: int, seed: int
) -> MCEstimate:
    """Unbiased Monte Carlo estimate of the expected rate.

    Deterministic for a fixed seed.  Distinct demand multisets are rated
    once and reused across samples.
    """
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")
    n, k = cfg.num_files, cfg.users
    probs = np.array([float(p) for p in cfg.popularity])
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(n, size=(samples, k), p=probs) + 1
    keys = np.sort(draws, axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    cache = place(cfg)
    rates = np.array(
        [float(_sched_rate(scheduler(cache, tuple(int(x) for x in row)))) for row in uniq]
    )
    mean = float((counts * rates).sum() / samples)
    if samples > 1:
        var = float((counts * (rates - mean) ** 2).sum() / (samples - 1))
        stderr = math.sqrt(var / samples)
    else:
        stderr = 0.0
    return MCEstimate(value=mean, stderr=stderr, samples=samples)


# ---------------------------------------------------------------------------
# Closed forms for the 3-user / 2-file setup at cache size 1
# ---------------------------------------------------------------------------


def _as_p(p) -> Number:
    if isinstance(p, (int, str)):
        p = Fraction(p)
    if not (isinstance(p, Fraction) or isinstance(p, float)):
        raise ValidationError(f"probability {p!r} is not a number")
    if not Fraction(1, 2) <= p <= 1:
        raise ValidationError(
            f"probability of the popular file must be in [1/2, 1], got {p}; "
            "mirror the distribution first if needed"
        )
    return p


def _const(p: Number, num: int, den: int) -> Number:
    return Fraction(num, den) if isinstance(p, Fraction) else num / den


def rate_beta_closed(p) -> Number:
    """Expected rate of the cross-group strategy at cache size 1:
    min of the (2, 1) and (3, 0) placements."""
    p = _as_p(p)
    return min(_const(p, 2, 3) - p**3 / 3, 1 - p**3)


def rate_alpha_closed(p) -> Number:
    """Expected rate of the grouping baseline at cache size 1:
    min of the one-group (memory-shared) and two-group placements."""
    p = _as_p(p)
    q = 1 - p
    return min(_const(p, 2, 3) - (p**3 + q**3) / 6, 1 - p**3)


# ---------------------------------------------------------------------------
# Achievable (M, R) points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatePoint:
    """An achievable cache-size / expected-rate pair with its provenance."""

    m: Fraction
    rate: Number
    label: str
    params: tuple[int, ...] | None = None


def memory_rate_table(p) -> tuple[RatePoint, ...]:
    """The nine documented (M, R) pairs of the cross-group strategy for the
    3-user / 2-file setup, one per replication pair."""
    p = _as_p(p)
    q = 1 - p
    rows: list[tuple[tuple[int, int], Number]] = [
        ((0, 0), 2 - p**3 - q**3),
        ((1, 0), _const(p, 5, 3) - p**3 - _const(p, 2, 3) * q**3),
        ((1, 1), 1 - p**3 / 3 - q**3 / 3),
        ((2, 1), _const(p, 2, 3) - p**3 / 3),
        ((3, 0), 1 - p**3),
        ((2, 2), _const(p, 1, 3)),
        ((3, 1), _const(p, 2, 3) - _const(p, 2, 3) * p**3),
        ((3, 2), _const(p, 1, 3) - _const(p, 1, 3) * p**3),
        ((3, 3), _const(p, 0, 1)),
    ]
    return tuple(
        RatePoint(
            m=Fraction(r1 + r2, 3),
            rate=rate,
            label=f"beta r=({r1},{r2})",
            params=(r1, r2),
        )
        for (r1, r2), rate in rows
    )


# ---------------------------------------------------------------------------
# Lower convex envelope
# ---------------------------------------------------------------------------

VERTEX = "vertex"
BOUNDARY = "boundary"
ABOVE = "above"

_FLOAT_TOL = 1e-12


def _cross(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


@dataclass(frozen=True)
class Envelope:
    """Lower convex envelope of achievable points over cache size."""

    points: tuple[RatePoint, ...]
    vertices: tuple[tuple[Fraction, Number], ...]
    labels: tuple[str, ...]

    def value(self, m) -> Number:
        m = Fraction(m) if isinstance(m, (int, str)) else m
        lo, hi = self.vertices[0][0], self.vertices[-1][0]
        if not lo <= m <= hi:
            raise ValidationError(f"cache size {m} outside envelope domain [{lo}, {hi}]")
        for (x0, y0), (x1, y1) in zip(self.vertices, self.vertices[1:]):
            if x0 <= m <= x1:
                if m == x0:
                    return y0
                return y0 + (y1 - y0) * (m - x0) / (x1 - x0)
        return self.vertices[-1][1]


def lower_envelope(points: Sequence[RatePoint]) -> Envelope:
    """Lower convex envelope over M; classifies every input point as a
    `vertex`, on the `boundary` (collinear, non-vertex), or `above`."""
    pts = tuple(points)
    if not pts:
        raise ValidationError("at least one point is required")
    best: dict[Fraction, tuple[Fraction, Number]] = {}
    for pt in pts:
        cur = best.get(pt.m)
        if cur is None or pt.rate < cur[1]:
            best[pt.m] = (pt.m, pt.rate)
    chain = sorted(best.values())
    hull: list[tuple[Fraction, Number]] = []
    for node in chain:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], node) <= 0:
            hull.pop()
        hull.append(node)
    env = Envelope(points=pts, vertices=tuple(hull), labels=())
    labels = []
    vertex_set = set(hull)
    for pt in pts:
        level = env.value(pt.m)
        exact = isinstance(pt.rate, Fraction) and isinstance(level, Fraction)
        on_curve = (pt.rate == level) if exact else bool(
            abs(float(pt.rate) - float(level)) <= _FLOAT_TOL
        )
        if on_curve and (pt.m, pt.rate) in vertex_set:
            labels.append(VERTEX)
        elif on_curve:
            labels.append(BOUNDARY)
        else:
            labels.append(ABOVE)
    return Envelope(points=pts, vertices=tuple(hull), labels=tuple(labels))


# ---------------------------------------------------------------------------
# Grouping baseline machinery
# ---------------------------------------------------------------------------


def classic_rate(users: int, t: int, distinct: int) -> Fraction:
    """Expected-rate kernel of the classic single-group scheme: delivery
    cost for `distinct` distinct requested files at integer cache level
    `t`, counting only the non-redundant XOR rounds."""
    if not 0 <= t <= users:
        raise ValidationError(f"cache level {t} outside [0, {users}]")
    if distinct < 0:
        raise ValidationError("distinct file count cannot be negative")
    if distinct == 0:
        return Fraction(0)
    return Fraction(comb(users, t + 1) - comb(users - distinct, t + 1), comb(users, t))


def memory_share(users: int, size: int, memory) -> tuple[tuple[Fraction, int], ...]:
    """Decompose a per-group cache size into one or two integer levels.

    Returns ``((weight, t), ...)`` where each level-``t`` placement is
    applied to a `weight` fraction of every file in the group.
    """
    memory = Fraction(memory)
    if size < 1:
        raise ValidationError(f"group size must be >= 1, got {size}")
    t = Fraction(users) * memory / size
    if not 0 <= t <= users:
        raise ValidationError(f"group memory {memory} needs cache level {t} outside [0, {users}]")
    lo = t.numerator // t.denominator
    if lo == t:
        return ((Fraction(1), int(lo)),)
    hi = lo + 1
    w_hi = t - lo
    return ((1 - w_hi, int(lo)), (w_hi, int(hi)))


def alpha_expected_rate(
    users: int,
    sizes: Sequence[int],
    memories: Sequence,
    popularity: Sequence,
    scheduler: Scheduler | None = None,
    *,
    limit: int = ENUMERATION_LIMIT,
):
    """Expected rate of the grouping baseline for a given memory split.

    Every group is served independently: its cache level is memory-shared
    into at most two integer levels, each placed with the one-level scheme.
    With `scheduler` set (e.g. the exhaustive solver) per-group rates come
    from actual schedules on the per-group placements; otherwise the
    closed distinct-demand kernel :func:`classic_rate` is used.
    """
    if len(sizes) != len(memories):
        raise ValidationError("sizes and memories must have the same length")
    from .placement import _normalize_popularity  # shared validation

    pop = _normalize_popularity(popularity)
    n = len(pop)
    if sum(sizes) != n:
        raise ValidationError("group sizes must cover every file exactly once")
    if n**users > limit:
        raise LimitExceededError(f"{n}**{users} request vectors exceed the limit {limit}")

    starts = [1 + sum(sizes[:i]) for i in range(len(sizes))]
    shares = [memory_share(users, s, m) for s, m in zip(sizes, memories)]

    piece_caches: dict[tuple[int, int], CacheState] = {}
    if scheduler is not None:
        for gi, size in enumerate(sizes):
            for _, t in shares[gi]:
                if (gi, t) not in piece_caches:
                    sub = make_config(users, [size], [t], strategy="alpha")
                    piece_caches[(gi, t)] = place_alpha(sub)

    rate_memo: dict[tuple[int, int, tuple[tuple[int, int], ...]], Fraction] = {}

    def piece_rate(gi: int, t: int, local_demand: dict[int, int]) -> Fraction:
        key = (gi, t, tuple(sorted(local_demand.items())))
        if key not in rate_memo:
            if scheduler is None:
                rate_memo[key] = classic_rate(users, t, len(set(local_demand.values())))
            else:
                rate_memo[key] = _sched_rate(scheduler(piece_caches[(gi, t)], local_demand))
        return rate_memo[key]

    exact = all(isinstance(p, Fraction) for p in pop)
    total = Fraction(0) if exact else 0.0
    for rep, counts, weight in _demand_multisets(n, users):
        prob = _probability(pop, counts, exact)
        if prob == 0:
            continue
        rate = Fraction(0)
        for gi, size in enumerate(sizes):
            lo, hi = starts[gi], starts[gi] + size
            local = {
                k + 1: f - lo + 1 for k, f in enumerate(rep) if lo <= f < hi
            }
            if not local:
                continue
            for w, t in shares[gi]:
                if w:
                    rate += w * piece_rate(gi, t, local)
        total += weight * prob * rate
    return total


def _non_increasing_vectors(length: int, top: int):
    def extend(prefix, cap):
        if len(prefix) == length:
            yield prefix
            return
        for v in range(cap, -1, -1):
            yield from extend(prefix + (v,), v)

    yield from extend((), top)


def beta_points(
    users: int,
    sizes: Sequence[int],
    popularity: Sequence,
    scheduler: Scheduler | None = None,
    *,
    limit: int = ENUMERATION_LIMIT,
) -> tuple[RatePoint, ...]:
    """Achievable points of the cross-group strategy for one grouping:
    every valid non-increasing replication vector, rated by `scheduler`
    (exhaustive by default)."""
    sched = scheduler or (lambda cache, demand: exhaustive_schedule(cache, demand))
    out = []
    for r in _non_increasing_vectors(len(sizes), users):
        cfg = make_config(users, sizes, list(r), popularity, strategy="beta")
        rate = expected_rate_exact(cfg, sched, limit=limit)
        out.append(RatePoint(cfg.memory, rate, label=f"beta r={r}", params=r))
    return tuple(out)


def _compositions(total: int):
    if total == 1:
        yield (1,)
        return
    for first in range(1, total + 1):
        if first == total:
            yield (total,)
        else:
            for rest in _compositions(total - first):
                yield (first,) + rest


def alpha_points(
    users: int,
    popularity: Sequence,
    *,
    max_points: int = 20_000,
) -> tuple[RatePoint, ...]:
    """Achievable points of the grouping baseline: every contiguous
    grouping of the file list with every integer cache level per group."""
    from .placement import _normalize_popularity

    pop = _normalize_popularity(popularity)
    n = len(pop)
    out = []
    for comp in _compositions(n):
        count = (users + 1) ** len(comp)
        if len(out) + count > max_points:
            raise LimitExceededError(f"grouping sweep exceeds {max_points} points")
        for ts in itertools.product(range(users + 1), repeat=len(comp)):
            memories = [Fraction(t * s, users) for t, s in zip(ts, comp)]
            rate = alpha_expected_rate(users, comp, memories, pop)
            m = Fraction(sum(t * s for t, s in zip(ts, comp)), users)
            out.append(
                RatePoint(m, rate, label=f"alpha groups={comp} t={ts}", params=ts)
            )
    return tuple(out)


# ---------------------------------------------------------------------------
# Strategy comparison at cache size 1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateCurve:
    """Sampled curve with a strictly increasing abscissa."""

    label: str
    xname: str
    samples: tuple[tuple[Number, Number], ...]

    def __post_init__(self) -> None:
        xs = [x for x, _ in self.samples]
        if any(a >= b for a, b in zip(xs, xs[1:])):
            raise ValidationError("curve abscissa must be strictly increasing")

    @property
    def xs(self) -> tuple[Number, ...]:
        return tuple(x for x, _ in self.samples)

    @property
    def ys(self) -> tuple[Number, ...]:
        return tuple(y for _, y in self.samples)


@dataclass(frozen=True)
class StrategyComparison:
    """Both rate curves plus crossover and best-gain statistics."""

    alpha: RateCurve
    beta: RateCurve
    alpha_branch_threshold: float
    equal_threshold: float
    max_gain_p: float
    max_gain_ratio: float


def default_p_grid(points: int = 101) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(0.5, 1.0, points))


def compare_strategies(p_grid: Sequence | None = None) -> StrategyComparison:
    """Compare the two strategies at cache size 1 for the 3-user / 2-file
    setup: sampled curves, the two crossover probabilities (bisection to
    1e-9), and the point of largest relative gain."""
    grid = tuple(p_grid) if p_grid is not None else default_p_grid()
    if not grid:
        raise ValidationError("the probability grid cannot be empty")
    alpha = RateCurve(
        "R_alpha", "p", tuple((p, rate_alpha_closed(p)) for p in grid)
    )
    beta = RateCurve("R_beta", "p", tuple((p, rate_beta_closed(p)) for p in grid))

    def alpha_branch_gap(p: float) -> float:
        q = 1 - p
        return (2 / 3 - (p**3 + q**3) / 6) - (1 - p**3)

    def equal_gap(p: float) -> float:
        return (2 / 3 - p**3 / 3) - (1 - p**3)

    hi = 1.0 - 1e-12
    branch = float(bisect(alpha_branch_gap, 0.5, hi, xtol=ROOT_TOLERANCE))
    equal = float(bisect(equal_gap, 0.5, hi, xtol=ROOT_TOLERANCE))

    result = minimize_scalar(
        lambda p: rate_beta_closed(p) / rate_alpha_closed(p),
        bounds=(0.5, equal),
        method="bounded",
        options={"xatol": ROOT_TOLERANCE},
    )
    return StrategyComparison(
        alpha=alpha,
        beta=beta,
        alpha_branch_threshold=branch,
        equal_threshold=equal,
        max_gain_p=float(result.x),
        max_gain_ratio=float(result.fun),
    )


# ---------------------------------------------------------------------------
# Curve output
# ---------------------------------------------------------------------------


def write_curves_csv(path, curves: Sequence[RateCurve]) -> None:
    """One column per curve over a shared abscissa."""
    if not curves:
        raise ValidationError("no curves to write")
    xs = curves[0].xs
    for c in curves:
        if c.xs != xs or c.xname != curves[0].xname:
            raise ValidationError("curves must share the same abscissa")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([curves[0].xname] + [c.label for c in curves])
        for i, x in enumerate(xs):
            writer.writerow(
                [f"{float(x):.12g}"] + [f"{float(c.ys[i]):.12g}" for c in curves]
            )


def curves_to_json(curves: Sequence[RateCurve]) -> dict:
    return {
        "xname": curves[0].xname if curves else "",
        "curves": [
            {
                "label": c.label,
                "samples": [[float(x), float(y)] for x, y in c.samples],
            }
            for c in curves
        ],
    }
