"""Hierarchical Pitman-Yor process engine.

A :class:`HpypTree` is a Chinese restaurant franchise over context keys of a
fixed maximum length ``depth``.  Level ``k`` holds one restaurant per context
prefix of length ``k``; the restaurant for ``ctx[:k]`` backs off to the one for
``ctx[:k-1]`` and level 0 backs off to a uniform distribution over
``base_size`` dishes.  Discount and strength are shared by all restaurants of
a level.

Tables carry an identity and a link to the parent-level table they seeded, so
a customer can be removed exactly given the trace returned when it was added.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from .slicesample import slice_sample

INITIAL_DISCOUNT = 0.5
INITIAL_STRENGTH = 1.0

# Gamma(shape, rate) prior on strength + discount.
STRENGTH_PRIOR_SHAPE = 1.0
STRENGTH_PRIOR_RATE = 1.0


class TraceError(RuntimeError):
    """Raised when a removal trace does not match the seating state."""


@dataclass
class Hyperparams:
    discount: list[float]
    strength: list[float]

    @classmethod
    def initial(cls, levels: int) -> "Hyperparams":
        return cls([INITIAL_DISCOUNT] * levels, [INITIAL_STRENGTH] * levels)

    def validate(self) -> None:
        if len(self.discount) != len(self.strength):
            raise ValueError("discount and strength must have one value per level")
        for k, (d, theta) in enumerate(zip(self.discount, self.strength)):
            if not 0.0 <= d < 1.0:
                raise ValueError(f"level {k}: discount {d} outside [0, 1)")
            if not theta > -d:
                raise ValueError(f"level {k}: strength {theta} must exceed -discount")

    def copy(self) -> "Hyperparams":
        return Hyperparams(list(self.discount), list(self.strength))


class Trace(NamedTuple):
    """Where a customer was seated: the deepest restaurant and table."""

    context: tuple
    dish: int
    table: int
    prob: float  # predictive probability of the dish just before seating


class Restaurant:
    """One CRP.  ``dishes`` maps dish -> [customers, {table_id: [size, parent_id]}]."""

    __slots__ = ("context", "dishes", "customers", "tables", "_next_id")

    def __init__(self, context: tuple):
        self.context = context
        self.dishes: dict[int, list] = {}
        self.customers = 0
        self.tables = 0
        self._next_id = 0

    def counts(self, dish: int) -> tuple[int, int]:
        entry = self.dishes.get(dish)
        if entry is None:
            return 0, 0
        return entry[0], len(entry[1])

    def table_sizes(self, dish: int) -> list[int]:
        entry = self.dishes.get(dish)
        return [] if entry is None else sorted(t[0] for t in entry[1].values())

    def histogram(self) -> dict[int, dict[int, int]]:
        """dish -> {table size: multiplicity}."""
        out = {}
        for dish, (_, tables) in self.dishes.items():
            hist: dict[int, int] = {}
            for size, _ in tables.values():
                hist[size] = hist.get(size, 0) + 1
            out[dish] = hist
        return out

    def _open(self, dish: int, parent: int | None) -> int:
        entry = self.dishes.get(dish)
        if entry is None:
            entry = self.dishes[dish] = [0, {}]
        tid = self._next_id
        self._next_id += 1
        entry[0] += 1
        entry[1][tid] = [1, parent]
        self.customers += 1
        self.tables += 1
        return tid

    def audit(self) -> None:
        customers = tables = 0
        for dish, (count, tbls) in self.dishes.items():
            sizes = [t[0] for t in tbls.values()]
            if count < 1 or not tbls:
                raise AssertionError(f"{self.context}: dish {dish} kept with no customers")
            if any(s < 1 for s in sizes):
                raise AssertionError(f"{self.context}: empty table kept for dish {dish}")
            if sum(sizes) != count:
                raise AssertionError(f"{self.context}: dish {dish} table sizes do not sum")
            customers += count
            tables += len(tbls)
        if customers != self.customers or tables != self.tables:
            raise AssertionError(f"{self.context}: totals out of sync")


class HpypTree:
    """Chinese restaurant franchise over context keys of length ``depth``."""

    def __init__(self, base_size: int, depth: int, hyper: Hyperparams | None = None):
        if base_size < 1:
            raise ValueError("base_size must be positive")
        if depth < 0:
            raise ValueError("depth must be non-negative")
        self.base_size = base_size
        self.depth = depth
        self.hyper = hyper if hyper is not None else Hyperparams.initial(depth + 1)
        if len(self.hyper.discount) != depth + 1:
            raise ValueError("need one (discount, strength) pair per level")
        self.hyper.validate()
        self.levels: list[dict[tuple, Restaurant]] = [{} for _ in range(depth + 1)]
        self._cache: dict[tuple, list[float]] = {}

    # -- queries --------------------------------------------------------

    def _check(self, context: Sequence, dish: int | None = None) -> None:
        if len(context) > self.depth:
            raise ValueError(f"context of length {len(context)} exceeds depth {self.depth}")
        if dish is not None and not 0 <= dish < self.base_size:
            raise ValueError(f"dish {dish} outside base support of size {self.base_size}")

    def predictive_probability(self, context: tuple, dish: int) -> float:
        self._check(context, dish)
        d, th = self.hyper.discount, self.hyper.strength
        p = 1.0 / self.base_size
        levels = self.levels
        for k in range(len(context) + 1):
            r = levels[k].get(context[:k])
            if r is None:
                break
            entry = r.dishes.get(dish)
            dk = d[k]
            if entry is None:
                p = (th[k] + dk * r.tables) * p / (th[k] + r.customers)
            else:
                p = (entry[0] - dk * len(entry[1]) + (th[k] + dk * r.tables) * p) / (
                    th[k] + r.customers
                )
        return p

    def distribution(self, context: tuple) -> list[float]:
        """Predictive probabilities of every dish; cached until the next mutation."""
        cached = self._cache.get(context)
        if cached is not None:
            return cached
        self._check(context)
        d, th = self.hyper.discount, self.hyper.strength
        probs = [1.0 / self.base_size] * self.base_size
        levels = self.levels
        for k in range(len(context) + 1):
            r = levels[k].get(context[:k])
            if r is None:
                break
            denom = th[k] + r.customers
            scale = (th[k] + d[k] * r.tables) / denom
            probs = [p * scale for p in probs]
            dk = d[k]
            for dish, (count, tables) in r.dishes.items():
                probs[dish] += (count - dk * len(tables)) / denom
        self._cache[context] = probs
        return probs

    def sample_dish(self, context: tuple, rng: random.Random) -> int:
        """Draw a dish from the predictive distribution without touching the state."""
        self._check(context)
        d, th = self.hyper.discount, self.hyper.strength
        path = []
        for k in range(len(context) + 1):
            r = self.levels[k].get(context[:k])
            if r is None:
                break
            path.append((k, r))
        for k, r in reversed(path):
            u = rng.random() * (th[k] + r.customers)
            own = r.customers - d[k] * r.tables
            if u < own:
                for dish, (count, tables) in r.dishes.items():
                    u -= count - d[k] * len(tables)
                    if u < 0:
                        return dish
                return dish  # float round-off lands on the last dish
        return rng.randrange(self.base_size)

    # -- mutation -------------------------------------------------------

    def add_customer(self, context: tuple, dish: int, rng: random.Random) -> Trace:
        self._check(context, dish)
        self._cache = {}
        d, th = self.hyper.discount, self.hyper.strength
        depth = len(context)
        levels = self.levels
        rs: list[Restaurant | None] = []
        parent_p = []
        p = 1.0 / self.base_size
        for k in range(depth + 1):
            r = levels[k].get(context[:k]) if (not rs or rs[-1] is not None) else None
            rs.append(r)
            parent_p.append(p)
            if r is not None:
                count, ntab = r.counts(dish)
                p = (count - d[k] * ntab + (th[k] + d[k] * r.tables) * p) / (th[k] + r.customers)
        prob = p

        # Walk down from the deepest level until the customer joins a table.
        joined_at = -1
        joined_table = None
        for k in range(depth, -1, -1):
            r = rs[k]
            if r is None:
                continue
            entry = r.dishes.get(dish)
            if entry is None:
                continue
            dk = d[k]
            w_new = (th[k] + dk * r.tables) * parent_p[k]
            total = entry[0] - dk * len(entry[1]) + w_new
            u = rng.random() * total
            if u < total - w_new:
                for tid, table in entry[1].items():
                    u -= table[0] - dk
                    if u < 0:
                        break
                joined_at, joined_table = k, tid
                break

        if joined_at >= 0:
            r = rs[joined_at]
            entry = r.dishes[dish]
            entry[0] += 1
            entry[1][joined_table][0] += 1
            r.customers += 1
        parent = joined_table
        for k in range(joined_at + 1, depth + 1):
            r = rs[k]
            if r is None:
                key = context[:k]
                r = rs[k] = levels[k][key] = Restaurant(key)
            parent = r._open(dish, parent)
        return Trace(context, dish, parent, prob)

    def remove_customer(self, trace: Trace) -> None:
        context, dish, tid = trace.context, trace.dish, trace.table
        self._check(context, dish)
        self._cache = {}
        for k in range(len(context), -1, -1):
            key = context[:k]
            r = self.levels[k].get(key)
            entry = None if r is None else r.dishes.get(dish)
            table = None if entry is None else entry[1].get(tid)
            if table is None:
                raise TraceError(
                    f"no table {tid} for dish {dish} in restaurant {key!r} at level {k}"
                )
            table[0] -= 1
            entry[0] -= 1
            r.customers -= 1
            if table[0] > 0:
                return
            del entry[1][tid]
            r.tables -= 1
            if entry[0] == 0:
                del r.dishes[dish]
            if r.customers == 0:
                del self.levels[k][key]
            tid = table[1]
            if tid is None:
                return
        raise TraceError("table link chain runs past level 0")

    def set_hyperparams(self, hyper: Hyperparams) -> None:
        hyper.validate()
        if len(hyper.discount) != self.depth + 1:
            raise ValueError("need one (discount, strength) pair per level")
        self.hyper = hyper
        self._cache = {}

    def resample_hyperparameters(self, rng: random.Random, iterations: int = 5) -> Hyperparams:
        """Slice-sample discount and strength of every non-empty level."""
        hyper = self.hyper.copy()
        for k, level in enumerate(self.levels):
            if not level:
                continue
            stats = _level_stats(level.values())
            d, theta = hyper.discount[k], hyper.strength[k]
            d, theta = resample_level(stats, d, theta, rng, iterations)
            hyper.discount[k], hyper.strength[k] = d, theta
        self.set_hyperparams(hyper)
        return hyper

    # -- bookkeeping ----------------------------------------------------

    def total_customers(self, level: int | None = None) -> int:
        if level is None:
            level = self.depth
        return sum(r.customers for r in self.levels[level].values())

    def num_restaurants(self) -> int:
        return sum(len(level) for level in self.levels)

    def is_empty(self) -> bool:
        return not self.levels[0]

    def snapshot(self) -> dict:
        """Canonical seating state (table identities dropped) for equality checks."""
        return {
            "hyper": (tuple(self.hyper.discount), tuple(self.hyper.strength)),
            "levels": [
                {
                    key: {dish: tuple(r.table_sizes(dish)) for dish in sorted(r.dishes)}
                    for key, r in sorted(level.items())
                }
                for level in self.levels
            ],
        }

    def audit(self) -> None:
        """Check count invariants and the franchise links between levels."""
        if any(len(level) for level in self.levels) and () not in self.levels[0]:
            raise AssertionError("non-empty tree without a level-0 restaurant")
        for k, level in enumerate(self.levels):
            for key, r in level.items():
                if len(key) != k or r.context != key:
                    raise AssertionError(f"restaurant {key!r} filed at level {k}")
                if r.customers == 0:
                    raise AssertionError(f"empty restaurant {key!r} kept")
                r.audit()
                if k == 0:
                    continue
                parent = self.levels[k - 1].get(key[:-1])
                if parent is None:
                    raise AssertionError(f"restaurant {key!r} has no parent")
        # Each parent table must be referenced by at most `size` child tables.
        for k in range(1, self.depth + 1):
            refs: dict[tuple, int] = {}
            for key, r in self.levels[k].items():
                for dish, (_, tables) in r.dishes.items():
                    for _, ptid in tables.values():
                        pkey = (key[:-1], dish, ptid)
                        refs[pkey] = refs.get(pkey, 0) + 1
            for (pctx, dish, ptid), n in refs.items():
                entry = self.levels[k - 1][pctx].dishes.get(dish)
                if entry is None or ptid not in entry[1]:
                    raise AssertionError(f"dangling parent link {ptid} in {pctx!r}")
                if entry[1][ptid][0] < n:
                    raise AssertionError(f"parent table {ptid} in {pctx!r} over-referenced")

    # -- (de)serialization helpers ---------------------------------------

    def to_dict(self) -> dict:
        restaurants = []
        for level in self.levels:
            for key, r in sorted(level.items()):
                hist = r.histogram()
                restaurants.append(
                    [list(key), [[dish, sorted(h.items())] for dish, h in sorted(hist.items())]]
                )
        return {
            "base_size": self.base_size,
            "depth": self.depth,
            "discount": list(self.hyper.discount),
            "strength": list(self.hyper.strength),
            "restaurants": restaurants,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HpypTree":
        tree = cls(
            data["base_size"],
            data["depth"],
            Hyperparams(list(data["discount"]), list(data["strength"])),
        )
        for key, dishes in data["restaurants"]:
            key = tuple(key)
            r = tree.levels[len(key)][key] = Restaurant(key)
            for dish, hist in dishes:
                entry = r.dishes[dish] = [0, {}]
                for size, mult in hist:
                    for _ in range(mult):
                        entry[1][r._next_id] = [size, None]
                        r._next_id += 1
                        entry[0] += size
                        r.tables += 1
                        r.customers += size
        tree._relink()
        return tree

    def _relink(self) -> None:
        """Rebuild child->parent table links from counts alone.

        Any assignment of child tables to parent customers with the right
        counts is a valid franchise state, so slots are filled in order.
        """
        for k in range(1, self.depth + 1):
            slots: dict[tuple, list] = {}
            for key in sorted(self.levels[k]):
                r = self.levels[k][key]
                pkey = key[:-1]
                parent = self.levels[k - 1].get(pkey)
                for dish in sorted(r.dishes):
                    sk = (pkey, dish)
                    if sk not in slots:
                        pentry = None if parent is None else parent.dishes.get(dish)
                        if pentry is None:
                            raise ValueError(f"restaurant {key!r} dish {dish} has no parent customers")
                        slots[sk] = [
                            tid for tid, (size, _) in sorted(pentry[1].items()) for _ in range(size)
                        ]
                    free = slots[sk]
                    for table in r.dishes[dish][1].values():
                        if not free:
                            raise ValueError(f"restaurant {key!r} has more tables than its parent")
                        table[1] = free.pop()


@dataclass
class LevelStats:
    customers: np.ndarray  # per restaurant
    tables: np.ndarray  # per restaurant
    sizes: np.ndarray  # distinct table sizes across the level
    mults: np.ndarray  # multiplicity of each size


def _level_stats(restaurants) -> LevelStats:
    cs, ts = [], []
    hist: dict[int, int] = {}
    for r in restaurants:
        cs.append(r.customers)
        ts.append(r.tables)
        for _, tables in r.dishes.values():
            for size, _ in tables.values():
                hist[size] = hist.get(size, 0) + 1
    sizes = np.array(sorted(hist), dtype=float)
    return LevelStats(
        np.array(cs, dtype=float),
        np.array(ts, dtype=float),
        sizes,
        np.array([hist[int(s)] for s in sizes], dtype=float),
    )


def seating_log_likelihood(stats: LevelStats, d: float, theta: float) -> float:
    """Log probability of the observed seating arrangements of one level under PYP(d, theta)."""
    if not (0.0 <= d < 1.0) or not theta > -d:
        return -math.inf
    c, t = stats.customers, stats.tables
    # prod_{i=1}^{T-1} (theta + i d)
    if d > 0.0:
        new_tables = (t - 1) * math.log(d) + gammaln(theta / d + t) - gammaln(theta / d + 1)
    else:
        new_tables = (t - 1) * math.log(theta)
    # 1 / (theta + 1)_{c - 1}
    norm = gammaln(theta + c) - gammaln(theta + 1)
    ll = float(np.sum(new_tables - norm))
    ll += float(np.sum(stats.mults * (gammaln(stats.sizes - d) - gammaln(1.0 - d))))
    return ll


def resample_level(
    stats: LevelStats, d: float, theta: float, rng: random.Random, iterations: int = 5
) -> tuple[float, float]:
    """Slice sample (d, theta) given one level's seating, in (d, log(theta + d)) space."""
    if stats.customers.size == 0 or stats.customers.sum() == 0:
        return d, theta
    d = min(max(d, 1e-6), 1 - 1e-6)
    s = max(theta + d, 1e-6)

    def log_gamma_prior(log_s):
        return STRENGTH_PRIOR_SHAPE * log_s - STRENGTH_PRIOR_RATE * math.exp(log_s)

    for _ in range(iterations):
        d = slice_sample(
            lambda x: seating_log_likelihood(stats, x, s - x),
            d,
            rng,
            lower=0.0,
            upper=1.0,
            width=0.1,
        )
        log_s = slice_sample(
            lambda u: seating_log_likelihood(stats, d, math.exp(u) - d) + log_gamma_prior(u),
            math.log(s),
            rng,
            width=1.0,
        )
        s = math.exp(log_s)
    theta = s - d
    # Guard the open boundaries against float round-off.
    if not theta > -d:
        theta = -d + 1e-12
    return d, theta
