"""Extreme points of the optimal rate region and Shapley-value allocation.

The Shapley value charges each user their permutation-averaged marginal
characteristic cost.  It equals the mean of the core's distinct vertices,
which yields an approximation scheme: average the greedy vertices of a
random sample of permutations.  Both combine with the fundamental-partition
decomposition for distributed computation.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import factorial
from itertools import permutations as iter_permutations
from typing import Iterable, Mapping, Sequence

from ._concurrency import parallel_map
from .omniscience import GameContext, RateVector, decompose
from .setfn import GroundSetTooLarge, subsets

#: Factorial vertex enumeration refuses ground sets beyond this size.
ENUMERATION_LIMIT = 8

#: Exact Shapley computation needs all 2^|V| characteristic costs.
EXACT_LIMIT = 20


def edmonds_greedy_vertex(ctx: GameContext, permutation: Sequence[int], *, method: str = "cache") -> RateVector:
    """Core vertex for ``permutation``: each user is charged the marginal
    characteristic cost over the preceding prefix.

    ``method="cache"`` reads (and fills) the context's truncation cache;
    ``method="chain"`` runs one incremental truncation pass along the
    permutation, one constrained SFM per step, and reads the per-step
    increments.  Both return the same vertex.
    """
    order = tuple(permutation)
    if frozenset(order) != ctx.ground or len(order) != len(ctx.ground):
        raise ValueError(f"{order} is not a permutation of {ctx.users}")
    if method == "cache":
        return ctx.greedy_vertex(order)
    if method == "chain":
        from .omniscience import _dilworth_incremental

        _, _, increments = _dilworth_incremental(ctx.f, order, ctx._sfm_backend, ctx.tol)
        return RateVector(dict(zip(order, increments)))
    raise ValueError(f"unknown method {method!r}")


def enumerate_extreme_points(ctx: GameContext) -> tuple[RateVector, ...]:
    """All vertices of the core: greedy vertices over every permutation,
    deduplicated, in a canonical coordinate order."""
    if len(ctx.users) > ENUMERATION_LIMIT:
        raise GroundSetTooLarge(
            f"vertex enumeration needs |V| <= {ENUMERATION_LIMIT}, got {len(ctx.users)}")
    seen: dict[tuple, RateVector] = {}
    for order in iter_permutations(ctx.users):
        vertex = ctx.greedy_vertex(order)
        key = vertex.as_tuple()
        if not ctx.source.is_exact:
            key = tuple(round(v, 12) for v in key)
        seen.setdefault(key, vertex)
    return tuple(seen[key] for key in sorted(seen))


def shapley_exact(ctx: GameContext) -> RateVector:
    """Shapley value from its defining sum of weighted marginal costs."""
    n = len(ctx.users)
    if n > EXACT_LIMIT:
        raise GroundSetTooLarge(f"exact Shapley needs |V| <= {EXACT_LIMIT}, got {n}")
    total = factorial(n)
    rates = {}
    for i in ctx.users:
        others = ctx.ground - {i}
        acc = Fraction(0) if ctx.source.is_exact else 0.0
        for X in subsets(others):
            weight = Fraction(factorial(len(X)) * factorial(n - len(X) - 1), total)
            if not ctx.source.is_exact:
                weight = float(weight)
            acc += weight * (ctx.hat(X | {i}) - ctx.hat(X))
        rates[i] = acc
    return RateVector(rates)


def shapley_mean_of_vertices(ctx: GameContext) -> RateVector:
    """Shapley value as the arithmetic mean of the distinct core vertices."""
    vertices = enumerate_extreme_points(ctx)
    return _mean(vertices, ctx)


def _mean(vectors: Sequence[RateVector], ctx: GameContext) -> RateVector:
    count = len(vectors)
    rates = {}
    for u in ctx.users:
        total = sum(v[u] for v in vectors)
        rates[u] = Fraction(total, count) if ctx.source.is_exact else total / count
    return RateVector(rates)


def sample_permutations(users: Sequence[int], count: int, seed) -> list[tuple[int, ...]]:
    """Deterministically sample ``count`` permutations of ``users``: uniform
    without replacement while count <= |users|!, with replacement beyond."""
    if count < 1:
        raise ValueError("need at least one permutation")
    rng = random.Random(seed)
    users = sorted(users)
    space = factorial(len(users))
    out: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    while len(out) < count:
        draw = list(users)
        rng.shuffle(draw)
        draw = tuple(draw)
        if count <= space and draw in seen:
            continue
        seen.add(draw)
        out.append(draw)
    return out


def shapley_approx(
    ctx: GameContext,
    permutations: Iterable[Sequence[int]] | None = None,
    *,
    count: int | None = None,
    seed=None,
) -> RateVector:
    """Mean greedy vertex over a permutation multiset (never deduplicated),
    so the result is a convex combination of vertices and stays in the core.

    Pass ``permutations`` explicitly, or a ``count`` and ``seed`` to sample;
    ``count`` defaults to the number of users.
    """
    if permutations is None:
        if seed is None:
            raise ValueError("sampling permutations needs a seed for reproducibility")
        permutations = sample_permutations(ctx.users, count or len(ctx.users), seed)
    perms = [tuple(p) for p in permutations]
    if not perms:
        raise ValueError("empty permutation list")
    vertices = parallel_map(ctx.greedy_vertex, perms)
    return _mean(vertices, ctx)


def shapley_decomposed(
    ctx: GameContext,
    mode: str = "exact",
    *,
    count: int | None = None,
    seed=None,
    permutations: Mapping[frozenset, Iterable[Sequence[int]]] | None = None,
) -> RateVector:
    """Fuse per-subgame Shapley values across the fundamental partition.

    ``mode="exact"`` equals the whole-game Shapley value.  ``mode="approx"``
    samples ``count`` permutations per subgame (default: the block size) from
    a per-subgame seed split off ``seed``; explicit ``permutations`` may be
    supplied per block instead.
    """
    if mode not in ("exact", "approx"):
        raise ValueError(f"unknown mode {mode!r}")
    subgames = decompose(ctx)
    rng = random.Random(seed)
    child_seeds = {sub.ground: rng.randrange(2**63) for sub in subgames}

    def solve_block(sub: GameContext) -> RateVector:
        if mode == "exact":
            return shapley_exact(sub)
        explicit = permutations.get(sub.ground) if permutations else None
        if explicit is not None:
            return shapley_approx(sub, explicit)
        if len(sub.users) == 1:
            return sub.greedy_vertex(sub.users)
        if seed is None:
            raise ValueError("approx mode needs a seed or explicit permutations")
        return shapley_approx(sub, count=count or len(sub.users), seed=child_seeds[sub.ground])

    return RateVector.direct_sum(parallel_map(solve_block, subgames))
