"""Set-function toolkit: memoized oracles, submodularity checks, and
submodular function minimization (SFM) on sublattices of the subset lattice.

Two SFM backends sit behind one contract: ``exhaustive`` enumerates the
lattice and is the correctness baseline; ``minnorm`` is a Fujishige-Wolfe
minimum-norm-point solver in exact rational arithmetic for a growth path
beyond desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import chain, combinations
from typing import Callable, Iterable

#: The exhaustive paths refuse ground sets beyond this size (2^20 evaluations).
EXHAUSTIVE_LIMIT = 20


class GroundSetTooLarge(ValueError):
    """An exhaustive routine was asked to enumerate too large a lattice."""


class InfeasibleLattice(ValueError):
    """The forced-in and forced-out sets overlap or leave the ground set."""


class SetFunction:
    """A memoized function on subsets of a finite ground set.

    The oracle must be deterministic: repeated evaluation of one subset
    returns the identical value.  The memo cache only ever receives
    idempotent writes, so concurrent readers are safe in CPython.
    """

    __slots__ = ("ground", "_fn", "_cache")

    def __init__(self, ground: Iterable, fn: Callable[[frozenset], Fraction | float]):
        self.ground = frozenset(ground)
        self._fn = fn
        self._cache: dict[frozenset, Fraction | float] = {}

    def __call__(self, X: Iterable) -> Fraction | float:
        X = frozenset(X)
        if not X <= self.ground:
            raise ValueError(f"{sorted(X - self.ground)} not in the ground set")
        value = self._cache.get(X)
        if value is None:
            value = self._cache.setdefault(X, self._fn(X))
        return value

    def evaluations(self) -> int:
        """Number of distinct subsets evaluated so far."""
        return len(self._cache)


def subsets(items: Iterable) -> Iterable[frozenset]:
    """All subsets of ``items``, ordered by size then by element order."""
    items = sorted(items)
    return (frozenset(c) for c in chain.from_iterable(
        combinations(items, k) for k in range(len(items) + 1)))


def _check_size(n: int) -> None:
    if n > EXHAUSTIVE_LIMIT:
        raise GroundSetTooLarge(f"ground set of size {n} exceeds the exhaustive limit {EXHAUSTIVE_LIMIT}")


def is_submodular(f: SetFunction, tol=0):
    """Exhaustively check f(X) + f(Y) >= f(X ∩ Y) + f(X ∪ Y) on all pairs.

    Returns ``(True, None)`` or ``(False, (X, Y))`` with one violating pair.
    """
    _check_size(len(f.ground))
    subs = list(subsets(f.ground))
    for X in subs:
        for Y in subs:
            if f(X) + f(Y) < f(X & Y) + f(X | Y) - tol:
                return False, (X, Y)
    return True, None


def is_intersecting_submodular(f: SetFunction, tol=0):
    """Like :func:`is_submodular`, restricted to pairs with X ∩ Y nonempty."""
    _check_size(len(f.ground))
    subs = list(subsets(f.ground))
    for X in subs:
        for Y in subs:
            if not X & Y:
                continue
            if f(X) + f(Y) < f(X & Y) + f(X | Y) - tol:
                return False, (X, Y)
    return True, None


@dataclass(frozen=True)
class SfmResult:
    """Minimum value plus the minimal and maximal minimizing subsets."""

    value: Fraction | float
    minimal: frozenset
    maximal: frozenset


def sfm_min(
    f: SetFunction,
    forced_in: Iterable = (),
    forced_out: Iterable = (),
    *,
    backend: str = "exhaustive",
    tol=0,
) -> SfmResult:
    """Minimize ``f`` over the lattice {X : forced_in ⊆ X ⊆ V ∖ forced_out}.

    ``f`` must be submodular on that lattice.  The minimizers of a submodular
    function form a lattice, so the minimal minimizer (intersection of all
    minimizers) and the maximal one (their union) are well defined; both are
    returned alongside the minimum value.
    """
    forced_in = frozenset(forced_in)
    forced_out = frozenset(forced_out)
    if not forced_in <= f.ground or not forced_out <= f.ground:
        raise InfeasibleLattice("forced sets must lie inside the ground set")
    if forced_in & forced_out:
        raise InfeasibleLattice(f"forced-in and forced-out overlap on {sorted(forced_in & forced_out)}")
    free = f.ground - forced_in - forced_out
    if backend == "exhaustive":
        return _sfm_exhaustive(f, forced_in, free, tol)
    if backend == "minnorm":
        return _sfm_minnorm(f, forced_in, free)
    raise ValueError(f"unknown SFM backend {backend!r}")


def _sfm_exhaustive(f, forced_in, free, tol) -> SfmResult:
    _check_size(len(free))
    best = min(f(forced_in | Y) for Y in subsets(free))
    minimal = forced_in | free
    maximal = frozenset(forced_in)
    for Y in subsets(free):
        if f(forced_in | Y) <= best + tol:
            minimal &= forced_in | Y
            maximal |= Y
    assert minimal <= maximal, "minimizer collection is empty or inconsistent"
    return SfmResult(best, minimal, maximal)


# --- Fujishige-Wolfe minimum-norm-point backend (exact rationals) ---------


def _exact(value) -> Fraction:
    # floats are dyadic rationals, so this conversion is lossless
    return value if isinstance(value, Fraction) else Fraction(value)


def _greedy_base_vertex(g, order: list) -> tuple[Fraction, ...]:
    """Vertex of the base polytope of ``g`` along ``order`` (marginal gains)."""
    coords = {}
    prefix: frozenset = frozenset()
    prev = g(prefix)
    for e in order:
        prefix = prefix | {e}
        value = g(prefix)
        coords[e] = value - prev
        prev = value
    return tuple(coords[e] for e in sorted(coords))


def _affine_min_norm(points: list[tuple[Fraction, ...]]):
    """Minimum-norm point of the affine hull of ``points``.

    Solves the KKT system for min ||Σ μ_i p_i||² with Σ μ_i = 1 by rational
    Gaussian elimination; returns (coefficients, point).
    """
    k = len(points)
    grams = [[sum(a * b for a, b in zip(p, q)) for q in points] for p in points]
    size = k + 1
    m = [[Fraction(0)] * size + [Fraction(0)] for _ in range(size)]
    m[0][0] = Fraction(0)
    for j in range(k):
        m[0][j + 1] = Fraction(1)
        m[j + 1][0] = Fraction(1)
    for i in range(k):
        for j in range(k):
            m[i + 1][j + 1] = grams[i][j]
    m[0][size] = Fraction(1)
    for col in range(size):
        pivot = next((r for r in range(col, size) if m[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("affinely dependent corral in min-norm solve")
        m[col], m[pivot] = m[pivot], m[col]
        inv = m[col][col]
        m[col] = [v / inv for v in m[col]]
        for r in range(size):
            if r != col and m[r][col] != 0:
                factor = m[r][col]
                m[r] = [a - factor * b for a, b in zip(m[r], m[col])]
    mu = [m[i + 1][size] for i in range(k)]
    point = tuple(sum(mu[i] * points[i][d] for i in range(k)) for d in range(len(points[0])))
    return mu, point


def _min_norm_base_point(g, elems: list) -> tuple[Fraction, ...]:
    """Wolfe's algorithm for the minimum-norm point in the base polytope of g."""

    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    def vertex_for(weights: tuple[Fraction, ...]):
        by_elem = dict(zip(elems, weights))
        ranked = sorted(elems, key=lambda e: (by_elem[e], e))
        return _greedy_base_vertex(g, ranked)

    x = _greedy_base_vertex(g, list(elems))
    corral = [x]
    lams = [Fraction(1)]
    for _ in range(100_000):
        q = vertex_for(x)
        if dot(x, q) >= dot(x, x):
            return x
        corral.append(q)
        lams.append(Fraction(0))
        while True:
            mu, y = _affine_min_norm(corral)
            if min(mu) > 0:
                lams, x = mu, y
                break
            theta = min(
                lam / (lam - m) for lam, m in zip(lams, mu) if m <= 0 and lam > m
            )
            lams = [theta * m + (1 - theta) * lam for lam, m in zip(lams, mu)]
            keep = [i for i, lam in enumerate(lams) if lam > 0]
            corral = [corral[i] for i in keep]
            lams = [lams[i] for i in keep]
            x = tuple(
                sum(lams[i] * corral[i][d] for i in range(len(corral)))
                for d in range(len(x))
            )
    raise ArithmeticError("min-norm point iteration failed to terminate")


def _minnorm_min_value(f, forced_in: frozenset, free: frozenset) -> Fraction:
    """Exact minimum of f over {X : forced_in ⊆ X ⊆ forced_in ∪ free}."""
    base = _exact(f(forced_in))
    if not free:
        return base
    elems = sorted(free)

    def g(prefix: frozenset) -> Fraction:
        return _exact(f(forced_in | prefix)) - base

    x = _min_norm_base_point(g, elems)
    return base + sum(v for v in x if v < 0)


def _sfm_minnorm(f, forced_in, free) -> SfmResult:
    best = _minnorm_min_value(f, forced_in, free)
    minimal = set(forced_in)
    maximal = set(forced_in)
    # contraction trick: probe each element by re-solving with it pinned
    for e in sorted(free):
        rest = free - {e}
        if _minnorm_min_value(f, forced_in, rest) > best:
            minimal.add(e)
        if _minnorm_min_value(f, forced_in | {e}, rest) == best:
            maximal.add(e)
    return SfmResult(best, frozenset(minimal), frozenset(maximal))
