"""Minimum sum-rate solver and the induced coalitional cost structure.

Given a multi-user source, this module computes the minimum total coding
rate at which every user can recover the whole source, the fundamental
partition that certifies it, and the optimal rate region (the core of the
associated cost-sharing game).  The characteristic cost of a user subset is
the Dilworth truncation of the sum-rate-parameterized cost function, with a
partition-enumeration oracle backend and an incremental one-SFM-per-element
backend behind the same contract.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .setfn import GroundSetTooLarge, SetFunction, sfm_min, subsets
from .sources import Source


class DecompositionError(RuntimeError):
    """The characteristic cost failed to split across the fundamental partition."""


def _eq(a, b, tol) -> bool:
    return abs(a - b) <= tol


def _leq(a, b, tol) -> bool:
    return a <= b + tol


class RateVector:
    """Per-user source coding rates (exact rationals for linear sources)."""

    __slots__ = ("_rates",)

    def __init__(self, rates: Mapping[int, Fraction | float]):
        if not rates:
            raise ValueError("a rate vector needs at least one user")
        self._rates = dict(rates)

    @property
    def users(self) -> tuple[int, ...]:
        return tuple(sorted(self._rates))

    def __getitem__(self, user: int):
        return self._rates[user]

    def __contains__(self, user: int) -> bool:
        return user in self._rates

    def __len__(self) -> int:
        return len(self._rates)

    def mass(self, X: Iterable[int]):
        """Sum of rates over ``X``; zero for the empty set."""
        return sum(self._rates[u] for u in X)

    def total(self):
        return sum(self._rates.values())

    def as_tuple(self, order: Iterable[int] | None = None) -> tuple:
        order = self.users if order is None else tuple(order)
        return tuple(self._rates[u] for u in order)

    def to_dict(self) -> dict[int, Fraction | float]:
        return dict(self._rates)

    def restrict(self, X: Iterable[int]) -> "RateVector":
        return RateVector({u: self._rates[u] for u in X})

    def exchange(self, gainer: int, loser: int, step) -> "RateVector":
        """New vector with ``step`` moved from ``loser`` to ``gainer``."""
        rates = dict(self._rates)
        rates[gainer] = rates[gainer] + step
        rates[loser] = rates[loser] - step
        return RateVector(rates)

    def l1_distance(self, other: "RateVector"):
        if self.users != other.users:
            raise ValueError("rate vectors are indexed by different users")
        return sum(abs(self._rates[u] - other._rates[u]) for u in self._rates)

    @staticmethod
    def direct_sum(parts: Iterable["RateVector"]) -> "RateVector":
        merged: dict[int, Fraction | float] = {}
        for part in parts:
            overlap = merged.keys() & part._rates.keys()
            if overlap:
                raise ValueError(f"direct sum of overlapping user sets: {sorted(overlap)}")
            merged.update(part._rates)
        return RateVector(merged)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RateVector):
            return NotImplemented
        return self._rates == other._rates

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._rates.items())))

    def __repr__(self) -> str:
        inner = ", ".join(f"{u}: {self._rates[u]}" for u in self.users)
        return f"RateVector({{{inner}}})"


class Partition:
    """Disjoint nonempty blocks covering a ground set."""

    __slots__ = ("blocks",)

    def __init__(self, blocks: Iterable[Iterable[int]], ground: Iterable[int] | None = None):
        blocks = tuple(frozenset(b) for b in blocks)
        if any(not b for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        union: frozenset = frozenset().union(*blocks) if blocks else frozenset()
        if sum(len(b) for b in blocks) != len(union):
            raise ValueError("partition blocks must be pairwise disjoint")
        if ground is not None and union != frozenset(ground):
            raise ValueError("partition blocks must cover the ground set")
        self.blocks = tuple(sorted(blocks, key=min))

    @property
    def ground(self) -> frozenset:
        return frozenset().union(*self.blocks)

    def block_of(self, user: int) -> frozenset:
        for block in self.blocks:
            if user in block:
                return block
        raise KeyError(user)

    def refines(self, other: "Partition") -> bool:
        """True if every block of ``self`` sits inside a block of ``other``."""
        return all(any(b <= c for c in other.blocks) for b in self.blocks)

    def to_lists(self) -> list[list[int]]:
        return [sorted(b) for b in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return frozenset(self.blocks) == frozenset(other.blocks)

    def __hash__(self) -> int:
        return hash(frozenset(self.blocks))

    def __repr__(self) -> str:
        return f"Partition({self.to_lists()})"


def iter_partitions(items: Iterable[int]):
    """Yield every partition of ``items`` as a tuple of frozensets."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for sub in iter_partitions(rest):
        for k in range(len(sub)):
            yield sub[:k] + (sub[k] | {first},) + sub[k + 1:]
        yield sub + (frozenset({first}),)


def f_alpha(source: Source, alpha, X: Iterable[int]):
    """Sum-rate-parameterized cost: zero on the empty set, else
    ``alpha - H(V) + H(X)`` (equivalently ``alpha - H(V∖X | X)``)."""
    X = source.subset(X)
    if not X:
        return Fraction(0) if source.is_exact else 0.0
    return alpha - source.entropy(source.ground) + source.entropy(X)


# --- Dilworth truncation ---------------------------------------------------


def _dilworth_enumerate(fa: Callable[[frozenset], Fraction | float], X: frozenset, tol):
    """Oracle backend: minimize over every partition of X, return the finest
    minimizer (selected by maximal block count, verified by refinement)."""
    if len(X) > 10:
        raise GroundSetTooLarge(
            f"partition enumeration is limited to 10 elements, got {len(X)}")
    scored = [(sum(fa(B) for B in P), P) for P in iter_partitions(sorted(X))]
    best = min(v for v, _ in scored)
    minimizers = [P for v, P in scored if v <= best + tol]
    most_blocks = max(len(P) for P in minimizers)
    finest = [Partition(P) for P in minimizers if len(P) == most_blocks]
    if len(finest) != 1 or not all(finest[0].refines(Partition(P)) for P in minimizers):
        raise ArithmeticError(
            "minimizing partitions do not form a lattice; "
            "the cost function is not intersecting submodular")
    return best, finest[0]


def _dilworth_incremental(
    fa: Callable[[frozenset], Fraction | float],
    order: Iterable[int],
    sfm_backend: str,
    tol,
):
    """Incremental backend: grow the ground set one element at a time, merging
    the new element into existing blocks via one constrained SFM per element.

    Returns ``(value, finest_partition, per_element_increments)`` where the
    increments follow ``order`` and telescope to the truncation value.
    """
    blocks: list[tuple[frozenset, Fraction | float]] = []
    increments = []
    total = None
    for u in order:
        snapshot = tuple(blocks)

        def gain(S: frozenset, u=u, snapshot=snapshot):
            merged = {u}
            absorbed = 0
            for idx in S:
                merged |= snapshot[idx][0]
                absorbed += snapshot[idx][1]
            return fa(frozenset(merged)) - absorbed

        fused = SetFunction(range(len(snapshot)), gain)
        result = sfm_min(fused, backend=sfm_backend, tol=tol)
        merged = frozenset({u}).union(*(snapshot[i][0] for i in result.minimal))
        increments.append(result.value)
        total = result.value if total is None else total + result.value
        blocks = [b for i, b in enumerate(blocks) if i not in result.minimal]
        blocks.append((merged, fa(merged)))
    return total, Partition(b for b, _ in blocks), increments


def dilworth_truncation(
    source: Source,
    alpha,
    X: Iterable[int],
    *,
    backend: str = "incremental",
    sfm_backend: str = "exhaustive",
):
    """Partition-wise minimum of the parameterized cost over ``X``.

    Returns ``(value, finest_minimizing_partition)``.  ``backend`` is
    ``"incremental"`` (one constrained SFM per element) or ``"enumerate"``
    (explicit minimum over all partitions, the correctness oracle).
    """
    X = source.subset(X)
    if not X:
        raise ValueError("the truncation is evaluated on nonempty subsets")

    def fa(S: frozenset):
        return f_alpha(source, alpha, S)

    if backend == "enumerate":
        return _dilworth_enumerate(fa, X, source.tol)
    if backend == "incremental":
        value, part, _ = _dilworth_incremental(fa, sorted(X), sfm_backend, source.tol)
        return value, part
    raise ValueError(f"unknown Dilworth backend {backend!r}")


# --- solving the minimum sum-rate problem ----------------------------------


def _bruteforce_min_sum_rate(source: Source):
    """Maximize sum(H(V) - H(C)) / (|P| - 1) over partitions with >= 2 blocks."""
    hv = source.entropy(source.ground)
    best = None
    for P in iter_partitions(source.users):
        if len(P) < 2:
            continue
        candidate = sum(hv - source.entropy(C) for C in P) / (len(P) - 1)
        if best is None or candidate > best:
            best = candidate
    return best


def _newton_min_sum_rate(source: Source, sfm_backend: str):
    """Raise a candidate sum-rate along finest truncation minimizers until the
    whole-set cost matches its truncation; converges in at most |V| rounds."""
    users = source.users
    hv = source.entropy(source.ground)
    tol = source.tol
    alpha = sum(hv - source.entropy(frozenset({u})) for u in users) / (len(users) - 1)
    for _ in range(len(users) + 2):
        value, part = dilworth_truncation(
            source, alpha, users, backend="incremental", sfm_backend=sfm_backend)
        if _eq(value, alpha, tol):
            return alpha, part
        if len(part) < 2:
            raise ArithmeticError("truncation minimizer collapsed below the threshold")
        alpha = sum(hv - source.entropy(C) for C in part) / (len(part) - 1)
    raise ArithmeticError("sum-rate search failed to converge")


class GameContext:
    """A solved instance: the minimum sum-rate, the fundamental partition,
    a shared cache of truncation values, and one vertex of the core.

    Subgame contexts (from :func:`decompose`) reuse the same cache and cost
    function restricted to their block; their ``sum_cost`` is the block's
    characteristic cost.  Contexts are immutable after construction and safe
    for concurrent queries.
    """

    def __init__(
        self,
        source: Source,
        ground: Iterable[int],
        min_sum_rate,
        sum_cost,
        fundamental_partition: Partition | None,
        shared_randomness,
        grid_denominator: int,
        hat_cache: dict | None = None,
        sfm_backend: str = "exhaustive",
    ):
        self.source = source
        self.ground = frozenset(ground)
        self.users = tuple(sorted(self.ground))
        self.min_sum_rate = min_sum_rate
        self.sum_cost = sum_cost
        self.fundamental_partition = fundamental_partition
        self.shared_randomness = shared_randomness
        self.grid_denominator = grid_denominator
        self.tol = source.tol
        self.vertex: RateVector | None = None
        self._hat = hat_cache if hat_cache is not None else {}
        self._sfm_backend = sfm_backend

    @property
    def is_whole_game(self) -> bool:
        return self.ground == self.source.ground

    def f(self, X: Iterable[int]):
        """Parameterized cost at the solved sum-rate."""
        X = frozenset(X)
        if not X <= self.ground:
            raise ValueError(f"{sorted(X - self.ground)} outside this game's ground set")
        return f_alpha(self.source, self.min_sum_rate, X)

    def hat(self, X: Iterable[int]):
        """Characteristic cost: Dilworth truncation of :meth:`f` over ``X``."""
        X = frozenset(X)
        if not X <= self.ground:
            raise ValueError(f"{sorted(X - self.ground)} outside this game's ground set")
        if not X:
            return Fraction(0) if self.source.is_exact else 0.0
        value = self._hat.get(X)
        if value is None:
            computed, _, _ = _dilworth_incremental(self.f, sorted(X), self._sfm_backend, self.tol)
            value = self._hat.setdefault(X, computed)
        return value

    def greedy_vertex(self, order: Iterable[int]) -> RateVector:
        """Core vertex from marginal characteristic costs along ``order``."""
        order = tuple(order)
        if frozenset(order) != self.ground or len(order) != len(self.ground):
            raise ValueError("order must be a permutation of the ground set")
        rates = {}
        prefix: frozenset = frozenset()
        previous = Fraction(0) if self.source.is_exact else 0.0
        for u in order:
            prefix = prefix | {u}
            value = self.hat(prefix)
            rates[u] = value - previous
            previous = value
        return RateVector(rates)

    def __repr__(self) -> str:
        return (f"GameContext(users={self.users}, min_sum_rate={self.min_sum_rate}, "
                f"sum_cost={self.sum_cost}, partition={self.fundamental_partition})")


def min_sum_rate(source: Source, *, method: str = "auto", sfm_backend: str = "exhaustive") -> GameContext:
    """Solve the minimum sum-rate problem.

    ``method`` is ``"bruteforce"`` (maximize the partition formula directly,
    desk scale), ``"newton"`` (iterated truncation evaluation with candidate
    sum-rate updates), or ``"auto"`` which picks by ground set size.  Both
    must agree; the returned context carries the fundamental partition, the
    shared randomness amount, and one core vertex (greedy on the identity
    permutation).
    """
    if method == "auto":
        method = "bruteforce" if len(source.users) <= 8 else "newton"
    if method == "bruteforce":
        rco = _bruteforce_min_sum_rate(source)
        _, part = dilworth_truncation(
            source, rco, source.users, backend="incremental", sfm_backend=sfm_backend)
    elif method == "newton":
        rco, part = _newton_min_sum_rate(source, sfm_backend)
    else:
        raise ValueError(f"unknown solve method {method!r}")

    shared = source.entropy(source.ground) - rco
    if shared < -source.tol:
        raise ArithmeticError(f"shared randomness came out negative: {shared}")
    ctx = GameContext(
        source=source,
        ground=source.ground,
        min_sum_rate=rco,
        sum_cost=rco,
        fundamental_partition=part,
        shared_randomness=shared,
        grid_denominator=max(len(part) - 1, 1),
        sfm_backend=sfm_backend,
    )
    ctx.vertex = ctx.greedy_vertex(ctx.users)
    return ctx


# --- core membership and decomposition -------------------------------------


def core_membership(ctx: GameContext, r: RateVector) -> tuple[bool, str | None]:
    """Check whether ``r`` lies in the optimal rate region of ``ctx``.

    Two equivalent tests run: the defining rate constraints (Slepian-Wolf
    lower bounds for the whole game, cost upper bounds for subgames) and the
    characteristic-cost upper bounds; they are asserted to agree.  Returns
    the verdict plus the first violated constraint, if any.
    """
    if r.users != ctx.users:
        raise ValueError(f"rate vector users {r.users} != game users {ctx.users}")
    tol = ctx.tol
    ok, witness = True, None
    if not _eq(r.total(), ctx.sum_cost, tol):
        ok, witness = False, f"sum rate {r.total()} != {ctx.sum_cost}"
    elif ctx.is_whole_game:
        ground = ctx.ground
        for X in subsets(ctx.users):
            if not X or X == ground:
                continue
            bound = ctx.source.conditional_entropy(X, ground - X)
            if not _leq(bound, r.mass(X), tol):
                ok = False
                witness = f"r({sorted(X)}) = {r.mass(X)} < H(X | V∖X) = {bound}"
                break
    else:
        for X in subsets(ctx.users):
            if not X or X == ctx.ground:
                continue
            bound = ctx.f(X)
            if not _leq(r.mass(X), bound, tol):
                ok = False
                witness = f"r({sorted(X)}) = {r.mass(X)} > f({sorted(X)}) = {bound}"
                break

    hat_ok = _eq(r.total(), ctx.sum_cost, tol) and all(
        _leq(r.mass(X), ctx.hat(X), tol)
        for X in subsets(ctx.users) if X)
    if ok != hat_ok:
        raise ArithmeticError(
            "membership cross-check disagreement between the defining "
            "constraints and the characteristic-cost bounds")
    return ok, witness


def conditional_mi_given_U(ctx: GameContext, X: Iterable[int], Y: Iterable[int]):
    """Mutual information between disjoint subsets given the shared part:
    hat(X) + hat(Y) - hat(X ⊔ Y)."""
    X, Y = frozenset(X), frozenset(Y)
    if not X or not Y:
        raise ValueError("both arguments must be nonempty")
    if X & Y:
        raise ValueError(f"arguments overlap on {sorted(X & Y)}")
    return ctx.hat(X) + ctx.hat(Y) - ctx.hat(X | Y)


def decompose(ctx: GameContext) -> list[GameContext]:
    """Split a solved whole-game context into one subgame per block of the
    fundamental partition.  For desk-scale instances the separability of the
    characteristic cost across blocks is verified on every subset first; a
    violation signals an upstream bug and raises :class:`DecompositionError`.
    """
    if ctx.fundamental_partition is None or not ctx.is_whole_game:
        raise ValueError("decompose needs a solved whole-game context")
    part = ctx.fundamental_partition
    if len(ctx.ground) <= 10:
        for X in subsets(ctx.users):
            lhs = ctx.hat(X)
            rhs = sum(ctx.hat(X & C) for C in part.blocks)
            if not _eq(lhs, rhs, ctx.tol):
                raise DecompositionError(
                    f"hat({sorted(X)}) = {lhs} but the blockwise sum is {rhs}")
    subgames = []
    for C in part.blocks:
        sub = GameContext(
            source=ctx.source,
            ground=C,
            min_sum_rate=ctx.min_sum_rate,
            sum_cost=ctx.hat(C),
            fundamental_partition=None,
            shared_randomness=None,
            grid_denominator=ctx.grid_denominator,
            hat_cache=ctx._hat,
            sfm_backend=ctx._sfm_backend,
        )
        sub.vertex = sub.greedy_vertex(sub.users)
        subgames.append(sub)
    return subgames


def l1_size(ctx: GameContext):
    """Largest l1 distance between extreme points of the core (and hence
    between any two of its points, by convexity)."""
    from .shapley import enumerate_extreme_points

    vertices = enumerate_extreme_points(ctx)
    if len(vertices) < 2:
        return Fraction(0) if ctx.source.is_exact else 0.0
    return max(
        a.l1_distance(b)
        for i, a in enumerate(vertices)
        for b in vertices[i + 1:])
