"""Joint entropy oracles for multi-user sources.

Two source families are supported:

* :class:`LinearSource` -- the finite linear model used in coded cooperative
  data exchange.  Users hold packets (or coefficient vectors over a prime
  field) and entropies are exact :class:`~fractions.Fraction` values counted
  in field symbols (bits when the field size is 2).
* :class:`PmfSource` -- a discrete joint probability mass function.
  Entropies are floats in bits and downstream comparisons use a tolerance.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

#: Joint pmf tables must sum to one within this tolerance.
PMF_NORMALIZATION_TOL = 1e-12

#: Comparison tolerance for float-valued (pmf) entropies and derived values.
FLOAT_TOL = 1e-9


class SourceSpecError(ValueError):
    """A source description is malformed."""


def _check_users(users: Iterable[int]) -> tuple[int, ...]:
    users = tuple(users)
    if len(users) != len(set(users)):
        raise SourceSpecError("user identifiers must be unique")
    if len(users) < 2:
        raise SourceSpecError("a source needs at least two users")
    if not all(isinstance(u, int) and not isinstance(u, bool) for u in users):
        raise SourceSpecError("user identifiers must be integers")
    return tuple(sorted(users))


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    d = 2
    while d * d <= q:
        if q % d == 0:
            return False
        d += 1
    return True


def gf_rank(rows: Sequence[Sequence[int]], q: int) -> int:
    """Rank of a matrix over GF(q), q prime, by Gaussian elimination."""
    work = [[int(v) % q for v in row] for row in rows]
    if not work:
        return 0
    ncols = len(work[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(work)) if work[r][col]), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        inv = pow(work[rank][col], -1, q)
        work[rank] = [(v * inv) % q for v in work[rank]]
        for r in range(len(work)):
            if r != rank and work[r][col]:
                factor = work[r][col]
                work[r] = [(a - factor * b) % q for a, b in zip(work[r], work[rank])]
        rank += 1
        if rank == len(work):
            break
    return rank


class Source:
    """Base class: a memoized entropy oracle over subsets of users.

    Instances are read-only after construction and safe to query from
    multiple threads (cache writes are idempotent).
    """

    is_exact: bool = True

    def __init__(self, users: Iterable[int]):
        self.users = _check_users(users)
        self._ground = frozenset(self.users)
        self._cache: dict[frozenset, Fraction | float] = {}

    @property
    def ground(self) -> frozenset:
        return self._ground

    @property
    def tol(self):
        """Comparison tolerance for values derived from this source.

        Exactly integer zero for exact sources: adding a float 0.0 to a
        Fraction would silently degrade downstream comparisons to floats.
        """
        return 0 if self.is_exact else FLOAT_TOL

    def subset(self, X: Iterable[int]) -> frozenset:
        X = frozenset(X)
        unknown = X - self._ground
        if unknown:
            raise ValueError(f"unknown user ids: {sorted(unknown)}")
        return X

    def entropy(self, X: Iterable[int]) -> Fraction | float:
        """Joint entropy H(X); H of the empty set is zero."""
        X = self.subset(X)
        if not X:
            return Fraction(0) if self.is_exact else 0.0
        cached = self._cache.get(X)
        if cached is None:
            cached = self._cache.setdefault(X, self._entropy(X))
        return cached

    def conditional_entropy(self, X: Iterable[int], Y: Iterable[int]) -> Fraction | float:
        """H(X | Y) = H(X ∪ Y) - H(Y) for disjoint X and Y."""
        X, Y = self.subset(X), self.subset(Y)
        if X & Y:
            raise ValueError(f"conditional entropy needs disjoint sets, got overlap {sorted(X & Y)}")
        return self.entropy(X | Y) - self.entropy(Y)

    def _entropy(self, X: frozenset) -> Fraction | float:
        raise NotImplementedError


class LinearSource(Source):
    """Finite linear source over a prime field.

    In packet form each user holds a subset of independent packets and
    H(X) is the number of distinct packets held by X.  In vector form each
    user holds coefficient vectors over GF(q) and H(X) is the rank of the
    stacked vectors.  Either way the unit is one field symbol.
    """

    is_exact = True

    def __init__(self, users, field: int, universe: tuple, packets, vectors):
        super().__init__(users)
        if not _is_prime(field):
            raise SourceSpecError(f"field size must be prime, got {field}")
        self.field = field
        self.universe = universe
        self._packets = packets
        self._vectors = vectors

    @classmethod
    def from_packets(
        cls,
        holdings: Mapping[int, Iterable],
        field: int = 2,
        universe: Iterable | None = None,
    ) -> "LinearSource":
        """Build a packet-form source from per-user packet id collections."""
        users = _check_users(holdings.keys())
        packets = {u: frozenset(holdings[u]) for u in users}
        held = frozenset().union(*packets.values()) if packets else frozenset()
        if universe is None:
            universe_set = held
        else:
            universe_set = frozenset(universe)
            stray = held - universe_set
            if stray:
                raise SourceSpecError(f"packets outside the declared universe: {sorted(map(str, stray))}")
        return cls(users, field, tuple(sorted(universe_set, key=str)), packets, None)

    @classmethod
    def from_vectors(
        cls,
        holdings: Mapping[int, Sequence[Sequence[int]]],
        field: int,
    ) -> "LinearSource":
        """Build a vector-form source from per-user lists of coefficient vectors."""
        users = _check_users(holdings.keys())
        lengths = {len(v) for rows in holdings.values() for v in rows}
        if len(lengths) > 1:
            raise SourceSpecError(f"coefficient vectors have mixed lengths {sorted(lengths)}")
        width = lengths.pop() if lengths else 0
        vectors = {u: tuple(tuple(int(c) for c in v) for v in holdings[u]) for u in users}
        return cls(users, field, tuple(range(width)), packets=None, vectors=vectors)

    def _entropy(self, X: frozenset) -> Fraction:
        if self._packets is not None:
            return Fraction(len(frozenset().union(*(self._packets[u] for u in X))))
        rows = [v for u in sorted(X) for v in self._vectors[u]]
        return Fraction(gf_rank(rows, self.field))


class PmfSource(Source):
    """Discrete source given by a joint pmf over per-user finite alphabets.

    The table axes follow the sorted user order; entropies are floats in bits.
    """

    is_exact = False

    def __init__(self, alphabets: Mapping[int, Sequence], table):
        super().__init__(alphabets.keys())
        self.alphabets = {u: tuple(alphabets[u]) for u in self.users}
        arr = np.asarray(table, dtype=float)
        shape = tuple(len(self.alphabets[u]) for u in self.users)
        if arr.shape != shape:
            raise SourceSpecError(f"pmf table has shape {arr.shape}, alphabets imply {shape}")
        if (arr < 0).any():
            raise SourceSpecError("pmf table has negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > PMF_NORMALIZATION_TOL:
            raise SourceSpecError(f"pmf table sums to {total!r}, expected 1")
        self._table = arr

    def _entropy(self, X: frozenset) -> float:
        drop = tuple(axis for axis, u in enumerate(self.users) if u not in X)
        marginal = self._table.sum(axis=drop) if drop else self._table
        p = marginal.ravel()
        p = p[p > 0]
        return float(-(p * np.log2(p)).sum())


def _parse_user_key(key) -> int:
    try:
        return int(key)
    except (TypeError, ValueError):
        raise SourceSpecError(f"user id {key!r} is not an integer") from None


def load_source(spec: Mapping | str | Path) -> Source:
    """Parse a JSON source spec (a mapping, a JSON string, or a file path).

    Linear form::

        {"model": "linear", "field": 2, "packets": ["a", ..., "j"],
         "users": {"1": ["b", "c", "d", "h", "i"], ...}}

    where each user entry is either a list of packet ids or a list of
    coefficient vectors over GF(field).  Pmf form::

        {"model": "pmf", "alphabets": {"1": [0, 1], ...}, "table": [...]}

    with the nested table axes ordered by sorted user id.
    """
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        if path.exists():
            text = path.read_text()
        elif isinstance(spec, str) and spec.lstrip().startswith("{"):
            text = spec
        else:
            raise SourceSpecError(f"no such source file: {spec}")
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SourceSpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(spec, Mapping):
        raise SourceSpecError("source spec must be a JSON object")

    model = spec.get("model")
    if model == "linear":
        users_raw = spec.get("users")
        if not isinstance(users_raw, Mapping) or not users_raw:
            raise SourceSpecError("linear spec needs a nonempty 'users' mapping")
        field = spec.get("field", 2)
        if not isinstance(field, int):
            raise SourceSpecError(f"field size must be an integer, got {field!r}")
        holdings = {_parse_user_key(k): v for k, v in users_raw.items()}
        vector_form = any(
            rows and isinstance(rows[0], (list, tuple)) for rows in holdings.values()
        )
        try:
            if vector_form:
                return LinearSource.from_vectors(holdings, field=field)
            universe = spec.get("packets")
            return LinearSource.from_packets(holdings, field=field, universe=universe)
        except SourceSpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SourceSpecError(str(exc)) from exc
    if model == "pmf":
        alphabets_raw = spec.get("alphabets")
        table = spec.get("table")
        if not isinstance(alphabets_raw, Mapping) or table is None:
            raise SourceSpecError("pmf spec needs 'alphabets' and 'table'")
        alphabets = {_parse_user_key(k): v for k, v in alphabets_raw.items()}
        try:
            return PmfSource(alphabets, table)
        except SourceSpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SourceSpecError(str(exc)) from exc
    raise SourceSpecError(f"unknown source model: {model!r}")
