"""Finite subdistributions with exact rational weights."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Generic, Hashable, Iterable, Iterator, Tuple, TypeVar

from .errors import CoefficientOverflow

Rational = Fraction
T = TypeVar("T", bound=Hashable)
U = TypeVar("U", bound=Hashable)

_ZERO = Fraction(0)
_ONE = Fraction(1)


class Dist(Generic[T]):
    """Immutable finite map from elements to positive weights, total <= 1.

    Zero-weight entries are pruned on construction; equal elements (for
    terms: alpha-equal) are merged.
    """

    __slots__ = ("_items", "_weight", "_hash")

    def __init__(self, items: "Iterable[tuple[T, Rational]] | dict[T, Rational]" = ()):
        if isinstance(items, dict):
            items = items.items()
        acc: dict[T, Fraction] = {}
        for elem, p in items:
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative weight {p} for {elem!r}")
            if p == 0:
                continue
            acc[elem] = acc.get(elem, _ZERO) + p
        total = sum(acc.values(), _ZERO)
        if total > 1:
            raise CoefficientOverflow(f"total mass {total} exceeds 1")
        self._items = acc
        self._weight = total
        self._hash: "int | None" = None

    def weight(self) -> Rational:
        return self._weight

    def support(self) -> Tuple[T, ...]:
        return tuple(self._items)

    def items(self) -> Iterator[tuple[T, Rational]]:
        return iter(self._items.items())

    def get(self, elem: T) -> Rational:
        return self._items.get(elem, _ZERO)

    def __contains__(self, elem) -> bool:
        return elem in self._items

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __eq__(self, other):
        if not isinstance(other, Dist):
            return NotImplemented
        return self._items == other._items

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash(frozenset(self._items.items()))
        return h

    def __repr__(self):
        body = ", ".join(f"{e!r}: {p}" for e, p in self._items.items())
        return f"Dist({{{body}}})"

    def scale(self, c: Rational) -> "Dist[T]":
        c = Fraction(c)
        return Dist((e, c * p) for e, p in self._items.items())

    def map_elems(self, f: Callable[[T], U]) -> "Dist[U]":
        """Pushforward along f; colliding images are merged."""
        return Dist((f(e), p) for e, p in self._items.items())

    def bind(self, k: "Callable[[T], Dist[U]]") -> "Dist[U]":
        """Monadic bind: run k on every support element, weight and sum."""
        acc: dict[U, Fraction] = {}
        for e, p in self._items.items():
            for e2, q in k(e).items():
                acc[e2] = acc.get(e2, _ZERO) + p * q
        return Dist(acc)

    def to_json(self, pretty_elem: Callable[[T], str] = str) -> dict:
        entries = sorted(
            ((pretty_elem(e), p) for e, p in self._items.items()),
            key=lambda ep: ep[0],
        )
        return {
            "support": [{"elem": e, "p": frac_str(p)} for e, p in entries],
            "weight": frac_str(self._weight),
        }


def frac_str(p: Rational) -> str:
    return f"{p.numerator}/{p.denominator}"


def dirac(elem: T) -> Dist[T]:
    return Dist(((elem, _ONE),))


def mix(weighted: Iterable[tuple[Rational, Dist[T]]]) -> Dist[T]:
    """Convex combination sum(c_i * d_i); raises CoefficientOverflow if the
    coefficients sum past 1."""
    acc: dict[T, Fraction] = {}
    total_c = _ZERO
    for c, d in weighted:
        c = Fraction(c)
        if c < 0:
            raise ValueError(f"negative mixing coefficient {c}")
        total_c += c
        if total_c > 1:
            raise CoefficientOverflow(f"mixing coefficients total {total_c}")
        for e, p in d.items():
            acc[e] = acc.get(e, _ZERO) + c * p
    return Dist(acc)


EMPTY: Dist = Dist()


def weight(d: Dist[T]) -> Rational:
    return d.weight()
