"""Trace observations and the trace distance lower bound.

A trace is a finite word of actions played against a program: `app V`
feeds the value V to an abstraction, `tensor L` destructures a pair
through the two-hole context L (free variables x and y). The probability
of a trace is the chance the program survives every action; distances
compare these probabilities pointwise.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .dist import EMPTY, Dist, dirac
from .errors import NotAffine, NotClosed, ParseError
from .parser import parse
from .semantics import _eval, _require_program, _step
from .terms import (
    Abs,
    App,
    Pair,
    Term,
    Var,
    affine_violation,
    encode_theta,
    fresh,
    identity,
    is_value,
    pretty,
    rename_free,
    size,
    substitute,
)

_ZERO = Fraction(0)
_ONE = Fraction(1)

TENSOR_HOLE_1 = "x"
TENSOR_HOLE_2 = "y"


@dataclass(frozen=True)
class AppAction:
    value: Term


@dataclass(frozen=True)
class TensorAction:
    body: Term  # free variables among {x, y}


Trace = tuple


def _check_app_value(v: Term) -> None:
    if not is_value(v):
        raise ValueError(f"app action argument is not a value: {pretty(v)}")
    if v.free_vars:
        raise NotClosed(f"app action argument is open: {pretty(v)}")
    reason = affine_violation((), v)
    if reason is not None:
        raise NotAffine(reason)


def _check_tensor_body(body: Term) -> None:
    extra = body.free_vars - {TENSOR_HOLE_1, TENSOR_HOLE_2}
    if extra:
        raise NotClosed(
            f"tensor body may only mention x and y, found '{min(extra)}'"
        )
    reason = affine_violation((TENSOR_HOLE_1, TENSOR_HOLE_2), body)
    if reason is not None:
        raise NotAffine(reason)


def check_trace(s: Sequence) -> None:
    for a in s:
        if isinstance(a, AppAction):
            _check_app_value(a.value)
        elif isinstance(a, TensorAction):
            _check_tensor_body(a.body)
        else:
            raise TypeError(f"not a trace action: {a!r}")


def trace_accept(m: Term, s: Sequence) -> Fraction:
    """Probability that program m passes every action of s in order."""
    _require_program(m)
    check_trace(s)
    return _accept(m, tuple(s))


def _accept(t: Term, s: tuple) -> Fraction:
    if not is_value(t):
        return sum((p * _accept(v, s) for v, p in _eval(t).items()), _ZERO)
    if not s:
        return _ONE
    a, rest = s[0], s[1:]
    if isinstance(t, Abs) and isinstance(a, AppAction):
        return _accept(substitute(t.body, t.var, a.value), rest)
    if isinstance(t, Pair) and isinstance(a, TensorAction):
        total = _ZERO
        for v, p in _eval(t.first).items():
            for w, q in _eval(t.second).items():
                inst = substitute(
                    substitute(a.body, TENSOR_HOLE_1, v), TENSOR_HOLE_2, w
                )
                total += p * q * _accept(inst, rest)
        return total
    return _ZERO  # action kind does not match the value shape


def reduce_to_values(d: Dist[Term]) -> Dist[Term]:
    """Close a program distribution under internal reduction."""
    while any(not is_value(e) for e in d.support()):
        d = d.bind(lambda e: dirac(e) if is_value(e) else _step(e))
    return d


def lts_trace_accept(d: Dist[Term], s: Sequence) -> Fraction:
    """Trace probability computed on the transition system over program
    distributions: silently reduce, fire the action on every abstraction,
    repeat. Only app actions are meaningful at this level."""
    for e in d.support():
        _require_program(e)
    check_trace(s)
    for a in s:
        if not isinstance(a, AppAction):
            raise ValueError("the distribution transition system handles app actions only")
        d = reduce_to_values(d)
        v = a.value
        d = d.bind(
            lambda t: dirac(substitute(t.body, t.var, v))
            if isinstance(t, Abs)
            else EMPTY
        )
    return reduce_to_values(d).weight()


def dedupe_values(values: Iterable[Term]) -> tuple[Term, ...]:
    """Drop alpha-duplicates, keeping first occurrences in order."""
    seen = set()
    out = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return tuple(out)


def enumerate_traces(
    universe: Iterable[Term],
    max_len: int,
    tensor_templates: Sequence[Term] = (),
) -> Iterator[Trace]:
    """All traces over the given actions in length-lexicographic order."""
    actions = [AppAction(v) for v in dedupe_values(universe)]
    actions += [TensorAction(b) for b in tensor_templates]
    for n in range(max_len + 1):
        yield from itertools.product(actions, repeat=n)


def trace_distance_lb(
    m: Term,
    n: Term,
    universe: Iterable[Term],
    max_len: int,
    tensor_templates: Sequence[Term] = (),
) -> tuple[Fraction, Trace]:
    """Largest trace-probability gap over the enumerated traces, with the
    first trace attaining it. A lower bound on the full trace distance."""
    best: Optional[Fraction] = None
    witness: Trace = ()
    for s in enumerate_traces(universe, max_len, tensor_templates):
        delta = abs(trace_accept(m, s) - trace_accept(n, s))
        if best is None or delta > best:
            best, witness = delta, s
    if best is None:
        best = _ZERO
    return best, witness


def app_combinations(
    linear_atoms: Sequence[Term],
    repeat_atoms: Sequence[Term],
    size_cap: int,
) -> list[Term]:
    """All application trees over the atoms with total size <= size_cap.

    Linear atoms may each occur at most once per tree; repeat atoms are
    unrestricted. Deterministic order, alpha-deduplicated.
    """
    atoms = [(t, frozenset([i]), size(t)) for i, t in enumerate(linear_atoms)]
    atoms += [(t, frozenset(), size(t)) for t in repeat_atoms]

    def build(cap: int, used: frozenset) -> Iterator[tuple[Term, frozenset, int]]:
        for t, mask, sz in atoms:
            if sz <= cap and not (mask & used):
                yield t, used | mask, sz
        if cap >= 2:  # an application needs two operands of size >= 1
            for lt, lu, ls in build(cap - 1, used):
                for rt, ru, rs in build(cap - ls, lu):
                    yield App(lt, rt), ru, ls + rs

    seen = set()
    out = []
    for t, _, _ in build(size_cap, frozenset()):
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def default_tensor_templates(
    universe: Sequence[Term] = (), size_cap: int = 6
) -> tuple[Term, ...]:
    """Two-hole contexts for pair observations: let-free applicative
    combinations of x, y, and the universe values, up to the size cap."""
    consts = dedupe_values(universe) if universe else (identity(),)
    return tuple(
        app_combinations([Var(TENSOR_HOLE_1), Var(TENSOR_HOLE_2)], consts, size_cap)
    )


def encode_theta_trace(s: Sequence) -> Trace:
    """Translate a pairs-mode trace to act on theta-encoded programs.

    Values inside app actions are encoded too, so pair-containing arguments
    stay meaningful; a tensor context becomes the curried consumer the
    encoded pair is waiting for.
    """
    out = []
    for a in s:
        if isinstance(a, AppAction):
            out.append(AppAction(encode_theta(a.value)))
        elif isinstance(a, TensorAction):
            body = encode_theta(a.body)
            nx, ny = fresh(TENSOR_HOLE_1), fresh(TENSOR_HOLE_2)
            body = rename_free(body, {TENSOR_HOLE_1: nx, TENSOR_HOLE_2: ny})
            out.append(AppAction(Abs(nx, Abs(ny, body))))
        else:
            raise TypeError(f"not a trace action: {a!r}")
    return tuple(out)


def format_trace(s: Sequence) -> str:
    if not s:
        return "eps"
    parts = []
    for a in s:
        if isinstance(a, AppAction):
            parts.append(f"app({pretty(a.value)})")
        else:
            parts.append(f"tensor({pretty(a.body)})")
    return "; ".join(parts)


_ITEM_RE = re.compile(r"(app|tensor)\((.*)\)\s*", re.S)


def parse_trace(text: str) -> Trace:
    """Inverse of format_trace; raises ParseError on malformed input."""
    if text.strip() == "eps":
        return ()
    out = []
    offset = 0
    for chunk in text.split(";"):
        stripped = chunk.strip()
        pos = offset + chunk.index(stripped[0]) if stripped else offset
        m = _ITEM_RE.fullmatch(stripped)
        if m is None:
            raise ParseError("expected app(term) or tensor(term)", pos)
        t = parse(m.group(2))
        if m.group(1) == "app":
            _check_app_value(t)
            out.append(AppAction(t))
        else:
            _check_tensor_body(t)
            out.append(TensorAction(t))
        offset += len(chunk) + 1
    return tuple(out)
