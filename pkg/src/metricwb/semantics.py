"""Operational semantics: big-step evaluation, one-step reduction, and the
lifted small-step relation on distributions.

Evaluation is call-by-value and probabilistic choice is fair. A stuck
redex (a pair applied as a function, or an abstraction destructured as a
pair) contributes no mass; it is logged, not raised, because such programs
are only ruled out by the optional type discipline.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Iterator

from .dist import EMPTY, Dist, dirac, mix
from .errors import IsValue, NotAffine, NotClosed
from .terms import (
    Abs,
    App,
    Choice,
    LetPair,
    Omega,
    Pair,
    Term,
    Var,
    affine_violation,
    is_value,
    size,
    substitute,
)

logger = logging.getLogger("metricwb")

_HALF = Fraction(1, 2)

_memo: dict[Term, Dist[Term]] = {}


def clear_memo() -> None:
    _memo.clear()


def _require_program(t: Term) -> None:
    if t.free_vars:
        raise NotClosed(f"free variables remain: {', '.join(sorted(t.free_vars))}")
    reason = affine_violation((), t)
    if reason is not None:
        raise NotAffine(reason)


def eval_big(t: Term) -> Dist[Term]:
    """Value distribution of a closed affine program.

    The total weight is the probability of convergence; mass lost to
    divergence or stuck redexes simply disappears.
    """
    _require_program(t)
    return _eval(t)


def _eval(t: Term) -> Dist[Term]:
    if is_value(t):
        return dirac(t)
    d = _memo.get(t)
    if d is not None:
        return d
    match t:
        case Omega():
            d = EMPTY
        case Choice(l, r):
            d = mix(((_HALF, _eval(l)), (_HALF, _eval(r))))
        case App(f, a):
            df, da = _eval(f), _eval(a)
            parts = []
            for fv, p in df.items():
                if isinstance(fv, Abs):
                    for av, q in da.items():
                        parts.append((p * q, _eval(substitute(fv.body, fv.var, av))))
                else:
                    logger.warning("discarding stuck application of a pair")
            d = mix(parts)
        case LetPair(x, y, m, b):
            parts = []
            for mv, p in _eval(m).items():
                if isinstance(mv, Pair):
                    d1, d2 = _eval(mv.first), _eval(mv.second)
                    for v1, q1 in d1.items():
                        for v2, q2 in d2.items():
                            inst = substitute(substitute(b, x, v1), y, v2)
                            parts.append((p * q1 * q2, _eval(inst)))
                else:
                    logger.warning("discarding stuck let on an abstraction")
            d = mix(parts)
        case Var(name):
            raise NotClosed(f"free variable '{name}' reached evaluation")
        case _:
            raise TypeError(f"not a term: {t!r}")
    _memo[t] = d
    return d


def step_one(t: Term) -> Dist[Term]:
    """One reduction step of a closed program. Values raise IsValue; a term
    with no successor (omega, stuck redexes) steps to the empty distribution.
    """
    _require_program(t)
    if is_value(t):
        raise IsValue(f"cannot step a value: {t}")
    return _step(t)


def _step(t: Term) -> Dist[Term]:
    match t:
        case Omega():
            return EMPTY
        case Choice(l, r):
            return Dist(((l, _HALF), (r, _HALF)))
        case App(f, a):
            if not is_value(f):
                return _step(f).map_elems(lambda g: App(g, a))
            if not is_value(a):
                return _step(a).map_elems(lambda b: App(f, b))
            if isinstance(f, Abs):
                return dirac(substitute(f.body, f.var, a))
            return EMPTY  # pair in function position
        case LetPair(x, y, m, b):
            if not is_value(m):
                return _step(m).map_elems(lambda m2: LetPair(x, y, m2, b))
            if isinstance(m, Pair):
                v1, v2 = m.first, m.second
                if not is_value(v1):
                    return _step(v1).map_elems(
                        lambda w: LetPair(x, y, Pair(w, v2), b)
                    )
                if not is_value(v2):
                    return _step(v2).map_elems(
                        lambda w: LetPair(x, y, Pair(v1, w), b)
                    )
                return dirac(substitute(substitute(b, x, v1), y, v2))
            return EMPTY  # abstraction scrutinised as a pair
        case Var(name):
            raise NotClosed(f"free variable '{name}' reached reduction")
        case _:
            raise TypeError(f"cannot step: {t!r}")


def support_measure(d: Dist[Term]) -> int:
    """Sum of 3^size over the support; strictly decreases per lifted step."""
    return sum(3 ** size(e) for e in d.support())


def step_count_bound(t: Term) -> int:
    """Upper bound on the number of lifted steps needed to evaluate t."""
    return 3 ** size(t)


def small_step_rounds(t: Term) -> Iterator[Dist[Term]]:
    """Yield the distribution after each lifted step, reducing every
    non-value support element simultaneously, until only values remain."""
    _require_program(t)
    d = dirac(t)
    bound = step_count_bound(t)
    steps = 0
    while any(not is_value(e) for e in d.support()):
        before = support_measure(d)
        d = mix(
            (p, dirac(e) if is_value(e) else _step(e)) for e, p in d.items()
        )
        steps += 1
        after = support_measure(d)
        if after >= before:
            raise AssertionError(f"measure failed to decrease: {before} -> {after}")
        if steps > bound:
            raise AssertionError(f"exceeded step bound {bound}")
        yield d


def eval_small(t: Term) -> Dist[Term]:
    """Iterate the lifted small-step relation to the value distribution.

    Agrees with eval_big on every closed affine program.
    """
    d = dirac(t)
    for d in small_step_rounds(t):
        pass
    return d
