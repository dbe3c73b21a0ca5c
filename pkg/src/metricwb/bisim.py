"""Bisimulation metric over the labelled Markov chain of programs.

States alternate between programs (which can only be evaluated) and
distinguished values (which can only be interrogated: applied to a
universe value, or destructured through a tensor context). The metric
functional takes, for each pair of states, the largest lifted distance
over the actions available to both; iterating it from the zero metric
climbs to the least fixpoint, the bisimulation distance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .dist import Dist, dirac
from .errors import BudgetExceeded, NonConvergence
from .kantorovich import PseudoMetric, lift_primal
from .semantics import _require_program, eval_big
from .terms import Abs, Pair, Term, substitute
from .trace import TENSOR_HOLE_1, TENSOR_HOLE_2, _check_tensor_body, dedupe_values

_ZERO = Fraction(0)
_ONE = Fraction(1)

EVAL_LABEL = ("eval",)


@dataclass(frozen=True)
class LmcState:
    kind: str  # "prog" or "dval"
    term: Term

    def __repr__(self):
        return f"{self.kind}({self.term})"


def prog(t: Term) -> LmcState:
    return LmcState("prog", t)


def dval(t: Term) -> LmcState:
    return LmcState("dval", t)


@dataclass
class LmcFragment:
    states: list[LmcState]
    trans: dict[tuple[LmcState, tuple], Dist[LmcState]]
    labels: dict[LmcState, tuple[tuple, ...]]
    universe: tuple[Term, ...]
    max_depth: int

    def successors(self, s: LmcState, label: tuple) -> Dist[LmcState]:
        return self.trans[(s, label)]


def build_lmc(
    m: Term,
    n: Term,
    universe: Sequence[Term],
    max_depth: int,
    state_cap: int = 10000,
    tensor_templates: Sequence[Term] = (),
) -> LmcFragment:
    """Fragment reachable from programs m and n.

    Every program state is closed under evaluation; value states are
    interrogated only up to max_depth rounds of interaction, so the
    frontier values carry no outgoing labels.
    """
    universe = dedupe_values(universe)
    for v in universe:
        _require_program(v)
    for body in tensor_templates:
        _check_tensor_body(body)
    _require_program(m)
    _require_program(n)

    states: list[LmcState] = []
    depth: dict[LmcState, int] = {}
    trans: dict[tuple[LmcState, tuple], Dist[LmcState]] = {}
    labels: dict[LmcState, tuple[tuple, ...]] = {}
    queue: deque[LmcState] = deque()

    def discover(s: LmcState, d: int) -> None:
        # Re-enqueue on a shallower rediscovery: depth gates how far value
        # states are interrogated, so it must be the minimum over all paths.
        if s not in depth:
            if len(states) >= state_cap:
                raise BudgetExceeded(f"state cap {state_cap} exceeded")
            depth[s] = d
            states.append(s)
            queue.append(s)
        elif d < depth[s]:
            depth[s] = d
            queue.append(s)

    discover(prog(m), 0)
    discover(prog(n), 0)

    while queue:
        s = queue.popleft()
        d = depth[s]
        out: list[tuple] = []
        if s.kind == "prog":
            succ = eval_big(s.term).map_elems(dval)
            for t in succ.support():
                discover(t, d)
            trans[(s, EVAL_LABEL)] = succ
            out.append(EVAL_LABEL)
        elif d < max_depth:
            if isinstance(s.term, Abs):
                for v in universe:
                    label = ("app", v)
                    succ = dirac(prog(substitute(s.term.body, s.term.var, v)))
                    for t in succ.support():
                        discover(t, d + 1)
                    trans[(s, label)] = succ
                    out.append(label)
            elif isinstance(s.term, Pair) and tensor_templates:
                d1 = eval_big(s.term.first)
                d2 = eval_big(s.term.second)
                for body in tensor_templates:
                    label = ("tensor", body)
                    parts = []
                    for v, p in d1.items():
                        for w, q in d2.items():
                            inst = substitute(
                                substitute(body, TENSOR_HOLE_1, v),
                                TENSOR_HOLE_2,
                                w,
                            )
                            parts.append((prog(inst), p * q))
                    succ = Dist(parts)
                    for t in succ.support():
                        discover(t, d + 1)
                    trans[(s, label)] = succ
                    out.append(label)
        labels[s] = tuple(out)

    return LmcFragment(states, trans, labels, universe, max_depth)


def _lifted(mu: PseudoMetric, ds: Dist, dt: Dist) -> Fraction:
    # Dirac successors dominate in practice; the lifting of two point masses
    # is just the ground distance, so skip the LP there.
    if len(ds) == 1 and len(dt) == 1 and ds.weight() == 1 and dt.weight() == 1:
        (a,), (b,) = ds.support(), dt.support()
        return mu.get(a, b)
    value, _ = lift_primal(mu, ds, dt)
    return value


def apply_F(frag: LmcFragment, mu: PseudoMetric) -> PseudoMetric:
    """One step of the metric functional: for each state pair, the largest
    lifted distance over the labels both states answer to. Pairs with no
    common label (in particular program vs value) are at distance zero."""
    out = PseudoMetric.zero(frag.states)
    for i, s in enumerate(frag.states):
        s_labels = frag.labels[s]
        for t in frag.states[i + 1 :]:
            t_labels = set(frag.labels[t])
            best = _ZERO
            for label in s_labels:
                if label not in t_labels:
                    continue
                v = _lifted(mu, frag.trans[(s, label)], frag.trans[(t, label)])
                if v > best:
                    best = v
                    if best == _ONE:
                        break
            out.set(s, t, best)
    return out


def bisim_metric(
    frag: LmcFragment, iteration_cap: int = 256
) -> PseudoMetric:
    """Least fixpoint of the metric functional, by exact iteration from the
    zero metric. Raises NonConvergence if it has not stabilised in time."""
    mu = PseudoMetric.zero(frag.states)
    for _ in range(iteration_cap):
        nxt = apply_F(frag, mu)
        if nxt == mu:
            return mu
        if not mu.pointwise_le(nxt):
            raise AssertionError("metric iteration must be monotone")
        mu = nxt
    raise NonConvergence(f"no fixpoint after {iteration_cap} iterations")


def bisim_distance(
    m: Term,
    n: Term,
    universe: Sequence[Term],
    max_depth: int,
    state_cap: int = 10000,
    iteration_cap: int = 256,
    tensor_templates: Sequence[Term] = (),
) -> Fraction:
    """Bisimulation distance between programs m and n on the fragment
    reachable within max_depth interaction rounds."""
    frag = build_lmc(
        m,
        n,
        universe,
        max_depth,
        state_cap=state_cap,
        tensor_templates=tensor_templates,
    )
    mu = bisim_metric(frag, iteration_cap=iteration_cap)
    return mu.get(prog(m), prog(n))
