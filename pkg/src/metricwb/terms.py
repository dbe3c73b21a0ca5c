"""Abstract syntax for the affine probabilistic lambda-calculus.

Terms are immutable. Equality and hashing are alpha-equivalence, computed
through interned de-Bruijn skeletons so that both are O(1) after the first
use of a node. Subterm sharing is preserved everywhere (substitution copies
only the path it rewrites), which keeps the deeply nested example families
tractable even though their fully expanded trees are astronomically large.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional

_fresh_counter = itertools.count(1)


def fresh(base: str = "x") -> str:
    """Return a globally fresh variable name.

    The '%' marker cannot occur in a source identifier, so fresh names never
    collide with parsed free variables. The pretty-printer strips the marker
    again when choosing display names.
    """
    base = base.split("%", 1)[0] or "x"
    return f"{base}%{next(_fresh_counter)}"


# Interned alpha-skeletons: every distinct skeleton shape gets an integer id,
# so alpha-equality of two terms is an integer comparison.
_skel_table: dict[tuple, int] = {}


def _intern(key: tuple) -> int:
    sid = _skel_table.get(key)
    if sid is None:
        sid = len(_skel_table)
        _skel_table[key] = sid
    return sid


class _Conflict:
    """Marks an affinity violation found while collecting variable uses."""

    __slots__ = ("message",)

    def __init__(self, message: str):
        self.message = message


class Term:
    __slots__ = ("free_vars", "_skel", "_size", "_uses", "_binders", "_rebind")

    def __init__(self):
        self._skel: Optional[int] = None
        self._size: Optional[int] = None
        self._uses: "frozenset[str] | _Conflict | None" = None
        self._binders: Optional[frozenset] = None
        self._rebind: Optional[bool] = None

    def _skel_id(self, binders: tuple[str, ...] = ()) -> int:
        # A skeleton computed under binders the term never mentions equals
        # the binder-free one, so it can be cached on the node.
        if not binders or self.free_vars.isdisjoint(binders):
            sid = self._skel
            if sid is None:
                sid = self._compute_skel(())
                self._skel = sid
            return sid
        return self._compute_skel(binders)

    def _compute_skel(self, binders: tuple[str, ...]) -> int:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        return self._skel_id() == other._skel_id()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        return hash(self._skel_id())

    def __str__(self):
        return pretty(self)


class Var(Term):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        self.name = name
        self.free_vars = frozenset((name,))

    def _compute_skel(self, binders):
        try:
            return _intern(("V", binders.index(self.name)))
        except ValueError:
            return _intern(("F", self.name))

    def __repr__(self):
        return f"Var({self.name!r})"


class Abs(Term):
    __slots__ = ("var", "body")
    __match_args__ = ("var", "body")

    def __init__(self, var: str, body: Term):
        super().__init__()
        self.var = var
        self.body = body
        self.free_vars = body.free_vars - {var}

    def _compute_skel(self, binders):
        return _intern(("L", self.body._skel_id((self.var,) + binders)))

    def __repr__(self):
        return f"Abs({self.var!r}, {self.body!r})"


class App(Term):
    __slots__ = ("fn", "arg")
    __match_args__ = ("fn", "arg")

    def __init__(self, fn: Term, arg: Term):
        super().__init__()
        self.fn = fn
        self.arg = arg
        self.free_vars = fn.free_vars | arg.free_vars

    def _compute_skel(self, binders):
        return _intern(("A", self.fn._skel_id(binders), self.arg._skel_id(binders)))

    def __repr__(self):
        return f"App({self.fn!r}, {self.arg!r})"


class Choice(Term):
    __slots__ = ("left", "right")
    __match_args__ = ("left", "right")

    def __init__(self, left: Term, right: Term):
        super().__init__()
        self.left = left
        self.right = right
        self.free_vars = left.free_vars | right.free_vars

    def _compute_skel(self, binders):
        return _intern(("C", self.left._skel_id(binders), self.right._skel_id(binders)))

    def __repr__(self):
        return f"Choice({self.left!r}, {self.right!r})"


class Omega(Term):
    __slots__ = ()
    __match_args__ = ()

    def __init__(self):
        super().__init__()
        self.free_vars = frozenset()

    def _compute_skel(self, binders):
        return _intern(("O",))

    def __repr__(self):
        return "Omega()"


OMEGA = Omega()


class Pair(Term):
    __slots__ = ("first", "second")
    __match_args__ = ("first", "second")

    def __init__(self, first: Term, second: Term):
        super().__init__()
        self.first = first
        self.second = second
        self.free_vars = first.free_vars | second.free_vars

    def _compute_skel(self, binders):
        return _intern(("P", self.first._skel_id(binders), self.second._skel_id(binders)))

    def __repr__(self):
        return f"Pair({self.first!r}, {self.second!r})"


class LetPair(Term):
    __slots__ = ("var1", "var2", "scrutinee", "body")
    __match_args__ = ("var1", "var2", "scrutinee", "body")

    def __init__(self, var1: str, var2: str, scrutinee: Term, body: Term):
        super().__init__()
        if var1 == var2:
            raise ValueError("pair pattern variables must be distinct")
        self.var1 = var1
        self.var2 = var2
        self.scrutinee = scrutinee
        self.body = body
        self.free_vars = scrutinee.free_vars | (body.free_vars - {var1, var2})

    def _compute_skel(self, binders):
        inner = (self.var1, self.var2) + binders
        return _intern(
            ("Q", self.scrutinee._skel_id(binders), self.body._skel_id(inner))
        )

    def __repr__(self):
        return (
            f"LetPair({self.var1!r}, {self.var2!r}, "
            f"{self.scrutinee!r}, {self.body!r})"
        )


def identity() -> Abs:
    """The identity combinator, written I in the surface syntax."""
    x = fresh("x")
    return Abs(x, Var(x))


def is_value(t: Term) -> bool:
    """Abstractions and pairs are values; pair components stay unevaluated
    until a let destructures them."""
    return isinstance(t, (Abs, Pair))


def size(t: Term) -> int:
    """Size measure driving the termination bound.

    Omega counts 0 and choice takes the max of its branches, so the measure
    shrinks strictly under every reduction rule.
    """
    s = t._size
    if s is not None:
        return s
    match t:
        case Omega():
            s = 0
        case Var(_):
            s = 1
        case Abs(_, b):
            s = 1 + size(b)
        case App(f, a):
            s = size(f) + size(a)
        case Choice(l, r):
            s = 1 + max(size(l), size(r))
        case Pair(a, b):
            s = 1 + size(a) + size(b)
        case LetPair(_, _, m, b):
            s = 2 + size(m) + size(b)
        case _:
            raise TypeError(f"not a term: {t!r}")
    t._size = s
    return s


def _collect_uses(t: Term) -> "frozenset[str] | _Conflict":
    """Free variables used by t, or a conflict if some variable is consumed
    twice. Choice branches may share (only one runs); everything else splits."""
    u = t._uses
    if u is not None:
        return u
    match t:
        case Var(name):
            u = frozenset((name,))
        case Omega():
            u = frozenset()
        case Abs(x, b):
            ub = _collect_uses(b)
            u = ub if isinstance(ub, _Conflict) else ub - {x}
        case App(f, a):
            u = _merge_disjoint(_collect_uses(f), _collect_uses(a), "an application")
        case Choice(l, r):
            ul, ur = _collect_uses(l), _collect_uses(r)
            if isinstance(ul, _Conflict):
                u = ul
            elif isinstance(ur, _Conflict):
                u = ur
            else:
                u = ul | ur
        case Pair(a, b):
            u = _merge_disjoint(_collect_uses(a), _collect_uses(b), "a pair")
        case LetPair(x, y, m, b):
            ub = _collect_uses(b)
            if not isinstance(ub, _Conflict):
                ub = ub - {x, y}
            u = _merge_disjoint(_collect_uses(m), ub, "a let binding")
        case _:
            raise TypeError(f"not a term: {t!r}")
    t._uses = u
    return u


def _display(name: str) -> str:
    return name.split("%", 1)[0] or name


def _merge_disjoint(ua, ub, where: str) -> "frozenset[str] | _Conflict":
    if isinstance(ua, _Conflict):
        return ua
    if isinstance(ub, _Conflict):
        return ub
    overlap = ua & ub
    if overlap:
        offender = _display(min(overlap))
        return _Conflict(f"variable '{offender}' is used on both sides of {where}")
    return ua | ub


def _bound_names(t: Term) -> frozenset:
    b = t._binders
    if b is not None:
        return b
    match t:
        case Var(_) | Omega():
            b = frozenset()
        case Abs(x, body):
            b = _bound_names(body) | {x}
        case App(f, a) | Choice(f, a) | Pair(f, a):
            b = _bound_names(f) | _bound_names(a)
        case LetPair(x, y, m, body):
            b = _bound_names(m) | _bound_names(body) | {x, y}
    t._binders = b
    return b


def _rebind_ok(t: Term) -> bool:
    # Binder names must be distinct along any scope chain, mirroring the
    # disjoint context extension of the typing rules. Parallel reuse is fine.
    ok = t._rebind
    if ok is not None:
        return ok
    match t:
        case Var(_) | Omega():
            ok = True
        case Abs(x, b):
            ok = x not in _bound_names(b) and _rebind_ok(b)
        case App(f, a) | Choice(f, a) | Pair(f, a):
            ok = _rebind_ok(f) and _rebind_ok(a)
        case LetPair(x, y, m, b):
            ok = (
                x not in _bound_names(b)
                and y not in _bound_names(b)
                and _rebind_ok(m)
                and _rebind_ok(b)
            )
    t._rebind = ok
    return ok


def affine_violation(ctx: Iterable[str], t: Term) -> Optional[str]:
    """None if ctx |- t is derivable in the affine discipline, else a
    human-readable reason."""
    ctx_set = frozenset(ctx)
    u = _collect_uses(t)
    if isinstance(u, _Conflict):
        return u.message
    missing = t.free_vars - ctx_set
    if missing:
        return f"variable '{_display(min(missing))}' is not in the context"
    clash = ctx_set & _bound_names(t)
    if clash:
        return f"binder '{_display(min(clash))}' shadows a context variable"
    if not _rebind_ok(t):
        return "a binder is reused within its own scope"
    return None


def check_affine(ctx: Iterable[str], t: Term) -> bool:
    return affine_violation(ctx, t) is None


def substitute(t: Term, x: str, v: Term) -> Term:
    """Capture-avoiding substitution t{v/x}.

    Returns t itself when x does not occur, so shared subtrees stay shared.
    Relies on globally fresh binder names; a would-be capture raises.
    """
    if x not in t.free_vars:
        return t
    match t:
        case Var(_):
            return v
        case Abs(y, b):
            if y in v.free_vars:
                raise ValueError(f"substitution would capture '{y}'")
            return Abs(y, substitute(b, x, v))
        case App(f, a):
            return App(substitute(f, x, v), substitute(a, x, v))
        case Choice(l, r):
            return Choice(substitute(l, x, v), substitute(r, x, v))
        case Pair(a, b):
            return Pair(substitute(a, x, v), substitute(b, x, v))
        case LetPair(y1, y2, m, b):
            if x in (y1, y2):
                return LetPair(y1, y2, substitute(m, x, v), b)
            if y1 in v.free_vars or y2 in v.free_vars:
                raise ValueError("substitution would capture a pair binder")
            return LetPair(y1, y2, substitute(m, x, v), substitute(b, x, v))
        case _:
            raise TypeError(f"not a term: {t!r}")


def rename_free(t: Term, mapping: dict[str, str]) -> Term:
    """Rename free variables; targets must be fresh for t."""
    for old, new in mapping.items():
        t = substitute(t, old, Var(new))
    return t


def encode_theta(t: Term) -> Term:
    """Compile pairs and lets into the pure fragment.

    A pair becomes a closure waiting for a consumer; a let applies the
    encoded scrutinee to the curried continuation.
    """
    match t:
        case Var(_) | Omega():
            return t
        case Abs(x, b):
            return Abs(x, encode_theta(b))
        case App(f, a):
            return App(encode_theta(f), encode_theta(a))
        case Choice(l, r):
            return Choice(encode_theta(l), encode_theta(r))
        case Pair(a, b):
            z = fresh("p")
            return Abs(z, App(App(Var(z), encode_theta(a)), encode_theta(b)))
        case LetPair(x, y, m, b):
            return App(encode_theta(m), Abs(x, Abs(y, encode_theta(b))))
        case _:
            raise TypeError(f"not a term: {t!r}")


_PREC_TERM = 0
_PREC_CHOICE = 1
_PREC_APP = 2
_PREC_ATOM = 3


def pretty(t: Term) -> str:
    """Render t in the surface syntax, choosing readable binder names."""
    used = {name for name in t.free_vars}
    display: dict[str, str] = {}

    def pick(name: str) -> str:
        base = name.split("%", 1)[0] or "x"
        cand = base
        n = 0
        while cand in used:
            n += 1
            cand = f"{base}{n}"
        used.add(cand)
        return cand

    def render(t: Term, prec: int) -> str:
        match t:
            case Var(name):
                s, p = display.get(name, name), _PREC_ATOM
            case Omega():
                s, p = "omega", _PREC_ATOM
            case Pair(a, b):
                s = f"<{render(a, _PREC_TERM)}, {render(b, _PREC_TERM)}>"
                p = _PREC_ATOM
            case Abs(x, b):
                dx = pick(x)
                display[x] = dx
                s, p = f"\\{dx}. {render(b, _PREC_TERM)}", _PREC_TERM
            case LetPair(x, y, m, b):
                ms = render(m, _PREC_TERM)
                dx, dy = pick(x), pick(y)
                display[x], display[y] = dx, dy
                s = f"let <{dx}, {dy}> = {ms} in {render(b, _PREC_TERM)}"
                p = _PREC_TERM
            case Choice(l, r):
                s = f"{render(l, _PREC_CHOICE)} (+) {render(r, _PREC_APP)}"
                p = _PREC_CHOICE
            case App(f, a):
                s = f"{render(f, _PREC_APP)} {render(a, _PREC_ATOM)}"
                p = _PREC_APP
            case _:
                raise TypeError(f"not a term: {t!r}")
        return f"({s})" if p < prec else s

    return render(t, _PREC_TERM)
