"""Simple types for the pairs fragment: base, arrow, tensor.

Inference is plain unification; the affine usage discipline is checked
separately by terms.check_affine. Typing is optional at runtime (the
semantics handles stuck terms), but typed programs never get stuck, which
also makes the pair encoding transparent to traces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import TypeCheckError
from .terms import Abs, App, Choice, LetPair, Omega, Pair, Term, Var


@dataclass(frozen=True)
class Base:
    pass


@dataclass(frozen=True)
class Arrow:
    arg: "Type"
    res: "Type"


@dataclass(frozen=True)
class Tensor:
    first: "Type"
    second: "Type"


@dataclass(frozen=True)
class TVar:
    id: int


Type = Base | Arrow | Tensor | TVar

IOTA = Base()

_tv_counter = itertools.count(1)


def fresh_tvar() -> TVar:
    return TVar(next(_tv_counter))


def resolve(t: Type, subst: dict[TVar, Type]) -> Type:
    while isinstance(t, TVar) and t in subst:
        t = subst[t]
    return t


def apply_subst(t: Type, subst: dict[TVar, Type]) -> Type:
    t = resolve(t, subst)
    if isinstance(t, Arrow):
        return Arrow(apply_subst(t.arg, subst), apply_subst(t.res, subst))
    if isinstance(t, Tensor):
        return Tensor(apply_subst(t.first, subst), apply_subst(t.second, subst))
    return t


def _occurs(v: TVar, t: Type, subst: dict[TVar, Type]) -> bool:
    t = resolve(t, subst)
    if t == v:
        return True
    if isinstance(t, Arrow):
        return _occurs(v, t.arg, subst) or _occurs(v, t.res, subst)
    if isinstance(t, Tensor):
        return _occurs(v, t.first, subst) or _occurs(v, t.second, subst)
    return False


def unify(a: Type, b: Type, subst: dict[TVar, Type]) -> None:
    a, b = resolve(a, subst), resolve(b, subst)
    if a == b:
        return
    if isinstance(a, TVar):
        if _occurs(a, b, subst):
            raise TypeCheckError("occurs check failed (recursive type)")
        subst[a] = b
        return
    if isinstance(b, TVar):
        unify(b, a, subst)
        return
    if isinstance(a, Arrow) and isinstance(b, Arrow):
        unify(a.arg, b.arg, subst)
        unify(a.res, b.res, subst)
        return
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        unify(a.first, b.first, subst)
        unify(a.second, b.second, subst)
        return
    raise TypeCheckError(f"cannot unify {render_type(a)} with {render_type(b)}")


def _infer(t: Term, env: dict[str, Type], subst: dict[TVar, Type]) -> Type:
    match t:
        case Var(name):
            try:
                return env[name]
            except KeyError:
                raise TypeCheckError(f"unbound variable '{name}'") from None
        case Omega():
            return fresh_tvar()
        case Abs(x, body):
            a = fresh_tvar()
            r = _infer(body, {**env, x: a}, subst)
            return Arrow(a, r)
        case App(f, a):
            tf = _infer(f, env, subst)
            ta = _infer(a, env, subst)
            res = fresh_tvar()
            unify(tf, Arrow(ta, res), subst)
            return res
        case Choice(l, r):
            tl = _infer(l, env, subst)
            tr = _infer(r, env, subst)
            unify(tl, tr, subst)
            return tl
        case Pair(a, b):
            return Tensor(_infer(a, env, subst), _infer(b, env, subst))
        case LetPair(x, y, m, body):
            tm = _infer(m, env, subst)
            tx, ty = fresh_tvar(), fresh_tvar()
            unify(tm, Tensor(tx, ty), subst)
            return _infer(body, {**env, x: tx, y: ty}, subst)
        case _:
            raise TypeError(f"not a term: {t!r}")


def infer(t: Term, env: dict[str, Type] | None = None) -> Type:
    """Principal simple type of t, or raise TypeCheckError. Leftover type
    variables are unconstrained and rendered as the opaque base."""
    subst: dict[TVar, Type] = {}
    ty = _infer(t, dict(env or {}), subst)
    return apply_subst(ty, subst)


def render_type(t: Type) -> str:
    if isinstance(t, (Base, TVar)):
        return "iota"
    if isinstance(t, Arrow):
        arg = render_type(t.arg)
        if isinstance(t.arg, Arrow):
            arg = f"({arg})"
        return f"{arg} -o {render_type(t.res)}"
    if isinstance(t, Tensor):
        first = render_type(t.first)
        if isinstance(t.first, (Arrow, Tensor)):
            first = f"({first})"
        second = render_type(t.second)
        if isinstance(t.second, Arrow):
            second = f"({second})"
        return f"{first} * {second}"
    raise TypeError(f"not a type: {t!r}")
