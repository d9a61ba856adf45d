"""Step-layer interpreter: environments and the big-step evaluation relation.

Evaluating an expression yields both its current value and the expression to
run on the next cycle; all stream state is carried by that rewriting, never by
mutable cells. The evaluator is pure: environments are never mutated.

Equation lists evaluate in two phases. Phase one walks the equations in causal
order and computes each value under the progressively extended environment
(sound because causal references only point backwards, and the *value* of a
`pre` never depends on the environment). Phase two re-walks every right-hand
side under the completed environment to build the next-cycle expressions; that
is where `pre x` captures x's final current value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .ast import (
    Arrow,
    Apply,
    Const,
    Either,
    Equation,
    Expr,
    Fby,
    If,
    Lambda,
    NoneLit,
    Pattern,
    Pre,
    PTuple,
    PUnit,
    PVar,
    PWild,
    Some,
    Tuple,
    UNDEF_LIT,
    UNIT_VALUE,
    Var,
    VClosure,
    VConst,
    VExtern,
    VNone,
    VSome,
    VTuple,
    VUndef,
    Value,
)
from .errors import EvalError, InternalError, Span, UndefEscape


class Env:
    """Insertion-ordered map from names to values; updates build a new Env."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings: dict[str, Value] | None = None):
        self._bindings: dict[str, Value] = dict(bindings) if bindings else {}

    def lookup(self, name: str, span: Span | None = None) -> Value:
        try:
            return self._bindings[name]
        except KeyError:
            where = f" at {span}" if span else ""
            raise InternalError(f"unbound name '{name}'{where}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._bindings

    def __iter__(self) -> Iterator[tuple[str, Value]]:
        return iter(self._bindings.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, Env) and self._bindings == other._bindings

    def __repr__(self) -> str:
        inner = ", ".join(f"{k} -> {v!r}" for k, v in self._bindings.items())
        return f"Env({inner})"

    def project(self, p: Pattern) -> Value:
        match p:
            case PVar(name):
                return self.lookup(name, p.span)
            case PTuple(items):
                return VTuple(tuple(self.project(i) for i in items))
            case PUnit():
                return UNIT_VALUE
            case PWild():
                raise InternalError("wildcard patterns cannot be projected")
            case _:
                raise InternalError(f"project: unknown pattern {p!r}")

    def update(self, p: Pattern, v: Value) -> "Env":
        fresh = dict(self._bindings)
        _update_into(fresh, p, v)
        out = Env.__new__(Env)
        out._bindings = fresh
        return out


def _update_into(bindings: dict[str, Value], p: Pattern, v: Value) -> None:
    match p:
        case PVar(name):
            bindings[name] = v
        case PWild():
            pass
        case PUnit():
            if v != UNIT_VALUE:
                raise EvalError(f"expected the unit value for pattern (), got {v!r}")
        case PTuple(items):
            if not isinstance(v, VTuple) or len(v.items) != len(items):
                raise EvalError(f"value {v!r} does not match tuple pattern of arity {len(items)}")
            for sub, item in zip(items, v.items):
                _update_into(bindings, sub, item)
        case _:
            raise InternalError(f"update: unknown pattern {p!r}")


@dataclass(frozen=True)
class EvalResult:
    value: Value
    next: Expr


@dataclass(frozen=True)
class HostContext:
    """Passed through to host (external) steps on every invocation."""

    time_us: int
    node: str


@dataclass
class EvalContext:
    """Per-evaluation bookkeeping: the host context for extern calls, and a
    call-site memo so impure externs run exactly once per cycle even though
    equation evaluation walks expressions twice."""

    host: HostContext | None = None
    _extern_results: dict[int, Value] = field(default_factory=dict)


def value_to_expr(v: Value) -> Expr:
    """Embed a runtime value as a literal expression (the Pre rule needs it)."""
    match v:
        case VConst(x):
            return Const(x)
        case VUndef():
            return Const(UNDEF_LIT)
        case VTuple(items):
            return Tuple(tuple(value_to_expr(i) for i in items))
        case VNone():
            return NoneLit()
        case VSome(inner):
            return Some(value_to_expr(inner))
        case VClosure(in_pattern, out_pattern, equations):
            return Lambda(in_pattern, out_pattern, equations)
        case VExtern(name):
            return Var(name)
        case _:
            raise InternalError(f"value_to_expr: unknown value {v!r}")


def _const_value(c: Const) -> Value:
    if c.value is UNDEF_LIT:
        return VUndef()
    return VConst(c.value)


def _call_extern(f: VExtern, arg: Value, site: Expr, ctx: EvalContext) -> Value:
    if f.pure:
        return f.fn(arg, ctx.host)
    key = id(site)
    if key not in ctx._extern_results:
        ctx._extern_results[key] = f.fn(arg, ctx.host)
    return ctx._extern_results[key]


def eval_expr(env: Env, e: Expr, ctx: EvalContext | None = None) -> EvalResult:
    """The evaluation relation: env |- e  =>  value, next expression."""
    return _eval(env, e, ctx if ctx is not None else EvalContext())


def _eval(env: Env, e: Expr, ctx: EvalContext) -> EvalResult:
    match e:
        case Var(name):
            return EvalResult(env.lookup(name, e.span), e)
        case Const():
            return EvalResult(_const_value(e), e)
        case Tuple(items):
            parts = [_eval(env, item, ctx) for item in items]
            return EvalResult(
                VTuple(tuple(r.value for r in parts)),
                Tuple(tuple(r.next for r in parts), span=e.span),
            )
        case Pre(inner):
            r = _eval(env, inner, ctx)
            return EvalResult(VUndef(), Arrow(value_to_expr(r.value), Pre(r.next), span=e.span))
        case Fby(first, rest):
            r1 = _eval(env, first, ctx)
            return EvalResult(r1.value, rest)
        case Arrow(first, rest):
            r1 = _eval(env, first, ctx)
            r2 = _eval(env, rest, ctx)
            return EvalResult(r1.value, r2.next)
        case If(cond, then, orelse):
            rc = _eval(env, cond, ctx)
            taken = _branch(rc.value, e)
            if taken:
                rt = _eval(env, then, ctx)
                return EvalResult(rt.value, If(rc.next, rt.next, orelse, span=e.span))
            ro = _eval(env, orelse, ctx)
            return EvalResult(ro.value, If(rc.next, then, ro.next, span=e.span))
        case NoneLit():
            return EvalResult(VNone(), e)
        case Some(inner):
            r = _eval(env, inner, ctx)
            return EvalResult(VSome(r.value), Some(r.next, span=e.span))
        case Either(scrutinee, fallback):
            rs = _eval(env, scrutinee, ctx)
            match rs.value:
                case VSome(payload):
                    return EvalResult(payload, Either(rs.next, fallback, span=e.span))
                case VNone():
                    rf = _eval(env, fallback, ctx)
                    return EvalResult(rf.value, Either(rs.next, rf.next, span=e.span))
                case VUndef():
                    raise UndefEscape(_escape("either scrutinee", e.span))
                case other:
                    raise InternalError(f"either scrutinee evaluated to non-option {other!r}")
        case Lambda(in_pattern, out_pattern, equations):
            return EvalResult(VClosure(in_pattern, out_pattern, equations), e)
        case Apply(fn, arg):
            rf = _eval(env, fn, ctx)
            ra = _eval(env, arg, ctx)
            match rf.value:
                case VClosure(in_pattern, out_pattern, equations):
                    inner = env.update(in_pattern, ra.value)
                    next_eqs, final = _run_equations(inner, equations, ctx)
                    lam = Lambda(in_pattern, out_pattern, next_eqs)
                    return EvalResult(final.project(out_pattern), Apply(lam, ra.next, span=e.span))
                case VExtern():
                    result = _call_extern(rf.value, ra.value, e, ctx)
                    return EvalResult(result, Apply(rf.next, ra.next, span=e.span))
                case VUndef():
                    raise UndefEscape(_escape("applied expression", e.span))
                case other:
                    raise EvalError(f"application of a non-function value {other!r}")
        case _:
            raise InternalError(f"eval: unknown expression {e!r}")


def _branch(cond: Value, site: Expr) -> bool:
    match cond:
        case VConst(bool() as b):
            return b
        case VUndef():
            raise UndefEscape(_escape("if condition", site.span))
        case other:
            raise InternalError(f"if condition evaluated to non-boolean {other!r}")


def _escape(where: str, span: Span) -> str:
    at = f" at {span}" if span.line else ""
    return f"undefined value used as {where}{at} (initialization analysis escape)"


def _value_of(env: Env, e: Expr, ctx: EvalContext) -> Value:
    """Value-only evaluation; skips every subtree whose value is not needed.

    In particular the operand of `pre` is not visited at all, which is what
    makes phase one legal under a partially-built environment.
    """
    match e:
        case Var(name):
            return env.lookup(name, e.span)
        case Const():
            return _const_value(e)
        case Tuple(items):
            return VTuple(tuple(_value_of(env, item, ctx) for item in items))
        case Pre():
            return VUndef()
        case Fby(first, _):
            return _value_of(env, first, ctx)
        case Arrow(first, _):
            return _value_of(env, first, ctx)
        case If(cond, then, orelse):
            taken = _branch(_value_of(env, cond, ctx), e)
            return _value_of(env, then if taken else orelse, ctx)
        case NoneLit():
            return VNone()
        case Some(inner):
            return VSome(_value_of(env, inner, ctx))
        case Either(scrutinee, fallback):
            match _value_of(env, scrutinee, ctx):
                case VSome(payload):
                    return payload
                case VNone():
                    return _value_of(env, fallback, ctx)
                case VUndef():
                    raise UndefEscape(_escape("either scrutinee", e.span))
                case other:
                    raise InternalError(f"either scrutinee evaluated to non-option {other!r}")
        case Lambda(in_pattern, out_pattern, equations):
            return VClosure(in_pattern, out_pattern, equations)
        case Apply(fn, arg):
            f = _value_of(env, fn, ctx)
            a = _value_of(env, arg, ctx)
            match f:
                case VClosure(in_pattern, out_pattern, equations):
                    inner = env.update(in_pattern, a)
                    for eq in equations:
                        inner = inner.update(eq.lhs, _value_of(inner, eq.rhs, ctx))
                    return inner.project(out_pattern)
                case VExtern():
                    return _call_extern(f, a, e, ctx)
                case VUndef():
                    raise UndefEscape(_escape("applied expression", e.span))
                case other:
                    raise EvalError(f"application of a non-function value {other!r}")
        case _:
            raise InternalError(f"value_of: unknown expression {e!r}")


def _run_equations(
    env: Env, equations: tuple[Equation, ...], ctx: EvalContext
) -> tuple[tuple[Equation, ...], Env]:
    final = env
    for eq in equations:
        final = final.update(eq.lhs, _value_of(final, eq.rhs, ctx))
    rewritten = []
    for eq in equations:
        r = _eval(final, eq.rhs, ctx)
        rewritten.append(Equation(eq.lhs, r.next, span=eq.span))
    return tuple(rewritten), final


def eval_equations(
    env: Env, equations: tuple[Equation, ...] | list[Equation], ctx: EvalContext | None = None
) -> tuple[tuple[Equation, ...], Env]:
    """Evaluate an equation list in causal order.

    Returns the rewritten equations and the environment extended with every
    left-hand binding at its final value for this cycle.
    """
    return _run_equations(env, tuple(equations), ctx if ctx is not None else EvalContext())
