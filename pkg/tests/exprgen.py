"""Seeded generator for well-typed expressions and equation systems.

Used by the determinism, round-trip, Eqs-uniqueness, and initialization
soundness tests. Generation mirrors the initialization rules: with
`need_init=True` the produced expression is defined from the first cycle on,
so it never feeds an undefined value to a guarded position.
"""

from __future__ import annotations

import random

from mimosa.ast import (
    Arrow,
    Apply,
    Const,
    Either,
    Equation,
    Expr,
    Fby,
    If,
    NoneLit,
    Pre,
    PVar,
    Some,
    Tuple,
    Var,
)
from mimosa.builtins import BUILTIN_VALUES
from mimosa.ast import VConst, VNone, VSome, Value
from mimosa.eval import Env, eval_equations
from mimosa.types import BOOL, INT, REAL, TOption, Type

# The evaluation environment every generated expression is closed under.
BASE_VALUES: dict[str, Value] = {
    "i1": VConst(3),
    "i2": VConst(7),
    "r1": VConst(2.5),
    "b1": VConst(True),
    "b2": VConst(False),
    "oi": VSome(VConst(5)),
    "ob": VNone(),
}

VARS_BY_TYPE: dict[Type, tuple[str, ...]] = {
    INT: ("i1", "i2"),
    REAL: ("r1",),
    BOOL: ("b1", "b2"),
    TOption(INT): ("oi",),
    TOption(BOOL): ("ob",),
}

TOP_TYPES = (INT, BOOL, REAL, TOption(INT), TOption(BOOL))


def base_env() -> Env:
    bindings = dict(BUILTIN_VALUES)
    bindings.update(BASE_VALUES)
    return Env(bindings)


def _leaf(rng: random.Random, ty: Type) -> Expr:
    names = VARS_BY_TYPE.get(ty, ())
    if names and rng.random() < 0.5:
        return Var(rng.choice(names))
    if ty == INT:
        return Const(rng.randrange(10))
    if ty == REAL:
        return Const(rng.choice((0.5, 1.25, 3.0)))
    if ty == BOOL:
        return Const(rng.random() < 0.5)
    if isinstance(ty, TOption):
        if rng.random() < 0.4:
            return NoneLit()
        return Some(_leaf(rng, ty.elem))
    raise AssertionError(ty)


def _binop(op: str, left: Expr, right: Expr) -> Expr:
    return Apply(Var(op), Tuple((left, right)))


def gen_expr(rng: random.Random, ty: Type, depth: int, need_init: bool) -> Expr:
    """A well-typed expression of type `ty`; initialized if `need_init`."""
    if depth <= 0:
        return _leaf(rng, ty)
    choices = ["leaf", "if", "arrow", "fby", "either"]
    if not need_init:
        choices.append("pre")
    if ty == INT:
        choices += ["arith", "arith"]
    if ty == BOOL:
        choices += ["cmp", "logic", "not"]
    form = rng.choice(choices)
    if form == "leaf":
        return _leaf(rng, ty)
    if form == "if":
        return If(
            gen_expr(rng, BOOL, depth - 1, True),
            gen_expr(rng, ty, depth - 1, need_init),
            gen_expr(rng, ty, depth - 1, need_init),
        )
    if form == "arrow":
        return Arrow(gen_expr(rng, ty, depth - 1, True), gen_expr(rng, ty, depth - 1, False))
    if form == "fby":
        return Fby(gen_expr(rng, ty, depth - 1, True), gen_expr(rng, ty, depth - 1, True))
    if form == "pre":
        return Pre(gen_expr(rng, ty, depth - 1, True))
    if form == "either":
        return Either(
            gen_expr(rng, TOption(ty), depth - 1, True),
            gen_expr(rng, ty, depth - 1, need_init),
        )
    if form == "arith":
        op = rng.choice(("+", "-", "*"))
        return _binop(op, gen_expr(rng, INT, depth - 1, True), gen_expr(rng, INT, depth - 1, True))
    if form == "cmp":
        op = rng.choice(("<", "<=", ">", ">=", "==", "!="))
        operand_ty = rng.choice((INT, REAL, BOOL))
        return _binop(op, gen_expr(rng, operand_ty, depth - 1, True), gen_expr(rng, operand_ty, depth - 1, True))
    if form == "logic":
        op = rng.choice(("&&", "||"))
        return _binop(op, gen_expr(rng, BOOL, depth - 1, True), gen_expr(rng, BOOL, depth - 1, True))
    if form == "not":
        return Apply(Var("!"), gen_expr(rng, BOOL, depth - 1, True))
    raise AssertionError(form)


# ---------------------------------------------------------------------------
# Tiny equation systems over the value domain {0, 1, undef}.


SYSTEM_VARS = ("x", "y", "z")


def gen_system(rng: random.Random, n_eqs: int) -> list[Equation]:
    """Equations binding x (and y) with right-hand sides whose values stay in
    {0, 1, undef}; references may be causal or delayed."""
    names = SYSTEM_VARS[:n_eqs]

    def atom() -> Expr:
        roll = rng.random()
        if roll < 0.4:
            return Const(rng.randrange(2))
        if roll < 0.9:
            return Var(rng.choice(names))
        return Var("i0")

    def rhs(depth: int) -> Expr:
        if depth <= 0:
            return atom()
        form = rng.choice(("atom", "pre", "arrow", "fby", "if"))
        if form == "atom":
            return atom()
        if form == "pre":
            return Pre(rhs(depth - 1))
        if form == "arrow":
            return Arrow(rhs(depth - 1), rhs(depth - 1))
        if form == "fby":
            return Fby(rhs(depth - 1), rhs(depth - 1))
        return If(Var("b1"), rhs(depth - 1), rhs(depth - 1))

    return [Equation(PVar(name), rhs(rng.randrange(1, 3))) for name in names]


SYSTEM_BASE = {"i0": VConst(0), "b1": VConst(True)}


def system_env() -> Env:
    return Env(dict(SYSTEM_BASE))


def run_cycles(equations, make_base_env, cycles: int) -> list[dict[str, Value]]:
    """Iterate an equation list, returning each cycle's bindings for the
    equation-bound names."""
    eqs = tuple(equations)
    names = [n for eq in eqs for n in eq.lhs.names()]
    out = []
    for _ in range(cycles):
        eqs, env = eval_equations(make_base_env(), eqs)
        out.append({n: env.lookup(n) for n in names})
    return out
