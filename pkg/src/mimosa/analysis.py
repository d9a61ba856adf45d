"""Static checks: network well-formedness, causality ordering, initialization
analysis, and Hindley-Milner type inference for steps and node wiring."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Apply,
    Arrow,
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
    Program,
    PTuple,
    PUnit,
    PVar,
    PWild,
    Some,
    StepDecl,
    Tuple,
    UNDEF_LIT,
    Var,
    free_variables,
)
from .builtins import BUILTIN_TYPES
from .errors import (
    CausalityError,
    Diagnostic,
    InitError,
    NetworkError,
    Span,
    TypeCheckError,
)
from .types import (
    BOOL,
    INT,
    REAL,
    UNIT,
    Scheme,
    TFunc,
    TOption,
    TTuple,
    Type,
    Unifier,
    is_first_order,
)

# ---------------------------------------------------------------------------
# Initialization lattice: True = initialized, pointwise over tuples.

InitType = "bool | tuple"


def init_meet(a, b):
    if isinstance(a, bool) and isinstance(b, bool):
        return a and b
    if isinstance(a, bool):
        return tuple(init_meet(a, x) for x in b)
    if isinstance(b, bool):
        return tuple(init_meet(x, b) for x in a)
    if len(a) != len(b):
        raise ValueError("initialization shapes disagree")
    return tuple(init_meet(x, y) for x, y in zip(a, b))


def init_all(t) -> bool:
    if isinstance(t, bool):
        return t
    return all(init_all(x) for x in t)


def render_init(t) -> str:
    if isinstance(t, bool):
        return "I" if t else "U"
    return "(" + ", ".join(render_init(x) for x in t) + ")"


def _bind_init(statuses: dict, p: Pattern, t) -> None:
    match p:
        case PVar(name):
            statuses[name] = t
        case PWild() | PUnit():
            pass
        case PTuple(items):
            if isinstance(t, bool):
                parts = [t] * len(items)
            elif len(t) == len(items):
                parts = list(t)
            else:
                raise ValueError("initialization shapes disagree with pattern")
            for sub, part in zip(items, parts):
                _bind_init(statuses, sub, part)


class _InitCheck:
    def __init__(self, statuses: dict, file: str):
        self.statuses = statuses
        self.file = file

    def _fail(self, message: str, span: Span):
        raise InitError([Diagnostic(message, span, file=self.file)])

    def _require(self, t, span: Span, what: str):
        if not init_all(t):
            self._fail(f"{what} may be undefined on some cycle", span)

    def status(self, e: Expr, check: bool):
        match e:
            case Const(value):
                return value is not UNDEF_LIT
            case Var(name):
                return self.statuses.get(name, True)
            case Tuple(items):
                return tuple(self.status(i, check) for i in items)
            case Pre(inner):
                s = self.status(inner, check)
                if check and not init_all(s):
                    self._fail("operand of pre may be undefined on the first cycle", inner.span)
                return False
            case Fby(first, rest):
                s1 = self.status(first, check)
                s2 = self.status(rest, check)
                if check:
                    self._require(s1, first.span, "left operand of fby")
                    # After the first cycle the right operand becomes the whole
                    # stream, so its own first value must be defined.
                    self._require(s2, rest.span, "right operand of fby")
                return True
            case Arrow(first, rest):
                s1 = self.status(first, check)
                self.status(rest, check)
                if check:
                    self._require(s1, first.span, "left operand of ->")
                return s1
            case If(cond, then, orelse):
                sc = self.status(cond, check)
                st = self.status(then, check)
                so = self.status(orelse, check)
                if check:
                    self._require(sc, cond.span, "if condition")
                return init_meet(st, so)
            case NoneLit():
                return True
            case Some(inner):
                return self.status(inner, check)
            case Either(scrutinee, fallback):
                ss = self.status(scrutinee, check)
                sf = self.status(fallback, check)
                if check:
                    self._require(ss, scrutinee.span, "either scrutinee")
                return sf
            case Apply(fn, arg):
                self.status(fn, check)
                sa = self.status(arg, check)
                if check:
                    self._require(sa, arg.span, "step argument")
                return True
            case Lambda():
                return True
            case _:
                raise InitError([Diagnostic(f"cannot analyze expression {e!r}", file=self.file)])


def check_initialization(
    step: StepDecl, ordered: tuple[Equation, ...] | None = None, file: str = "<string>"
) -> dict:
    """Prove the step's outputs are defined on every cycle.

    Returns the initialization type of every bound variable. Raises InitError
    with the offending subexpression's span otherwise.
    """
    equations = tuple(ordered) if ordered is not None else (step.equations or ())
    statuses: dict = {name: True for name in step.in_pattern.names()}
    for eq in equations:
        _bind_init(statuses, eq.lhs, True)

    checker = _InitCheck(statuses, file)
    # Greatest fixpoint: statuses only ever move downward in the lattice.
    for _ in range(len(equations) + 1):
        changed = False
        for eq in equations:
            before = {n: statuses.get(n) for n in eq.lhs.names()}
            _bind_init(statuses, eq.lhs, checker.status(eq.rhs, check=False))
            if any(statuses.get(n) != v for n, v in before.items()):
                changed = True
        if not changed:
            break

    for eq in equations:
        checker.status(eq.rhs, check=True)

    for name in step.out_pattern.names():
        if not init_all(statuses.get(name, True)):
            raise InitError(
                [
                    Diagnostic(
                        f"step output '{name}' may be undefined on the first cycle",
                        step.out_pattern.span,
                        file=file,
                    )
                ]
            )
    return dict(statuses)


# ---------------------------------------------------------------------------
# Causality: order equations so causal references only point backwards.


def order_equations(step: StepDecl, file: str = "<string>") -> tuple[Equation, ...]:
    equations = step.equations or ()
    bound: list[set[str]] = [set(eq.lhs.names()) for eq in equations]
    owner: dict[str, int] = {}
    for i, names in enumerate(bound):
        for n in names:
            owner[n] = i

    deps: list[set[int]] = [set() for _ in equations]
    for i, eq in enumerate(equations):
        for name, kind in free_variables(eq.rhs).items():
            if kind != "causal" or name not in owner:
                continue
            j = owner[name]
            if j == i:
                raise CausalityError(
                    [
                        Diagnostic(
                            f"equation for '{name}' depends on itself without a pre",
                            eq.span,
                            file=file,
                        )
                    ]
                )
            deps[i].add(j)

    remaining = set(range(len(equations)))
    emitted: list[int] = []
    while remaining:
        ready = sorted(i for i in remaining if deps[i] <= set(emitted))
        if not ready:
            cycle_names = sorted(n for i in remaining for n in bound[i] if _in_cycle(i, deps, remaining))
            names = ", ".join(cycle_names) or "equations"
            span = equations[min(remaining)].span
            raise CausalityError(
                [Diagnostic(f"causality cycle through {{{names}}} (no pre breaks it)", span, file=file)]
            )
        for i in ready:
            emitted.append(i)
            remaining.discard(i)
    return tuple(equations[i] for i in emitted)


def _in_cycle(start: int, deps: list[set[int]], remaining: set[int]) -> bool:
    seen: set[int] = set()
    stack = [d for d in deps[start] if d in remaining]
    while stack:
        i = stack.pop()
        if i == start:
            return True
        if i in seen:
            continue
        seen.add(i)
        stack.extend(d for d in deps[i] if d in remaining)
    return False


# ---------------------------------------------------------------------------
# Network resolution


@dataclass(frozen=True)
class NetworkInfo:
    step_order: tuple[str, ...]  # call-graph topological order
    node_step: dict[str, str]
    channel_writer: dict[str, str | None]
    channel_reader: dict[str, str | None]


def check_network(program: Program, *, complete: bool = True, file: str = "<string>") -> NetworkInfo:
    diags: list[Diagnostic] = []
    step_names = {s.name for s in program.steps}
    channel_names = {c.name for c in program.channels}

    for ch in program.channels:
        if not is_first_order(ch.elem_type):
            diags.append(
                Diagnostic(f"channel '{ch.name}' must carry first-order data", ch.span, file=file)
            )

    writer: dict[str, str | None] = {c.name: None for c in program.channels}
    reader: dict[str, str | None] = {c.name: None for c in program.channels}
    for node in program.nodes:
        if node.step not in step_names:
            diags.append(Diagnostic(f"unknown step '{node.step}'", node.span, file=file))
        for port in node.inputs:
            if port.channel not in channel_names:
                diags.append(Diagnostic(f"unknown channel '{port.channel}'", port.span, file=file))
            elif reader[port.channel] is not None:
                diags.append(
                    Diagnostic(
                        f"channel '{port.channel}' already read by node '{reader[port.channel]}'",
                        port.span,
                        file=file,
                    )
                )
            else:
                reader[port.channel] = node.name
        for port in node.outputs:
            if port.channel not in channel_names:
                diags.append(Diagnostic(f"unknown channel '{port.channel}'", port.span, file=file))
            elif writer[port.channel] is not None:
                diags.append(
                    Diagnostic(
                        f"channel '{port.channel}' already written by node '{writer[port.channel]}'",
                        port.span,
                        file=file,
                    )
                )
            else:
                writer[port.channel] = node.name

    if complete:
        for ch in program.channels:
            if writer.get(ch.name) is None:
                diags.append(Diagnostic(f"channel '{ch.name}' has no writing node", ch.span, file=file))
            if reader.get(ch.name) is None:
                diags.append(Diagnostic(f"channel '{ch.name}' has no reading node", ch.span, file=file))

    # Per-step name hygiene.
    reserved = step_names | set(BUILTIN_TYPES)
    for step in program.steps:
        binders = list(step.in_pattern.names())
        for name in binders:
            if name in reserved:
                diags.append(
                    Diagnostic(
                        f"input '{name}' of step '{step.name}' shadows a step or builtin",
                        step.span,
                        file=file,
                    )
                )
        for eq in step.equations or ():
            for name in eq.lhs.names():
                if name in reserved:
                    diags.append(
                        Diagnostic(f"'{name}' shadows a step or builtin", eq.span, file=file)
                    )
                elif name in binders:
                    diags.append(
                        Diagnostic(f"'{name}' is defined more than once in step '{step.name}'", eq.span, file=file)
                    )
                else:
                    binders.append(name)
        if _has_wild(step.out_pattern):
            diags.append(
                Diagnostic(
                    f"step '{step.name}' cannot use '_' in its output pattern",
                    step.out_pattern.span,
                    file=file,
                )
            )
        if not step.is_prototype:
            for name in step.out_pattern.names():
                if name not in binders:
                    diags.append(
                        Diagnostic(
                            f"output '{name}' of step '{step.name}' is never defined",
                            step.out_pattern.span,
                            file=file,
                        )
                    )

    step_order = _step_topo_order(program, diags, file)
    if diags:
        raise NetworkError(diags)
    return NetworkInfo(step_order, {n.name: n.step for n in program.nodes}, writer, reader)


def _has_wild(p: Pattern) -> bool:
    match p:
        case PWild():
            return True
        case PTuple(items):
            return any(_has_wild(i) for i in items)
        case _:
            return False


def _step_calls(step: StepDecl, step_names: set[str]) -> set[str]:
    calls: set[str] = set()
    for eq in step.equations or ():
        calls.update(n for n in free_variables(eq.rhs) if n in step_names)
    return calls


def _step_topo_order(program: Program, diags: list[Diagnostic], file: str) -> tuple[str, ...]:
    step_names = {s.name for s in program.steps}
    calls = {s.name: _step_calls(s, step_names) for s in program.steps}
    order: list[str] = []
    state: dict[str, int] = {}  # 0 = visiting, 1 = done

    def visit(name: str, path: list[str]) -> None:
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cycle = path[path.index(name) :] + [name]
            diags.append(
                Diagnostic(
                    "recursive steps are not allowed: " + " -> ".join(cycle),
                    program.step(name).span,
                    file=file,
                )
            )
            state[name] = 1
            return
        state[name] = 0
        for callee in sorted(calls[name]):
            visit(callee, path + [name])
        state[name] = 1
        order.append(name)

    for s in program.steps:
        visit(s.name, [])
    return tuple(order)


# ---------------------------------------------------------------------------
# Type inference


class _Infer:
    def __init__(self, file: str):
        self.u = Unifier()
        self.file = file

    def fail(self, message: str, span: Span):
        raise TypeCheckError([Diagnostic(message, span, file=self.file)])

    def sig_type(self, p: Pattern, local: dict[str, Type], *, require_annot: bool, step: str) -> Type:
        match p:
            case PVar(name, annot):
                if annot is None and require_annot:
                    self.fail(f"prototype step '{step}' needs a type annotation on '{name}'", p.span)
                t = annot if annot is not None else self.u.fresh()
                local[name] = t
                return t
            case PWild(annot):
                if annot is None and require_annot:
                    self.fail(f"prototype step '{step}' needs a type annotation on '_'", p.span)
                return annot if annot is not None else self.u.fresh()
            case PUnit():
                return UNIT
            case PTuple(items):
                return TTuple(tuple(self.sig_type(i, local, require_annot=require_annot, step=step) for i in items))
            case _:
                raise AssertionError(p)

    def lhs_type(self, p: Pattern, local: dict[str, Type]) -> Type:
        match p:
            case PVar(name):
                return local[name]
            case PWild():
                return self.u.fresh()
            case PUnit():
                return UNIT
            case PTuple(items):
                return TTuple(tuple(self.lhs_type(i, local) for i in items))
            case _:
                raise AssertionError(p)

    def out_type(self, p: Pattern, local: dict[str, Type], step: str) -> Type:
        match p:
            case PVar(name, annot):
                if name not in local:
                    self.fail(f"output '{name}' of step '{step}' is never defined", p.span)
                t = local[name]
                if annot is not None:
                    self.u.unify(t, annot, p.span, self.file)
                return t
            case PUnit():
                return UNIT
            case PTuple(items):
                return TTuple(tuple(self.out_type(i, local, step) for i in items))
            case _:
                self.fail(f"invalid output pattern in step '{step}'", p.span)

    def expr(self, e: Expr, ctx: dict[str, Scheme], local: dict[str, Type]) -> Type:
        match e:
            case Var(name):
                if name in local:
                    return local[name]
                if name in ctx:
                    return self.u.instantiate(ctx[name])
                self.fail(f"unknown identifier '{name}'", e.span)
            case Const(value):
                if isinstance(value, bool):
                    return BOOL
                if isinstance(value, int):
                    return INT
                if isinstance(value, float):
                    return REAL
                return UNIT
            case Tuple(items):
                return TTuple(tuple(self.expr(i, ctx, local) for i in items))
            case Pre(inner):
                return self.expr(inner, ctx, local)
            case Fby(first, rest) | Arrow(first, rest):
                t1 = self.expr(first, ctx, local)
                t2 = self.expr(rest, ctx, local)
                self.u.unify(t1, t2, e.span, self.file)
                return t1
            case If(cond, then, orelse):
                tc = self.expr(cond, ctx, local)
                self.u.unify(tc, BOOL, cond.span, self.file)
                tt = self.expr(then, ctx, local)
                to = self.expr(orelse, ctx, local)
                self.u.unify(tt, to, e.span, self.file)
                return tt
            case NoneLit():
                return TOption(self.u.fresh())
            case Some(inner):
                return TOption(self.expr(inner, ctx, local))
            case Either(scrutinee, fallback):
                tf = self.expr(fallback, ctx, local)
                ts = self.expr(scrutinee, ctx, local)
                self.u.unify(ts, TOption(tf), scrutinee.span, self.file)
                return tf
            case Apply(fn, arg):
                tfn = self.expr(fn, ctx, local)
                targ = self.expr(arg, ctx, local)
                result = self.u.fresh()
                self.u.unify(tfn, TFunc(targ, result), e.span, self.file)
                return result
            case Lambda():
                return self.lambda_type(e, ctx, dict(local))
            case _:
                raise AssertionError(e)

    def lambda_type(self, e: Lambda, ctx: dict[str, Scheme], local: dict[str, Type]) -> Type:
        tin = self.sig_type(e.in_pattern, local, require_annot=False, step="<lambda>")
        for eq in e.equations:
            for name in eq.lhs.names():
                local.setdefault(name, self.u.fresh())
        for eq in e.equations:
            trhs = self.expr(eq.rhs, ctx, local)
            self.u.unify(self.lhs_type(eq.lhs, local), trhs, eq.span, self.file)
        tout = self.out_type(e.out_pattern, local, "<lambda>")
        return TFunc(tin, tout)


def infer_types(
    program: Program, info: NetworkInfo | None = None, file: str = "<string>"
) -> tuple[dict[str, Scheme], dict[str, Type]]:
    """Assign a principal type scheme to every step and a concrete signature to
    every node, checking port wiring against channel element types."""
    if info is None:
        info = check_network(program, complete=False, file=file)
    inf = _Infer(file)
    ctx: dict[str, Scheme] = dict(BUILTIN_TYPES)

    for name in info.step_order:
        step = program.step(name)
        local: dict[str, Type] = {}
        tin = inf.sig_type(step.in_pattern, local, require_annot=step.is_prototype, step=name)
        if step.is_prototype:
            out_local: dict[str, Type] = {}
            tout = inf.sig_type(step.out_pattern, out_local, require_annot=True, step=name)
        else:
            for eq in step.equations or ():
                for n in eq.lhs.names():
                    local.setdefault(n, inf.u.fresh())
            for eq in step.equations or ():
                trhs = inf.expr(eq.rhs, ctx, local)
                inf.u.unify(inf.lhs_type(eq.lhs, local), trhs, eq.span, file)
            tout = inf.out_type(step.out_pattern, local, name)
        ctx[name] = inf.u.generalize(TFunc(tin, tout))

    schemes = {s.name: ctx[s.name] for s in program.steps}

    channel_types = {c.name: c.elem_type for c in program.channels}
    node_sigs: dict[str, Type] = {}
    for node in program.nodes:
        scheme = schemes[node.step]
        sig = inf.u.instantiate(scheme)
        tin = _ports_type(node.inputs, channel_types)
        tout = _ports_type(node.outputs, channel_types)
        inf.u.unify(sig, TFunc(tin, tout), node.span, file)
        node_sigs[node.name] = inf.u.deep_resolve(sig)
    return schemes, node_sigs


def _ports_type(ports, channel_types) -> Type:
    tys = []
    for p in ports:
        elem = channel_types[p.channel]
        tys.append(TOption(elem) if p.optional else elem)
    if not tys:
        return UNIT
    if len(tys) == 1:
        return tys[0]
    return TTuple(tuple(tys))


# ---------------------------------------------------------------------------
# The checked program


@dataclass(frozen=True)
class CheckedProgram:
    program: Program
    step_schemes: dict[str, Scheme]
    node_signatures: dict[str, Type]
    ordered_equations: dict[str, tuple[Equation, ...]]
    init_types: dict[str, dict]
    step_order: tuple[str, ...]
    node_step: dict[str, str]
    channel_writer: dict[str, str | None]
    channel_reader: dict[str, str | None]

    @property
    def channel_types(self) -> dict[str, Type]:
        return {c.name: c.elem_type for c in self.program.channels}

    def render_step_type(self, name: str) -> str:
        return str(self.step_schemes[name])


def check_program(
    program: Program, *, complete_network: bool = True, file: str = "<string>"
) -> CheckedProgram:
    """Run every static check and assemble the checked program.

    Raises NetworkError, TypeCheckError, CausalityError, or InitError with
    source-located diagnostics.
    """
    info = check_network(program, complete=complete_network, file=file)
    schemes, node_sigs = infer_types(program, info, file=file)
    ordered: dict[str, tuple[Equation, ...]] = {}
    init_types: dict[str, dict] = {}
    for step in program.steps:
        if step.is_prototype:
            continue
        ordered[step.name] = order_equations(step, file=file)
        init_types[step.name] = check_initialization(step, ordered[step.name], file=file)
    return CheckedProgram(
        program=program,
        step_schemes=schemes,
        node_signatures=node_sigs,
        ordered_equations=ordered,
        init_types=init_types,
        step_order=info.step_order,
        node_step=info.node_step,
        channel_writer=info.channel_writer,
        channel_reader=info.channel_reader,
    )
