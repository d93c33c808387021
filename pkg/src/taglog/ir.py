"""The relational-algebra IR: expression trees, rules, strata, programs.

Selection conditions and projection maps are small expression trees over
tuple slots ("slot bytecode"), interpreted by the evaluator; this keeps
compiled programs printable for golden tests.  All nodes are immutable
after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

from .functions import (
    FAILED,
    apply_binop,
    apply_cast,
    apply_ff,
    apply_unop,
)
from .values import render_value

# --- slot bytecode -----------------------------------------------------------


@dataclass(frozen=True)
class SlotRef:
    index: int
    dtype: str


@dataclass(frozen=True)
class Const:
    dtype: str
    value: object


@dataclass(frozen=True)
class BinOp:
    op: str
    operand_dtype: str
    dtype: str
    left: object
    right: object


@dataclass(frozen=True)
class UnOp:
    op: str
    dtype: str
    operand: object


@dataclass(frozen=True)
class CastOp:
    src: str
    dtype: str
    operand: object


@dataclass(frozen=True)
class CallOp:
    func: str
    arg_dtypes: Tuple[str, ...]
    dtype: str
    args: Tuple[object, ...]


@dataclass(frozen=True)
class IfElse:
    dtype: str
    cond: object
    then: object
    orelse: object


def eval_slot(expr, tup):
    """Evaluate one slot expression against a tuple; FAILED on any failure."""
    kind = type(expr)
    if kind is SlotRef:
        return tup[expr.index]
    if kind is Const:
        return expr.value
    if kind is BinOp:
        a = eval_slot(expr.left, tup)
        if a is FAILED:
            return FAILED
        b = eval_slot(expr.right, tup)
        if b is FAILED:
            return FAILED
        return apply_binop(expr.op, expr.operand_dtype, a, b)
    if kind is UnOp:
        a = eval_slot(expr.operand, tup)
        if a is FAILED:
            return FAILED
        return apply_unop(expr.op, expr.dtype, a)
    if kind is CastOp:
        a = eval_slot(expr.operand, tup)
        if a is FAILED:
            return FAILED
        return apply_cast(expr.src, expr.dtype, a)
    if kind is CallOp:
        args = []
        for sub in expr.args:
            v = eval_slot(sub, tup)
            if v is FAILED:
                return FAILED
            args.append(v)
        return apply_ff(expr.func, expr.arg_dtypes, args)
    if kind is IfElse:
        c = eval_slot(expr.cond, tup)
        if c is FAILED:
            return FAILED
        return eval_slot(expr.then if c else expr.orelse, tup)
    raise TypeError(f"not a slot expression: {expr!r}")


def fold_slot(expr):
    """Constant-fold slot expressions with no slot references.

    Expressions that would fail at fold time are left alone so the failure
    stays a per-tuple drop at runtime.
    """
    if isinstance(expr, (SlotRef, Const)):
        return expr
    if isinstance(expr, BinOp):
        expr = BinOp(expr.op, expr.operand_dtype, expr.dtype,
                     fold_slot(expr.left), fold_slot(expr.right))
    elif isinstance(expr, UnOp):
        expr = UnOp(expr.op, expr.dtype, fold_slot(expr.operand))
    elif isinstance(expr, CastOp):
        expr = CastOp(expr.src, expr.dtype, fold_slot(expr.operand))
    elif isinstance(expr, CallOp):
        expr = CallOp(expr.func, expr.arg_dtypes, expr.dtype,
                      tuple(fold_slot(a) for a in expr.args))
    elif isinstance(expr, IfElse):
        expr = IfElse(expr.dtype, fold_slot(expr.cond),
                      fold_slot(expr.then), fold_slot(expr.orelse))
    if _is_constant(expr):
        v = eval_slot(expr, ())
        if v is not FAILED:
            return Const(expr.dtype, v)
    return expr


def _is_constant(expr) -> bool:
    if isinstance(expr, SlotRef):
        return False
    if isinstance(expr, Const):
        return True
    if isinstance(expr, BinOp):
        return _is_constant(expr.left) and _is_constant(expr.right)
    if isinstance(expr, (UnOp, CastOp)):
        return _is_constant(expr.operand)
    if isinstance(expr, CallOp):
        return all(_is_constant(a) for a in expr.args)
    if isinstance(expr, IfElse):
        return all(_is_constant(e) for e in (expr.cond, expr.then, expr.orelse))
    return False


def format_slot(expr) -> str:
    if isinstance(expr, SlotRef):
        return f"${expr.index}"
    if isinstance(expr, Const):
        return render_value(expr.dtype, expr.value)
    if isinstance(expr, BinOp):
        return f"({format_slot(expr.left)} {expr.op} {format_slot(expr.right)})"
    if isinstance(expr, UnOp):
        return f"({expr.op}{format_slot(expr.operand)})"
    if isinstance(expr, CastOp):
        return f"({format_slot(expr.operand)} as {expr.dtype})"
    if isinstance(expr, CallOp):
        args = ", ".join(format_slot(a) for a in expr.args)
        return f"${expr.func}({args})"
    if isinstance(expr, IfElse):
        return (f"(if {format_slot(expr.cond)} then {format_slot(expr.then)}"
                f" else {format_slot(expr.orelse)})")
    raise TypeError(f"not a slot expression: {expr!r}")


# --- algebra expressions ------------------------------------------------------

AGGREGATOR_NAMES = (
    "count", "sum", "prod", "min", "max", "exists", "forall", "argmin", "argmax",
)
SAMPLER_NAMES = ("top", "categorical", "uniform")


@dataclass(frozen=True)
class AggSpec:
    name: str
    group_arity: int = 0
    arg_arity: int = 0
    binding_arity: int = 1
    include_value: bool = False
    value_dtype: Optional[str] = None

    @property
    def result_arity(self) -> int:
        if self.name == "count" or self.name in ("exists", "forall", "sum", "prod"):
            return 1
        if self.name in ("min", "max"):
            return self.binding_arity
        arity = self.arg_arity
        if self.include_value:
            arity += self.binding_arity
        return arity


@dataclass(frozen=True)
class SamplerSpec:
    kind: str
    count: int
    group_arity: int = 0
    binding_arity: int = 1


@dataclass(frozen=True)
class EmptySet:
    pass


@dataclass(frozen=True)
class Pred:
    name: str


@dataclass(frozen=True)
class ZeroOverwrite:
    expr: object


@dataclass(frozen=True)
class OneOverwrite:
    expr: object


@dataclass(frozen=True)
class Select:
    expr: object
    cond: object  # slot expression of dtype bool


@dataclass(frozen=True)
class Project:
    expr: object
    outputs: Tuple[object, ...]  # slot expressions


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Product:
    left: object
    right: object


@dataclass(frozen=True)
class Intersect:
    left: object
    right: object


@dataclass(frozen=True)
class NaturalJoin:
    left: object
    right: object
    key_len: int


@dataclass(frozen=True)
class Difference:
    left: object
    right: object


@dataclass(frozen=True)
class AntiJoin:
    left: object
    right: object
    key_len: int


@dataclass(frozen=True)
class Aggregate:
    spec: AggSpec
    expr: object


@dataclass(frozen=True)
class GroupByAggregate:
    spec: AggSpec
    groups: object
    expr: object


@dataclass(frozen=True)
class Sample:
    spec: SamplerSpec
    expr: object


@dataclass(frozen=True)
class GroupBySample:
    spec: SamplerSpec
    groups: object
    expr: object


@dataclass(frozen=True)
class Rule:
    head: str
    expr: object


@dataclass
class Stratum:
    rules: list


@dataclass
class RaProgram:
    strata: list = field(default_factory=list)

    def head_predicates(self) -> list[set]:
        return [{r.head for r in s.rules} for s in self.strata]


_BINARY = (Union, Product, Intersect, NaturalJoin, Difference, AntiJoin)


def walk(expr):
    yield expr
    if isinstance(expr, (ZeroOverwrite, OneOverwrite)):
        yield from walk(expr.expr)
    elif isinstance(expr, (Select, Project, Aggregate, Sample)):
        yield from walk(expr.expr)
    elif isinstance(expr, (GroupByAggregate, GroupBySample)):
        yield from walk(expr.groups)
        yield from walk(expr.expr)
    elif isinstance(expr, _BINARY):
        yield from walk(expr.left)
        yield from walk(expr.right)


def referenced_predicates(expr) -> set:
    return {node.name for node in walk(expr) if isinstance(node, Pred)}


def _restricted_predicates(expr) -> set:
    """Predicates under aggregation, sampling, or the right side of a
    difference/anti-join: these must come from strictly earlier strata."""
    out = set()
    if isinstance(expr, (Aggregate, Sample)):
        out |= referenced_predicates(expr.expr)
    elif isinstance(expr, (GroupByAggregate, GroupBySample)):
        out |= referenced_predicates(expr.groups)
        out |= referenced_predicates(expr.expr)
    elif isinstance(expr, (Difference, AntiJoin)):
        out |= referenced_predicates(expr.right)
        out |= _restricted_predicates(expr.left)
        return out
    elif isinstance(expr, _BINARY):
        out |= _restricted_predicates(expr.left)
        out |= _restricted_predicates(expr.right)
        return out
    elif isinstance(expr, (Select, Project, ZeroOverwrite, OneOverwrite)):
        return _restricted_predicates(expr.expr)
    return out


def validate(program: RaProgram) -> list[str]:
    """Check all structural invariants; returns every violation found."""
    errors = []
    heads_by_stratum = program.head_predicates()
    for i, stratum in enumerate(program.strata):
        seen = set()
        for rule in stratum.rules:
            if rule.head in seen:
                errors.append(
                    f"stratum {i}: duplicate head predicate {rule.head!r}"
                )
            seen.add(rule.head)
    for i in range(len(heads_by_stratum)):
        for j in range(i + 1, len(heads_by_stratum)):
            shared = heads_by_stratum[i] & heads_by_stratum[j]
            for p in sorted(shared):
                errors.append(
                    f"strata {i} and {j} share head predicate {p!r}"
                )
    produced_at = {}
    for i, heads in enumerate(heads_by_stratum):
        for p in heads:
            produced_at.setdefault(p, i)
    for i, stratum in enumerate(program.strata):
        for rule in stratum.rules:
            for p in sorted(_restricted_predicates(rule.expr)):
                if produced_at.get(p, -1) >= i:
                    errors.append(
                        f"stratum {i}: rule {rule.head!r} uses {p!r} under a "
                        f"stratified operator but {p!r} is produced in stratum "
                        f"{produced_at[p]}"
                    )
            for p in sorted(referenced_predicates(rule.expr)):
                if produced_at.get(p, -1) > i:
                    errors.append(
                        f"stratum {i}: rule {rule.head!r} references {p!r} "
                        f"produced later (stratum {produced_at[p]})"
                    )
    return errors


# --- printing ----------------------------------------------------------------


def format_expr(expr) -> str:
    if isinstance(expr, EmptySet):
        return "empty"
    if isinstance(expr, Pred):
        return expr.name
    if isinstance(expr, ZeroOverwrite):
        return f"zero({format_expr(expr.expr)})"
    if isinstance(expr, OneOverwrite):
        return f"one({format_expr(expr.expr)})"
    if isinstance(expr, Select):
        return f"sigma[{format_slot(expr.cond)}]({format_expr(expr.expr)})"
    if isinstance(expr, Project):
        cols = ", ".join(format_slot(o) for o in expr.outputs)
        return f"pi[{cols}]({format_expr(expr.expr)})"
    if isinstance(expr, Union):
        return f"union({format_expr(expr.left)}, {format_expr(expr.right)})"
    if isinstance(expr, Product):
        return f"product({format_expr(expr.left)}, {format_expr(expr.right)})"
    if isinstance(expr, Intersect):
        return f"intersect({format_expr(expr.left)}, {format_expr(expr.right)})"
    if isinstance(expr, NaturalJoin):
        return (f"join[k={expr.key_len}]({format_expr(expr.left)}, "
                f"{format_expr(expr.right)})")
    if isinstance(expr, Difference):
        return f"diff({format_expr(expr.left)}, {format_expr(expr.right)})"
    if isinstance(expr, AntiJoin):
        return (f"antijoin[k={expr.key_len}]({format_expr(expr.left)}, "
                f"{format_expr(expr.right)})")
    if isinstance(expr, Aggregate):
        return f"agg[{_format_agg(expr.spec)}]({format_expr(expr.expr)})"
    if isinstance(expr, GroupByAggregate):
        return (f"agg_groupby[{_format_agg(expr.spec)}]"
                f"({format_expr(expr.groups)}, {format_expr(expr.expr)})")
    if isinstance(expr, Sample):
        return f"sample[{_format_sampler(expr.spec)}]({format_expr(expr.expr)})"
    if isinstance(expr, GroupBySample):
        return (f"sample_groupby[{_format_sampler(expr.spec)}]"
                f"({format_expr(expr.groups)}, {format_expr(expr.expr)})")
    raise TypeError(f"not an algebra expression: {expr!r}")


def _format_agg(spec: AggSpec) -> str:
    parts = [spec.name]
    if spec.group_arity:
        parts.append(f"groups={spec.group_arity}")
    if spec.arg_arity:
        parts.append(f"args={spec.arg_arity}")
    if spec.include_value:
        parts.append("with-value")
    return ", ".join(parts)


def _format_sampler(spec: SamplerSpec) -> str:
    s = f"{spec.kind}<{spec.count}>"
    if spec.group_arity:
        s += f", groups={spec.group_arity}"
    return s


def format_program(program: RaProgram) -> str:
    lines = []
    for i, stratum in enumerate(program.strata):
        lines.append(f"stratum {i}:")
        for rule in stratum.rules:
            lines.append(f"  {rule.head} <- {format_expr(rule.expr)}")
    return "\n".join(lines) + "\n"
