"""Surface-language AST and its pretty-printer.

Position and inferred-type fields never participate in equality, so a
pretty-printed program re-parses to a structurally identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..values import render_value

# --- expressions --------------------------------------------------------------


@dataclass(eq=True)
class Expr:
    pass


@dataclass
class Var(Expr):
    name: str
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class Lit(Expr):
    kind: str  # int | float | string | char | bool
    value: object
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class BinExpr(Expr):
    op: str
    left: Expr
    right: Expr
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class UnExpr(Expr):
    op: str
    operand: Expr
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class CastExpr(Expr):
    operand: Expr
    target: str
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class IfExpr(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    ty: Optional[str] = field(default=None, compare=False)


@dataclass
class CallExpr(Expr):
    func: str
    args: list
    ty: Optional[str] = field(default=None, compare=False)


# --- formulas -----------------------------------------------------------------


@dataclass
class Formula:
    pass


@dataclass
class Atom(Formula):
    pred: str
    args: list
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class NegAtom(Formula):
    atom: Atom


@dataclass
class Conj(Formula):
    left: Formula
    right: Formula


@dataclass
class Disj(Formula):
    left: Formula
    right: Formula


@dataclass
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass
class Constraint(Formula):
    expr: Expr


@dataclass
class Reduce(Formula):
    result_vars: list
    op: str  # aggregator or sampler name
    count: Optional[int]  # K for samplers
    arg_vars: list  # argmin/argmax argument variables
    binding_vars: list
    body: Formula
    group_vars: Optional[list] = None
    group_body: Optional[Formula] = None
    pos: Optional[tuple] = field(default=None, compare=False)


SAMPLER_OPS = ("top", "categorical", "uniform")
AGGREGATOR_OPS = (
    "count", "sum", "prod", "min", "max", "exists", "forall", "argmin", "argmax",
)


# --- items --------------------------------------------------------------------


@dataclass
class Attribute:
    name: str
    args: list


@dataclass
class Item:
    pass


@dataclass
class ImportItem(Item):
    path: str
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class TypeAliasItem(Item):
    name: str
    target: str
    subtype: bool = False  # declared with <: rather than =
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class RelTypeDeclItem(Item):
    name: str
    columns: list  # [(column name or None, type name)]
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class ConstItem(Item):
    bindings: list  # [(name, declared type or None, Expr)]
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class FactItem(Item):
    tag: Optional[Expr]
    pred: str
    args: list
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class FactSetItem(Item):
    pred: str
    groups: list  # [[(tag Expr or None, [Expr, ...])]] ;-linked tuples share a group
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class RuleItem(Item):
    tag: Optional[Expr]
    head: Atom
    body: Formula
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)
    var_types: Optional[dict] = field(default=None, compare=False)


@dataclass
class QueryItem(Item):
    pred: str
    attrs: list = field(default_factory=list)
    pos: Optional[tuple] = field(default=None, compare=False)


@dataclass
class Program:
    items: list = field(default_factory=list)


# --- printing -----------------------------------------------------------------

_BIN_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "%": 5,
}


def format_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        if e.kind == "string":
            return '"' + _escape(e.value) + '"'
        if e.kind == "char":
            return "'" + _escape(e.value) + "'"
        if e.kind == "bool":
            return "true" if e.value else "false"
        if e.kind == "float":
            return repr(float(e.value))
        return str(e.value)
    if isinstance(e, BinExpr):
        p = _BIN_PREC[e.op]
        s = f"{format_expr(e.left, p)} {e.op} {format_expr(e.right, p + 1)}"
        return f"({s})" if p < prec else s
    if isinstance(e, UnExpr):
        return f"{e.op}{format_expr(e.operand, 6)}"
    if isinstance(e, CastExpr):
        s = f"{format_expr(e.operand, 7)} as {e.target}"
        return f"({s})" if prec > 0 else s
    if isinstance(e, IfExpr):
        s = (f"if {format_expr(e.cond)} then {format_expr(e.then)} "
             f"else {format_expr(e.orelse)}")
        return f"({s})" if prec > 0 else s
    if isinstance(e, CallExpr):
        return f"${e.func}(" + ", ".join(format_expr(a) for a in e.args) + ")"
    raise TypeError(f"not an expression: {e!r}")


def _escape(s: str) -> str:
    return (
        s.replace("\\", "\\\\").replace('"', '\\"')
        .replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    )


def format_atom(a: Atom) -> str:
    return f"{a.pred}(" + ", ".join(format_expr(x) for x in a.args) + ")"


def format_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Atom):
        return format_atom(f)
    if isinstance(f, NegAtom):
        return f"not {format_atom(f.atom)}"
    if isinstance(f, Implies):
        s = f"{format_formula(f.left, 2)} implies {format_formula(f.right, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(f, Disj):
        s = f"{format_formula(f.left, 2)} or {format_formula(f.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(f, Conj):
        s = f"{format_formula(f.left, 3)}, {format_formula(f.right, 4)}"
        return f"({s})" if prec > 3 else s
    if isinstance(f, Constraint):
        return format_expr(f.expr)
    if isinstance(f, Reduce):
        res = ", ".join(f.result_vars)
        if len(f.result_vars) != 1:
            res = f"({res})"
        op = f.op
        if f.count is not None:
            op += f"<{f.count}>"
        elif f.arg_vars:
            op += "<" + ", ".join(f.arg_vars) + ">"
        inner = ", ".join(f.binding_vars) + ": " + format_formula(f.body)
        if f.group_vars is not None:
            inner += (" where " + ", ".join(f.group_vars) + ": "
                      + format_formula(f.group_body))
        return f"{res} := {op}({inner})"
    raise TypeError(f"not a formula: {f!r}")


def format_item(item: Item) -> str:
    prefix = "".join(
        f"@{a.name}(" + ", ".join(format_expr(x) for x in a.args) + ")\n"
        for a in item.attrs
    )
    if isinstance(item, ImportItem):
        return prefix + f'import "{_escape(item.path)}"'
    if isinstance(item, TypeAliasItem):
        op = "<:" if item.subtype else "="
        return prefix + f"type {item.name} {op} {item.target}"
    if isinstance(item, RelTypeDeclItem):
        cols = ", ".join(
            (f"{n}: {t}" if n else t) for n, t in item.columns
        )
        return prefix + f"type {item.name}({cols})"
    if isinstance(item, ConstItem):
        parts = []
        for name, ty, value in item.bindings:
            ann = f": {ty}" if ty else ""
            parts.append(f"{name}{ann} = {format_expr(value)}")
        return prefix + "const " + ", ".join(parts)
    if isinstance(item, FactItem):
        tag = f"{format_expr(item.tag)}::" if item.tag is not None else ""
        args = ", ".join(format_expr(a) for a in item.args)
        return prefix + f"rel {tag}{item.pred}({args})"
    if isinstance(item, FactSetItem):
        groups = []
        for group in item.groups:
            members = []
            for tag, args in group:
                t = f"{format_expr(tag)}::" if tag is not None else ""
                members.append(t + "(" + ", ".join(format_expr(a) for a in args) + ")")
            groups.append("; ".join(members))
        return prefix + f"rel {item.pred} = {{" + ", ".join(groups) + "}"
    if isinstance(item, RuleItem):
        tag = f"{format_expr(item.tag)}::" if item.tag is not None else ""
        return (prefix + f"rel {tag}{format_atom(item.head)} = "
                + format_formula(item.body))
    if isinstance(item, QueryItem):
        return prefix + f"query {item.pred}"
    raise TypeError(f"not an item: {item!r}")


def format_program(program: Program) -> str:
    return "\n".join(format_item(it) for it in program.items) + "\n"
