"""Desugaring: constants substituted, implies eliminated, bodies split on
disjunction, rule tags turned into auxiliary nullary facts, wildcards
renamed, forall rewritten to its violation check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CompileError
from ..provenance import InputFact, InputTag, UNTAGGED
from ..values import RelationSignature, in_range, is_float_type, is_int_type
from . import ast
from .infer import TypedProgram

RESERVED_PREFIX = "__"


@dataclass
class DRule:
    head: ast.Atom
    items: list  # conjunct items: Atom | NegAtom | Constraint | Reduce
    var_types: dict
    pos: tuple = None


@dataclass
class DesugaredProgram:
    rules: list = field(default_factory=list)
    facts: list = field(default_factory=list)  # InputFact, file order
    queries: list = field(default_factory=list)
    signatures: dict = field(default_factory=dict)
    consts: dict = field(default_factory=dict)


class Desugarer:
    def __init__(self, typed: TypedProgram):
        self.typed = typed
        self.out = DesugaredProgram(
            signatures=dict(typed.signatures), consts=dict(typed.consts)
        )
        self.aux_counter = 0
        self.wild_counter = 0
        self.exclusion_counter = 0
        self.current_wild_types = {}
        self.pos = None

    def error(self, msg):
        line, col = self.pos if self.pos else (None, None)
        raise CompileError(msg, line, col)

    # -- expressions ------------------------------------------------------

    def subst_expr(self, e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Var):
            if e.name in self.typed.consts:
                dtype, payload = self.typed.consts[e.name]
                kind = _kind_of(dtype)
                lit = ast.Lit(kind, payload)
                lit.ty = dtype
                return lit
            return e
        if isinstance(e, ast.Lit):
            return e
        if isinstance(e, ast.BinExpr):
            out = ast.BinExpr(e.op, self.subst_expr(e.left), self.subst_expr(e.right))
            out.ty = e.ty
            return out
        if isinstance(e, ast.UnExpr):
            out = ast.UnExpr(e.op, self.subst_expr(e.operand))
            out.ty = e.ty
            return out
        if isinstance(e, ast.CastExpr):
            out = ast.CastExpr(self.subst_expr(e.operand), e.target)
            out.ty = e.ty
            return out
        if isinstance(e, ast.IfExpr):
            out = ast.IfExpr(
                self.subst_expr(e.cond),
                self.subst_expr(e.then),
                self.subst_expr(e.orelse),
            )
            out.ty = e.ty
            return out
        if isinstance(e, ast.CallExpr):
            out = ast.CallExpr(e.func, [self.subst_expr(a) for a in e.args])
            out.ty = e.ty
            return out
        raise TypeError(f"not an expression: {e!r}")

    def fold_payload(self, e: ast.Expr):
        """Fact arguments and tags must fold to constants."""
        neg = False
        while isinstance(e, ast.UnExpr) and e.op == "-":
            neg = not neg
            e = e.operand
        if not isinstance(e, ast.Lit):
            self.error("fact arguments must be constant literals")
        v = e.value
        dtype = e.ty
        if e.kind == "int":
            v = -v if neg else v
            if dtype and is_int_type(dtype) and not in_range(dtype, v):
                self.error(f"literal {v} out of range for {dtype}")
            return v
        if e.kind == "float":
            v = -v if neg else v
            if dtype == "f32":
                v = float(np.float32(v))
            return v
        if neg:
            self.error("cannot negate a non-numeric literal")
        return v

    def fold_tag(self, e) -> InputTag:
        if e is None:
            return UNTAGGED
        p = self.fold_payload(self.subst_expr(e))
        p = float(p)
        if not (0.0 <= p <= 1.0):
            self.error(f"tag probability {p} outside [0, 1]")
        return InputTag(p)

    # -- formula rewriting --------------------------------------------------

    def neg_formula(self, f: ast.Formula) -> ast.Formula:
        if isinstance(f, ast.Atom):
            return ast.NegAtom(f)
        if isinstance(f, ast.NegAtom):
            return f.atom
        if isinstance(f, ast.Conj):
            return ast.Disj(self.neg_formula(f.left), self.neg_formula(f.right))
        if isinstance(f, ast.Disj):
            return ast.Conj(self.neg_formula(f.left), self.neg_formula(f.right))
        if isinstance(f, ast.Implies):
            return ast.Conj(f.left, self.neg_formula(f.right))
        if isinstance(f, ast.Constraint):
            e = ast.UnExpr("!", f.expr)
            e.ty = "bool"
            return ast.Constraint(e)
        if isinstance(f, ast.Reduce):
            self.error("cannot negate an aggregation")
        raise TypeError(f"not a formula: {f!r}")

    def rewrite(self, f: ast.Formula) -> ast.Formula:
        """Eliminate implies, rewrite forall to its violation check,
        substitute constants, rename wildcards."""
        if isinstance(f, ast.Atom):
            return ast.Atom(f.pred, [self._arg(a) for a in f.args], f.pos)
        if isinstance(f, ast.NegAtom):
            return ast.NegAtom(self.rewrite(f.atom))
        if isinstance(f, ast.Conj):
            return ast.Conj(self.rewrite(f.left), self.rewrite(f.right))
        if isinstance(f, ast.Disj):
            return ast.Disj(self.rewrite(f.left), self.rewrite(f.right))
        if isinstance(f, ast.Implies):
            return self.rewrite(
                ast.Disj(self.neg_formula(f.left), f.right)
            )
        if isinstance(f, ast.Constraint):
            return ast.Constraint(self.subst_expr(f.expr))
        if isinstance(f, ast.Reduce):
            body = f.body
            if f.op == "forall":
                # forall holds iff no violating assignment exists.
                body = self.neg_formula(body)
            body = self.rewrite(body)
            group_body = (
                self.rewrite(f.group_body) if f.group_body is not None else None
            )
            return ast.Reduce(
                list(f.result_vars), f.op, f.count, list(f.arg_vars),
                list(f.binding_vars), body, f.group_vars, group_body, f.pos,
            )
        raise TypeError(f"not a formula: {f!r}")

    def _arg(self, e: ast.Expr) -> ast.Expr:
        e = self.subst_expr(e)
        if isinstance(e, ast.Var) and e.name == "_":
            self.wild_counter += 1
            v = ast.Var(f"_w{self.wild_counter}")
            v.ty = e.ty
            self.current_wild_types[v.name] = e.ty
            return v
        return e

    # -- items ---------------------------------------------------------------

    def run(self) -> DesugaredProgram:
        for item in self.typed.program.items:
            self.pos = item.pos
            if isinstance(item, (ast.TypeAliasItem, ast.RelTypeDeclItem,
                                 ast.ConstItem)):
                continue
            if isinstance(item, ast.QueryItem):
                if item.pred not in self.out.queries:
                    self.out.queries.append(item.pred)
                continue
            if isinstance(item, ast.FactItem):
                self._check_name(item.pred)
                tup = tuple(
                    self.fold_payload(self.subst_expr(a)) for a in item.args
                )
                self.out.facts.append(
                    InputFact(item.pred, tup, self.fold_tag(item.tag))
                )
                continue
            if isinstance(item, ast.FactSetItem):
                self._check_name(item.pred)
                for group in item.groups:
                    excl = None
                    if len(group) > 1:
                        self.exclusion_counter += 1
                        excl = self.exclusion_counter
                    for tag_expr, args in group:
                        tup = tuple(
                            self.fold_payload(self.subst_expr(a)) for a in args
                        )
                        tag = self.fold_tag(tag_expr)
                        if tag.is_tagged and excl is not None:
                            tag = InputTag(tag.prob, excl)
                        self.out.facts.append(InputFact(item.pred, tup, tag))
                continue
            if isinstance(item, ast.RuleItem):
                self._rule(item)
                continue
            if isinstance(item, ast.ImportItem):
                self.error("imports must be resolved before desugaring")
        return self.out

    def _check_name(self, name: str):
        if name.startswith(RESERVED_PREFIX):
            self.error(
                f"relation names starting with {RESERVED_PREFIX!r} are reserved"
            )

    def _rule(self, item: ast.RuleItem):
        self._check_name(item.head.pred)
        self.current_wild_types = {}
        body = self.rewrite(item.body)
        if item.tag is not None:
            self.aux_counter += 1
            aux = f"__rule_{self.aux_counter}"
            self.out.signatures[aux] = RelationSignature(aux, ())
            self.out.facts.append(InputFact(aux, (), self.fold_tag(item.tag)))
            body = ast.Conj(body, ast.Atom(aux, [], item.pos))
        head = ast.Atom(
            item.head.pred, [self.subst_expr(a) for a in item.head.args],
            item.head.pos,
        )
        var_types = dict(item.var_types or {})
        var_types.update(self.current_wild_types)
        for conjuncts in to_dnf(body):
            self.out.rules.append(DRule(head, conjuncts, var_types, item.pos))


def to_dnf(f: ast.Formula) -> list[list]:
    """Flatten a formula (implies already eliminated) into a list of
    conjunct lists, one per disjunct."""
    if isinstance(f, ast.Conj):
        return [
            left + right
            for left in to_dnf(f.left)
            for right in to_dnf(f.right)
        ]
    if isinstance(f, ast.Disj):
        return to_dnf(f.left) + to_dnf(f.right)
    if isinstance(f, (ast.Atom, ast.NegAtom, ast.Constraint, ast.Reduce)):
        return [[f]]
    raise TypeError(f"unexpected formula in desugared body: {f!r}")


def _kind_of(dtype: str) -> str:
    if is_int_type(dtype):
        return "int"
    if is_float_type(dtype):
        return "float"
    return {"bool": "bool", "char": "char", "String": "string"}[dtype]


def desugar(typed: TypedProgram) -> DesugaredProgram:
    return Desugarer(typed).run()
