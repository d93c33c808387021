"""Unification-based type inference over the surface AST.

Every relation column, rule variable, and expression node gets a type
cell; declared signatures are binding.  Unconstrained integer literals
default to usize (i32 when negated), float literals to f64.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import TypeInferenceError
from ..functions import ff_exists, ff_result_type
from ..values import (
    ALL_TYPES,
    FLOAT_TYPES,
    INT_TYPES,
    NUMERIC_TYPES,
    SIGNED_INT_TYPES,
    RelationSignature,
    in_range,
)
from . import ast

_ORDERABLE = frozenset(NUMERIC_TYPES) | {"char", "String"}
_RESERVED_VAR = re.compile(r"^_[ws]\d+$")
_DEFAULT_PREFERENCE = (
    "usize", "i32", "i64", "u64", "f64", "f32",
    "u32", "i16", "u16", "i8", "u8", "bool", "char", "String",
)


class _Cell:
    __slots__ = ("parent", "resolved", "cands", "flags", "order")

    def __init__(self, order: int, cands=None):
        self.parent = self
        self.resolved = None
        self.cands = frozenset(cands) if cands is not None else None
        self.flags = set()
        self.order = order


def _find(c: _Cell) -> _Cell:
    while c.parent is not c:
        c.parent = c.parent.parent
        c = c.parent
    return c


@dataclass
class TypedProgram:
    program: ast.Program
    signatures: dict
    consts: dict  # name -> (dtype, payload)
    aliases: dict = field(default_factory=dict)


class Inferencer:
    def __init__(self, program: ast.Program):
        self.program = program
        self.counter = 0
        self.cells: list[_Cell] = []
        self.rel_cells: dict[str, list[_Cell]] = {}
        self.rel_names: dict[str, tuple] = {}
        self.aliases: dict[str, str] = {}
        self.const_cells: dict[str, _Cell] = {}
        self.const_exprs: dict[str, ast.Expr] = {}
        self.pending_calls: list = []
        self.node_cells: dict[int, _Cell] = {}
        self.node_refs: list = []
        self.rule_envs: list = []
        self.pos = None

    # -- cell plumbing ------------------------------------------------------

    def fresh(self, cands=None) -> _Cell:
        self.counter += 1
        cell = _Cell(self.counter, cands)
        self.cells.append(cell)
        return cell

    def error(self, msg: str):
        line, col = self.pos if self.pos else (None, None)
        raise TypeInferenceError(msg, line, col)

    def resolve(self, cell: _Cell, dtype: str):
        root = _find(cell)
        if root.resolved is not None:
            if root.resolved != dtype:
                self.error(f"type mismatch: {root.resolved} vs {dtype}")
            return
        if root.cands is not None and dtype not in root.cands:
            self.error(
                f"type {dtype} conflicts with constraints "
                f"{{{', '.join(sorted(root.cands))}}}"
            )
        root.resolved = dtype

    def constrain(self, cell: _Cell, cands):
        root = _find(cell)
        if root.resolved is not None:
            if root.resolved not in cands:
                self.error(
                    f"type {root.resolved} not admissible here "
                    f"(expected one of {{{', '.join(sorted(cands))}}})"
                )
            return
        new = frozenset(cands) if root.cands is None else root.cands & frozenset(cands)
        if not new:
            self.error("conflicting type constraints leave no admissible type")
        root.cands = new

    def unify(self, a: _Cell, b: _Cell):
        ra, rb = _find(a), _find(b)
        if ra is rb:
            return
        if ra.resolved is not None and rb.resolved is not None:
            if ra.resolved != rb.resolved:
                self.error(f"type mismatch: {ra.resolved} vs {rb.resolved}")
        keep, drop = (ra, rb) if ra.order <= rb.order else (rb, ra)
        drop.parent = keep
        if keep.resolved is None:
            keep.resolved = drop.resolved
        if drop.cands is not None:
            keep.cands = drop.cands if keep.cands is None else keep.cands & drop.cands
            if not keep.cands:
                self.error("conflicting type constraints leave no admissible type")
        if keep.resolved is not None and keep.cands is not None \
                and keep.resolved not in keep.cands:
            self.error(
                f"type {keep.resolved} conflicts with constraints "
                f"{{{', '.join(sorted(keep.cands))}}}"
            )
        keep.flags |= drop.flags

    # -- declarations --------------------------------------------------------

    def resolve_type_name(self, name: str) -> str:
        seen = set()
        while name in self.aliases:
            if name in seen:
                self.error(f"type alias cycle through {name!r}")
            seen.add(name)
            name = self.aliases[name]
        if name not in ALL_TYPES:
            self.error(f"unknown type {name!r}")
        return name

    def relation_cells(self, name: str, arity: int) -> list[_Cell]:
        cells = self.rel_cells.get(name)
        if cells is None:
            cells = [self.fresh() for _ in range(arity)]
            self.rel_cells[name] = cells
            return cells
        if len(cells) != arity:
            self.error(
                f"relation {name!r} used with arity {arity} but has arity {len(cells)}"
            )
        return cells

    # -- expressions -----------------------------------------------------------

    def expr_cell(self, e: ast.Expr, env: dict) -> _Cell:
        cached = self.node_cells.get(id(e))
        if cached is not None:
            return cached
        cell = self._expr_cell(e, env)
        self.node_cells[id(e)] = cell
        self.node_refs.append(e)
        return cell

    def _expr_cell(self, e: ast.Expr, env: dict) -> _Cell:
        if isinstance(e, ast.Var):
            if e.name in self.const_cells:
                return self.const_cells[e.name]
            if e.name == "_":
                return self.fresh()
            if _RESERVED_VAR.match(e.name):
                self.error(f"variable name {e.name!r} is reserved")
            if e.name not in env:
                env[e.name] = self.fresh()
            return env[e.name]
        if isinstance(e, ast.Lit):
            if e.kind == "int":
                cell = self.fresh(INT_TYPES)
                cell.flags.add("int_lit")
                return cell
            if e.kind == "float":
                cell = self.fresh(FLOAT_TYPES)
                cell.flags.add("float_lit")
                return cell
            cell = self.fresh()
            self.resolve(cell, {"string": "String", "char": "char", "bool": "bool"}[e.kind])
            return cell
        if isinstance(e, ast.BinExpr):
            lc = self.expr_cell(e.left, env)
            rc = self.expr_cell(e.right, env)
            op = e.op
            if op in ("+", "-", "*", "/", "%"):
                self.unify(lc, rc)
                self.constrain(lc, NUMERIC_TYPES)
                return lc
            if op in ("&&", "||"):
                self.resolve(lc, "bool")
                self.resolve(rc, "bool")
                return lc
            self.unify(lc, rc)
            if op in ("<", "<=", ">", ">="):
                self.constrain(lc, _ORDERABLE)
            out = self.fresh()
            self.resolve(out, "bool")
            return out
        if isinstance(e, ast.UnExpr):
            oc = self.expr_cell(e.operand, env)
            if e.op == "!":
                self.resolve(oc, "bool")
                return oc
            self.constrain(oc, frozenset(SIGNED_INT_TYPES) | frozenset(FLOAT_TYPES))
            root = _find(oc)
            if "int_lit" in root.flags:
                root.flags.add("neg_int_lit")
            return oc
        if isinstance(e, ast.CastExpr):
            oc = self.expr_cell(e.operand, env)
            target = self.resolve_type_name(e.target)
            if target in NUMERIC_TYPES:
                self.constrain(oc, NUMERIC_TYPES)
            elif target != "String":
                self.constrain(oc, {target})
            out = self.fresh()
            self.resolve(out, target)
            return out
        if isinstance(e, ast.IfExpr):
            cc = self.expr_cell(e.cond, env)
            self.resolve(cc, "bool")
            tc = self.expr_cell(e.then, env)
            ec = self.expr_cell(e.orelse, env)
            self.unify(tc, ec)
            return tc
        if isinstance(e, ast.CallExpr):
            if not ff_exists(e.func):
                self.error(f"unknown foreign function ${e.func}")
            arg_cells = [self.expr_cell(a, env) for a in e.args]
            out = self.fresh()
            self.pending_calls.append([e.func, arg_cells, out, False])
            return out
        raise TypeError(f"not an expression: {e!r}")

    # -- formulas ----------------------------------------------------------------

    def walk_atom(self, atom: ast.Atom, env: dict):
        old = self.pos
        if atom.pos:
            self.pos = atom.pos
        cols = self.relation_cells(atom.pred, len(atom.args))
        for arg, col in zip(atom.args, cols):
            self.unify(self.expr_cell(arg, env), col)
        self.pos = old

    def walk_formula(self, f: ast.Formula, env: dict):
        if isinstance(f, ast.Atom):
            self.walk_atom(f, env)
        elif isinstance(f, ast.NegAtom):
            self.walk_atom(f.atom, env)
        elif isinstance(f, (ast.Conj, ast.Disj, ast.Implies)):
            self.walk_formula(f.left, env)
            self.walk_formula(f.right, env)
        elif isinstance(f, ast.Constraint):
            self.resolve(self.expr_cell(f.expr, env), "bool")
        elif isinstance(f, ast.Reduce):
            self.walk_reduce(f, env)
        else:
            raise TypeError(f"not a formula: {f!r}")

    def walk_reduce(self, r: ast.Reduce, env: dict):
        old = self.pos
        if r.pos:
            self.pos = r.pos
        self.walk_formula(r.body, env)
        if r.group_body is not None:
            self.walk_formula(r.group_body, env)
        body_vars = _formula_vars(r.body)
        for b in r.binding_vars:
            if b not in body_vars:
                self.error(
                    f"binding variable {b!r} does not occur in the aggregation body"
                )
        for a in r.arg_vars:
            if a not in body_vars:
                self.error(
                    f"argument variable {a!r} does not occur in the aggregation body"
                )

        def var_cell(name):
            if name not in env:
                env[name] = self.fresh()
            return env[name]

        op = r.op
        results = r.result_vars
        if op in ast.SAMPLER_OPS:
            if r.count is None or r.count < 1:
                self.error(f"sampler {op!r} requires K >= 1")
            if len(results) != len(r.binding_vars):
                self.error(
                    f"sampler {op!r} yields {len(r.binding_vars)} variables, "
                    f"got {len(results)} result variables"
                )
            for res, b in zip(results, r.binding_vars):
                self.unify(var_cell(res), var_cell(b))
        elif op == "count":
            if len(results) != 1:
                self.error("count yields exactly one result variable")
            self.resolve(var_cell(results[0]), "usize")
        elif op in ("sum", "prod"):
            if len(r.binding_vars) != 1:
                self.error(f"{op} aggregates exactly one binding variable")
            if len(results) != 1:
                self.error(f"{op} yields exactly one result variable")
            cell = var_cell(r.binding_vars[0])
            self.constrain(cell, NUMERIC_TYPES)
            self.unify(var_cell(results[0]), cell)
        elif op in ("min", "max"):
            if len(results) != len(r.binding_vars):
                self.error(f"{op} yields one result per binding variable")
            for res, b in zip(results, r.binding_vars):
                self.unify(var_cell(res), var_cell(b))
        elif op in ("exists", "forall"):
            if len(results) != 1:
                self.error(f"{op} yields exactly one boolean result variable")
            self.resolve(var_cell(results[0]), "bool")
        elif op in ("argmin", "argmax"):
            if not r.arg_vars:
                self.error(f"{op} requires argument variables in <...>")
            if len(results) == len(r.arg_vars):
                pairs = list(zip(results, r.arg_vars))
            elif len(results) == len(r.arg_vars) + len(r.binding_vars):
                pairs = list(zip(results, r.arg_vars + r.binding_vars))
            else:
                self.error(
                    f"{op} yields the argument variables (optionally followed by "
                    f"the value variables)"
                )
            for res, src in pairs:
                self.unify(var_cell(res), var_cell(src))
        else:
            self.error(f"unknown aggregator {op!r}")
        self.pos = old

    # -- items -------------------------------------------------------------------

    def run(self) -> TypedProgram:
        for item in self.program.items:
            self.pos = item.pos
            if isinstance(item, ast.TypeAliasItem):
                self.resolve_type_name(item.target)
                self.aliases[item.name] = item.target
            elif isinstance(item, ast.RelTypeDeclItem):
                cols = self.relation_cells(item.name, len(item.columns))
                for (cname, tname), cell in zip(item.columns, cols):
                    self.resolve(cell, self.resolve_type_name(tname))
                self.rel_names[item.name] = tuple(n for n, _ in item.columns)
            elif isinstance(item, ast.ConstItem):
                for name, tname, value in item.bindings:
                    if name in self.const_cells:
                        self.error(f"constant {name!r} defined twice")
                    _literal_of(value, self)  # must be a literal
                    cell = self.expr_cell(value, {})
                    if tname is not None:
                        self.resolve(cell, self.resolve_type_name(tname))
                    self.const_cells[name] = cell
                    self.const_exprs[name] = value
            elif isinstance(item, ast.FactItem):
                self.walk_atom(ast.Atom(item.pred, item.args, item.pos), {})
            elif isinstance(item, ast.FactSetItem):
                for group in item.groups:
                    for _tag, args in group:
                        self.walk_atom(ast.Atom(item.pred, args, item.pos), {})
            elif isinstance(item, ast.RuleItem):
                env: dict = {}
                self.walk_formula(item.body, env)
                self.walk_atom(item.head, env)
                self.rule_envs.append((item, env))
            elif isinstance(item, ast.QueryItem):
                if item.pred not in self.rel_cells:
                    self.error(f"query names unknown relation {item.pred!r}")
        self.pos = None
        self.solve()
        return self.annotate()

    # -- solving -------------------------------------------------------------------

    def flush_calls(self) -> bool:
        progress = False
        for entry in self.pending_calls:
            name, arg_cells, out, done = entry
            if done:
                continue
            roots = [_find(c) for c in arg_cells]
            if any(r.resolved is None for r in roots):
                continue
            types = tuple(r.resolved for r in roots)
            result = ff_result_type(name, types)
            if result is None:
                self.error(
                    f"no overload of ${name} accepts ({', '.join(types)})"
                )
            self.resolve(out, result)
            entry[3] = True
            progress = True
        return progress

    def solve(self):
        while True:
            if self.flush_calls():
                continue
            unresolved = []
            seen = set()
            for cell in self.cells:
                root = _find(cell)
                if root.resolved is None and id(root) not in seen:
                    seen.add(id(root))
                    unresolved.append(root)
            if not unresolved:
                break
            root = min(unresolved, key=lambda c: c.order)
            self._apply_default(root)

    def _apply_default(self, root: _Cell):
        prefs = list(_DEFAULT_PREFERENCE)
        if "float_lit" in root.flags:
            prefs = ["f64", "f32"] + prefs
        elif "neg_int_lit" in root.flags:
            prefs = ["i32", "i64", "i16", "i8"] + prefs
        elif "int_lit" in root.flags:
            prefs = ["usize"] + prefs
        for p in prefs:
            if root.cands is None or p in root.cands:
                root.resolved = p
                return
        self.error("no admissible type remains for an inferred cell")

    # -- annotation ------------------------------------------------------------------

    def annotate(self) -> TypedProgram:
        for node in self.node_refs:
            node.ty = _find(self.node_cells[id(node)]).resolved
        signatures = {}
        for name, cells in self.rel_cells.items():
            col_types = tuple(_find(c).resolved for c in cells)
            signatures[name] = RelationSignature(
                name, col_types, self.rel_names.get(name)
            )
        for rule, env in self.rule_envs:
            rule.var_types = {v: _find(c).resolved for v, c in env.items()}
        consts = {}
        for name, expr in self.const_exprs.items():
            dtype = _find(self.const_cells[name]).resolved
            consts[name] = (dtype, coerce_literal(dtype, expr, self))
        return TypedProgram(self.program, signatures, consts, dict(self.aliases))


def _literal_of(e: ast.Expr, inf: Inferencer):
    if isinstance(e, ast.Lit):
        return e
    if isinstance(e, ast.UnExpr) and e.op == "-" and isinstance(e.operand, ast.Lit):
        return e
    inf.error("constant definitions must bind literals")


def _formula_vars(f: ast.Formula) -> set:
    out: set = set()

    def expr_vars(e):
        if isinstance(e, ast.Var):
            if e.name != "_":
                out.add(e.name)
        elif isinstance(e, ast.BinExpr):
            expr_vars(e.left)
            expr_vars(e.right)
        elif isinstance(e, (ast.UnExpr, ast.CastExpr)):
            expr_vars(e.operand)
        elif isinstance(e, ast.IfExpr):
            expr_vars(e.cond)
            expr_vars(e.then)
            expr_vars(e.orelse)
        elif isinstance(e, ast.CallExpr):
            for a in e.args:
                expr_vars(a)

    def go(g):
        if isinstance(g, ast.Atom):
            for a in g.args:
                expr_vars(a)
        elif isinstance(g, ast.NegAtom):
            go(g.atom)
        elif isinstance(g, (ast.Conj, ast.Disj, ast.Implies)):
            go(g.left)
            go(g.right)
        elif isinstance(g, ast.Constraint):
            expr_vars(g.expr)
        elif isinstance(g, ast.Reduce):
            out.update(g.result_vars)
            go(g.body)
            if g.group_body is not None:
                go(g.group_body)

    go(f)
    return out


def coerce_literal(dtype: str, e: ast.Expr, inf: Inferencer):
    """Convert a literal expression to its runtime payload under `dtype`."""
    neg = False
    while isinstance(e, ast.UnExpr) and e.op == "-":
        neg = not neg
        e = e.operand
    assert isinstance(e, ast.Lit)
    v = e.value
    if e.kind == "int":
        v = -v if neg else v
        if not in_range(dtype, v):
            inf.error(f"literal {v} out of range for {dtype}")
        return v
    if e.kind == "float":
        v = -v if neg else v
        if dtype == "f32":
            v = float(np.float32(v))
        return v
    return v


def infer_types(program: ast.Program) -> TypedProgram:
    return Inferencer(program).run()
