"""Lowering of desugared rules onto the relational-algebra IR.

Join planning is left-deep in body order; selections apply at the earliest
point all their variables are bound; negated atoms become a difference
when they cover the whole current schema and an anti-join on a key prefix
otherwise; aggregations and samplers become (group-by) aggregate/sample
nodes whose implicit groups are demand facts overwritten with the true tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import ir
from ..errors import CompileError
from . import ast
from .desugar import DesugaredProgram, DRule, to_dnf


@dataclass
class CompiledProgram:
    program: ir.RaProgram
    signatures: dict
    edb: list
    queries: list
    idb_relations: list
    source: str = ""


def _expr_vars(e: ast.Expr) -> list[str]:
    out: list[str] = []

    def go(x):
        if isinstance(x, ast.Var):
            if x.name not in out:
                out.append(x.name)
        elif isinstance(x, ast.BinExpr):
            go(x.left)
            go(x.right)
        elif isinstance(x, (ast.UnExpr, ast.CastExpr)):
            go(x.operand)
        elif isinstance(x, ast.IfExpr):
            go(x.cond)
            go(x.then)
            go(x.orelse)
        elif isinstance(x, ast.CallExpr):
            for a in x.args:
                go(a)

    go(e)
    return out


def _is_wild(name: str) -> bool:
    return name.startswith("_w") or name.startswith("_s")


class _BodyPlan:
    """Builds one left-deep plan for a conjunct list."""

    def __init__(self, lowerer: "_Lowerer", var_types: dict, pos):
        self.low = lowerer
        self.var_types = var_types
        self.pos = pos
        self.plan = None
        self.schema: list[str] = []
        self.pending_constraints: list = []
        self.pending_negs: list = []

    def error(self, msg: str):
        line, col = self.pos if self.pos else (None, None)
        raise CompileError(msg, line, col)

    def var_type(self, name: str, node: ast.Expr | None = None):
        if node is not None and node.ty is not None:
            return node.ty
        ty = self.var_types.get(name)
        if ty is None:
            self.error(f"cannot determine the type of variable {name!r}")
        return ty

    # -- slot expressions ---------------------------------------------------

    def slot_expr(self, e: ast.Expr, schema: list[str]):
        if isinstance(e, ast.Var):
            if e.name not in schema:
                self.error(f"variable {e.name!r} is not bound by a positive atom")
            return ir.SlotRef(schema.index(e.name), self.var_type(e.name, e))
        if isinstance(e, ast.Lit):
            return ir.Const(e.ty, _lit_payload(e))
        if isinstance(e, ast.BinExpr):
            return ir.BinOp(
                e.op, e.left.ty, e.ty,
                self.slot_expr(e.left, schema), self.slot_expr(e.right, schema),
            )
        if isinstance(e, ast.UnExpr):
            return ir.UnOp(e.op, e.ty, self.slot_expr(e.operand, schema))
        if isinstance(e, ast.CastExpr):
            return ir.CastOp(e.operand.ty, e.ty, self.slot_expr(e.operand, schema))
        if isinstance(e, ast.CallExpr):
            return ir.CallOp(
                e.func, tuple(a.ty for a in e.args), e.ty,
                tuple(self.slot_expr(a, schema) for a in e.args),
            )
        if isinstance(e, ast.IfExpr):
            return ir.IfElse(
                e.ty,
                self.slot_expr(e.cond, schema),
                self.slot_expr(e.then, schema),
                self.slot_expr(e.orelse, schema),
            )
        raise TypeError(f"not an expression: {e!r}")

    def _project_to(self, expr, from_schema: list[str], to_schema: list[str]):
        if from_schema == to_schema:
            return expr
        outs = tuple(
            ir.SlotRef(from_schema.index(v), self.var_type(v)) for v in to_schema
        )
        return ir.Project(expr, outs)

    # -- joins ----------------------------------------------------------------

    def join(self, right_expr, right_schema: list[str]):
        if self.plan is None:
            self.plan = right_expr
            self.schema = list(right_schema)
            return
        shared = [v for v in self.schema if v in right_schema]
        if not shared:
            self.plan = ir.Product(self.plan, right_expr)
            self.schema = self.schema + list(right_schema)
            return
        left_order = shared + [v for v in self.schema if v not in shared]
        right_order = shared + [v for v in right_schema if v not in shared]
        left = self._project_to(self.plan, self.schema, left_order)
        right = self._project_to(right_expr, right_schema, right_order)
        self.plan = ir.NaturalJoin(left, right, len(shared))
        self.schema = left_order + right_order[len(shared):]

    # -- atoms ------------------------------------------------------------------

    def _atom_parts(self, atom: ast.Atom):
        """Column plan for one atom: positions of first-occurrence variables,
        local conditions over its own columns, and leftover argument
        equations that need outer variables."""
        var_pos: dict[str, int] = {}
        for i, arg in enumerate(atom.args):
            if isinstance(arg, ast.Var) and arg.name not in var_pos:
                var_pos[arg.name] = i
        keep: list[int] = []
        keep_vars: list[str] = []
        local_conds: list = []
        outer_eqs: list = []  # (synthetic var name, expr)
        local_schema = [None] * len(atom.args)
        for name, i in var_pos.items():
            local_schema[i] = name
        for i, arg in enumerate(atom.args):
            if isinstance(arg, ast.Var):
                if var_pos[arg.name] == i:
                    if _is_wild(arg.name) and not self._wild_used(arg.name):
                        continue
                    keep.append(i)
                    keep_vars.append(arg.name)
                    continue
                # repeated variable: equality against its first column
                local_conds.append(ir.BinOp(
                    "==", self.var_type(arg.name, arg), "bool",
                    ir.SlotRef(i, self.var_type(arg.name, arg)),
                    ir.SlotRef(var_pos[arg.name], self.var_type(arg.name, arg)),
                ))
                continue
            vars_used = _expr_vars(arg)
            if all(v in var_pos for v in vars_used):
                cond = ir.BinOp(
                    "==", arg.ty, "bool",
                    ir.SlotRef(i, arg.ty),
                    self._local_slot_expr(arg, local_schema),
                )
                local_conds.append(cond)
            else:
                sv = self.low.fresh_synthetic()
                self.var_types[sv] = arg.ty
                keep.append(i)
                keep_vars.append(sv)
                eq = ast.BinExpr("==", _typed_var(sv, arg.ty), arg)
                eq.ty = "bool"
                outer_eqs.append(ast.Constraint(eq))
        return keep, keep_vars, local_conds, outer_eqs

    def _wild_used(self, name: str) -> bool:
        return False  # wildcards are single-occurrence by construction

    def _local_slot_expr(self, e: ast.Expr, local_schema: list):
        schema = [v if v is not None else f"\x00{i}" for i, v in enumerate(local_schema)]
        return self.slot_expr(e, schema)

    def lower_atom_source(self, atom: ast.Atom):
        """Atom -> (expr, schema, leftover constraints needing outer vars)."""
        keep, keep_vars, local_conds, outer_eqs = self._atom_parts(atom)
        expr = ir.Pred(atom.pred)
        if local_conds:
            cond = local_conds[0]
            for extra in local_conds[1:]:
                cond = ir.BinOp("&&", "bool", "bool", cond, extra)
            expr = ir.Select(expr, ir.fold_slot(cond))
        if keep != list(range(len(atom.args))):
            outs = tuple(
                ir.SlotRef(i, self.var_type(v)) for i, v in zip(keep, keep_vars)
            )
            expr = ir.Project(expr, outs)
        return expr, keep_vars, outer_eqs

    def add_atom(self, atom: ast.Atom):
        self.low.check_arity(atom, self.pos)
        expr, schema, outer_eqs = self.lower_atom_source(atom)
        self.join(expr, schema)
        self.pending_constraints.extend(outer_eqs)

    # -- constraints and negation --------------------------------------------------

    def add_constraint(self, c: ast.Constraint):
        self.pending_constraints.append(c)

    def add_negated(self, n: ast.NegAtom):
        self.pending_negs.append(n)

    def flush_pending(self, final: bool = False):
        progress = True
        while progress:
            progress = False
            for c in list(self.pending_constraints):
                if self.plan is not None and all(
                    v in self.schema for v in _expr_vars(c.expr)
                ):
                    self.plan = ir.Select(
                        self.plan, ir.fold_slot(self.slot_expr(c.expr, self.schema))
                    )
                    self.pending_constraints.remove(c)
                    progress = True
            for n in list(self.pending_negs):
                needed = [
                    v for a in n.atom.args for v in _expr_vars(a)
                    if not _is_wild(v)
                ]
                if self.plan is not None and all(v in self.schema for v in needed):
                    self._apply_negated(n.atom)
                    self.pending_negs.remove(n)
                    progress = True
        if final:
            if self.pending_constraints:
                bad = _expr_vars(self.pending_constraints[0].expr)
                self.error(
                    f"constraint uses unbound variable(s) "
                    f"{[v for v in bad if v not in self.schema]!r}"
                )
            if self.pending_negs:
                atom = self.pending_negs[0].atom
                bad = [
                    v for a in atom.args for v in _expr_vars(a)
                    if not _is_wild(v) and v not in self.schema
                ]
                self.error(
                    f"negated atom {atom.pred!r} uses unbound variable(s) {bad!r}"
                )

    def _apply_negated(self, atom: ast.Atom):
        self.low.check_arity(atom, self.pos)
        # Key expressions: plain variables key directly; anything else is
        # computed as an extra column on the left side.
        key_vars: list[str] = []
        right_keep: list[int] = []
        var_pos: dict[str, int] = {}
        local_conds: list = []
        for i, arg in enumerate(atom.args):
            if isinstance(arg, ast.Var) and _is_wild(arg.name):
                continue
            if isinstance(arg, ast.Var):
                if arg.name in var_pos:
                    ty = self.var_type(arg.name, arg)
                    local_conds.append(ir.BinOp(
                        "==", ty, "bool",
                        ir.SlotRef(i, ty), ir.SlotRef(var_pos[arg.name], ty),
                    ))
                    continue
                var_pos[arg.name] = i
                if arg.name in key_vars:
                    continue
                key_vars.append(arg.name)
                right_keep.append(i)
                continue
            vars_used = _expr_vars(arg)
            if not vars_used:
                local_conds.append(ir.BinOp(
                    "==", arg.ty, "bool",
                    ir.SlotRef(i, arg.ty),
                    ir.fold_slot(self.slot_expr(arg, [])),
                ))
                continue
            # computed key: extend the left plan with the expression value
            sv = self.low.fresh_synthetic()
            self.var_types[sv] = arg.ty
            outs = tuple(
                ir.SlotRef(j, self.var_type(v)) for j, v in enumerate(self.schema)
            ) + (ir.fold_slot(self.slot_expr(arg, self.schema)),)
            self.plan = ir.Project(self.plan, outs)
            self.schema = self.schema + [sv]
            key_vars.append(sv)
            var_pos[sv] = i
            right_keep.append(i)

        right = ir.Pred(atom.pred)
        if local_conds:
            cond = local_conds[0]
            for extra in local_conds[1:]:
                cond = ir.BinOp("&&", "bool", "bool", cond, extra)
            right = ir.Select(right, ir.fold_slot(cond))
        identity = (
            isinstance(right, ir.Pred)
            and right_keep == list(range(len(atom.args)))
            and key_vars == self.schema
        )
        if identity:
            self.plan = ir.Difference(self.plan, right)
            return
        if right_keep != list(range(len(atom.args))):
            col_types = self.low.signatures[atom.pred].col_types
            right = ir.Project(
                right,
                tuple(ir.SlotRef(i, col_types[i]) for i in right_keep),
            )
        left_order = key_vars + [v for v in self.schema if v not in key_vars]
        self.plan = ir.AntiJoin(
            self._project_to(self.plan, self.schema, left_order),
            right,
            len(key_vars),
        )
        self.schema = left_order

    # -- reduces -----------------------------------------------------------------

    def add_reduce(self, r: ast.Reduce):
        expr, schema = self.low.lower_reduce(r, self.var_types, self.pos)
        self.join(expr, schema)

    # -- entry -------------------------------------------------------------------

    def process(self, items: list):
        for item in items:
            if isinstance(item, ast.Atom):
                self.add_atom(item)
            elif isinstance(item, ast.NegAtom):
                self.add_negated(item)
            elif isinstance(item, ast.Constraint):
                self.add_constraint(item)
            elif isinstance(item, ast.Reduce):
                self.add_reduce(item)
            else:
                raise TypeError(f"unexpected conjunct {item!r}")
            self.flush_pending()
        self.flush_pending(final=True)
        if self.plan is None:
            self.error("rule body needs at least one positive atom or aggregation")
        return self.plan, self.schema

    def drop_synthetic(self):
        keep = [v for v in self.schema if not v.startswith("_s")]
        self.plan = self._project_to(self.plan, self.schema, keep)
        self.schema = keep


@dataclass
class _Lowerer:
    des: DesugaredProgram
    synth_counter: int = 0
    signatures: dict = field(default_factory=dict)

    def __post_init__(self):
        self.signatures = self.des.signatures

    def fresh_synthetic(self) -> str:
        self.synth_counter += 1
        return f"_s{self.synth_counter}"

    def check_arity(self, atom: ast.Atom, pos):
        sig = self.signatures.get(atom.pred)
        if sig is not None and sig.arity != len(atom.args):
            line, col = pos if pos else (None, None)
            raise CompileError(
                f"relation {atom.pred!r} has arity {sig.arity}, "
                f"used with {len(atom.args)}", line, col,
            )

    def lower_body(self, conjunct_lists: list, var_types: dict, pos):
        """Lower a DNF body (list of conjunct lists) to one expression;
        multiple disjuncts become a union over aligned schemas."""
        plans = []
        for conjuncts in conjunct_lists:
            bp = _BodyPlan(self, var_types, pos)
            bp.process(conjuncts)
            bp.drop_synthetic()
            plans.append((bp, bp.plan, bp.schema))
        base_schema = plans[0][2]
        expr = plans[0][1]
        for bp, plan, schema in plans[1:]:
            if set(schema) != set(base_schema):
                bp.error(
                    "disjuncts of an aggregation body must bind the same "
                    f"variables ({sorted(set(schema) ^ set(base_schema))!r} differ)"
                )
            expr = ir.Union(expr, bp._project_to(plan, schema, base_schema))
        return expr, base_schema

    def lower_reduce(self, r: ast.Reduce, var_types: dict, pos):
        body_expr, body_schema = self.lower_body(to_dnf(r.body), var_types, pos)
        helper = _BodyPlan(self, var_types, pos)

        def err(msg):
            line, col = (r.pos or pos) if (r.pos or pos) else (None, None)
            raise CompileError(msg, line, col)

        for v in r.binding_vars + r.arg_vars:
            if v not in body_schema:
                err(f"variable {v!r} is not bound by a positive atom inside "
                    f"the aggregation body")
        bound = r.binding_vars + r.arg_vars
        free = [v for v in body_schema if v not in bound]
        if r.group_vars is not None:
            for v in r.group_vars:
                if v not in free:
                    err(f"where-clause variable {v!r} must occur in the "
                        f"aggregation body outside the binding variables")
            leftover = [v for v in free if v not in r.group_vars]
            if leftover:
                err(f"free variable(s) {leftover!r} in the aggregation body "
                    f"must be listed in the where clause")
            group_vars = list(r.group_vars)
        else:
            group_vars = free
        if len(set(r.result_vars)) != len(r.result_vars):
            err("duplicate result variables in aggregation")
        for v in r.result_vars:
            if v in group_vars:
                err(f"result variable {v!r} collides with a group variable")

        inner_order = group_vars + r.arg_vars + r.binding_vars
        body = helper._project_to(body_expr, body_schema, inner_order)

        if r.op in ast.SAMPLER_OPS:
            spec = ir.SamplerSpec(
                r.op, r.count, len(group_vars), len(r.binding_vars)
            )
            if not group_vars:
                expr = ir.Sample(spec, body)
            else:
                groups = self._groups_expr(r, helper, body, group_vars, inner_order)
                expr = ir.GroupBySample(spec, groups, body)
        else:
            include_value = (
                r.op in ("argmin", "argmax")
                and len(r.result_vars) == len(r.arg_vars) + len(r.binding_vars)
            )
            value_dtype = None
            if r.op in ("sum", "prod"):
                value_dtype = var_types.get(r.binding_vars[0])
            spec = ir.AggSpec(
                r.op, len(group_vars), len(r.arg_vars), len(r.binding_vars),
                include_value, value_dtype,
            )
            if not group_vars:
                expr = ir.Aggregate(spec, body)
            else:
                groups = self._groups_expr(r, helper, body, group_vars, inner_order)
                expr = ir.GroupByAggregate(spec, groups, body)
        return expr, group_vars + list(r.result_vars)

    def _groups_expr(self, r: ast.Reduce, helper: "_BodyPlan", body, group_vars,
                     inner_order):
        if r.group_vars is not None:
            expr, schema = self.lower_body(
                to_dnf(r.group_body), helper.var_types, r.pos
            )
            for v in group_vars:
                if v not in schema:
                    line, col = r.pos if r.pos else (None, None)
                    raise CompileError(
                        f"where-clause variable {v!r} is not bound by a "
                        f"positive atom in the where formula", line, col,
                    )
            return helper._project_to(expr, schema, group_vars)
        # Implicit groups: the distinct group keys of the body itself,
        # overwritten with the true tag so they act as pure demand facts.
        return ir.OneOverwrite(
            helper._project_to(body, inner_order, group_vars)
        )


def _is_identity_projection(outputs, schema_len: int) -> bool:
    return len(outputs) == schema_len and all(
        isinstance(o, ir.SlotRef) and o.index == i for i, o in enumerate(outputs)
    )


def _typed_var(name: str, ty) -> ast.Var:
    v = ast.Var(name)
    v.ty = ty
    return v


def _lit_payload(e: ast.Lit):
    import numpy as np

    if e.kind == "float" and e.ty == "f32":
        return float(np.float32(e.value))
    if e.kind == "int":
        return int(e.value)
    if e.kind == "float":
        return float(e.value)
    return e.value


def lower(des: DesugaredProgram, strata: list) -> CompiledProgram:
    lowerer = _Lowerer(des)
    out_strata = []
    for rules in strata:
        by_head: dict[str, list] = {}
        head_atoms: dict[str, ast.Atom] = {}
        for rule in rules:
            by_head.setdefault(rule.head.pred, []).append(rule)
            head_atoms.setdefault(rule.head.pred, rule.head)
        ram_rules = []
        for head, drules in by_head.items():
            exprs = []
            for d in drules:
                bp = _BodyPlan(lowerer, dict(d.var_types), d.pos)
                plan, schema = bp.process(d.items)
                outputs = tuple(
                    ir.fold_slot(bp.slot_expr(arg, schema)) for arg in d.head.args
                )
                if _is_identity_projection(outputs, len(schema)):
                    exprs.append(plan)
                else:
                    exprs.append(ir.Project(plan, outputs))
            expr = exprs[0]
            for extra in exprs[1:]:
                expr = ir.Union(expr, extra)
            ram_rules.append(ir.Rule(head, expr))
        out_strata.append(ir.Stratum(ram_rules))
    program = ir.RaProgram(out_strata)
    idb = [r.head for s in program.strata for r in s.rules]
    return CompiledProgram(
        program=program,
        signatures=des.signatures,
        edb=list(des.facts),
        queries=list(des.queries),
        idb_relations=idb,
    )
