"""Executes algebra programs under tagged semantics.

Expression evaluation keeps each tuple at most once per set, merging
duplicate derivations with the provenance's disjunction as they appear;
rule evaluation three-way-merges new tuples with the existing relation;
strata iterate to a saturation-checked fixed point.  The whole pipeline
is: tag inputs, run strata in order, recover output tags.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ir
from .aggregates import WORLD_CAP_DEFAULT, evaluate_aggregate, evaluate_sample
from .errors import EvaluationAborted, TaglogError
from .functions import FAILED
from .ir import RaProgram, referenced_predicates
from .provenance import InputFact, make_provenance
from .values import Database, tuple_has_nan, tuple_key, untyped_tuple_key


@dataclass
class EvalOptions:
    provenance: str = "unit"
    k: Optional[int] = 3
    iter_limit: int = 2**20
    seed: int = 0
    discard_eps: float = 0.0
    world_cap: int = WORLD_CAP_DEFAULT
    naive: bool = False
    trace_facts: Sequence = ()


@dataclass
class EvalStats:
    iterations: list = field(default_factory=list)
    dropped_tuples: int = 0


@dataclass
class EvaluationResult:
    provenance: str
    outputs: dict  # relation -> list of (tuple, recovered tag)
    final_db: Database
    input_index: list  # variable id -> (relation, tuple)
    output_index: list  # output row -> (relation, tuple)
    y: np.ndarray
    jacobian: np.ndarray
    stats: EvalStats
    trace: dict

    def tuples(self, relation: str) -> list[tuple]:
        return [tup for tup, _ in self.outputs.get(relation, [])]

    def probability(self, relation: str, tup: tuple) -> float:
        for u, o in self.outputs.get(relation, []):
            if u == tup:
                return o.prob if hasattr(o, "prob") else o
        raise KeyError(f"{relation}{tup!r} not in outputs")

    def gradient(self, relation: str, tup: tuple) -> np.ndarray:
        for u, o in self.outputs.get(relation, []):
            if u == tup:
                return o.grad
        raise KeyError(f"{relation}{tup!r} not in outputs")


class _Ctx:
    def __init__(self, prov, options: EvalOptions):
        self.prov = prov
        self.iter_limit = options.iter_limit
        self.world_cap = options.world_cap
        self.naive = options.naive
        self.rng = random.Random(options.seed)
        self.dropped = 0
        self.sampler_cache: dict = {}
        self.trace_facts = tuple(options.trace_facts)
        self.trace = {key: [] for key in self.trace_facts}


def normalize_tagged(pairs, prov, apply_discard: bool = True) -> dict:
    """Merge duplicate tuples with the disjunction, then drop discarded tags."""
    merged: dict = {}
    for tup, tag in pairs:
        merged[tup] = prov.add(merged[tup], tag) if tup in merged else tag
    if not apply_discard:
        return merged
    return {u: t for u, t in merged.items() if not prov.discard(t)}


def eval_expr(expr, db: Database, ctx: _Ctx) -> dict:
    """Evaluate an algebra expression to {tuple: tag}.

    Results are treated as read-only; every operator builds fresh dicts
    except Pred, which exposes the live relation.
    """
    prov = ctx.prov
    kind = type(expr)
    if kind is ir.Pred:
        return db.lookup(expr.name)
    if kind is ir.EmptySet:
        return {}
    if kind is ir.ZeroOverwrite:
        return {u: prov.zero for u in eval_expr(expr.expr, db, ctx)}
    if kind is ir.OneOverwrite:
        return {u: prov.one for u in eval_expr(expr.expr, db, ctx)}
    if kind is ir.Select:
        out = {}
        for u, t in eval_expr(expr.expr, db, ctx).items():
            v = ir.eval_slot(expr.cond, u)
            if v is True:
                out[u] = t
            elif v is FAILED:
                ctx.dropped += 1
        return out
    if kind is ir.Project:
        out: dict = {}
        for u, t in eval_expr(expr.expr, db, ctx).items():
            vals = []
            ok = True
            for col in expr.outputs:
                v = ir.eval_slot(col, u)
                if v is FAILED:
                    ok = False
                    break
                vals.append(v)
            if not ok:
                ctx.dropped += 1
                continue
            tup = tuple(vals)
            out[tup] = prov.add(out[tup], t) if tup in out else t
        return out
    if kind is ir.Union:
        left = eval_expr(expr.left, db, ctx)
        out = dict(left)
        for u, t in eval_expr(expr.right, db, ctx).items():
            out[u] = prov.add(out[u], t) if u in out else t
        return out
    if kind is ir.Product:
        left = eval_expr(expr.left, db, ctx)
        right = eval_expr(expr.right, db, ctx)
        out = {}
        for u1, t1 in left.items():
            for u2, t2 in right.items():
                out[u1 + u2] = prov.mult(t1, t2)
        return out
    if kind is ir.Intersect:
        left = eval_expr(expr.left, db, ctx)
        right = eval_expr(expr.right, db, ctx)
        return {
            u: prov.mult(t, right[u]) for u, t in left.items() if u in right
        }
    if kind is ir.NaturalJoin:
        left = eval_expr(expr.left, db, ctx)
        right = eval_expr(expr.right, db, ctx)
        k = expr.key_len
        index: dict = {}
        for u2, t2 in right.items():
            index.setdefault(u2[:k], []).append((u2[k:], t2))
        out = {}
        for u1, t1 in left.items():
            for rest, t2 in index.get(u1[:k], ()):
                out[u1 + rest] = prov.mult(t1, t2)
        return out
    if kind is ir.Difference:
        left = eval_expr(expr.left, db, ctx)
        right = eval_expr(expr.right, db, ctx)
        out = {}
        for u, t1 in left.items():
            if u in right:
                out[u] = prov.mult(t1, prov.negate(right[u]))
            else:
                out[u] = t1
        return out
    if kind is ir.AntiJoin:
        left = eval_expr(expr.left, db, ctx)
        right = eval_expr(expr.right, db, ctx)
        k = expr.key_len
        out = {}
        for u, t1 in left.items():
            key = u[:k]
            if key in right:
                out[u] = prov.mult(t1, prov.negate(right[key]))
            else:
                out[u] = t1
        return out
    if kind is ir.Aggregate:
        body = eval_expr(expr.expr, db, ctx)
        return evaluate_aggregate(
            expr.spec, {(): prov.one}, body, prov, ctx.world_cap
        )
    if kind is ir.GroupByAggregate:
        groups = eval_expr(expr.groups, db, ctx)
        body = eval_expr(expr.expr, db, ctx)
        return evaluate_aggregate(expr.spec, groups, body, prov, ctx.world_cap)
    if kind is ir.Sample:
        cached = ctx.sampler_cache.get(id(expr))
        if cached is None:
            body = eval_expr(expr.expr, db, ctx)
            cached = evaluate_sample(expr.spec, {(): prov.one}, body, prov, ctx.rng)
            ctx.sampler_cache[id(expr)] = cached
        return cached
    if kind is ir.GroupBySample:
        cached = ctx.sampler_cache.get(id(expr))
        if cached is None:
            groups = eval_expr(expr.groups, db, ctx)
            body = eval_expr(expr.expr, db, ctx)
            cached = evaluate_sample(expr.spec, groups, body, prov, ctx.rng)
            ctx.sampler_cache[id(expr)] = cached
        return cached
    raise TypeError(f"not an algebra expression: {expr!r}")


def eval_rule(rule: ir.Rule, db: Database, ctx: _Ctx) -> dict:
    """Three-way merge of old facts under the head with normalized new tuples."""
    new = normalize_tagged(eval_expr(rule.expr, db, ctx).items(), ctx.prov)
    return _merge_rule(db.lookup(rule.head), new, ctx.prov)


def _merge_rule(old: dict, new: dict, prov) -> dict:
    out = dict(old)
    for u, t in new.items():
        out[u] = prov.add(out[u], t) if u in out else t
    return out


def _saturated(old_db: Database, new_db: Database, heads, prov) -> bool:
    for head in heads:
        old = old_db.lookup(head)
        for u, t_new in new_db.lookup(head).items():
            t_old = old.get(u)
            if t_old is None or not prov.saturated(t_old, t_new):
                return False
    return True


def eval_stratum(
    stratum: ir.Stratum, db: Database, ctx: _Ctx, index: int = 0
) -> tuple[Database, int]:
    """Iterate the stratum's rules to the saturation fixed point.

    Returns the first iterate whose successor is saturated against it,
    along with the number of rule-set evaluations performed.  Rule bodies
    are re-evaluated only when a predicate they reference has changed since
    their last evaluation (pure memoization, so results are identical to
    naive iteration, which `ctx.naive` forces for oracle runs).
    """
    prov = ctx.prov
    ctx.sampler_cache.clear()
    heads = [r.head for r in stratum.rules]
    deps = {id(r): sorted(referenced_predicates(r.expr)) for r in stratum.rules}
    versions: dict = {}
    body_cache: dict = {}
    step_idx = 0

    def step(cur: Database) -> Database:
        nonlocal step_idx
        step_idx += 1
        results = {}
        for rule in stratum.rules:
            body = None
            if not ctx.naive:
                cached = body_cache.get(id(rule))
                if cached is not None and all(
                    versions.get(d, 0) == cached[1][d] for d in deps[id(rule)]
                ):
                    body = cached[0]
            if body is None:
                body = normalize_tagged(eval_expr(rule.expr, cur, ctx).items(), prov)
                body_cache[id(rule)] = (
                    body,
                    {d: versions.get(d, 0) for d in deps[id(rule)]},
                )
            merged = _merge_rule(cur.lookup(rule.head), body, prov)
            results[rule.head] = merged
        new = cur.copy()
        for head, facts in results.items():
            if facts != cur.lookup(head):
                versions[head] = step_idx
            new.relations[head] = facts
        return new

    def record(snapshot: Database):
        for rel, tup in ctx.trace_facts:
            ctx.trace[(rel, tup)].append(snapshot.lookup(rel).get(tup))

    prev = step(db)
    iterations = 1
    record(prev)
    while True:
        if iterations >= ctx.iter_limit:
            raise EvaluationAborted(
                f"stratum {index} exceeded the iteration limit of {ctx.iter_limit}"
            )
        nxt = step(prev)
        iterations += 1
        record(nxt)
        if _saturated(prev, nxt, heads, prov):
            return prev, iterations
        prev = nxt


def evaluate_program(
    program: RaProgram,
    edb: Sequence[InputFact],
    options: EvalOptions,
    signatures: Optional[dict] = None,
    output_relations: Optional[Sequence[str]] = None,
) -> EvaluationResult:
    """Tag the inputs, run every stratum in order, recover declared outputs.

    Variable ids for probabilistic inputs follow the order of `edb`, which
    the frontend emits in file order; gradients index into that order.
    """
    probs: list[float] = []
    groups: dict = {}
    input_index: list = []
    var_ids: list = []
    for fact in edb:
        vid = None
        if fact.tag.is_tagged:
            p = fact.tag.prob
            if not (0.0 <= p <= 1.0):
                raise TaglogError(
                    f"probability {p} outside [0, 1] on {fact.relation}{fact.tuple!r}"
                )
            vid = len(probs)
            probs.append(p)
            if fact.tag.exclusion is not None:
                groups[vid] = fact.tag.exclusion
            input_index.append((fact.relation, fact.tuple))
        var_ids.append(vid)

    prov = make_provenance(
        options.provenance, probs, groups, k=options.k, eps=options.discard_eps
    )
    ctx = _Ctx(prov, options)

    db = Database(signatures or {})
    for fact, vid in zip(edb, var_ids):
        if tuple_has_nan(fact.tuple):
            ctx.dropped += 1
            continue
        tag = prov.tag(fact.tag, vid)
        rel = db.relations.setdefault(fact.relation, {})
        rel[fact.tuple] = (
            prov.add(rel[fact.tuple], tag) if fact.tuple in rel else tag
        )
    for name in list(db.relations):
        db.relations[name] = {
            u: t for u, t in db.relations[name].items() if not prov.discard(t)
        }

    stats = EvalStats()
    for idx, stratum in enumerate(program.strata):
        db, iterations = eval_stratum(stratum, db, ctx, idx)
        stats.iterations.append(iterations)
    stats.dropped_tuples = ctx.dropped

    outputs: dict = {}
    output_index: list = []
    y_rows: list = []
    jac_rows: list = []
    n = len(probs)
    for rel in sorted(output_relations or ()):
        entries = []
        facts = db.lookup(rel)
        sig = db.signatures.get(rel)
        order = (
            sorted(facts, key=lambda t: tuple_key(sig.col_types, t))
            if sig is not None
            else sorted(facts, key=untyped_tuple_key)
        )
        for tup in order:
            recovered = prov.recover(facts[tup])
            entries.append((tup, recovered))
            if prov.differentiable:
                output_index.append((rel, tup))
                y_rows.append(recovered.prob)
                jac_rows.append(recovered.grad)
        outputs[rel] = entries
    y = np.array(y_rows) if y_rows else np.zeros(0)
    jacobian = np.array(jac_rows) if jac_rows else np.zeros((0, n))
    return EvaluationResult(
        provenance=options.provenance,
        outputs=outputs,
        final_db=db,
        input_index=input_index,
        output_index=output_index,
        y=y,
        jacobian=jacobian,
        stats=stats,
        trace=ctx.trace,
    )
