"""Stratification: dependency analysis and topological ordering of the
strongly connected components of the relation graph.

Negative and aggregated dependencies must cross strata forward; a cycle
through either is a compile error.
"""

from __future__ import annotations

from ..errors import StratificationError
from . import ast
from .desugar import DesugaredProgram, DRule

POSITIVE, NEGATIVE, AGGREGATED = "positive", "negative", "aggregated"


def _atoms_in(f: ast.Formula):
    if isinstance(f, ast.Atom):
        yield f, POSITIVE
    elif isinstance(f, ast.NegAtom):
        yield f.atom, NEGATIVE
    elif isinstance(f, (ast.Conj, ast.Disj, ast.Implies)):
        yield from _atoms_in(f.left)
        yield from _atoms_in(f.right)
    elif isinstance(f, ast.Reduce):
        for atom, _ in _atoms_in(f.body):
            yield atom, AGGREGATED
        if f.group_body is not None:
            for atom, _ in _atoms_in(f.group_body):
                yield atom, AGGREGATED


def rule_dependencies(rule: DRule):
    """(predicate, label) pairs the rule's head depends on."""
    for item in rule.items:
        if isinstance(item, ast.Constraint):
            continue
        yield from _atoms_in(item)


def stratify(des: DesugaredProgram) -> list[list[DRule]]:
    """Order rules into strata; raises if negation or aggregation sits on a
    dependency cycle."""
    nodes: list[str] = []
    seen = set()

    def add_node(name: str):
        if name not in seen:
            seen.add(name)
            nodes.append(name)

    edges: dict[str, list] = {}
    for rule in des.rules:
        add_node(rule.head.pred)
        for atom, label in rule_dependencies(rule):
            add_node(atom.pred)
            edges.setdefault(rule.head.pred, []).append((atom.pred, label))
    for fact in des.facts:
        add_node(fact.relation)

    # Tarjan over head -> dependency edges; components pop dependencies-first.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: dict[str, bool] = {}
    stack: list[str] = []
    scc_of: dict[str, int] = {}
    order: list[list[str]] = []
    counter = [0]

    def strongconnect(v: str):
        work = [(v, 0)]
        while work:
            node, pi = work[-1]
            if pi == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            deps = edges.get(node, [])
            while pi < len(deps):
                w = deps[pi][0]
                pi += 1
                if w not in index:
                    work[-1] = (node, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack.get(w):
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc_of[w] = len(order)
                    comp.append(w)
                    if w == node:
                        break
                order.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])

    for v in nodes:
        if v not in index:
            strongconnect(v)

    # Reject negative/aggregated edges inside one component.
    for rule in des.rules:
        head = rule.head.pred
        for atom, label in rule_dependencies(rule):
            if label == POSITIVE:
                continue
            if scc_of[atom.pred] == scc_of[head]:
                line, col = rule.pos if rule.pos else (None, None)
                if label == NEGATIVE:
                    raise StratificationError(
                        f"the negation is not stratified: {head!r} depends "
                        f"negatively on {atom.pred!r} within a recursive cycle",
                        line, col,
                    )
                raise StratificationError(
                    f"the aggregation is not stratified: {head!r} aggregates "
                    f"over {atom.pred!r} within a recursive cycle",
                    line, col,
                )

    rules_by_scc: dict[int, list[DRule]] = {}
    for rule in des.rules:
        rules_by_scc.setdefault(scc_of[rule.head.pred], []).append(rule)
    strata = []
    for comp_id in range(len(order)):
        members = rules_by_scc.get(comp_id)
        if members:
            strata.append(members)
    return strata
