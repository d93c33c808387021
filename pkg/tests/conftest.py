"""Shared oracles and generators for the test suite.

Everything here is deliberately independent of the engine's own code
paths: model counting by assignment enumeration, reachability by BFS,
aggregation worlds by explicit subsets.
"""

from __future__ import annotations

import itertools
import random

import pytest

from taglog.formula import DnfFormula, Literal


def make_formula(proofs) -> DnfFormula:
    """proofs: iterable of iterables of (var, positive) pairs."""
    return DnfFormula(
        frozenset(Literal(v, s) for v, s in proof) for proof in proofs
    )


def formula_satisfied(proofs, assignment: dict) -> bool:
    for proof in proofs:
        if all(assignment[l.var] == l.positive for l in proof):
            return True
    return False


def enum_wmc(formula: DnfFormula, probs, groups=None) -> float:
    """Assignment-enumeration model count over the formula's variables.

    Ungrouped variables are independent Bernoullis.  Exclusion groups are
    categorical: at most one member true, outcome weights r_m plus a
    residual 1 - sum(r_m present) for none-of-the-present.
    """
    groups = groups or {}
    variables = sorted(formula.variables())
    free = [v for v in variables if v not in groups]
    grouped: dict = {}
    for v in variables:
        if v in groups:
            grouped.setdefault(groups[v], []).append(v)
    group_list = sorted(grouped.items())

    total = 0.0
    group_choices = []
    for _gid, members in group_list:
        choices = [(m, probs[m]) for m in members]
        choices.append((None, max(0.0, 1.0 - sum(probs[m] for m in members))))
        group_choices.append((members, choices))

    for free_bits in itertools.product([False, True], repeat=len(free)):
        w_free = 1.0
        assignment = {}
        for v, bit in zip(free, free_bits):
            assignment[v] = bit
            w_free *= probs[v] if bit else 1.0 - probs[v]
        for picks in itertools.product(*(c for _m, c in group_choices)):
            w = w_free
            for (members, _choices), (chosen, weight) in zip(group_choices, picks):
                w *= weight
                for m in members:
                    assignment[m] = m == chosen
            if formula_satisfied(formula.proofs, assignment):
                total += w
    return total


def brute_force_mmp_count(tags):
    """Max-over-worlds count tags for max-min-prob, by explicit subsets."""
    n = len(tags)
    best: dict[int, float] = {}
    for mask in range(1 << n):
        t = 1.0
        c = 0
        for i, tag in enumerate(tags):
            if mask >> i & 1:
                t = min(t, tag)
                c += 1
            else:
                t = min(t, 1.0 - tag)
        if c not in best or t > best[c]:
            best[c] = t
    return best


def transitive_closure(edges) -> set:
    closure = set(edges)
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in list(itertools.product(closure, closure)):
            if b == c and (a, d) not in closure:
                closure.add((a, d))
                changed = True
    return closure


def reachable_with_open(edges_on, open_nodes, sources) -> set:
    """Pairs (x, y): a path of on-edges from x to y stepping only into open
    nodes (matching path(x,y) = edge(x,y), open(y) and its recursion)."""
    adj: dict = {}
    for a, b in edges_on:
        if b in open_nodes:
            adj.setdefault(a, set()).add(b)
    pairs = set()
    for src in sources:
        seen = set()
        frontier = [src]
        while frontier:
            node = frontier.pop()
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        for y in seen:
            pairs.add((src, y))
    return pairs


class WorldProgram:
    """A random probabilistic reachability program plus its exact-by-
    enumeration oracle."""

    def __init__(self, rng: random.Random, with_negation=True, with_count=True,
                 max_nodes=5, max_prob_inputs=10):
        self.with_negation = with_negation
        self.with_count = with_count
        n_nodes = rng.randint(3, max_nodes)
        self.nodes = list(range(n_nodes))
        candidates = [
            (a, b) for a in self.nodes for b in self.nodes if a != b
        ]
        rng.shuffle(candidates)
        n_edges = rng.randint(2, min(len(candidates), 7))
        self.edges = sorted(candidates[:n_edges])
        self.prob_facts = []  # (relation, tuple, prob) in program order
        self.certain_edges = []
        budget = max_prob_inputs - (2 if with_negation else 0)
        for e in self.edges:
            if len(self.prob_facts) < budget and rng.random() < 0.8:
                self.prob_facts.append(("edge", e, round(rng.uniform(0.1, 0.9), 3)))
            else:
                self.certain_edges.append(e)
        self.blocked = []
        if with_negation:
            for b in rng.sample(self.nodes, min(2, len(self.nodes))):
                p = round(rng.uniform(0.1, 0.9), 3)
                self.blocked.append((b, p))
                self.prob_facts.append(("blocked", (b,), p))

    @property
    def n_inputs(self) -> int:
        return len(self.prob_facts)

    def source(self, overrides: dict | None = None) -> str:
        """Program text; overrides remaps (relation, tuple) -> prob."""
        overrides = overrides or {}
        lines = ["type edge(a: usize, b: usize)", "type node(a: usize)",
                 "type blocked(a: usize)"]
        for n in self.nodes:
            lines.append(f"rel node({n})")
        probs = {}
        for rel, tup, p in self.prob_facts:
            probs[(rel, tup)] = overrides.get((rel, tup), p)
        for rel, tup, _p in self.prob_facts:
            p = probs[(rel, tup)]
            args = ", ".join(str(v) for v in tup)
            lines.append(f"rel {p!r}::{rel}({args})")
        for a, b in self.certain_edges:
            lines.append(f"rel edge({a}, {b})")
        if self.with_negation:
            lines.append("rel open(x) = node(x), not blocked(x)")
            lines.append("rel path(x, y) = edge(x, y), open(y)")
            lines.append("rel path(x, z) = path(x, y), edge(y, z), open(z)")
        else:
            lines.append("rel path(x, y) = edge(x, y)")
            lines.append("rel path(x, z) = path(x, y), edge(y, z)")
        if self.with_count:
            lines.append("rel reach_count(n) = n := count(y: path(0, y))")
            lines.append("query reach_count")
        lines.append("query path")
        return "\n".join(lines) + "\n"

    def oracle(self, overrides: dict | None = None) -> dict:
        """Exact output probabilities by enumerating all 2^n worlds."""
        overrides = overrides or {}
        probs = [
            overrides.get((rel, tup), p) for rel, tup, p in self.prob_facts
        ]
        out: dict = {}
        n = len(self.prob_facts)
        for mask in range(1 << n):
            w = 1.0
            on = set()
            for i, ((rel, tup), p) in enumerate(
                zip(((r, t) for r, t, _ in self.prob_facts), probs)
            ):
                if mask >> i & 1:
                    w *= p
                    on.add((rel, tup))
                else:
                    w *= 1.0 - p
            edges_on = {t for (rel, t) in on if rel == "edge"}
            edges_on |= set(self.certain_edges)
            blocked_on = {t[0] for (rel, t) in on if rel == "blocked"}
            open_nodes = (
                set(self.nodes) - blocked_on
                if self.with_negation else set(self.nodes)
            )
            pairs = reachable_with_open(edges_on, open_nodes, self.nodes)
            for pair in pairs:
                key = ("path", pair)
                out[key] = out.get(key, 0.0) + w
            if self.with_count:
                c = sum(1 for (x, _y) in pairs if x == 0)
                key = ("reach_count", (c,))
                out[key] = out.get(key, 0.0) + w
        return {k: v for k, v in out.items() if v > 0.0}


@pytest.fixture
def rng():
    return random.Random(20240811)
