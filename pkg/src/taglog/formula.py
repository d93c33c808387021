"""DNF proof formulas, their k-truncated boolean algebra, and weighted
model counting with gradients.

A proof is a conjunction of signed literals over input-fact variables; a
formula is a set of proofs.  All operations keep at most k proofs, ranked
by proof probability (k=None disables truncation).  Model counting is by
recursive decomposition on the most frequent variable, with memoization on
sub-formulas; exclusion groups are counted as categorical choices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional

import numpy as np

from .dual import DualNumber, dual_add, dual_mult, dual_negate_from_one
from .errors import TaglogError


@dataclass(frozen=True, order=True)
class Literal:
    var: int
    positive: bool

    def negated(self) -> "Literal":
        return Literal(self.var, not self.positive)

    def __str__(self):
        return f"{'pos' if self.positive else 'neg'}({self.var})"


Proof = FrozenSet[Literal]


def proof_key(proof: Proof):
    """Canonical proof order: shorter proofs first, then lexicographic."""
    return (len(proof), tuple(sorted((l.var, l.positive) for l in proof)))


class DnfFormula:
    """An immutable set of proofs; set equality decides saturation."""

    __slots__ = ("proofs",)

    def __init__(self, proofs: Iterable[Proof] = ()):
        object.__setattr__(self, "proofs", frozenset(proofs))

    @property
    def is_false(self) -> bool:
        return not self.proofs

    @property
    def is_true_literal(self) -> bool:
        """Contains the empty proof (hence logically valid)."""
        return frozenset() in self.proofs

    def sorted_proofs(self) -> list[Proof]:
        return sorted(self.proofs, key=proof_key)

    def variables(self) -> set[int]:
        return {lit.var for proof in self.proofs for lit in proof}

    def __eq__(self, other):
        return isinstance(other, DnfFormula) and self.proofs == other.proofs

    def __hash__(self):
        return hash(self.proofs)

    def __str__(self):
        if self.is_false:
            return "{}"
        parts = []
        for proof in self.sorted_proofs():
            lits = ", ".join(str(l) for l in sorted(proof))
            parts.append("{" + lits + "}")
        return " ∨ ".join(parts)

    def __repr__(self):
        return f"DnfFormula({self})"


FALSE = DnfFormula()
TRUE = DnfFormula((frozenset(),))


class VariableMap:
    """Per-evaluation map from variable id to probability, basis gradient,
    and optional exclusion group."""

    def __init__(self, probs, groups: Optional[dict] = None, n: Optional[int] = None):
        self.probs = [float(p) for p in probs]
        self.groups = dict(groups or {})
        self.n = len(self.probs) if n is None else n
        for p in self.probs:
            if not (0.0 <= p <= 1.0):
                raise TaglogError(f"input probability {p} outside [0, 1]")
        self._members: dict[int, list[int]] = {}
        for var, grp in self.groups.items():
            self._members.setdefault(grp, []).append(var)
        for members in self._members.values():
            members.sort()

    def prob(self, i: int) -> float:
        return self.probs[i]

    def dual(self, i: int) -> DualNumber:
        return DualNumber.basis(self.probs[i], i, self.n)

    def group_of(self, i: int):
        return self.groups.get(i)

    def group_members(self, grp) -> list[int]:
        return self._members.get(grp, [])


def proof_conflicts(proof: Proof, groups: Optional[dict] = None) -> bool:
    """pos(i)/neg(i) in one proof, or (with exclusions) two positive
    literals whose variables share an exclusion group."""
    seen = {}
    for lit in proof:
        if lit.var in seen and seen[lit.var] != lit.positive:
            return True
        seen[lit.var] = lit.positive
    if groups:
        seen_groups = set()
        for lit in proof:
            if not lit.positive:
                continue
            grp = groups.get(lit.var)
            if grp is None:
                continue
            if grp in seen_groups:
                return True
            seen_groups.add(grp)
    return False


def proof_probability(proof: Proof, gamma: VariableMap) -> float:
    """Product of r_i for pos(i) and (1 - r_i) for neg(i); empty proof is 1."""
    p = 1.0
    for lit in proof:
        p *= gamma.prob(lit.var) if lit.positive else 1.0 - gamma.prob(lit.var)
    return p


def top_k(formula: DnfFormula, k: Optional[int], gamma: VariableMap) -> DnfFormula:
    """Keep the k highest-probability proofs; ties by canonical proof order."""
    if k is None or len(formula.proofs) <= k:
        return formula
    ranked = sorted(
        formula.proofs, key=lambda pr: (-proof_probability(pr, gamma), proof_key(pr))
    )
    return DnfFormula(ranked[:k])


def or_k(a: DnfFormula, b: DnfFormula, k: Optional[int], gamma: VariableMap) -> DnfFormula:
    return top_k(DnfFormula(a.proofs | b.proofs), k, gamma)


def and_k(
    a: DnfFormula,
    b: DnfFormula,
    k: Optional[int],
    gamma: VariableMap,
    exclusions: Optional[dict] = None,
) -> DnfFormula:
    out = set()
    for p1 in a.proofs:
        for p2 in b.proofs:
            merged = p1 | p2
            if not proof_conflicts(merged, exclusions):
                out.add(merged)
    return top_k(DnfFormula(out), k, gamma)


def not_k(
    a: DnfFormula,
    k: Optional[int],
    gamma: VariableMap,
    exclusions: Optional[dict] = None,
) -> DnfFormula:
    """Negate every literal to form a CNF, then distribute back to DNF.

    Partial proofs are pruned on conflict as soon as they appear, and
    truncated to k after each clause, bounding the blow-up at O(k·clauses).
    """
    clauses = [sorted((lit.negated() for lit in proof)) for proof in a.proofs]
    clauses.sort(key=lambda c: (len(c), [(l.var, l.positive) for l in c]))
    partials: set[Proof] = {frozenset()}
    for clause in clauses:
        nxt: set[Proof] = set()
        for partial in partials:
            for lit in clause:
                cand = partial | {lit}
                if not proof_conflicts(cand, exclusions):
                    nxt.add(cand)
        if k is not None and len(nxt) > k:
            nxt = set(top_k(DnfFormula(nxt), k, gamma).proofs)
        partials = nxt
        if not partials:
            break
    return DnfFormula(partials)


def _condition(proofs: frozenset, assignment: dict) -> frozenset:
    """Fix some variables; satisfied literals drop out, falsified proofs drop."""
    out = set()
    for proof in proofs:
        keep = []
        dead = False
        for lit in proof:
            if lit.var in assignment:
                if lit.positive != assignment[lit.var]:
                    dead = True
                    break
            else:
                keep.append(lit)
        if not dead:
            out.add(frozenset(keep))
    return frozenset(out)


def wmc(formula: DnfFormula, gamma: VariableMap) -> DualNumber:
    """Exact probability (with gradient) that a random assignment drawn per
    the variable map satisfies the formula.

    Ungrouped variables are independent Bernoulli draws; an exclusion group
    is one categorical draw over its members plus a residual none-of-them
    outcome with probability 1 - sum(r_i), clipped at 0.
    """
    n = gamma.n
    memo: dict[frozenset, DualNumber] = {}

    def residual(members: list[int]) -> DualNumber:
        p = 1.0
        g = np.zeros(n)
        for m in members:
            p -= gamma.prob(m)
            g[m] -= 1.0
        return DualNumber(max(p, 0.0), g)

    def count(proofs: frozenset) -> DualNumber:
        if not proofs:
            return DualNumber.zero(n)
        if frozenset() in proofs:
            return DualNumber.one(n)
        cached = memo.get(proofs)
        if cached is not None:
            return cached
        freq: dict[int, int] = {}
        for proof in proofs:
            for lit in proof:
                freq[lit.var] = freq.get(lit.var, 0) + 1
        var = min(freq, key=lambda v: (-freq[v], v))
        grp = gamma.group_of(var)
        if grp is None:
            w = gamma.dual(var)
            pos = dual_mult(w, count(_condition(proofs, {var: True})))
            neg = dual_mult(
                dual_negate_from_one(w), count(_condition(proofs, {var: False}))
            )
            result = dual_add(pos, neg)
        else:
            present = sorted(
                v for v in {l.var for pr in proofs for l in pr}
                if gamma.group_of(v) == grp
            )
            result = DualNumber.zero(n)
            for m in present:
                assign = {v: (v == m) for v in present}
                result = dual_add(
                    result, dual_mult(gamma.dual(m), count(_condition(proofs, assign)))
                )
            rest = _condition(proofs, {v: False for v in present})
            result = dual_add(result, dual_mult(residual(present), count(rest)))
        memo[proofs] = result
        return result

    return count(formula.proofs)


def max_proof_probability(formula: DnfFormula, gamma: VariableMap) -> float:
    """Probability of the single most likely proof; 0 for the empty formula."""
    if formula.is_false:
        return 0.0
    return max(proof_probability(pr, gamma) for pr in formula.proofs)
