"""The algebraic provenance interface and the built-in implementations.

A provenance supplies (zero, one, add, mult, negate, saturated) plus the
runtime extensions discard/weight and the boundary functions tag/recover.
Instances are bound at creation to the run's input probabilities (and, for
exclusion-aware counting, the exclusion groups), and are otherwise
stateless; tags are plain values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import formula as fm
from .dual import (
    DualNumber,
    dual_add,
    dual_clamp,
    dual_max,
    dual_min,
    dual_mult,
    dual_negate_from_one,
)
from .errors import ProvenanceError


@dataclass(frozen=True)
class InputTag:
    """External tag on an input fact: nothing, a probability, or a
    probability plus an exclusion-group id."""

    prob: Optional[float] = None
    exclusion: Optional[int] = None

    @property
    def is_tagged(self) -> bool:
        return self.prob is not None


UNTAGGED = InputTag()


@dataclass(frozen=True)
class InputFact:
    """One extensional fact with its external tag."""

    relation: str
    tuple: tuple
    tag: InputTag = UNTAGGED


class Provenance:
    name = "abstract"
    absorptive = True
    differentiable = False

    # Subclasses define: zero, one, add, mult, negate, saturated,
    # discard, weight, tag, recover.

    def negate(self, t):
        raise ProvenanceError(f"provenance {self.name} does not support negation")

    def discard(self, t) -> bool:
        return False

    def tag_many(self, tagged_inputs):
        """Apply tag() to (input_tag, var_id) pairs."""
        return [self.tag(it, vid) for it, vid in tagged_inputs]


class UnitProvenance(Provenance):
    """Recovers classical untagged Datalog.

    Internally boolean so that negation and the zero-overwrite have a
    distinct false element; false-tagged facts are discarded, which is
    exactly the classical removal of tuples.
    """

    name = "unit"

    zero = False
    one = True

    def add(self, a, b):
        return a or b

    def mult(self, a, b):
        return a and b

    def negate(self, t):
        return not t

    def saturated(self, a, b):
        return a == b

    def discard(self, t):
        return not t

    def weight(self, t):
        return 1.0

    def tag(self, input_tag: InputTag, var_id):
        return True

    def recover(self, t):
        return None


class MinMaxProbProvenance(Provenance):
    name = "minmaxprob"

    zero = 0.0
    one = 1.0

    def __init__(self, eps: float = 0.0):
        self.eps = eps

    def add(self, a, b):
        return max(a, b)

    def mult(self, a, b):
        return min(a, b)

    def negate(self, t):
        return 1.0 - t

    def saturated(self, a, b):
        return a == b

    def discard(self, t):
        return t < self.eps

    def weight(self, t):
        return t

    def tag(self, input_tag: InputTag, var_id):
        return input_tag.prob if input_tag.is_tagged else 1.0

    def recover(self, t):
        return t


class AddMultProbProvenance(Provenance):
    """Probabilities propagated with clamped sum and product.

    Saturation always holds, so fixpoints stop as soon as the fact set is
    stable; unsuitable for deep recursion but cheap.
    """

    name = "addmultprob"
    absorptive = False

    zero = 0.0
    one = 1.0

    def __init__(self, eps: float = 0.0):
        self.eps = eps

    def add(self, a, b):
        return min(1.0, a + b)

    def mult(self, a, b):
        return a * b

    def negate(self, t):
        return 1.0 - t

    def saturated(self, a, b):
        return True

    def discard(self, t):
        return t < self.eps

    def weight(self, t):
        return t

    def tag(self, input_tag: InputTag, var_id):
        return input_tag.prob if input_tag.is_tagged else 1.0

    def recover(self, t):
        return t


class _ProofsBase(Provenance):
    """Shared machinery for the proof-formula provenances."""

    def __init__(self, gamma: fm.VariableMap, k: Optional[int]):
        self.gamma = gamma
        self.k = k
        self.exclusions: Optional[dict] = None

    zero = fm.FALSE
    one = fm.TRUE

    def add(self, a, b):
        return fm.or_k(a, b, self.k, self.gamma)

    def mult(self, a, b):
        return fm.and_k(a, b, self.k, self.gamma, self.exclusions)

    def negate(self, t):
        return fm.not_k(t, self.k, self.gamma, self.exclusions)

    def saturated(self, a, b):
        return a == b

    def discard(self, t):
        return t.is_false

    def weight(self, t):
        # Probability of the best single proof: monotone and cheap, which
        # is all samplers need for ordering.
        return fm.max_proof_probability(t, self.gamma)

    def tag(self, input_tag: InputTag, var_id):
        if not input_tag.is_tagged:
            return fm.TRUE
        return fm.DnfFormula((frozenset((fm.Literal(var_id, True),)),))


class TopKProofsProvenance(_ProofsBase):
    name = "topkproofs"

    def recover(self, t):
        return fm.wmc(t, self.gamma).prob


class DiffTopKProofsProvenance(_ProofsBase):
    name = "difftopkproofs"
    differentiable = True

    def recover(self, t):
        return fm.wmc(t, self.gamma)


class DiffTopKProofsMEProvenance(_ProofsBase):
    """diff-top-k-proofs with mutually exclusive inputs: proofs holding two
    positive literals of one exclusion group are invalid, and model counting
    treats each group as a categorical choice."""

    name = "difftopkproofsme"
    differentiable = True

    def __init__(self, gamma: fm.VariableMap, k: Optional[int]):
        super().__init__(gamma, k)
        self.exclusions = gamma.groups or None

    def recover(self, t):
        return fm.wmc(t, self.gamma)


class _DualBase(Provenance):
    differentiable = True

    def __init__(self, n: int, eps: float = 0.0):
        self.n = n
        self.eps = eps
        self.zero = DualNumber.zero(n)
        self.one = DualNumber.one(n)

    def negate(self, t):
        return dual_negate_from_one(t)

    def discard(self, t):
        return t.prob < self.eps

    def weight(self, t):
        return t.prob

    def tag(self, input_tag: InputTag, var_id):
        if not input_tag.is_tagged:
            return DualNumber.one(self.n)
        return DualNumber.basis(input_tag.prob, var_id, self.n)

    def recover(self, t):
        return t


class DiffMinMaxProbProvenance(_DualBase):
    name = "diffminmaxprob"

    def add(self, a, b):
        return dual_max(a, b)

    def mult(self, a, b):
        return dual_min(a, b)

    def saturated(self, a, b):
        # Probability part only, so gradients never affect termination.
        return a.prob == b.prob


class DiffAddMultProbProvenance(_DualBase):
    name = "diffaddmultprob"
    absorptive = False

    def add(self, a, b):
        return dual_clamp(dual_add(a, b))

    def mult(self, a, b):
        return dual_mult(a, b)

    def saturated(self, a, b):
        return True


PROVENANCE_NAMES = (
    "unit",
    "minmaxprob",
    "addmultprob",
    "topkproofs",
    "diffminmaxprob",
    "diffaddmultprob",
    "difftopkproofs",
    "difftopkproofsme",
)

PROOFS_PROVENANCES = {"topkproofs", "difftopkproofs", "difftopkproofsme"}


def make_provenance(
    name: str,
    probs=(),
    groups: Optional[dict] = None,
    k: Optional[int] = None,
    eps: float = 0.0,
) -> Provenance:
    """Build a provenance bound to this run's inputs.

    `probs` is the input probability vector (index = variable id); `groups`
    maps variable ids to exclusion-group ids (used only by the -me variant).
    """
    n = len(probs)
    if name == "unit":
        return UnitProvenance()
    if name == "minmaxprob":
        return MinMaxProbProvenance(eps)
    if name == "addmultprob":
        return AddMultProbProvenance(eps)
    if name == "diffminmaxprob":
        return DiffMinMaxProbProvenance(n, eps)
    if name == "diffaddmultprob":
        return DiffAddMultProbProvenance(n, eps)
    if name == "topkproofs":
        return TopKProofsProvenance(fm.VariableMap(probs), k)
    if name == "difftopkproofs":
        return DiffTopKProofsProvenance(fm.VariableMap(probs), k)
    if name == "difftopkproofsme":
        return DiffTopKProofsMEProvenance(fm.VariableMap(probs, groups), k)
    raise ProvenanceError(f"unknown provenance {name!r}")
