"""Dual numbers: a probability paired with its gradient over the inputs.

The gradient is a dense vector whose length equals the number of
probabilistic input facts in the current evaluation.  Selection operations
(min/max) return one of their arguments unchanged, never a blend, so the
gradient always traces back to concrete inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import TaglogError


class DualNumber:
    __slots__ = ("prob", "grad")

    def __init__(self, prob: float, grad: np.ndarray):
        self.prob = float(prob)
        self.grad = grad

    @staticmethod
    def zero(n: int) -> "DualNumber":
        return DualNumber(0.0, np.zeros(n))

    @staticmethod
    def one(n: int) -> "DualNumber":
        return DualNumber(1.0, np.zeros(n))

    @staticmethod
    def basis(prob: float, i: int, n: int) -> "DualNumber":
        g = np.zeros(n)
        g[i] = 1.0
        return DualNumber(prob, g)

    def __eq__(self, other):
        return (
            isinstance(other, DualNumber)
            and self.prob == other.prob
            and np.array_equal(self.grad, other.grad)
        )

    def __hash__(self):
        return hash((self.prob, self.grad.tobytes()))

    def __repr__(self):
        return f"DualNumber({self.prob!r}, {self.grad.tolist()!r})"


def _check_dims(a: DualNumber, b: DualNumber):
    if a.grad.shape != b.grad.shape:
        raise TaglogError(
            f"gradient length mismatch: {a.grad.shape} vs {b.grad.shape}"
        )


def dual_add(a: DualNumber, b: DualNumber) -> DualNumber:
    """Componentwise sum; no clamping (clamp is separate)."""
    _check_dims(a, b)
    return DualNumber(a.prob + b.prob, a.grad + b.grad)


def dual_sub(a: DualNumber, b: DualNumber) -> DualNumber:
    _check_dims(a, b)
    return DualNumber(a.prob - b.prob, a.grad - b.grad)


def dual_mult(a: DualNumber, b: DualNumber) -> DualNumber:
    """Product rule: (a·b, b·∇a + a·∇b)."""
    _check_dims(a, b)
    return DualNumber(a.prob * b.prob, b.prob * a.grad + a.prob * b.grad)


def dual_min(a: DualNumber, b: DualNumber) -> DualNumber:
    """The argument with the smaller probability; first argument on ties."""
    _check_dims(a, b)
    return b if b.prob < a.prob else a


def dual_max(a: DualNumber, b: DualNumber) -> DualNumber:
    """The argument with the larger probability; first argument on ties."""
    _check_dims(a, b)
    return b if b.prob > a.prob else a


def dual_clamp(a: DualNumber) -> DualNumber:
    """Clip the probability to [0, 1]; the gradient passes through unchanged."""
    if a.prob < 0.0:
        return DualNumber(0.0, a.grad)
    if a.prob > 1.0:
        return DualNumber(1.0, a.grad)
    return a


def dual_negate_from_one(a: DualNumber) -> DualNumber:
    """1̂ - a, i.e. (1 - p, -∇p)."""
    return DualNumber(1.0 - a.prob, -a.grad)
