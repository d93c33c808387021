"""Primitive values, tuples, tagged facts, and databases.

Runtime tuples are plain Python tuples of payloads (bool/int/float/str);
the primitive type of every column is known statically, so dtypes live in
relation signatures rather than on each value.  This module owns the
canonical total order used everywhere a deterministic iteration order is
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import TaglogError

SIGNED_INT_TYPES = ("i8", "i16", "i32", "i64", "isize")
UNSIGNED_INT_TYPES = ("u8", "u16", "u32", "u64", "usize")
INT_TYPES = SIGNED_INT_TYPES + UNSIGNED_INT_TYPES
FLOAT_TYPES = ("f32", "f64")
NUMERIC_TYPES = INT_TYPES + FLOAT_TYPES
ALL_TYPES = ("bool", "char") + INT_TYPES + FLOAT_TYPES + ("String",)

# isize/usize are pointer-sized; fixed at 64 bits here.
_INT_BITS = {
    "i8": 8, "i16": 16, "i32": 32, "i64": 64, "isize": 64,
    "u8": 8, "u16": 16, "u32": 32, "u64": 64, "usize": 64,
}

INT_RANGE = {}
for _name, _bits in _INT_BITS.items():
    if _name.startswith("i"):
        INT_RANGE[_name] = (-(1 << (_bits - 1)), (1 << (_bits - 1)) - 1)
    else:
        INT_RANGE[_name] = (0, (1 << _bits) - 1)

# Cross-type rank: booleans < chars < integers < floats < strings.
_TYPE_RANK = {"bool": 0, "char": 1}
for _name in INT_TYPES:
    _TYPE_RANK[_name] = 2
for _name in FLOAT_TYPES:
    _TYPE_RANK[_name] = 3
_TYPE_RANK["String"] = 4

_TYPE_INDEX = {name: i for i, name in enumerate(ALL_TYPES)}


def is_int_type(name: str) -> bool:
    return name in INT_RANGE


def is_float_type(name: str) -> bool:
    return name in FLOAT_TYPES


def in_range(dtype: str, n: int) -> bool:
    lo, hi = INT_RANGE[dtype]
    return lo <= n <= hi


def value_key(dtype: str, payload):
    """Sort key giving a total order over well-typed values of any dtype.

    Payloads only compare against payloads of the same rank, so the key is
    safe for heterogeneous collections.  NaN is excluded by construction
    (never stored); -0.0 and +0.0 compare equal.
    """
    rank = _TYPE_RANK[dtype]
    if rank == 0:
        payload = bool(payload)
    elif rank == 2:
        payload = int(payload)
    elif rank == 3:
        payload = float(payload) + 0.0  # normalizes -0.0
    return (rank, payload, _TYPE_INDEX[dtype])


def tuple_key(signature: tuple[str, ...], tup: tuple):
    """Lexicographic sort key for one tuple under its column signature."""
    return tuple(value_key(d, v) for d, v in zip(signature, tup))


@dataclass(frozen=True)
class Value:
    """A payload together with its concrete primitive type.

    Used at language boundaries (literals, CSV cells); the evaluator strips
    values down to raw payloads once types are statically known.
    """

    dtype: str
    payload: object

    def __post_init__(self):
        if self.dtype not in _TYPE_RANK:
            raise TaglogError(f"unknown primitive type {self.dtype!r}")

    def key(self):
        return value_key(self.dtype, self.payload)

    def __lt__(self, other: "Value"):
        return self.key() < other.key()

    def __le__(self, other: "Value"):
        return self.key() <= other.key()


def tuple_has_nan(tup: tuple) -> bool:
    return any(isinstance(v, float) and math.isnan(v) for v in tup)


def contains(tagged_tuples, u: tuple) -> bool:
    """True iff some tag t has (t :: u) in the set, ignoring the tag."""
    if isinstance(tagged_tuples, dict):
        return u in tagged_tuples
    return any(tup == u for tup, _tag in tagged_tuples)


@dataclass(frozen=True)
class TaggedFact:
    predicate: str
    tuple: tuple
    tag: object


@dataclass
class RelationSignature:
    name: str
    col_types: tuple[str, ...]
    col_names: tuple | None = None

    @property
    def arity(self) -> int:
        return len(self.col_types)


class Database:
    """Map from relation name to {tuple: tag}.

    At most one entry per (predicate, tuple); merging duplicate tuples is
    the caller's job (the evaluator merges with the provenance's disjunction).
    Databases are plain containers; sealing is by convention (the evaluator
    copies before mutating shared snapshots).
    """

    def __init__(self, signatures: dict[str, RelationSignature] | None = None):
        self.relations: dict[str, dict[tuple, object]] = {}
        self.signatures: dict[str, RelationSignature] = dict(signatures or {})

    def insert(self, predicate: str, tup: tuple, tag) -> bool:
        """Insert one fact; NaN-carrying tuples are discarded. Returns True if kept."""
        if tuple_has_nan(tup):
            return False
        self.relations.setdefault(predicate, {})[tup] = tag
        return True

    def lookup(self, predicate: str) -> dict[tuple, object]:
        """All tagged tuples under the predicate; empty if unknown."""
        return self.relations.get(predicate, {})

    def facts(self) -> Iterator[TaggedFact]:
        for pred in self.relations:
            for tup, tag in self.relations[pred].items():
                yield TaggedFact(pred, tup, tag)

    def sorted_tuples(self, predicate: str) -> list[tuple]:
        rel = self.relations.get(predicate, {})
        sig = self.signatures.get(predicate)
        if sig is not None:
            return sorted(rel, key=lambda t: tuple_key(sig.col_types, t))
        return sorted(rel, key=_untyped_tuple_key)

    def copy(self) -> "Database":
        db = Database(self.signatures)
        db.relations = {p: dict(rel) for p, rel in self.relations.items()}
        return db

    def __contains__(self, predicate: str) -> bool:
        return predicate in self.relations


def _untyped_value_key(v):
    # Fallback when no signature is at hand: rank from the Python type.
    # bool before int matters: isinstance(True, int) holds.
    if isinstance(v, bool):
        return (0, v, 0)
    if isinstance(v, int):
        return (2, v, 0)
    if isinstance(v, float):
        return (3, v + 0.0, 0)
    return (4, str(v), 0)


def _untyped_tuple_key(tup: tuple):
    return tuple(_untyped_value_key(v) for v in tup)


def untyped_tuple_key(tup: tuple):
    """Deterministic order for tuples when no signature is available."""
    return _untyped_tuple_key(tup)


def format_value(dtype: str | None, payload) -> str:
    """Canonical textual form of a payload (used by casts-to-string and printing)."""
    if isinstance(payload, bool):
        return "true" if payload else "false"
    if isinstance(payload, float):
        if payload == math.inf:
            return "inf"
        if payload == -math.inf:
            return "-inf"
        return repr(payload)
    if isinstance(payload, str):
        if dtype == "char":
            return payload
        return payload
    return str(payload)


def render_value(dtype: str | None, payload) -> str:
    """Textual form used in fact output: strings quoted, chars quoted."""
    if isinstance(payload, bool):
        return "true" if payload else "false"
    if isinstance(payload, str):
        if dtype == "char":
            return "'" + payload + "'"
        return '"' + payload + '"'
    if isinstance(payload, float):
        return repr(payload)
    return str(payload)
