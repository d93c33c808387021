"""Built-in foreign functions: arithmetic, comparison, casts, string ops,
hashing.

Every operation either returns a value or the FAILED sentinel; a failure
(division by zero, overflow, invalid cast, NaN production) drops the
affected tuple upstream instead of raising.  All functions are pure and
deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .values import (
    FLOAT_TYPES,
    INT_RANGE,
    NUMERIC_TYPES,
    SIGNED_INT_TYPES,
    format_value,
    in_range,
    is_float_type,
    is_int_type,
)

FAILED = object()

ARITH_OPS = ("+", "-", "*", "/", "%")
BOOL_OPS = ("&&", "||")
EQ_OPS = ("==", "!=")
ORD_OPS = ("<", "<=", ">", ">=")
ORDERABLE_TYPES = NUMERIC_TYPES + ("char", "String")


def _f32(x: float) -> float:
    return float(np.float32(x))


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _float_result(dtype: str, x: float):
    if dtype == "f32":
        x = _f32(x)
    if math.isnan(x):
        return FAILED
    return x


def apply_binop(op: str, dtype: str, a, b):
    """Apply a binary operator whose operands both have type `dtype`."""
    if op in EQ_OPS:
        return (a == b) if op == "==" else (a != b)
    if op in ORD_OPS:
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    if op in BOOL_OPS:
        return (a and b) if op == "&&" else (a or b)
    if is_int_type(dtype):
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if b == 0:
                return FAILED
            r = _trunc_div(a, b)
        else:
            if b == 0:
                return FAILED
            r = a - _trunc_div(a, b) * b
        return r if in_range(dtype, r) else FAILED
    # float arithmetic: IEEE, so x/0 is ±inf and only NaN fails
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0.0:
            r = math.inf if a > 0 else (-math.inf if a < 0 else math.nan)
        else:
            r = a / b
    else:
        r = math.fmod(a, b) if b != 0.0 else math.nan
    return _float_result(dtype, r)


def apply_unop(op: str, dtype: str, a):
    if op == "!":
        return not a
    # unary minus
    if is_int_type(dtype):
        r = -a
        return r if in_range(dtype, r) else FAILED
    return _float_result(dtype, -a)


def binop_result_type(op: str, dtype: str):
    """Result type of `op` on two operands of `dtype`, or None if inadmissible."""
    if op in ARITH_OPS:
        return dtype if dtype in NUMERIC_TYPES else None
    if op in BOOL_OPS:
        return "bool" if dtype == "bool" else None
    if op in EQ_OPS:
        return "bool"
    if op in ORD_OPS:
        return "bool" if dtype in ORDERABLE_TYPES else None
    return None


def unop_result_type(op: str, dtype: str):
    if op == "!":
        return "bool" if dtype == "bool" else None
    if op == "-":
        return dtype if dtype in SIGNED_INT_TYPES + FLOAT_TYPES else None
    return None


def cast_admissible(src: str, dst: str) -> bool:
    if src == dst:
        return True
    if dst == "String":
        return True
    return src in NUMERIC_TYPES and dst in NUMERIC_TYPES


def apply_cast(src: str, dst: str, v):
    if src == dst:
        return v
    if dst == "String":
        return format_value(src, v)
    if is_int_type(src):
        if is_int_type(dst):
            return v if in_range(dst, v) else FAILED
        return _float_result(dst, float(v))
    # float source
    if is_float_type(dst):
        return _float_result(dst, v)
    if math.isnan(v) or math.isinf(v):
        return FAILED
    r = math.trunc(v)
    return r if in_range(dst, r) else FAILED


# --- $-functions ------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = (1 << 64) - 1


def _fnv1a_64(h: int, data: bytes) -> int:
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64_MASK
    return h


def stable_hash(arg_dtypes, args) -> int:
    """64-bit FNV-1a over `dtype US text RS` per argument.

    The encoding is fixed so hashes are stable across runs and platforms.
    """
    h = _FNV_OFFSET
    for dtype, v in zip(arg_dtypes, args):
        h = _fnv1a_64(h, dtype.encode("utf-8"))
        h = _fnv1a_64(h, b"\x1f")
        h = _fnv1a_64(h, format_value(dtype, v).encode("utf-8"))
        h = _fnv1a_64(h, b"\x1e")
    return h


def _ff_hash(arg_dtypes, args):
    return stable_hash(arg_dtypes, args)


def _ff_string_concat(arg_dtypes, args):
    return "".join(args)


def _ff_abs(arg_dtypes, args):
    (dtype,) = arg_dtypes
    (v,) = args
    if is_int_type(dtype):
        r = abs(v)
        return r if in_range(dtype, r) else FAILED
    return _float_result(dtype, abs(v))


def _ff_string_length(arg_dtypes, args):
    return len(args[0])


def _hash_sig(arg_dtypes):
    return "u64" if arg_dtypes else None


def _concat_sig(arg_dtypes):
    if arg_dtypes and all(t == "String" for t in arg_dtypes):
        return "String"
    return None


def _abs_sig(arg_dtypes):
    if len(arg_dtypes) == 1 and arg_dtypes[0] in SIGNED_INT_TYPES + FLOAT_TYPES:
        return arg_dtypes[0]
    return None


def _string_length_sig(arg_dtypes):
    return "usize" if arg_dtypes == ("String",) else None


# name -> (signature resolver, implementation, human-readable signature)
REGISTRY = {
    "hash": (_hash_sig, _ff_hash, "$hash(T, ...) -> u64"),
    "string_concat": (_concat_sig, _ff_string_concat, "$string_concat(String, ...) -> String"),
    "abs": (_abs_sig, _ff_abs, "$abs(T) -> T for signed int / float T"),
    "string_length": (_string_length_sig, _ff_string_length, "$string_length(String) -> usize"),
}


def ff_exists(name: str) -> bool:
    return name in REGISTRY


def ff_result_type(name: str, arg_dtypes):
    """Result type for one overload, or None if the argument types do not fit."""
    entry = REGISTRY.get(name)
    if entry is None:
        return None
    return entry[0](tuple(arg_dtypes))


def apply_ff(name: str, arg_dtypes, args):
    entry = REGISTRY[name]
    return entry[1](tuple(arg_dtypes), args)


def list_functions() -> list[str]:
    """Registry listing for the CLI."""
    lines = [entry[2] for entry in REGISTRY.values()]
    lines.append("operators: + - * / % on numerics; && || ! on bool")
    lines.append("operators: == != on all primitives; < <= > >= on numerics, char, String")
    lines.append("casts: [expr] as T among numerics and to String")
    return sorted(lines)
