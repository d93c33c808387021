import random

from hypothesis import given, strategies as st

from taglog.values import (
    ALL_TYPES,
    Database,
    RelationSignature,
    Value,
    contains,
    tuple_has_nan,
    tuple_key,
    value_key,
)

_PAYLOADS = {
    "bool": st.booleans(),
    "char": st.characters(min_codepoint=32, max_codepoint=126),
    "String": st.text(max_size=6),
    "f32": st.floats(allow_nan=False, allow_infinity=False, width=32),
    "f64": st.floats(allow_nan=False, allow_infinity=False),
}


def _value_strategy():
    def payload_for(dtype):
        if dtype in _PAYLOADS:
            return _PAYLOADS[dtype].map(lambda p: Value(dtype, p))
        lo, hi = (0, 2**16) if dtype.startswith("u") else (-(2**15), 2**15)
        return st.integers(lo, hi).map(lambda p: Value(dtype, p))

    return st.sampled_from(ALL_TYPES).flatmap(payload_for)


@given(st.lists(_value_strategy(), min_size=2, max_size=6))
def test_value_order_is_total(values):
    keys = [v.key() for v in values]
    for a in keys:
        for b in keys:
            assert (a < b) or (b < a) or (a == b)
    for a in keys:
        for b in keys:
            for c in keys:
                if a <= b and b <= c:
                    assert a <= c


def test_value_equality_requires_same_type():
    assert value_key("i32", 1) != value_key("i64", 1)
    assert Value("i32", 1) != Value("i64", 1)
    assert Value("u8", 3) == Value("u8", 3)


def test_float_zero_signs_compare_equal():
    assert value_key("f64", -0.0) == value_key("f64", 0.0)


def test_cross_type_rank_order():
    ordering = [
        Value("bool", True),
        Value("char", "a"),
        Value("i32", 99),
        Value("f64", 0.5),
        Value("String", "0"),
    ]
    keys = [v.key() for v in ordering]
    assert keys == sorted(keys)


def test_tuple_key_lexicographic():
    sig = ("usize", "String")
    rows = [(2, "a"), (1, "b"), (1, "a")]
    assert sorted(rows, key=lambda t: tuple_key(sig, t)) == [
        (1, "a"), (1, "b"), (2, "a"),
    ]


def test_contains_ignores_tags():
    tuples = {(1, 2): 0.9}
    assert contains(tuples, (1, 2))
    assert not contains(tuples, (2, 1))
    assert not contains({}, (1, 2))


def test_database_round_trip():
    rng = random.Random(7)
    db = Database({"r": RelationSignature("r", ("usize", "usize"))})
    facts = {(rng.randint(0, 9), rng.randint(0, 9)) for _ in range(40)}
    for tup in facts:
        db.insert("r", tup, 1.0)
    assert set(db.lookup("r")) == facts
    assert db.sorted_tuples("r") == sorted(facts)


def test_nan_tuples_discarded_on_insert():
    db = Database()
    assert not db.insert("r", (float("nan"),), 1.0)
    assert db.lookup("r") == {}
    assert tuple_has_nan((1.0, float("nan")))
    assert not tuple_has_nan((1.0, 2.0))


def test_lookup_unknown_relation_is_empty():
    db = Database()
    db.insert("father", ("Alice", "Bob"), 1.0)
    assert db.lookup("father") == {("Alice", "Bob"): 1.0}
    assert db.lookup("missing") == {}
