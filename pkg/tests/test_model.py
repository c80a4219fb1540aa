import pytest
from hypothesis import given, strategies as st

from streamrules.model import (
    Stream,
    Var,
    is_ground,
    join_atoms,
    make_atom,
    match,
    substitute,
)


def test_substitute_full_binding():
    atom = ("pollution", Var("MES"), Var("VAL"), Var("SEC"))
    s = {"MES": "m1", "VAL": 12.0, "SEC": 3.0}
    assert substitute(atom, s) == ("pollution", "m1", 12.0, 3.0)


def test_substitute_ground_atom_unchanged():
    atom = ("city", 3.0)
    assert substitute(atom, {}) is atom


def test_substitute_partial_binding():
    atom = ("traffic", Var("MES"), Var("VAL"), Var("SEC"))
    out = substitute(atom, {"MES": "m1"})
    assert out == ("traffic", "m1", Var("VAL"), Var("SEC"))


def test_match_fresh_bindings():
    pattern = ("traffic", Var("MES"), Var("VAL"), 1.0)
    assert match(pattern, ("traffic", "m2", 55.0, 1.0), {}) == {
        "MES": "m2",
        "VAL": 55.0,
    }


def test_match_constant_clash():
    pattern = ("traffic", Var("MES"), Var("VAL"), 1.0)
    assert match(pattern, ("traffic", "m2", 55.0, 2.0), {}) is None


def test_match_conflicting_binding():
    pattern = ("pollution", Var("MES"), Var("V2"), Var("SEC"))
    assert match(pattern, ("pollution", "m1", 9.0, 4.0), {"MES": "m9"}) is None


def test_match_numeric_value_equality():
    # 12 and 12.0 are the same numeric constant.
    pattern = ("p", Var("X"))
    assert match(pattern, ("p", 12), {"X": 12.0}) == {"X": 12.0}
    assert match(("p", 12.0), ("p", 12), {}) == {}


def test_match_symbol_number_distinct():
    assert match(("p", Var("X")), ("p", "m1"), {"X": 1.0}) is None
    assert match(("p", "12"), ("p", 12.0), {}) is None


ground_term = st.one_of(
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.sampled_from(["a", "b", "m1", "m2", "sector"]),
)


@given(
    pred=st.sampled_from(["p", "q", "traffic"]),
    args=st.lists(
        st.tuples(st.sampled_from(["X", "Y", "Z", None]), ground_term),
        min_size=1,
        max_size=4,
    ),
)
def test_match_substitute_round_trip(pred, args):
    # A pattern matched against a ground fact reproduces the fact.
    pattern = [pred]
    fact = [pred]
    for var, value in args:
        fact.append(value)
        pattern.append(Var(var) if var else value)
    pattern, fact = tuple(pattern), tuple(fact)
    s = match(pattern, fact, {})
    if s is not None:
        assert substitute(pattern, s) == fact


@given(
    bindings=st.dictionaries(
        st.sampled_from(["X", "Y", "Z"]), ground_term, max_size=3
    )
)
def test_substitution_idempotent(bindings):
    atom = ("p", Var("X"), Var("Y"), Var("Z"))
    once = substitute(atom, bindings)
    assert substitute(once, bindings) == once


def test_make_atom_normalizes_ints():
    assert make_atom("city", 3) == ("city", 3.0)
    assert type(make_atom("city", 3)[1]) is float


def test_stream_rejects_non_ground():
    with pytest.raises(ValueError, match="non-ground"):
        Stream(0, 1, {0: [("p", Var("X"))]})


def test_stream_rejects_out_of_timeline():
    with pytest.raises(ValueError, match="outside timeline"):
        Stream(0, 1, {5: [("p", 1.0)]})


def test_stream_empty_and_equality():
    assert Stream.empty().num_ticks() == 0
    a = Stream(0, 2, {1: [("p", 1.0)]})
    b = Stream(0, 2, {1: {("p", 1.0)}})
    assert a == b
    assert a != Stream(0, 3, {1: [("p", 1.0)]})


def test_stream_collapses_duplicates():
    s = Stream(0, 0, {0: [("p", 1.0), ("p", 1)]})
    assert len(s.at(0)) == 1


def test_join_atoms_indexes_bound_positions():
    pattern = ("p", Var("X"), Var("Y"))
    candidates = [("p", 1.0, 2.0), ("p", 1.0, 3.0), ("p", 2.0, 4.0)]
    out = join_atoms(candidates, pattern, [{"X": 1.0}])
    assert sorted(s["Y"] for s in out) == [2.0, 3.0]


def test_join_atoms_repeated_variable():
    pattern = ("p", Var("X"), Var("X"))
    candidates = [("p", 1.0, 1.0), ("p", 1.0, 2.0)]
    out = join_atoms(candidates, pattern, [{}])
    assert out == [{"X": 1.0}]
