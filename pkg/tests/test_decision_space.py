import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multifair.decision_space import (
    Decision,
    DecisionSpace,
    GridCapError,
    Universe,
    canonical_assignment_text,
    enumerate_universes,
    parse_space,
    sample_universes,
    universe_id,
    universe_seed,
)
from multifair.errors import ConfigError


def space_of(counts, kind="design"):
    decisions = tuple(
        Decision(f"d{i}", "modeling", tuple(f"o{j}" for j in range(c)))
        for i, c in enumerate(counts)
    )
    return DecisionSpace(kind=kind, decisions=decisions)


def test_grid_size_is_option_product():
    assert space_of((4, 5, 2, 4, 4, 2, 4, 4, 3)).grid_size == 61440
    assert space_of((2, 2, 7)).grid_size == 28
    assert space_of((3,)).grid_size == 3


def test_canonical_text_sorts_by_name():
    assert canonical_assignment_text({"model": "rf", "scale": "scale"}) == "model=rf\nscale=scale"
    # insertion order must not matter
    a = {"b": "2", "a": "1"}
    b = {"a": "1", "b": "2"}
    assert canonical_assignment_text(a) == canonical_assignment_text(b) == "a=1\nb=2"


def test_universe_id_frozen_value():
    # sha256("model=rf\nscale=scale")[:16], recomputed independently when frozen
    assert universe_id({"model": "rf", "scale": "scale"}) == "c3518b26012cb0c0"
    assert universe_id({"scale": "scale", "model": "rf"}) == "c3518b26012cb0c0"


def test_universe_seed_frozen_values():
    uid = "c3518b26012cb0c0"
    assert universe_seed(7, uid) == 11941898466149834059
    assert universe_seed(8, uid) == 5143274096297320041
    assert universe_seed(7, uid) != universe_seed(7, "0" * 16)


def test_enumerate_first_decision_slowest():
    space = space_of((2, 3))
    names = [u.assignments for u in enumerate_universes(space, 0)]
    expect = [
        {"d0": f"o{i}", "d1": f"o{j}"}
        for i, j in itertools.product(range(2), range(3))
    ]
    assert names == expect


def test_enumerate_ids_distinct_and_seeded():
    space = space_of((4, 5, 3))
    universes = enumerate_universes(space, 11)
    assert len(universes) == 60
    assert len({u.id for u in universes}) == 60
    for u in universes[:5]:
        assert u.seed == universe_seed(11, u.id)
    again = enumerate_universes(space, 12)
    assert [u.id for u in again] == [u.id for u in universes]
    assert all(a.seed != b.seed for a, b in zip(again, universes))


def test_enumerate_grid_cap():
    space = space_of((40, 40, 40))
    with pytest.raises(GridCapError):
        enumerate_universes(space, 0, cap=1000)


def test_sample_size_round_half_up():
    space = space_of((4, 4, 4))  # 64
    assert len(sample_universes(space, 0.25, 1, 0)) == 16
    assert len(sample_universes(space, 0.024, 1, 0)) == 2  # 1.536 -> 2
    assert len(sample_universes(space, 1.0, 1, 0)) == 64


def test_sample_is_deterministic_subset_without_repeats():
    space = space_of((4, 5, 3))
    a = sample_universes(space, 0.4, sample_seed=3, global_seed=9)
    b = sample_universes(space, 0.4, sample_seed=3, global_seed=9)
    assert [u.id for u in a] == [u.id for u in b]
    ids = [u.id for u in a]
    assert len(set(ids)) == len(ids)
    full = {u.id: u for u in enumerate_universes(space, 9)}
    for u in a:
        assert full[u.id].assignments == u.assignments
        assert full[u.id].seed == u.seed
    c = sample_universes(space, 0.4, sample_seed=4, global_seed=9)
    assert [u.id for u in c] != ids


def test_sample_large_space_avoids_enumeration():
    # far above any sane cap; must still draw without materializing the grid
    space = space_of((40, 40, 40, 40, 40))  # 102,400,000
    picked = sample_universes(space, 1e-7, sample_seed=2, global_seed=0)
    assert len(picked) == 10
    assert len({u.id for u in picked}) == 10
    for u in picked:
        assert set(u.assignments) == {f"d{i}" for i in range(5)}


def test_parse_space_round_trip():
    doc = {
        "kind": "evaluation",
        "decisions": [
            {"name": "g", "category": "evaluation", "options": ["a", "b"]},
            {"name": "s", "category": "evaluation", "options": ["x", "y", "z"]},
        ],
    }
    space = parse_space(json.dumps(doc))
    assert space.kind == "evaluation"
    assert space.names == ("g", "s")
    assert space.grid_size == 6
    assert space.decision("s").options == ("x", "y", "z")


def test_parse_space_rejects_bad_documents():
    with pytest.raises(ConfigError):
        parse_space("not json")
    with pytest.raises(ConfigError):
        parse_space({"kind": "design", "decisions": []})
    with pytest.raises(ConfigError):
        parse_space({"kind": "design", "decisions": [{"name": "x"}]})
    with pytest.raises(ConfigError):
        Decision("d", "no-such-category", ("a", "b"))
    with pytest.raises(ConfigError):
        Decision("d", "modeling", ("a", "a"))  # duplicate options
    with pytest.raises(ConfigError):
        DecisionSpace("design", (Decision("d", "modeling", ("a", "b")),) * 2)


@given(
    st.dictionaries(
        st.text(st.characters(codec="ascii", exclude_characters="=\n"), min_size=1, max_size=8),
        st.text(st.characters(codec="ascii", exclude_characters="=\n"), min_size=1, max_size=8),
        min_size=1,
        max_size=6,
    )
)
@settings(max_examples=200, deadline=None)
def test_universe_id_order_invariant(assignments):
    items = list(assignments.items())
    shuffled = dict(reversed(items))
    assert universe_id(assignments) == universe_id(shuffled)
    assert len(universe_id(assignments)) == 16


def test_universe_dataclass_is_frozen():
    u = Universe(assignments={"a": "1"}, id="x" * 16, seed=1)
    with pytest.raises(Exception):
        u.seed = 2
