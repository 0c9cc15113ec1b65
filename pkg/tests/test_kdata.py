"""Database file parsing, serialization, and the typed-tuple helpers."""

import pytest

from krepair import DatabaseFormatError, KDatabase, Schema, Semiring, \
    load_database, serialize_database

SAMPLE = """\
# inventory toy
semiring natural
attr Name : string
attr City : string
rel Emp(Name, City)
rel Office(City)
const HQ : City = "berlin"

fact Emp(ann, berlin) @ 2
fact Emp(bo, paris) @ 1
fact Office(berlin) @ 3
"""


def test_load_basics():
    db = load_database(SAMPLE)
    assert db.semiring.kind == "natural"
    assert db.annotation("Emp", ("ann", "berlin")) == 2
    assert db.annotation("Emp", ("zed", "berlin")) == 0
    assert db.constants["HQ"] == "berlin"
    assert db.active_domain() == {"ann", "bo", "berlin", "paris"}


def test_round_trip():
    db = load_database(SAMPLE)
    again = load_database(serialize_database(db))
    assert again == db
    # canonical output is a fixed point
    assert serialize_database(again) == serialize_database(db)


def test_typed_tuples_respect_attribute_ranges():
    db = load_database(SAMPLE)
    recs = set(db.typed_tuples("Emp"))
    # Name positions only ever saw ann/bo; City saw berlin/paris
    assert recs == {(n, c) for n in ("ann", "bo")
                    for c in ("berlin", "paris")}
    assert set(db.typed_tuples("Office", extra_values=["oslo"])) == \
        {("berlin",), ("paris",), ("oslo",)}


def test_zero_annotations_are_dropped():
    schema = Schema({"A": "string"}, {"R": ("A",)}, {})
    db = KDatabase(schema, Semiring("natural"), {"R": {("x",): 0, ("y",): 2}})
    assert db.support("R") == {("y",)}


def test_with_relations_copies():
    db = load_database(SAMPLE)
    upd = db.with_relations({"Office": {("paris",): 1}})
    assert upd.annotation("Office", ("paris",)) == 1
    assert db.annotation("Office", ("paris",)) == 0


def test_facts_order_is_canonical():
    db = load_database(SAMPLE)
    assert db.facts() == [
        ("Emp", ("ann", "berlin"), 2),
        ("Emp", ("bo", "paris"), 1),
        ("Office", ("berlin",), 3),
    ]


@pytest.mark.parametrize("bad", [
    "semiring natural\nrel R(A)\n",                               # unknown attr
    "semiring boolean\nattr A : string\nrel R(A)\nfact R(x) @ 2\n",  # bad value
    "semiring natural\nattr A : string\nrel R(A)\nfact S(x) @ 1\n",  # unknown rel
    "attr A : string\nrel R(A)\n",                                # no semiring
    "semiring natural\nattr A : string\nrel R(A)\nfact R(x, y) @ 1\n",  # arity
    "semiring natural\nattr A : string\nrel R(A)\nfact R(x) @ 0\n",  # explicit 0
])
def test_format_errors(bad):
    from krepair import SemiringError
    with pytest.raises((DatabaseFormatError, SemiringError)):
        load_database(bad)


def test_arity_checked():
    schema = Schema({"A": "string"}, {"R": ("A", "A")}, {})
    with pytest.raises(DatabaseFormatError):
        KDatabase(schema, Semiring("boolean"), {"R": {("x",): 1}})
