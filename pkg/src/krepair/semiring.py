"""Annotation algebras: the three built-in positive, partially ordered
commutative semirings (Boolean, natural numbers, probability), their order,
a symmetric distance on values, and aggregates over multisets of values.

Values are plain Python numbers: ints 0/1 for the Boolean semiring,
non-negative ints for the natural semiring, and exact ``Fraction`` values for
the probability semiring (so equality and order stay decidable).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Union

Value = Union[int, Fraction]

BOOLEAN = "boolean"
NATURAL = "natural"
PROBABILITY = "probability"

KINDS = (BOOLEAN, NATURAL, PROBABILITY)

AGG_SUM = "sum"
AGG_MAX = "max"
AGG_COUNT_NONZERO = "count-nonzero"

AGGREGATES = (AGG_SUM, AGG_MAX, AGG_COUNT_NONZERO)


class SemiringError(ValueError):
    """Bad value for the active semiring, or an unknown semiring name."""


class Semiring:
    """One of the three built-in semirings, with 0 minimal in its order."""

    def __init__(self, kind: str):
        if kind not in KINDS:
            raise SemiringError(f"unknown semiring {kind!r}")
        self.kind = kind

    @property
    def zero(self) -> Value:
        return Fraction(0) if self.kind == PROBABILITY else 0

    @property
    def one(self) -> Value:
        return Fraction(1) if self.kind == PROBABILITY else 1

    def check(self, a: Value) -> Value:
        """Validate that ``a`` is a value of this semiring."""
        if self.kind == BOOLEAN:
            if a not in (0, 1):
                raise SemiringError(f"{a!r} is not a Boolean annotation")
            return int(a)
        if self.kind == NATURAL:
            if not isinstance(a, int) or isinstance(a, bool) or a < 0:
                raise SemiringError(f"{a!r} is not a natural annotation")
            return a
        if not isinstance(a, (int, Fraction)) or a < 0:
            raise SemiringError(f"{a!r} is not a probability annotation")
        return Fraction(a)

    def add(self, a: Value, b: Value) -> Value:
        if self.kind == BOOLEAN:
            return a | b
        return a + b

    def mul(self, a: Value, b: Value) -> Value:
        if self.kind == BOOLEAN:
            return a & b
        return a * b

    def combine(self, a: Value, b: Value, op: str) -> Value:
        a, b = self.check(a), self.check(b)
        if op == "add":
            return self.add(a, b)
        if op == "mul":
            return self.mul(a, b)
        raise SemiringError(f"unknown operation {op!r}")

    def leq(self, a: Value, b: Value) -> bool:
        """Canonical order: 0 < 1 on Booleans, numeric order otherwise."""
        return self.check(a) <= self.check(b)

    def delta(self, a: Value, b: Value) -> Value:
        """Symmetric distance: |a - b|; XOR on the Boolean semiring."""
        a, b = self.check(a), self.check(b)
        if self.kind == BOOLEAN:
            return a ^ b
        return abs(a - b)

    def aggregate(self, values: Iterable[Value], kind: str) -> Value:
        """Fold a multiset of values; the empty multiset yields 0."""
        vals = [self.check(v) for v in values]
        if kind == AGG_SUM:
            acc = self.zero
            for v in vals:
                acc = self.add(acc, v)
            return acc
        if kind == AGG_MAX:
            acc = self.zero
            for v in vals:
                if acc < v:
                    acc = v
            return acc
        if kind == AGG_COUNT_NONZERO:
            n = sum(1 for v in vals if v != 0)
            if self.kind == BOOLEAN:
                return 1 if n else 0
            if self.kind == PROBABILITY:
                return Fraction(n)
            return n
        raise SemiringError(f"unknown aggregate {kind!r}")

    def parse_value(self, text: str) -> Value:
        """Parse an annotation literal as written in database files."""
        text = text.strip()
        try:
            if self.kind == PROBABILITY:
                if "/" in text:
                    num, den = text.split("/", 1)
                    v: Value = Fraction(int(num), int(den))
                elif "." in text:
                    v = Fraction(text)
                else:
                    v = Fraction(int(text))
            else:
                v = int(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise SemiringError(f"bad annotation literal {text!r}") from exc
        return self.check(v)

    def format_value(self, a: Value) -> str:
        a = self.check(a)
        if isinstance(a, Fraction):
            if a.denominator == 1:
                return str(a.numerator)
            return f"{a.numerator}/{a.denominator}"
        return str(a)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Semiring) and other.kind == self.kind

    def __hash__(self) -> int:
        return hash(self.kind)

    def __repr__(self) -> str:
        return f"Semiring({self.kind})"


def combine(sr: Semiring, a: Value, b: Value, op: str) -> Value:
    return sr.combine(a, b, op)


def leq(sr: Semiring, a: Value, b: Value) -> bool:
    return sr.leq(a, b)


def delta(sr: Semiring, a: Value, b: Value) -> Value:
    return sr.delta(a, b)


def aggregate(sr: Semiring, values: Iterable[Value], kind: str) -> Value:
    return sr.aggregate(values, kind)
