"""Schemas, annotated relations and the line-oriented database file format.

A database file looks like::

    semiring natural            # or: boolean | probability
    attr ID : int
    attr Product : string
    rel STOCK(ID, Product, Warehouse)
    const w : Warehouse = A     # optional
    fact STOCK(112, potato, A) @ 4
    fact BUILDINGS(A, "5 Regent St.")

``@ k`` defaults to ``@ 1``; ``#`` starts a comment; quoted tokens may
contain spaces.  Tuples with annotation 0 are not stored: absence *is* the
zero annotation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

from .semiring import Semiring, SemiringError, Value

SORT_STRING = "string"
SORT_INT = "int"

Record = Tuple[str, ...]


class DatabaseFormatError(ValueError):
    """Raised for malformed database files; carries a line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Schema:
    """Attribute sorts, typed relation symbols and typed constant symbols."""

    attributes: Dict[str, str]                 # attr name -> sort
    relations: Dict[str, Tuple[str, ...]]      # rel name -> attr tuple
    constants: Dict[str, str] = field(default_factory=dict)  # const -> attr

    def arity(self, rel: str) -> int:
        return len(self.relations[rel])

    def check_value(self, attr: str, token: str) -> None:
        sort = self.attributes[attr]
        if sort == SORT_INT and not re.fullmatch(r"-?\d+", token):
            raise DatabaseFormatError(
                f"value {token!r} is not an integer (attribute {attr})")


class KDatabase:
    """An immutable database whose relations map records to annotations."""

    def __init__(self, schema: Schema, semiring: Semiring,
                 relations: Dict[str, Dict[Record, Value]],
                 constants: Optional[Dict[str, str]] = None):
        self.schema = schema
        self.semiring = semiring
        self.constants = dict(constants or {})
        rels: Dict[str, Dict[Record, Value]] = {}
        for name in schema.relations:
            recs = {}
            for rec, ann in relations.get(name, {}).items():
                ann = semiring.check(ann)
                if ann == 0:
                    continue
                if len(rec) != schema.arity(name):
                    raise DatabaseFormatError(
                        f"arity mismatch for {name}{rec!r}")
                recs[tuple(rec)] = ann
            rels[name] = recs
        for name in relations:
            if name not in schema.relations:
                raise DatabaseFormatError(f"unknown relation {name!r}")
        for name in self.constants:
            if name not in schema.constants:
                raise DatabaseFormatError(f"unknown constant {name!r}")
        for name in schema.constants:
            if name not in self.constants:
                raise DatabaseFormatError(f"constant {name!r} uninterpreted")
        self.relations = rels
        self._adom: Optional[FrozenSet[str]] = None
        self._ranges: Optional[Dict[str, FrozenSet[str]]] = None

    def annotation(self, rel: str, record: Iterable[str]) -> Value:
        """Stored annotation, or 0 for any tuple outside the support."""
        if rel not in self.relations:
            raise KeyError(f"unknown relation {rel!r}")
        record = tuple(record)
        if len(record) != self.schema.arity(rel):
            raise ValueError(f"arity mismatch for {rel}{record!r}")
        return self.relations[rel].get(record, self.semiring.zero)

    def support(self, rel: str) -> FrozenSet[Record]:
        return frozenset(self.relations[rel])

    def active_domain(self) -> FrozenSet[str]:
        """Every component of every supported record plus all constants."""
        if self._adom is None:
            vals = set(self.constants.values())
            for recs in self.relations.values():
                for rec in recs:
                    vals.update(rec)
            self._adom = frozenset(vals)
        return self._adom

    def attribute_range(self, attr: str) -> FrozenSet[str]:
        """Active-domain values seen at positions of this attribute."""
        if self._ranges is None:
            ranges: Dict[str, set] = {a: set() for a in self.schema.attributes}
            for rel, attrs in self.schema.relations.items():
                for rec in self.relations[rel]:
                    for pos, a in enumerate(attrs):
                        ranges[a].add(rec[pos])
            for c, a in self.schema.constants.items():
                ranges[a].add(self.constants[c])
            self._ranges = {a: frozenset(v) for a, v in ranges.items()}
        return self._ranges[attr]

    def typed_tuples(self, rel: str,
                     extra_values: Iterable[str] = ()) -> Iterator[Record]:
        """All type-consistent records for ``rel`` over the active domain."""
        extras = list(extra_values)
        pools = [sorted(self.attribute_range(a) | set(extras))
                 for a in self.schema.relations[rel]]
        return product(*pools)

    def with_relations(self, relations: Dict[str, Dict[Record, Value]]) -> "KDatabase":
        """Copy-on-write derivative interpreting some relations anew."""
        rels = {name: dict(recs) for name, recs in self.relations.items()}
        rels.update({name: dict(recs) for name, recs in relations.items()})
        return KDatabase(self.schema, self.semiring, rels, self.constants)

    def facts(self) -> List[Tuple[str, Record, Value]]:
        """Canonically ordered fact list (relation name, record, annotation)."""
        out = []
        for rel in sorted(self.relations):
            for rec in sorted(self.relations[rel]):
                out.append((rel, rec, self.relations[rel][rec]))
        return out

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, KDatabase)
                and other.schema == self.schema
                and other.semiring == self.semiring
                and other.relations == self.relations
                and other.constants == self.constants)

    def __hash__(self) -> int:
        return hash((self.semiring,
                     tuple((r, tuple(sorted(recs.items())))
                           for r, recs in sorted(self.relations.items()))))


_TOKEN = re.compile(r'"([^"]*)"|([^",()\s]+)')


def _split_args(text: str, line: int) -> List[str]:
    """Split a comma-separated argument list honouring quoted tokens."""
    args, pos, buf = [], 0, []
    depth_guard = text.strip()
    if not depth_guard:
        return []
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == ",":
            raise DatabaseFormatError("empty argument", line)
        m = _TOKEN.match(text, pos)
        if not m:
            raise DatabaseFormatError(f"bad token near {text[pos:]!r}", line)
        args.append(m.group(1) if m.group(1) is not None else m.group(2))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos < len(text):
            if text[pos] != ",":
                raise DatabaseFormatError(f"expected ',' near {text[pos:]!r}", line)
            pos += 1
            if pos >= len(text) or not text[pos:].strip():
                raise DatabaseFormatError("trailing comma", line)
    return args


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def load_database(text: str) -> KDatabase:
    """Parse a database file; reports the first offending line on error."""
    semiring: Optional[Semiring] = None
    attributes: Dict[str, str] = {}
    relations: Dict[str, Tuple[str, ...]] = {}
    constants: Dict[str, str] = {}
    const_values: Dict[str, str] = {}
    records: Dict[str, Dict[Record, Value]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "semiring":
            try:
                semiring = Semiring(rest)
            except SemiringError as exc:
                raise DatabaseFormatError(str(exc), lineno)
        elif head == "attr":
            m = re.fullmatch(r"(\w+)\s*:\s*(string|int)", rest)
            if not m:
                raise DatabaseFormatError(f"bad attr declaration {rest!r}", lineno)
            attributes[m.group(1)] = m.group(2)
        elif head == "rel":
            m = re.fullmatch(r"(\w+)\s*\((.*)\)", rest)
            if not m:
                raise DatabaseFormatError(f"bad rel declaration {rest!r}", lineno)
            name = m.group(1)
            attrs = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
            for a in attrs:
                if a not in attributes:
                    raise DatabaseFormatError(f"undeclared attribute {a!r}", lineno)
            if name in relations:
                raise DatabaseFormatError(f"relation {name!r} redeclared", lineno)
            relations[name] = attrs
        elif head == "const":
            m = re.fullmatch(r"(\w+)\s*:\s*(\w+)\s*=\s*(.+)", rest)
            if not m:
                raise DatabaseFormatError(f"bad const declaration {rest!r}", lineno)
            cname, attr, value = m.group(1), m.group(2), m.group(3).strip()
            if attr not in attributes:
                raise DatabaseFormatError(f"undeclared attribute {attr!r}", lineno)
            if value.startswith('"') and value.endswith('"'):
                value = value[1:-1]
            constants[cname] = attr
            const_values[cname] = value
        elif head == "fact":
            if semiring is None:
                raise DatabaseFormatError("fact before semiring declaration", lineno)
            m = re.fullmatch(r"(\w+)\s*\((.*)\)\s*(?:@\s*(\S+))?", rest)
            if not m:
                raise DatabaseFormatError(f"bad fact {rest!r}", lineno)
            name = m.group(1)
            if name not in relations:
                raise DatabaseFormatError(f"unknown relation {name!r}", lineno)
            args = tuple(_split_args(m.group(2), lineno))
            if len(args) != len(relations[name]):
                raise DatabaseFormatError(
                    f"{name} expects {len(relations[name])} arguments, got {len(args)}",
                    lineno)
            try:
                ann = semiring.parse_value(m.group(3)) if m.group(3) else semiring.one
            except SemiringError as exc:
                raise DatabaseFormatError(str(exc), lineno)
            if ann == 0:
                raise DatabaseFormatError(
                    "annotation 0 may not be written explicitly", lineno)
            bucket = records.setdefault(name, {})
            if args in bucket:
                raise DatabaseFormatError(
                    f"duplicate fact {name}{args!r}", lineno)
            schema_probe = Schema(attributes, relations, constants)
            for pos, attr in enumerate(relations[name]):
                try:
                    schema_probe.check_value(attr, args[pos])
                except DatabaseFormatError as exc:
                    raise DatabaseFormatError(str(exc), lineno)
            bucket[args] = ann
        else:
            raise DatabaseFormatError(f"unknown directive {head!r}", lineno)

    if semiring is None:
        raise DatabaseFormatError("missing semiring declaration")
    schema = Schema(attributes, relations, constants)
    for cname, attr in constants.items():
        schema.check_value(attr, const_values[cname])
    return KDatabase(schema, semiring, records, const_values)


def _format_token(token: str) -> str:
    if re.fullmatch(r'[^",()\s#]+', token):
        return token
    return f'"{token}"'


def serialize_database(db: KDatabase) -> str:
    """Render a database back into the file format (canonical order)."""
    lines = [f"semiring {db.semiring.kind}"]
    for attr in sorted(db.schema.attributes):
        lines.append(f"attr {attr} : {db.schema.attributes[attr]}")
    for rel in db.schema.relations:
        lines.append(f"rel {rel}({', '.join(db.schema.relations[rel])})")
    for cname in sorted(db.schema.constants):
        lines.append(f"const {cname} : {db.schema.constants[cname]} = "
                     f"{_format_token(db.constants[cname])}")
    for rel, rec, ann in db.facts():
        args = ", ".join(_format_token(t) for t in rec)
        if ann == db.semiring.one:
            lines.append(f"fact {rel}({args})")
        else:
            lines.append(f"fact {rel}({args}) @ {db.semiring.format_value(ann)}")
    return "\n".join(lines) + "\n"
