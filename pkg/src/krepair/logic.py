"""First-order formulas over annotated databases.

Surface syntax: `forall x y . phi`, `exists x . phi`, `exists<=k x . phi`,
`exists>=k x . phi`, connectives `! & | -> <->` (precedence `!` > `&` > `|`
> `->` > `<->`), atoms `R(t, ...)`, `t = t`, `t != t`.  A quantifier with a
`.` scopes as far right as possible; without one it takes a single
(typically parenthesised) operand.  Identifiers starting with a lowercase
letter are variables; other identifiers name schema constants; quoted
tokens and integer literals are data values.

Evaluation maps a sentence to a semiring value: conjunction multiplies,
disjunction adds, `exists` sums and `forall` multiplies over the active
domain, and negations are pushed to the atoms first, where a negated atom
or (in)equality is valued in {0, 1}.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple, Union

from .kdata import KDatabase
from .semiring import Value


class FormulaError(ValueError):
    pass


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """A schema-declared constant symbol, resolved against a database."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Lit:
    """A literal data value (quoted token or integer)."""

    value: str

    def __str__(self) -> str:
        if re.fullmatch(r"-?\d+", self.value):
            return self.value
        return f'"{self.value}"'


Term = Union[Var, Const, Lit]


# ------------------------------------------------------------- formulas

@dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Atom:
    rel: str
    args: Tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.rel}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Cmp:
    op: str  # "=" or "!="
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self) -> str:
        return f"!{_paren(self.body)}"


@dataclass(frozen=True)
class And:
    parts: Tuple["Formula", ...]

    def __str__(self) -> str:
        return " & ".join(_paren(p) for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: Tuple["Formula", ...]

    def __str__(self) -> str:
        return " | ".join(_paren(p) for p in self.parts)


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_paren(self.left)} -> {_paren(self.right)}"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_paren(self.left)} <-> {_paren(self.right)}"


@dataclass(frozen=True)
class Quant:
    kind: str  # "forall" or "exists"
    var: str
    body: "Formula"

    def __str__(self) -> str:
        return f"{self.kind} {self.var} . {self.body}"


@dataclass(frozen=True)
class Count:
    """Counting quantifier `exists<=k` / `exists>=k`; desugared before use."""

    cmp: str  # "<=" or ">="
    k: int
    var: str
    body: "Formula"

    def __str__(self) -> str:
        return f"exists{self.cmp}{self.k} {self.var} . {self.body}"


Formula = Union[TrueF, FalseF, Atom, Cmp, Not, And, Or, Implies, Iff, Quant, Count]

TRUE = TrueF()
FALSE = FalseF()


def _paren(f: Formula) -> str:
    if isinstance(f, (TrueF, FalseF, Atom, Cmp, Not)):
        return str(f)
    return f"({f})"


def free_vars(f: Formula) -> FrozenSet[str]:
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, Atom):
        return frozenset(t.name for t in f.args if isinstance(t, Var))
    if isinstance(f, Cmp):
        return frozenset(t.name for t in (f.left, f.right) if isinstance(t, Var))
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        out: FrozenSet[str] = frozenset()
        for p in f.parts:
            out |= free_vars(p)
        return out
    if isinstance(f, (Implies, Iff)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Quant, Count)):
        return free_vars(f.body) - {f.var}
    raise TypeError(f)


def substitute(f: Formula, mapping: Dict[str, Term]) -> Formula:
    """Replace free variables.  Replacement terms must be fresh or ground."""

    def sub_term(t: Term) -> Term:
        if isinstance(t, Var) and t.name in mapping:
            return mapping[t.name]
        return t

    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return Atom(f.rel, tuple(sub_term(t) for t in f.args))
    if isinstance(f, Cmp):
        return Cmp(f.op, sub_term(f.left), sub_term(f.right))
    if isinstance(f, Not):
        return Not(substitute(f.body, mapping))
    if isinstance(f, And):
        return And(tuple(substitute(p, mapping) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(substitute(p, mapping) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(substitute(f.left, mapping), substitute(f.right, mapping))
    if isinstance(f, Iff):
        return Iff(substitute(f.left, mapping), substitute(f.right, mapping))
    if isinstance(f, (Quant, Count)):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        for v in inner.values():
            if isinstance(v, Var) and v.name == f.var:
                raise FormulaError(f"capture of {f.var} during substitution")
        body = substitute(f.body, inner) if inner else f.body
        if isinstance(f, Quant):
            return Quant(f.kind, f.var, body)
        return Count(f.cmp, f.k, f.var, body)
    raise TypeError(f)


# -------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"""
    \s*(?:
      (?P<count>exists\s*(?:<=|>=)\s*\d+)
    | (?P<kw>forall|exists|true|false)\b
    | (?P<ident>[A-Za-z_][A-Za-z_0-9]*'*)
    | (?P<int>-?\d+)
    | (?P<str>"[^"]*")
    | (?P<op><->|->|!=|=|!|&|\||\(|\)|,|\.)
    )""", re.VERBOSE)


def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].isspace() or pos == len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(f"unexpected character {text[pos:]!r}")
        pos = m.end()
        for kind in ("count", "kw", "ident", "int", "str", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val))
                break
    tokens.append(("eof", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Tuple[str, str]:
        return self.tokens[self.pos]

    def take(self) -> Tuple[str, str]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val = self.take()
        if val != value:
            raise FormulaError(f"expected {value!r}, got {val or 'end of input'!r}")

    def parse(self) -> Formula:
        f = self.iff()
        kind, val = self.peek()
        if kind != "eof":
            raise FormulaError(f"trailing input at {val!r}")
        return f

    def iff(self) -> Formula:
        f = self.implies()
        while self.peek()[1] == "<->":
            self.take()
            f = Iff(f, self.implies())
        return f

    def implies(self) -> Formula:
        f = self.disj()
        if self.peek()[1] == "->":
            self.take()
            return Implies(f, self.implies())  # right-associative
        return f

    def disj(self) -> Formula:
        parts = [self.conj()]
        while self.peek()[1] == "|":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Formula:
        parts = [self.unary()]
        while self.peek()[1] == "&":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Formula:
        kind, val = self.peek()
        if val == "!":
            self.take()
            return Not(self.unary())
        if kind == "kw" and val in ("forall", "exists"):
            self.take()
            return self.quantified(val, None, None)
        if kind == "count":
            self.take()
            m = re.fullmatch(r"exists\s*(<=|>=)\s*(\d+)", val)
            assert m
            return self.quantified("exists", m.group(1), int(m.group(2)))
        return self.atom()

    def quantified(self, kw: str, cmp: Optional[str], k: Optional[int]) -> Formula:
        names = []
        while self.peek()[0] == "ident" and self._is_var(self.peek()[1]):
            names.append(self.take()[1])
        if not names:
            raise FormulaError(f"{kw} needs at least one variable")
        if self.peek()[1] == ".":
            self.take()
            body = self.iff()
        else:
            body = self.unary()
        for name in reversed(names):
            if cmp is None:
                body = Quant(kw, name, body)
            else:
                body = Count(cmp, k, name, body)  # type: ignore[arg-type]
        return body

    @staticmethod
    def _is_var(name: str) -> bool:
        return name[0].islower() or name[0] == "_"

    def term(self) -> Term:
        kind, val = self.take()
        if kind == "ident":
            return Var(val) if self._is_var(val) else Const(val)
        if kind == "int":
            return Lit(val)
        if kind == "str":
            return Lit(val[1:-1])
        raise FormulaError(f"expected a term, got {val or 'end of input'!r}")

    def atom(self) -> Formula:
        kind, val = self.peek()
        if val == "(":
            self.take()
            # could be a parenthesised formula or a term of an (in)equality
            save = self.pos
            try:
                f = self.iff()
                self.expect(")")
            except FormulaError:
                self.pos = save
                raise
            if self.peek()[1] in ("=", "!="):
                raise FormulaError("parenthesised terms are not supported")
            return f
        if kind == "kw" and val in ("true", "false"):
            self.take()
            return TRUE if val == "true" else FALSE
        if kind == "ident" and not self._is_var(val) \
                and self.tokens[self.pos + 1][1] == "(":
            rel = self.take()[1]
            self.take()  # (
            args = []
            if self.peek()[1] != ")":
                args.append(self.term())
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.term())
            self.expect(")")
            return Atom(rel, tuple(args))
        left = self.term()
        op = self.take()[1]
        if op not in ("=", "!="):
            raise FormulaError(f"expected '=' or '!=', got {op!r}")
        return Cmp(op, left, self.term())


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


# ------------------------------------------------- normalisation

_fresh_counter = 0


def _fresh(base: str) -> str:
    global _fresh_counter
    _fresh_counter += 1
    return f"{base}#{_fresh_counter}"


def desugar(f: Formula) -> Formula:
    """Expand `->`, `<->` and counting quantifiers into the core syntax."""
    if isinstance(f, (TrueF, FalseF, Atom, Cmp)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.body))
    if isinstance(f, And):
        return And(tuple(desugar(p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(desugar(p) for p in f.parts))
    if isinstance(f, Implies):
        return Or((Not(desugar(f.left)), desugar(f.right)))
    if isinstance(f, Iff):
        a, b = desugar(f.left), desugar(f.right)
        return And((Or((Not(a), b)), Or((Not(b), a))))
    if isinstance(f, Quant):
        return Quant(f.kind, f.var, desugar(f.body))
    if isinstance(f, Count):
        body = desugar(f.body)
        if f.cmp == ">=":
            return _at_least(f.k, f.var, body)
        # at most k: no k+1 pairwise-distinct witnesses
        return Not(_at_least(f.k + 1, f.var, body))
    raise TypeError(f)


def _at_least(k: int, var: str, body: Formula) -> Formula:
    if k <= 0:
        return TRUE
    if k == 1:
        return Quant("exists", var, body)
    names = [_fresh(var) for _ in range(k)]
    parts: List[Formula] = [Cmp("!=", Var(a), Var(b))
                            for i, a in enumerate(names) for b in names[i + 1:]]
    parts += [substitute(body, {var: Var(n)}) for n in names]
    out: Formula = And(tuple(parts))
    for n in reversed(names):
        out = Quant("exists", n, out)
    return out


def nnf(f: Formula) -> Formula:
    """Negation normal form of a desugared formula."""
    if isinstance(f, (TrueF, FalseF, Atom, Cmp)):
        return f
    if isinstance(f, Not):
        return _neg(f.body)
    if isinstance(f, And):
        return And(tuple(nnf(p) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(nnf(p) for p in f.parts))
    if isinstance(f, Quant):
        return Quant(f.kind, f.var, nnf(f.body))
    if isinstance(f, (Implies, Iff, Count)):
        return nnf(desugar(f))
    raise TypeError(f)


def _neg(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Atom):
        return Not(f)
    if isinstance(f, Cmp):
        return Cmp("!=" if f.op == "=" else "=", f.left, f.right)
    if isinstance(f, Not):
        return nnf(f.body)
    if isinstance(f, And):
        return Or(tuple(_neg(p) for p in f.parts))
    if isinstance(f, Or):
        return And(tuple(_neg(p) for p in f.parts))
    if isinstance(f, Quant):
        return Quant("forall" if f.kind == "exists" else "exists", f.var, _neg(f.body))
    if isinstance(f, (Implies, Iff, Count)):
        return _neg(desugar(f))
    raise TypeError(f)


def normalize(f: Formula) -> Formula:
    """Desugared negation normal form: the shape evaluation expects."""
    return nnf(desugar(f))


# ------------------------------------------------------------ evaluation

Env = Dict[str, str]


class Evaluator:
    """Evaluates sentences and formulas against one database.

    Quantifiers range over the active domain of the database, optionally
    widened with `extra_domain` values.
    """

    def __init__(self, db: KDatabase, extra_domain: Iterable[str] = ()):
        self.db = db
        self.sr = db.semiring
        self.domain: Tuple[str, ...] = tuple(
            sorted(db.active_domain() | set(extra_domain)))
        self._fv_cache: Dict[int, FrozenSet[str]] = {}
        # pins both the source and the normalised tree so node ids stay valid
        self._norm: Dict[int, Tuple[Formula, Formula]] = {}
        self._memo: Dict[Tuple[int, Tuple[Tuple[str, str], ...]], Value] = {}
        self._bmemo: Dict[Tuple[int, Tuple[Tuple[str, str], ...]], bool] = {}

    def _resolve(self, t: Term, env: Env) -> str:
        if isinstance(t, Var):
            try:
                return env[t.name]
            except KeyError:
                raise FormulaError(f"unbound variable {t.name!r}")
        if isinstance(t, Const):
            try:
                return self.db.constants[t.name]
            except KeyError:
                raise FormulaError(f"undeclared constant {t.name!r}")
        return t.value

    def _fv(self, f: Formula) -> FrozenSet[str]:
        key = id(f)
        got = self._fv_cache.get(key)
        if got is None:
            got = self._fv_cache[key] = free_vars(f)
        return got

    def _key(self, f: Formula, env: Env):
        try:
            return id(f), tuple(sorted((v, env[v]) for v in self._fv(f)))
        except KeyError as exc:
            raise FormulaError(f"unbound variable {exc.args[0]!r}")

    def _normalized(self, f: Formula) -> Formula:
        got = self._norm.get(id(f))
        if got is None:
            got = self._norm[id(f)] = (f, normalize(f))
        return got[1]

    def evaluate(self, f: Formula, env: Optional[Env] = None) -> Value:
        """Semiring value of a formula under an assignment (memoised)."""
        return self._eval(self._normalized(f), dict(env or {}))

    def _eval(self, f: Formula, env: Env) -> Value:
        key = self._key(f, env)
        got = self._memo.get(key)
        if got is None:
            got = self._memo[key] = self._eval_raw(f, env)
        return got

    def _eval_raw(self, f: Formula, env: Env) -> Value:
        sr = self.sr
        if isinstance(f, TrueF):
            return sr.one
        if isinstance(f, FalseF):
            return sr.zero
        if isinstance(f, Atom):
            rec = tuple(self._resolve(t, env) for t in f.args)
            return self.db.annotation(f.rel, rec)
        if isinstance(f, Cmp):
            a, b = self._resolve(f.left, env), self._resolve(f.right, env)
            holds = (a == b) if f.op == "=" else (a != b)
            return sr.one if holds else sr.zero
        if isinstance(f, Not):
            if isinstance(f.body, Atom):
                inner = self._eval_raw(f.body, env)
                return sr.zero if inner != sr.zero else sr.one
            return self._eval(nnf(f), env)
        if isinstance(f, And):
            out = sr.one
            for p in f.parts:
                out = sr.mul(out, self._eval(p, env))
                if out == sr.zero:
                    return out  # positivity: a factor of 0 decides the product
            return out
        if isinstance(f, Or):
            out = sr.zero
            for p in f.parts:
                out = sr.add(out, self._eval(p, env))
            return out
        if isinstance(f, Quant):
            out = sr.zero if f.kind == "exists" else sr.one
            shadow = env.get(f.var)
            for value in self.domain:
                env[f.var] = value
                sub = self._eval(f.body, env)
                if f.kind == "exists":
                    out = sr.add(out, sub)
                else:
                    out = sr.mul(out, sub)
                    if out == sr.zero:
                        break
            if shadow is None:
                env.pop(f.var, None)
            else:
                env[f.var] = shadow
            return out
        return self._eval(normalize(f), env)

    # -- two-valued semantics (`⌊.⌋` in the package docs is `floor`)

    def holds(self, f: Formula, env: Optional[Env] = None) -> bool:
        """Classical truth; agrees with `evaluate(f) != 0` by positivity."""
        return self._holds(self._normalized(f), dict(env or {}))

    def _holds(self, f: Formula, env: Env) -> bool:
        key = self._key(f, env)
        got = self._bmemo.get(key)
        if got is None:
            got = self._bmemo[key] = self._holds_raw(f, env)
        return got

    def _holds_raw(self, f: Formula, env: Env) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, (Atom, Cmp)):
            return self._eval_raw(f, env) != self.sr.zero
        if isinstance(f, Not):
            if isinstance(f.body, Atom):
                return self._eval_raw(f.body, env) == self.sr.zero
            return self._holds(nnf(f), env)
        if isinstance(f, And):
            return all(self._holds(p, env) for p in f.parts)
        if isinstance(f, Or):
            return any(self._holds(p, env) for p in f.parts)
        if isinstance(f, Quant):
            hit = f.kind == "forall"
            shadow = env.get(f.var)
            try:
                for value in self.domain:
                    env[f.var] = value
                    if self._holds(f.body, env) != hit:
                        return not hit
                return hit
            finally:
                if shadow is None:
                    env.pop(f.var, None)
                else:
                    env[f.var] = shadow
        return self._holds(normalize(f), env)

    def floor(self, f: Formula, env: Optional[Env] = None) -> Value:
        return self.sr.one if self.holds(f, env) else self.sr.zero


def evaluate(db: KDatabase, f: Formula, env: Optional[Env] = None,
             extra_domain: Iterable[str] = ()) -> Value:
    return Evaluator(db, extra_domain).evaluate(f, env)


def holds(db: KDatabase, f: Formula, env: Optional[Env] = None,
          extra_domain: Iterable[str] = ()) -> bool:
    return Evaluator(db, extra_domain).holds(f, env)


def answers(db: KDatabase, f: Formula,
            var_order: Optional[List[str]] = None) -> List[Tuple[str, ...]]:
    """Assignments to the free variables making the formula classically true."""
    ev = Evaluator(db)
    fvs = var_order if var_order is not None else sorted(free_vars(f))
    out = []
    for combo in product(ev.domain, repeat=len(fvs)):
        if ev.holds(f, dict(zip(fvs, combo))):
            out.append(combo)
    return out


def annotated_answers(db: KDatabase, f: Formula,
                      var_order: Optional[List[str]] = None
                      ) -> Dict[Tuple[str, ...], Value]:
    """Nonzero semiring annotations of all assignments to the free variables."""
    ev = Evaluator(db)
    fvs = var_order if var_order is not None else sorted(free_vars(f))
    out = {}
    for combo in product(ev.domain, repeat=len(fvs)):
        val = ev.evaluate(f, dict(zip(fvs, combo)))
        if val != db.semiring.zero:
            out[combo] = val
    return out
