"""Problem files: parsing, printing, start-clause selection, equality axioms.

The matrix is a list of clauses in disjunctive normal form, one clause per
line of the input file.  Grammar (UTF-8 text):

    problem  := { clause | comment | blank }
    clause   := literal { "|" literal } "."
    literal  := [ "-" ] atom
    atom     := ident [ "(" term { "," term } ")" ] | term "=" term | "#"
    term     := variable | ident [ "(" term { "," term } ")" ]
    comment  := "%" rest-of-line

Identifiers matching [A-Z_][A-Za-z0-9_]* are variables, quantified per
clause.  `X != Y` abbreviates `-(X = Y)`; `#` is the reserved start marker.
Clause ids are assigned in file order and stay stable for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .terms import App, Literal, Term, Var

EQ = "="
START_MARK = "#"


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass
class Clause:
    id: int
    literals: tuple
    var_names: tuple  # source names; Var ids in literals are 0..len(var_names)-1

    def rename(self, offset: int) -> tuple:
        """Copy with variable ids shifted by `offset`."""
        mapping = {i: Var(offset + i) for i in range(len(self.var_names))}
        return tuple(_map_literal(l, mapping) for l in self.literals)


def _map_term(t: Term, mapping: dict) -> Term:
    if isinstance(t, Var):
        return mapping[t.id]
    if not t.args:
        return t
    return App(t.symbol, tuple(_map_term(a, mapping) for a in t.args))


def _map_literal(lit: Literal, mapping: dict) -> Literal:
    if not lit.args:
        return lit
    return Literal(lit.positive, lit.predicate, tuple(_map_term(a, mapping) for a in lit.args))


@dataclass
class Matrix:
    clauses: list = field(default_factory=list)
    start_ids: list = field(default_factory=list)
    symbol_table: dict = field(default_factory=dict)  # name -> (arity, kind)

    def clause(self, cid: int) -> Clause:
        return self.clauses[cid]


# ---------------------------------------------------------------------------
# tokenizer

_PUNCT = {"(", ")", ",", "|", ".", "-", "=", "#"}


def _tokenize(text: str):
    tokens = []  # (kind, value, line, col)
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "!" and i + 1 < n and text[i + 1] == "=":
            tokens.append(("!=", "!=", line, col))
            i += 2
            col += 2
            continue
        if c in _PUNCT:
            tokens.append((c, c, line, col))
            i += 1
            col += 1
            continue
        if c.isalnum() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(("eof", "", line, col))
    return tokens


def _is_var_name(name: str) -> bool:
    return name[0].isupper() or name[0] == "_"


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.vars: dict = {}  # per-clause: name -> id
        self.var_names: list = []

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2], tok[3])
        return tok

    def error(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok[2], tok[3])

    def parse_clauses(self) -> list:
        clauses = []
        while self.peek()[0] != "eof":
            self.vars = {}
            self.var_names = []
            lits = [self.parse_literal()]
            while self.peek()[0] == "|":
                self.next()
                lits.append(self.parse_literal())
            self.expect(".")
            clauses.append((tuple(lits), tuple(self.var_names)))
        return clauses

    def parse_literal(self) -> Literal:
        negative = False
        if self.peek()[0] == "-":
            self.next()
            negative = True
        atom = self.parse_atom()
        if negative:
            return Literal(not atom.positive, atom.predicate, atom.args)
        return atom

    def parse_atom(self) -> Literal:
        kind, value, line, col = self.peek()
        if kind == "#":
            self.next()
            return self._finish_eq(Literal(True, START_MARK, ()))
        if kind == "(":
            # parenthesized atom, e.g. -(a = b)
            self.next()
            lit = self.parse_literal()
            self.expect(")")
            return lit
        if kind != "ident":
            self.error(f"expected atom, found {value!r}")
        t = self.parse_term()
        return self._finish_eq(t)

    def _finish_eq(self, left) -> Literal:
        kind = self.peek()[0]
        if kind in ("=", "!="):
            self.next()
            right = self.parse_term()
            lt = left if isinstance(left, (Var, App)) else self._atom_as_term(left)
            return Literal(kind == "=", EQ, (lt, right))
        if isinstance(left, Literal):
            return left
        if isinstance(left, Var):
            self.error("a bare variable is not an atom")
        return Literal(True, left.symbol, left.args)

    def _atom_as_term(self, lit: Literal) -> Term:
        if lit.predicate == START_MARK:
            self.error("'#' cannot appear inside an equation")
        return App(lit.predicate, lit.args)

    def parse_term(self):
        tok = self.expect("ident")
        name = tok[1]
        if _is_var_name(name):
            if name not in self.vars:
                self.vars[name] = len(self.var_names)
                self.var_names.append(name)
            return Var(self.vars[name])
        args = []
        if self.peek()[0] == "(":
            self.next()
            args.append(self.parse_term())
            while self.peek()[0] == ",":
                self.next()
                args.append(self.parse_term())
            self.expect(")")
        return App(name, tuple(args))


def _scan_symbols(m: Matrix):
    """Fill the symbol table, enforcing arity consistency."""
    table = m.symbol_table

    def see(name: str, arity: int, kind: str):
        prev = table.get(name)
        if prev is None:
            table[name] = (arity, kind)
        elif prev != (arity, kind):
            raise ParseError(
                f"symbol {name!r} used as {kind}/{arity} but previously as {prev[1]}/{prev[0]}",
                0,
                0,
            )

    def scan_term(t: Term):
        if isinstance(t, App):
            see(t.symbol, len(t.args), "function")
            for a in t.args:
                scan_term(a)

    for clause in m.clauses:
        for lit in clause.literals:
            see(lit.predicate, len(lit.args), "predicate")
            for a in lit.args:
                scan_term(a)


def _select_starts(m: Matrix) -> list:
    marked = [c.id for c in m.clauses if any(l.predicate == START_MARK for l in c.literals)]
    if marked:
        return marked
    return [c.id for c in m.clauses if c.literals and all(l.positive for l in c.literals)]


def parse_problem(text: str) -> Matrix:
    parser = _Parser(text)
    raw = parser.parse_clauses()
    if not raw:
        raise ParseError("empty problem: no clauses", 1, 1)
    m = Matrix()
    for cid, (lits, names) in enumerate(raw):
        m.clauses.append(Clause(cid, lits, names))
    _scan_symbols(m)
    m.start_ids = _select_starts(m)
    return m


# ---------------------------------------------------------------------------
# printing

def format_term(t: Term, names: Optional[dict] = None) -> str:
    if isinstance(t, Var):
        if names and t.id in names:
            return names[t.id]
        return f"_{t.id}"
    if not t.args:
        return t.symbol
    return f"{t.symbol}({','.join(format_term(a, names) for a in t.args)})"


def format_literal(lit: Literal, names: Optional[dict] = None) -> str:
    if lit.predicate == EQ and len(lit.args) == 2:
        op = "=" if lit.positive else "!="
        return f"{format_term(lit.args[0], names)}{op}{format_term(lit.args[1], names)}"
    body = lit.predicate
    if lit.args:
        body += f"({','.join(format_term(a, names) for a in lit.args)})"
    return body if lit.positive else f"-{body}"


def format_clause(c: Clause) -> str:
    names = {i: n for i, n in enumerate(c.var_names)}
    return " | ".join(format_literal(l, names) for l in c.literals) + "."


def format_matrix(m: Matrix) -> str:
    return "\n".join(format_clause(c) for c in m.clauses) + "\n"


# ---------------------------------------------------------------------------
# equality axioms

def _canonical(lits: tuple) -> tuple:
    """Alpha-canonical form used to detect structurally identical clauses."""
    mapping: dict = {}

    def canon_term(t: Term):
        if isinstance(t, Var):
            if t.id not in mapping:
                mapping[t.id] = len(mapping)
            return ("v", mapping[t.id])
        return (t.symbol, tuple(canon_term(a) for a in t.args))

    return tuple((l.positive, l.predicate, tuple(canon_term(a) for a in l.args)) for l in lits)


def generate_equality_axioms(m: Matrix) -> Matrix:
    """Append reflexivity, symmetry, transitivity and congruence clauses.

    Clauses are in prover polarity (the negation of the usual axiom), e.g.
    transitivity is X=Y | Y=Z | X!=Z.  One congruence clause is produced per
    function or predicate symbol and argument position.  No-op when `=` does
    not occur; calling twice adds nothing new.
    """
    if EQ not in m.symbol_table:
        return m
    existing = {_canonical(c.literals) for c in m.clauses}
    new_clauses = []

    def eq(a, b, positive=True):
        return Literal(positive, EQ, (a, b))

    x, y, z = Var(0), Var(1), Var(2)
    new_clauses.append(((eq(x, x, positive=False),), ("X",)))
    new_clauses.append(((eq(x, y), eq(y, x, positive=False)), ("X", "Y")))
    new_clauses.append(((eq(x, y), eq(y, z), eq(x, z, positive=False)), ("X", "Y", "Z")))

    for name in sorted(m.symbol_table):
        arity, kind = m.symbol_table[name]
        if arity == 0 or name in (EQ, START_MARK):
            continue
        for pos in range(arity):
            # variable layout: 0 = X, 1 = Y, then one W per untouched argument
            names = ["X", "Y"] + [f"W{j + 1}" for j in range(arity - 1)]
            left_args, right_args = [], []
            w = 2
            for j in range(arity):
                if j == pos:
                    left_args.append(Var(0))
                    right_args.append(Var(1))
                else:
                    left_args.append(Var(w))
                    right_args.append(Var(w))
                    w += 1
            if kind == "function":
                lits = (
                    eq(Var(0), Var(1)),
                    eq(App(name, tuple(left_args)), App(name, tuple(right_args)), positive=False),
                )
            else:
                lits = (
                    eq(Var(0), Var(1)),
                    Literal(True, name, tuple(left_args)),
                    Literal(False, name, tuple(right_args)),
                )
            new_clauses.append((lits, tuple(names[: 2 + arity - 1])))

    for lits, names in new_clauses:
        key = _canonical(lits)
        if key in existing:
            continue
        existing.add(key)
        m.clauses.append(Clause(len(m.clauses), lits, names))
    _scan_symbols(m)
    m.start_ids = _select_starts(m)
    return m
