"""First-order terms, literals, substitutions and unification with occurs check.

Terms are immutable values.  Variables are integers wrapped in Var; function
symbols and constants are App nodes (a constant is an App with no arguments).
Substitutions are plain dicts from variable id to Term, kept normalized
(fully composed) so that applying one twice equals applying it once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union


@dataclass(frozen=True, slots=True)
class Var:
    id: int


@dataclass(frozen=True, slots=True)
class App:
    symbol: str
    args: tuple = ()


Term = Union[Var, App]

Subst = dict  # variable id -> Term


@dataclass(frozen=True, slots=True)
class Literal:
    positive: bool
    predicate: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)


def negate(lit: Literal) -> Literal:
    return Literal(not lit.positive, lit.predicate, lit.args)


# ---------------------------------------------------------------------------
# substitution application

def apply_term(s: Subst, t: Term) -> Term:
    if isinstance(t, Var):
        return s.get(t.id, t)
    if not t.args:
        return t
    args = tuple(apply_term(s, a) for a in t.args)
    if all(a is b for a, b in zip(args, t.args)):
        return t  # untouched subtrees keep their identity
    return App(t.symbol, args)


def apply_literal(s: Subst, lit: Literal) -> Literal:
    if not lit.args:
        return lit
    args = tuple(apply_term(s, a) for a in lit.args)
    if all(a is b for a, b in zip(args, lit.args)):
        return lit
    return Literal(lit.positive, lit.predicate, args)


def apply_literals(s: Subst, lits: Iterable[Literal]) -> tuple:
    return tuple(apply_literal(s, l) for l in lits)


def compose(s: Subst, delta: Subst) -> Subst:
    """Normalized composition: (compose(s, d))(t) == d(s(t)) for all t."""
    out = {v: apply_term(delta, t) for v, t in s.items()}
    for v, t in delta.items():
        if v not in out:
            out[v] = t
    return out


# ---------------------------------------------------------------------------
# unification

def term_vars(t: Term, acc: Optional[list] = None) -> list:
    """Variable ids in first-occurrence order."""
    if acc is None:
        acc = []
    if isinstance(t, Var):
        if t.id not in acc:
            acc.append(t.id)
    else:
        for a in t.args:
            term_vars(a, acc)
    return acc


def literal_vars(lit: Literal, acc: Optional[list] = None) -> list:
    if acc is None:
        acc = []
    for a in lit.args:
        term_vars(a, acc)
    return acc


def occurs(v: int, t: Term) -> bool:
    if isinstance(t, Var):
        return t.id == v
    return any(occurs(v, a) for a in t.args)


def is_ground_term(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground_term(a) for a in t.args)


def is_ground_literal(lit: Literal) -> bool:
    return all(is_ground_term(a) for a in lit.args)


def unify_terms(a: Term, b: Term, under: Optional[Subst] = None) -> Optional[Subst]:
    """Most general unifier extending `under`, or None.

    Always performs the occurs check.  The result is normalized: no binding
    contains a variable that is itself bound.
    """
    s: Subst = dict(under) if under else {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if isinstance(x, Var):
            x = s.get(x.id, x)
        if isinstance(y, Var):
            y = s.get(y.id, y)
        if x == y:
            continue
        if isinstance(x, Var) or isinstance(y, Var):
            if not isinstance(x, Var):
                x, y = y, x
            t = apply_term(s, y)
            if occurs(x.id, t):
                return None
            one = {x.id: t}
            s = {v: apply_term(one, w) for v, w in s.items()}
            s[x.id] = t
        else:
            if x.symbol != y.symbol or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
    return s


def unify_literals(a: Literal, b: Literal, under: Optional[Subst] = None) -> Optional[Subst]:
    """Unify two literals' argument lists; polarity agreement is the caller's concern."""
    if a.predicate != b.predicate or len(a.args) != len(b.args):
        return None
    s: Optional[Subst] = dict(under) if under else {}
    for x, y in zip(a.args, b.args):
        s = unify_terms(x, y, s)
        if s is None:
            return None
    return s


def match_term(pattern: Term, subject: Term, under: Optional[Subst] = None) -> Optional[Subst]:
    """One-sided matching: binds only variables of `pattern`, never of `subject`."""
    s: Subst = dict(under) if under else {}
    stack = [(pattern, subject)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            bound = s.get(p.id)
            if bound is None:
                s[p.id] = t
            elif bound != t:
                return None
        elif isinstance(t, Var):
            return None
        else:
            if p.symbol != t.symbol or len(p.args) != len(t.args):
                return None
            stack.extend(zip(p.args, t.args))
    return s


# ---------------------------------------------------------------------------
# statistics

def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


def term_depth(t: Term) -> int:
    if isinstance(t, Var) or not t.args:
        return 1
    return 1 + max(term_depth(a) for a in t.args)


def literal_size(lit: Literal) -> int:
    return 1 + sum(term_size(a) for a in lit.args)


def literal_depth(lit: Literal) -> int:
    if not lit.args:
        return 1
    return 1 + max(term_depth(a) for a in lit.args)


def _symbol_occurrences(t: Term) -> int:
    if isinstance(t, Var):
        return 0
    return 1 + sum(_symbol_occurrences(a) for a in t.args)


def term_stats(goals: Iterable[Literal]) -> tuple:
    """(total_size, max_size, max_depth, symbol_count) over a goal list.

    Size counts every symbol and variable occurrence; a constant or variable
    has depth 1.  symbol_count excludes variable occurrences.
    """
    total = 0
    max_size = 0
    max_depth = 0
    symbols = 0
    for lit in goals:
        n = literal_size(lit)
        total += n
        max_size = max(max_size, n)
        max_depth = max(max_depth, literal_depth(lit))
        symbols += 1 + sum(_symbol_occurrences(a) for a in lit.args)
    return total, max_size, max_depth, symbols


# ---------------------------------------------------------------------------
# positions and replacement (leftmost-outermost, 1-based argument indices)

def positions(t: Term) -> list:
    out = [()]
    if isinstance(t, App):
        for i, a in enumerate(t.args, start=1):
            out.extend((i,) + p for p in positions(a))
    return out


def subterm_at(t: Term, pos: tuple) -> Term:
    for i in pos:
        if not isinstance(t, App) or i < 1 or i > len(t.args):
            raise IndexError(f"invalid position {pos!r}")
        t = t.args[i - 1]
    return t


def replace_at(t: Term, pos: tuple, u: Term) -> Term:
    if not pos:
        return u
    if not isinstance(t, App) or pos[0] < 1 or pos[0] > len(t.args):
        raise IndexError(f"invalid position {pos!r}")
    i = pos[0] - 1
    args = list(t.args)
    args[i] = replace_at(args[i], pos[1:], u)
    return App(t.symbol, tuple(args))


def literal_positions(lit: Literal) -> list:
    """Argument subterm positions of a literal, excluding the predicate itself."""
    out = []
    for i, a in enumerate(lit.args, start=1):
        out.extend((i,) + p for p in positions(a))
    return out


def literal_subterm(lit: Literal, pos: tuple) -> Term:
    return subterm_at(lit.args[pos[0] - 1], pos[1:])


def literal_replace(lit: Literal, pos: tuple, u: Term) -> Literal:
    args = list(lit.args)
    args[pos[0] - 1] = replace_at(args[pos[0] - 1], pos[1:], u)
    return Literal(lit.positive, lit.predicate, tuple(args))


# ---------------------------------------------------------------------------
# depth-bounded structural hashing (for feature caching; collisions permitted)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: str) -> int:
    h = _FNV_OFFSET
    for b in data.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _mix(h: int, x: int) -> int:
    return ((h ^ x) * _FNV_PRIME) & _MASK


_VAR_HASH = fnv1a64("var")


def term_hash(t: Term, depth: int) -> int:
    """Structural hash ignoring everything below `depth`.

    Variables hash to one shared token at every depth so alpha-variant terms
    hash equally; at depth 0 only the root symbol is seen.
    """
    if isinstance(t, Var):
        return _VAR_HASH
    h = fnv1a64(t.symbol)
    if depth <= 0 or not t.args:
        return h
    for a in t.args:
        h = _mix(h, term_hash(a, depth - 1))
    return h


def literal_hash(lit: Literal, depth: int) -> int:
    h = fnv1a64(("" if lit.positive else "~") + lit.predicate)
    if depth <= 0:
        return h
    for a in lit.args:
        h = _mix(h, term_hash(a, depth - 1))
    return h


def literals_hash(lits: Iterable[Literal], depth: int) -> int:
    h = _FNV_OFFSET
    for lit in lits:
        h = _mix(h, literal_hash(lit, depth))
    return h
