"""Sparse features: term walks up to length 3 plus scalars, hashed to dimension d.

Walk tokens are vertical root-to-descendant symbol chains with variables
abstracted to a shared `*` token and literal polarity folded into the
predicate symbol.  Regions are tag-prefixed (`g:` goals, `p:` path, `a:...`
action) and share one hashed space: token j lands in bucket fnv1a64(j) mod d
and colliding tokens sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .calculus import ExtAction, ProverState, RedAction, RewAction
from .problems import Matrix
from .terms import Literal, Term, Var, fnv1a64, literal_hash, literals_hash, term_stats


@dataclass
class FeatureVector:
    entries: dict  # index -> value; indices < dim, values finite and > 0
    dim: int


def _sym(t: Term) -> str:
    return "*" if isinstance(t, Var) else t.symbol


def _children(t: Term) -> tuple:
    return () if isinstance(t, Var) else t.args


def _add(out: dict, token: str, value: float = 1.0):
    out[token] = out.get(token, 0.0) + value


def _walks_from(label: str, children: tuple, tag: str, out: dict):
    _add(out, tag + label)
    for c in children:
        c_label = _sym(c)
        _add(out, tag + label + "." + c_label)
        for cc in _children(c):
            _add(out, tag + label + "." + c_label + "." + _sym(cc))


def _literal_walks(lit: Literal, tag: str, out: dict):
    root = lit.predicate if lit.positive else "~" + lit.predicate
    _walks_from(root, lit.args, tag, out)
    stack = list(lit.args)
    while stack:
        t = stack.pop()
        _walks_from(_sym(t), _children(t), tag, out)
        stack.extend(_children(t))


def _count_symbols(lit: Literal, counts: dict):
    counts[lit.predicate] = counts.get(lit.predicate, 0) + 1
    stack = list(lit.args)
    while stack:
        t = stack.pop()
        if not isinstance(t, Var):
            counts[t.symbol] = counts.get(t.symbol, 0) + 1
            stack.extend(t.args)


def raw_features(m: Matrix, goals: tuple, path: tuple, action=None) -> dict:
    """Token multiset for a state and optionally one action."""
    out: dict = {}
    for lit in goals:
        _literal_walks(lit, "g:", out)
    for lit in path:
        _literal_walks(lit, "p:", out)
    if action is not None:
        if isinstance(action, ExtAction):
            for lit in m.clause(action.clause_id).literals:
                _literal_walks(lit, "a:ext:", out)
        elif isinstance(action, RedAction):
            _literal_walks(path[action.path_index], "a:red:", out)
        elif isinstance(action, RewAction):
            eq = m.clause(action.clause_id).literals[action.lit_index]
            _literal_walks(eq, f"a:rew:{action.direction}:", out)
        else:
            raise TypeError(f"unknown action {action!r}")
    total, max_size, max_depth, symbols = term_stats(goals)
    out["n:goals"] = float(len(goals))
    out["n:symbols"] = float(symbols)
    out["n:maxsize"] = float(max_size)
    out["n:maxdepth"] = float(max_depth)
    out["n:pathlen"] = float(len(path))
    counts: dict = {}
    for lit in goals:
        _count_symbols(lit, counts)
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:2]
    for name, _ in top:
        _add(out, "top:" + name)
    return out


def compress(raw: dict, dim: int) -> FeatureVector:
    """Index-modulo hashing; colliding tokens sum, zero values drop out."""
    if dim <= 0:
        raise ValueError("feature dimension must be positive")
    entries: dict = {}
    for token, value in raw.items():
        if value == 0.0:
            continue
        idx = fnv1a64(token) % dim
        entries[idx] = entries.get(idx, 0.0) + value
    return FeatureVector(entries, dim)


class FeatureExtractor:
    """Per-worker extractor with a cache keyed by depth-3 structural hashes.

    Hash collisions can alias cache entries; that is acceptable for feature
    caching and mirrors how depth-bounded term hashing is used upstream.
    """

    CACHE_DEPTH = 3

    def __init__(self, m: Matrix, dim: int):
        self.matrix = m
        self.dim = dim
        self._state_cache: dict = {}
        self._action_cache: dict = {}

    def _state_key(self, s: ProverState) -> tuple:
        d = self.CACHE_DEPTH
        return (literals_hash(s.goals, d), literals_hash(s.path, d))

    def state_features(self, s: ProverState) -> FeatureVector:
        key = self._state_key(s)
        hit = self._state_cache.get(key)
        if hit is None:
            hit = compress(raw_features(self.matrix, s.goals, s.path), self.dim)
            self._state_cache[key] = hit
        return hit

    def action_features(self, s: ProverState, action) -> FeatureVector:
        if isinstance(action, ExtAction):
            akey = ("e", action.clause_id, action.lit_index)
        elif isinstance(action, RedAction):
            akey = ("r", literal_hash(s.path[action.path_index], self.CACHE_DEPTH))
        elif isinstance(action, RewAction):
            akey = ("w", action.clause_id, action.lit_index, action.direction)
        else:
            raise TypeError(f"unknown action {action!r}")
        key = self._state_key(s) + (akey,)
        hit = self._action_cache.get(key)
        if hit is None:
            hit = compress(raw_features(self.matrix, s.goals, s.path, action), self.dim)
            self._action_cache[key] = hit
        return hit
