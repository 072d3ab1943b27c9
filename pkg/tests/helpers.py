"""Shared test utilities: independent oracles and random generators.

The oracle code here deliberately re-implements substitution and unification
with a different algorithm (naive equation solving with eager rewriting of
the whole equation set) so the main library is checked against code that
shares nothing with it.
"""

from __future__ import annotations

import random

from mctab.terms import App, Literal, Term, Var


# ---------------------------------------------------------------------------
# independent unification oracle

def oracle_apply(s: dict, t: Term) -> Term:
    if isinstance(t, Var):
        return s.get(t.id, t)
    return App(t.symbol, tuple(oracle_apply(s, a) for a in t.args))


def oracle_vars(t: Term) -> set:
    if isinstance(t, Var):
        return {t.id}
    out = set()
    for a in t.args:
        out |= oracle_vars(a)
    return out


def oracle_unify(a: Term, b: Term):
    """Naive equation-set unifier with occurs check; returns dict or None."""
    eqs = [(a, b)]
    subst = {}
    while eqs:
        left, right = eqs.pop(0)
        if left == right:
            continue
        if isinstance(left, App) and isinstance(right, App):
            if left.symbol != right.symbol or len(left.args) != len(right.args):
                return None
            eqs = list(zip(left.args, right.args)) + eqs
            continue
        if not isinstance(left, Var):
            left, right = right, left
        if left.id in oracle_vars(right):
            return None
        one = {left.id: right}
        eqs = [(oracle_apply(one, x), oracle_apply(one, y)) for x, y in eqs]
        subst = {v: oracle_apply(one, t) for v, t in subst.items()}
        subst[left.id] = right
    return subst


def alpha_equal(a: Term, b: Term, fwd=None, bwd=None) -> bool:
    """Equality up to a bijective renaming of variables."""
    if fwd is None:
        fwd, bwd = {}, {}
    if isinstance(a, Var) and isinstance(b, Var):
        if a.id in fwd:
            return fwd[a.id] == b.id
        if b.id in bwd:
            return False
        fwd[a.id] = b.id
        bwd[b.id] = a.id
        return True
    if isinstance(a, App) and isinstance(b, App):
        if a.symbol != b.symbol or len(a.args) != len(b.args):
            return False
        return all(alpha_equal(x, y, fwd, bwd) for x, y in zip(a.args, b.args))
    return False


def alpha_equal_literals(a: Literal, b: Literal) -> bool:
    if a.positive != b.positive or a.predicate != b.predicate or len(a.args) != len(b.args):
        return False
    fwd, bwd = {}, {}
    return all(alpha_equal(x, y, fwd, bwd) for x, y in zip(a.args, b.args))


# ---------------------------------------------------------------------------
# random structure generators

FUNCTIONS = [("f", 1), ("g", 1), ("h", 2), ("k", 2)]
CONSTANTS = ["a", "b", "c"]


def random_term(rng: random.Random, size_budget: int, n_vars: int = 4) -> Term:
    if size_budget <= 1:
        if rng.random() < 0.5:
            return Var(rng.randrange(n_vars))
        return App(rng.choice(CONSTANTS))
    roll = rng.random()
    if roll < 0.25:
        return Var(rng.randrange(n_vars))
    if roll < 0.45:
        return App(rng.choice(CONSTANTS))
    sym, arity = rng.choice(FUNCTIONS)
    per_arg = max(1, (size_budget - 1) // arity)
    return App(sym, tuple(random_term(rng, rng.randint(1, per_arg), n_vars) for _ in range(arity)))


def random_term_pair(rng: random.Random, max_size: int = 12):
    """A pair biased toward unifiable cases: sometimes b is a mangled copy of a."""
    a = random_term(rng, rng.randint(1, max_size))
    if rng.random() < 0.5:
        b = random_term(rng, rng.randint(1, max_size))
    else:
        b = _mangle(rng, a)
    return a, b


def _mangle(rng: random.Random, t: Term) -> Term:
    if rng.random() < 0.3:
        return random_term(rng, 3)
    if isinstance(t, Var):
        if rng.random() < 0.5:
            return Var(rng.randrange(4))
        return t
    if not t.args:
        return t
    args = tuple(_mangle(rng, a) for a in t.args)
    return App(t.symbol, args)


# ---------------------------------------------------------------------------
# MCTS test support

def random_matrix(rng: random.Random):
    """Small random DNF matrix with at least one all-positive start clause."""
    from mctab.problems import parse_problem

    preds = [("p", 1), ("q", 1), ("r", 0)]
    consts = ["a", "b"]

    def literal():
        name, arity = rng.choice(preds)
        sign = "-" if rng.random() < 0.5 else ""
        if arity == 0:
            return f"{sign}{name}"
        arg = rng.choice(consts + ["X", "f(X)", "f(a)", "g(a,b)"])
        return f"{sign}{name}({arg})"

    while True:
        n = rng.randint(3, 8)
        lines = []
        for _ in range(n):
            lits = [literal() for _ in range(rng.randint(1, 3))]
            lines.append(" | ".join(lits) + ".")
        text = "\n".join(lines) + "\n"
        try:
            m = parse_problem(text)
        except Exception:
            continue
        if m.start_ids:
            return m


def check_tree_invariants(tree):
    """Parent/child tables inverse; open-node visits sum over children."""
    for node in tree.nodes:
        for ai, cid in node.children.items():
            child = tree.nodes[cid]
            assert child.parent == node.id
            assert child.action_index == ai
        if node.state is None or node.state.result == 0:
            expected = 1 + sum(tree.nodes[c].visits for c in node.children.values())
            assert node.visits == expected, (node.id, node.visits, expected)
        else:
            assert not node.children
        assert node.reward <= node.visits + 1e-9


class RewardReplay:
    """Shadow accounting that recomputes every node's total reward."""

    def __init__(self, tree):
        self.init_reward = {n.id: n.reward for n in tree.nodes}
        self.backprop = {n.id: 0.0 for n in tree.nodes}
        self.known = len(tree.nodes)

    def after_playout(self, tree, end_id):
        end = tree.nodes[end_id]
        if len(tree.nodes) > self.known:  # a node was expanded
            assert len(tree.nodes) == self.known + 1
            self.known += 1
            self.init_reward[end_id] = end.reward
            self.backprop[end_id] = 0.0
            reward = end.reward
            start = end.parent
        else:
            reward = 1.0 if (end.state is not None and end.state.result == 1) else 0.0
            start = end_id
        cur = start
        while cur is not None:
            self.backprop[cur] += reward
            cur = tree.nodes[cur].parent

    def check(self, tree):
        for node in tree.nodes:
            expected = self.init_reward[node.id] + self.backprop[node.id]
            assert abs(node.reward - expected) < 1e-9, (node.id, node.reward, expected)
