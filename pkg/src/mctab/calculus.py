"""Connection-tableau state machine with explicit state.

A prover state carries the open goals of the active branch, the active path,
lemmas, a stack of saved frames for sibling branches, the accumulated proof
trace and substitution, and the list of valid actions.  Applying an action
never mutates the parent state; after every nondeterministic action the
deterministic simplifications run to a fixpoint (pop empty goals, loop
elimination by identity, lemma steps, reductions, forced single actions,
path limit).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .config import Config
from .problems import EQ, START_MARK, Matrix, format_literal, format_term
from .terms import (
    Literal,
    Subst,
    Var,
    apply_literal,
    apply_literals,
    apply_term,
    compose,
    is_ground_literal,
    literal_positions,
    literal_replace,
    literal_subterm,
    match_term,
    negate,
    unify_literals,
)

OPEN, PROVED, FAILED = 0, 1, -1

# deterministic chains are bounded as a last-resort guard against matrices
# that drive single-action rewriting forever on ground goals
_DET_GUARD = 100000


class NoStartClauseError(Exception):
    pass


# ---------------------------------------------------------------------------
# actions

@dataclass(frozen=True)
class ExtAction:
    clause_id: int
    lit_index: int


@dataclass(frozen=True)
class RedAction:
    path_index: int


@dataclass(frozen=True)
class RewAction:
    clause_id: int
    lit_index: int
    direction: str  # "LR" rewrites left side to right, "RL" the reverse
    position: tuple


Action = object


# ---------------------------------------------------------------------------
# proof steps; literal fields hold step-time instantiations and are finalized
# through the accumulated substitution when the trace is printed

@dataclass(frozen=True)
class StartStep:
    clause_id: int
    varmap: tuple  # ((source var name, fresh var id), ...)


@dataclass(frozen=True)
class ExtStep:
    clause_id: int
    varmap: tuple
    goal_lit: Literal


@dataclass(frozen=True)
class RedStep:
    goal_lit: Literal
    path_lit: Literal


@dataclass(frozen=True)
class LemStep:
    lit: Literal


@dataclass(frozen=True)
class RewStep:
    clause_id: int
    varmap: tuple
    eq_lit: Literal
    direction: str
    goal_before: Literal
    goal_after: Literal
    side_lits: tuple


@dataclass
class ProverState:
    goals: tuple
    path: tuple
    lemmas: tuple
    todos: tuple  # of (goals, path, lemmas)
    actions: tuple
    proof: tuple
    result: int
    subst: Subst
    next_var: int
    inference_count: int


# ---------------------------------------------------------------------------
# action enumeration

def valid_actions(m: Matrix, goals: tuple, path: tuple, cfg: Config, next_var: int) -> tuple:
    """All applicable actions for the head goal literal.

    Extensions connect the head to a complementary input-clause literal;
    reductions to a complementary path literal (both under unification with
    occurs check).  Rewrite actions use a negative equational clause literal
    as an oriented rule whose left side matches a goal subterm; matching only
    instantiates the clause's variables.
    """
    if not goals:
        return ()
    head = goals[0]
    neg_head = negate(head)
    out = []
    for clause in m.clauses:
        renamed = None
        for j, lit in enumerate(clause.literals):
            if (
                lit.predicate != head.predicate
                or lit.positive == head.positive
                or len(lit.args) != len(head.args)
            ):
                continue
            if renamed is None:
                renamed = clause.rename(next_var)
            if unify_literals(neg_head, renamed[j]) is not None:
                out.append(ExtAction(clause.id, j))
    for k, plit in enumerate(path):
        if plit.predicate != head.predicate or plit.positive == head.positive:
            continue
        if unify_literals(neg_head, plit) is not None:
            out.append(RedAction(k))
    if cfg.rewrite:
        out.extend(_rewrite_actions(m, head, next_var))
    return tuple(out)


def _rewrite_actions(m: Matrix, head: Literal, next_var: int) -> list:
    out = []
    goal_positions = literal_positions(head)
    if not goal_positions:
        return out
    for clause in m.clauses:
        renamed = None
        for j, lit in enumerate(clause.literals):
            if lit.positive or lit.predicate != EQ or len(lit.args) != 2:
                continue
            if renamed is None:
                renamed = clause.rename(next_var)
            left, right = renamed[j].args
            for direction, src, dst in (("LR", left, right), ("RL", right, left)):
                for pos in goal_positions:
                    sub = literal_subterm(head, pos)
                    sigma = match_term(src, sub)
                    if sigma is None:
                        continue
                    if apply_term(sigma, dst) == sub:
                        continue  # no-op rewrite
                    out.append(RewAction(clause.id, j, direction, pos))
    return out


# ---------------------------------------------------------------------------
# working representation (mutable scratch for one derivation step)

class _Work:
    __slots__ = ("goals", "path", "lemmas", "todos", "proof", "subst", "next_var", "inferences")

    def __init__(self, state: ProverState):
        self.goals = list(state.goals)
        self.path = state.path
        self.lemmas = state.lemmas
        self.todos = list(state.todos)
        self.proof = list(state.proof)
        self.subst = state.subst
        self.next_var = state.next_var
        self.inferences = state.inference_count

    def bind(self, delta: Subst):
        """Apply new bindings across the whole state and fold them into subst."""
        if not delta:
            return
        self.goals = [apply_literal(delta, l) for l in self.goals]
        self.path = apply_literals(delta, self.path)
        self.lemmas = apply_literals(delta, self.lemmas)
        self.todos = [
            (apply_literals(delta, g), apply_literals(delta, p), apply_literals(delta, le))
            for g, p, le in self.todos
        ]
        self.subst = compose(self.subst, delta)

    def finish(self, result: int, actions: tuple) -> ProverState:
        return ProverState(
            goals=tuple(self.goals),
            path=self.path,
            lemmas=self.lemmas,
            todos=tuple(self.todos),
            actions=actions,
            proof=tuple(self.proof),
            result=result,
            subst=self.subst,
            next_var=self.next_var,
            inference_count=self.inferences,
        )


def _apply_on_work(m: Matrix, w: _Work, action) -> None:
    """One nondeterministic step on the scratch state (no det_steps here)."""
    head = w.goals[0]
    tail = w.goals[1:]
    w.inferences += 1
    if isinstance(action, ExtAction):
        clause = m.clause(action.clause_id)
        offset = w.next_var
        renamed = clause.rename(offset)
        w.next_var = offset + len(clause.var_names)
        delta = unify_literals(negate(head), renamed[action.lit_index])
        if delta is None:
            raise ValueError("extension action no longer applicable")
        w.goals = tail
        w.bind(delta)
        head2 = apply_literal(delta, head)
        rest = apply_literals(
            delta, renamed[: action.lit_index] + renamed[action.lit_index + 1 :]
        )
        if w.goals:
            w.todos = [(tuple(w.goals), w.path, (head2,) + w.lemmas)] + w.todos
        w.goals = list(rest)
        w.path = (head2,) + w.path
        varmap = tuple((n, offset + i) for i, n in enumerate(clause.var_names))
        w.proof.append(ExtStep(clause.id, varmap, head2))
    elif isinstance(action, RedAction):
        plit = w.path[action.path_index]
        delta = unify_literals(negate(head), plit)
        if delta is None:
            raise ValueError("reduction action no longer applicable")
        w.goals = tail
        w.bind(delta)
        w.proof.append(RedStep(apply_literal(delta, head), apply_literal(delta, plit)))
    elif isinstance(action, RewAction):
        clause = m.clause(action.clause_id)
        offset = w.next_var
        renamed = clause.rename(offset)
        w.next_var = offset + len(clause.var_names)
        eq_lit = renamed[action.lit_index]
        left, right = eq_lit.args
        src, dst = (left, right) if action.direction == "LR" else (right, left)
        sigma = match_term(src, literal_subterm(head, action.position))
        if sigma is None:
            raise ValueError("rewrite action no longer applicable")
        goal_after = literal_replace(head, action.position, apply_term(sigma, dst))
        sides = apply_literals(
            sigma, renamed[: action.lit_index] + renamed[action.lit_index + 1 :]
        )
        # sigma binds only fresh clause variables; fold it in for trace output
        w.subst = compose(w.subst, sigma)
        if tail:
            w.todos = [(tuple(tail), w.path, w.lemmas)] + w.todos
        w.goals = [goal_after] + list(sides)
        w.path = (head,) + w.path
        varmap = tuple((n, offset + i) for i, n in enumerate(clause.var_names))
        w.proof.append(
            RewStep(
                clause.id,
                varmap,
                apply_literal(sigma, eq_lit),
                action.direction,
                head,
                goal_after,
                sides,
            )
        )
    else:
        raise TypeError(f"unknown action {action!r}")


def _det_on_work(m: Matrix, w: _Work, cfg: Config) -> ProverState:
    """Deterministic simplification to fixpoint; returns the settled state."""
    eager = cfg.eager
    for _ in range(_DET_GUARD):
        if not w.goals:
            if not w.todos:
                return w.finish(PROVED, ())
            goals2, path2, lemmas2 = w.todos.pop(0)
            w.goals = list(goals2)
            w.path = path2
            w.lemmas = lemmas2
            continue
        head = w.goals[0]
        if head in w.path:  # loop elimination, identity only
            return w.finish(FAILED, ())
        if head in w.lemmas:
            w.proof.append(LemStep(head))
            w.goals = w.goals[1:]
            continue
        neg_head = negate(head)
        if neg_head in w.path:  # reduction without unification
            w.proof.append(RedStep(head, neg_head))
            w.goals = w.goals[1:]
            continue
        if eager:
            hit = None
            for plit in w.path:
                if plit.predicate != head.predicate or plit.positive == head.positive:
                    continue
                delta = unify_literals(neg_head, plit)
                if delta is not None:
                    hit = (plit, delta)
                    break
            if hit is not None:
                plit, delta = hit
                w.goals = w.goals[1:]
                w.bind(delta)
                w.proof.append(
                    RedStep(apply_literal(delta, head), apply_literal(delta, plit))
                )
                continue
        actions = valid_actions(m, tuple(w.goals), w.path, cfg, w.next_var)
        if cfg.single_action_optim and len(actions) == 1:
            if len(w.path) > cfg.path_limit:
                # forced chains must respect the depth bound even on ground
                # goals, otherwise term-growing matrices chain forever
                return w.finish(FAILED, ())
            _apply_on_work(m, w, actions[0])
            continue
        if not actions:
            return w.finish(FAILED, ())
        if len(w.path) > cfg.path_limit and not all(is_ground_literal(l) for l in w.goals):
            return w.finish(FAILED, ())
        return w.finish(OPEN, actions)
    return w.finish(FAILED, ())


# ---------------------------------------------------------------------------
# public operations

def det_steps(m: Matrix, state: ProverState, cfg: Config) -> ProverState:
    return _det_on_work(m, _Work(state), cfg)


def apply_action(m: Matrix, state: ProverState, index: int, cfg: Config) -> ProverState:
    """Apply the indexed action, then settle with det_steps.  Parent untouched."""
    if state.result != OPEN:
        raise ValueError("cannot act on a closed state")
    if index < 0 or index >= len(state.actions):
        raise IndexError(f"action index {index} out of range")
    w = _Work(state)
    _apply_on_work(m, w, state.actions[index])
    return _det_on_work(m, w, cfg)


def initial_states(m: Matrix, cfg: Config) -> list:
    """One settled state per start clause.

    When several start clauses exist, picking among them is the search's
    first branching (the search layer builds a virtual root over these).
    """
    if not m.start_ids:
        raise NoStartClauseError("matrix has no start clause")
    out = []
    for sid in m.start_ids:
        clause = m.clause(sid)
        renamed = clause.rename(0)
        goals = [l for l in renamed if l.predicate != START_MARK]
        varmap = tuple((n, i) for i, n in enumerate(clause.var_names))
        state = ProverState(
            goals=tuple(goals),
            path=(),
            lemmas=(),
            todos=(),
            actions=(),
            proof=(StartStep(sid, varmap),),
            result=OPEN,
            subst={},
            next_var=len(clause.var_names),
            inference_count=0,
        )
        out.append(det_steps(m, state, cfg))
    return out


# ---------------------------------------------------------------------------
# proof trace serialization (the checker's input contract)

def _fmt(subst: Subst, lit: Literal) -> str:
    return format_literal(apply_literal(subst, lit))


def _fmt_theta(subst: Subst, varmap: tuple) -> str:
    parts = [f"{name}={format_term(apply_term(subst, Var(vid)))}" for name, vid in varmap]
    return "{" + ",".join(parts) + "}"


def format_proof(proof: tuple, subst: Subst) -> str:
    """Render a proof trace, finalizing every recorded term through subst."""
    lines = []
    for step in proof:
        if isinstance(step, StartStep):
            lines.append(f"start {step.clause_id} {_fmt_theta(subst, step.varmap)}")
        elif isinstance(step, ExtStep):
            lines.append(
                f"ext {step.clause_id} {_fmt_theta(subst, step.varmap)} {_fmt(subst, step.goal_lit)}"
            )
        elif isinstance(step, RedStep):
            lines.append(f"red {_fmt(subst, step.goal_lit)} {_fmt(subst, step.path_lit)}")
        elif isinstance(step, LemStep):
            lines.append(f"lem {_fmt(subst, step.lit)}")
        elif isinstance(step, RewStep):
            fields = [
                "rew",
                str(step.clause_id),
                _fmt_theta(subst, step.varmap),
                _fmt(subst, step.eq_lit),
                step.direction,
                _fmt(subst, step.goal_before),
                _fmt(subst, step.goal_after),
            ]
            fields.extend(_fmt(subst, s) for s in step.side_lits)
            lines.append(" ".join(fields))
        else:
            raise TypeError(f"unknown proof step {step!r}")
    return "\n".join(lines) + "\n"
