"""Value and policy functions: defaults, model transforms, training targets.

All squashing between model space and search space lives here; the learner
deals in raw regression values only.  Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .calculus import ProverState
from .terms import term_stats


@dataclass
class GuidanceConfig:
    cp: float = 3.0
    temperature: float = 2.0
    discount: float = 0.99
    value_clip: float = 3.0
    policy_clip: float = -6.0


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def default_value(total_goal_size: int) -> float:
    """Heuristic state value from the total term size of the open goals."""
    return _sigmoid(3.7 * math.exp(-0.05 * total_goal_size) - 2.5)


def default_policy(n: int) -> list:
    if n < 1:
        raise ValueError("no actions to assign priors to")
    return [1.0 / n] * n


def value_target(k: Optional[int], gcfg: GuidanceConfig = GuidanceConfig()) -> float:
    """Clipped logit of the discounted reward; k=None marks a failure node."""
    clip = gcfg.value_clip
    if k is None:
        return -clip
    reward = gcfg.discount**k
    if reward >= 1.0:
        return clip
    if reward <= 0.0:  # underflow for very distant proofs
        return -clip
    return min(clip, max(-clip, math.log(reward / (1.0 - reward))))


def value_from_prediction(v_raw: float, open_goals: int) -> float:
    """Map a raw model output into [0,1] with an incentive toward few goals."""
    squashed = _sigmoid(v_raw)
    return squashed ** (open_goals / 2.0)


def policy_target(
    parent_visits: int, child_visits: int, n_actions: int, gcfg: GuidanceConfig = GuidanceConfig()
) -> float:
    """Clipped log of the child's visit frequency relative to uniform."""
    ratio = (child_visits / parent_visits) * n_actions
    if ratio <= 0.0:
        return gcfg.policy_clip
    return max(gcfg.policy_clip, math.log(ratio))


def priors_from_predictions(scores: Sequence[float], temperature: float = 2.0) -> list:
    if not scores:
        raise ValueError("empty score list")
    top = max(scores)
    exps = [math.exp((s - top) / temperature) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


# ---------------------------------------------------------------------------
# guidance objects used by the search

class DefaultGuidance:
    """First-iteration guidance: size heuristic value, uniform priors."""

    def value(self, s: ProverState) -> float:
        return default_value(term_stats(s.goals)[0])

    def priors(self, s: ProverState) -> list:
        n = len(s.actions)
        return default_policy(n) if n else []


class ModelGuidance:
    """Learned guidance; either model may be absent, falling back to defaults."""

    def __init__(self, value_model, policy_model, extractor, gcfg: GuidanceConfig):
        self.value_model = value_model
        self.policy_model = policy_model
        self.extractor = extractor
        self.gcfg = gcfg
        self._default = DefaultGuidance()

    def value(self, s: ProverState) -> float:
        if self.value_model is None:
            return self._default.value(s)
        raw = self.value_model.predict(self.extractor.state_features(s))
        return value_from_prediction(raw, len(s.goals))

    def priors(self, s: ProverState) -> list:
        if not s.actions:
            return []
        if self.policy_model is None:
            return default_policy(len(s.actions))
        scores = [
            self.policy_model.predict(self.extractor.action_features(s, a)) for a in s.actions
        ]
        return priors_from_predictions(scores, self.gcfg.temperature)
