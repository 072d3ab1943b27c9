"""Iterated data collection and training (the expert-iteration loop).

Each iteration searches every problem under the current guidance, verifies
every found proof with the independent checker (a rejected proof aborts the
run: the search may never grade its own homework), appends the extracted
rows to the cumulative datasets, and retrains the value and policy models on
everything collected so far.

Problems are processed in sorted filename order and can be distributed over
a worker pool; results are merged back in name order so runs with the same
seed are bit-for-bit reproducible.  Wall-clock time is reported on stdout
but kept out of report.tsv for the same reason.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import gbt
from .checker import check_proof_texts
from .calculus import format_proof
from .config import Config
from .features import FeatureExtractor
from .guidance import DefaultGuidance, GuidanceConfig, ModelGuidance
from .mcts import extract_training_data, search_problem, _dedup
from .problems import parse_problem


class LoopError(Exception):
    pass


class ProofRejected(LoopError):
    """A proof failed independent verification; the run must not continue."""


@dataclass
class IterationReport:
    iteration: int
    attempted: int
    proved: int
    cumulative_proved: int
    value_rows: int
    policy_rows: int
    value_model: str
    policy_model: str
    wall_time: float
    lines: list = field(default_factory=list)
    trained_value: object = None  # transient, not serialized
    trained_policy: object = None


def list_problems(problem_dir: str) -> list:
    names = sorted(f for f in os.listdir(problem_dir) if f.endswith(".p"))
    if not names:
        raise LoopError(f"no .p problem files in {problem_dir!r}")
    return names


def _guidance_for(m, cfg: Config, value_model, policy_model):
    if value_model is None and policy_model is None:
        return DefaultGuidance(), FeatureExtractor(m, cfg.feature_dim), cfg.cp_initial
    extractor = FeatureExtractor(m, cfg.feature_dim)
    gcfg = GuidanceConfig(temperature=cfg.temperature, discount=cfg.discount)
    return ModelGuidance(value_model, policy_model, extractor, gcfg), extractor, cfg.cp_later


def solve_one(name: str, text: str, cfg: Config, value_model=None, policy_model=None):
    """Search one problem; returns (stats, trace or None, value rows, policy rows)."""
    m = parse_problem(text)
    guidance, extractor, cp = _guidance_for(m, cfg, value_model, policy_model)
    result = search_problem(m, guidance, cfg, cp=cp, name=name)
    trace = None
    if result.outcome == "proved":
        trace = format_proof(result.proof, result.proof_subst)
    value_rows, policy_rows = extract_training_data(result.tree, result.outcome, cfg, extractor)
    return result.stats, trace, value_rows, policy_rows


def _worker(args):
    name, text, cfg, value_text, policy_text = args
    value_model = gbt.parse_model(value_text) if value_text else None
    policy_model = gbt.parse_model(policy_text) if policy_text else None
    return solve_one(name, text, cfg, value_model, policy_model)


def run_iteration(
    problem_dir: str,
    out_dir: str,
    iteration: int,
    cfg: Config,
    value_model=None,
    policy_model=None,
    cumulative_value: Optional[list] = None,
    cumulative_policy: Optional[list] = None,
    proved_ever: Optional[set] = None,
) -> IterationReport:
    """One data-collection plus training pass over the problem directory."""
    t0 = time.monotonic()
    names = list_problems(problem_dir)
    texts = {}
    for name in names:
        with open(os.path.join(problem_dir, name), "r", encoding="utf-8") as fh:
            texts[name] = fh.read()

    if cfg.workers > 1:
        value_text = gbt.format_model(value_model) if value_model else None
        policy_text = gbt.format_model(policy_model) if policy_model else None
        jobs = [(n, texts[n], cfg, value_text, policy_text) for n in names]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=1))
    else:
        results = [solve_one(n, texts[n], cfg, value_model, policy_model) for n in names]

    proofs_dir = os.path.join(out_dir, "proofs")
    os.makedirs(proofs_dir, exist_ok=True)
    cumulative_value = cumulative_value if cumulative_value is not None else []
    cumulative_policy = cumulative_policy if cumulative_policy is not None else []
    proved_ever = proved_ever if proved_ever is not None else set()

    lines = []
    proved = 0
    for name, (stats, trace, value_rows, policy_rows) in zip(names, results):
        if trace is not None:
            verdict = check_proof_texts(trace, texts[name])
            if not verdict.ok:
                raise ProofRejected(
                    f"{name}: checker rejected an emitted proof: {verdict.message}"
                )
            with open(os.path.join(proofs_dir, name + ".proof"), "w", encoding="utf-8") as fh:
                fh.write(trace)
            proved += 1
            proved_ever.add(name)
        lines.append(stats.line())
        cumulative_value.extend(value_rows)
        cumulative_policy.extend(policy_rows)

    value_data = _dedup(cumulative_value)
    policy_data = _dedup(cumulative_policy)
    gbt.save_dataset(
        gbt.Dataset(value_data, cfg.feature_dim), os.path.join(out_dir, "value.data")
    )
    gbt.save_dataset(
        gbt.Dataset(policy_data, cfg.feature_dim), os.path.join(out_dir, "policy.data")
    )

    params = gbt.GbtParams(
        eta=cfg.eta,
        max_depth=cfg.max_depth,
        reg_lambda=cfg.reg_lambda,
        rounds=cfg.rounds,
        patience=cfg.patience,
    )
    value_path = os.path.join(out_dir, "value.model")
    new_value = gbt.train(gbt.Dataset(value_data, cfg.feature_dim), params)
    gbt.save(new_value, value_path)
    policy_path = ""
    new_policy = None
    if policy_data:
        policy_path = os.path.join(out_dir, "policy.model")
        new_policy = gbt.train(gbt.Dataset(policy_data, cfg.feature_dim), params)
        gbt.save(new_policy, policy_path)

    with open(os.path.join(out_dir, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    report = IterationReport(
        iteration=iteration,
        attempted=len(names),
        proved=proved,
        cumulative_proved=len(proved_ever),
        value_rows=len(value_data),
        policy_rows=len(policy_data),
        value_model=value_path,
        policy_model=policy_path,
        wall_time=time.monotonic() - t0,
        lines=lines,
    )
    report.trained_value = new_value
    report.trained_policy = new_policy
    return report


def run_loop(problem_dir: str, iterations: int, out_root: str, cfg: Config) -> list:
    """Iteration 0 runs unguided; every later iteration loads the fresh models."""
    reports = []
    value_model = None
    policy_model = None
    cumulative_value: list = []
    cumulative_policy: list = []
    proved_ever: set = set()
    for k in range(iterations):
        out_dir = os.path.join(out_root, f"iter{k}")
        os.makedirs(out_dir, exist_ok=True)
        report = run_iteration(
            problem_dir,
            out_dir,
            k,
            cfg,
            value_model=value_model,
            policy_model=policy_model,
            cumulative_value=cumulative_value,
            cumulative_policy=cumulative_policy,
            proved_ever=proved_ever,
        )
        reports.append(report)
        value_model = report.trained_value
        policy_model = report.trained_policy
    return reports
