import os

import pytest

from mctab.config import Config
from mctab.loop import LoopError, list_problems, run_iteration, run_loop, solve_one

FAST = dict(
    inference_limit=500,
    time_limit_s=60.0,
    bigstep_freq=50,
    path_limit=60,
    rounds=10,
    patience=5,
    max_depth=4,
)

PROBLEMS = {
    "a_chain.p": "-s0.\ns0 | -s1.\ns1.\n",
    "b_fo.p": "-p(f(a)).\np(f(X)) | -q(X).\nq(a).\n",
    "c_dead.p": "p(a).\n-p(b).\n",
}


@pytest.fixture
def problem_dir(tmp_path):
    d = tmp_path / "probs"
    d.mkdir()
    for name, text in PROBLEMS.items():
        (d / name).write_text(text)
    return str(d)


def test_list_problems_sorted_and_errors(tmp_path, problem_dir):
    assert list_problems(problem_dir) == sorted(PROBLEMS)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(LoopError):
        list_problems(str(empty))


def test_run_iteration_outputs(problem_dir, tmp_path):
    out = tmp_path / "out" / "iter0"
    out.mkdir(parents=True)
    cfg = Config(**FAST)
    report = run_iteration(problem_dir, str(out), 0, cfg)
    assert report.attempted == 3
    assert report.proved == 2
    assert report.cumulative_proved == 2
    for name in ("value.data", "policy.data", "value.model", "report.tsv"):
        assert (out / name).exists()
    proofs = sorted(os.listdir(out / "proofs"))
    assert proofs == ["a_chain.p.proof", "b_fo.p.proof"]
    lines = (out / "report.tsv").read_text().strip().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("a_chain.p\tproved\t")


def test_run_loop_accumulates(problem_dir, tmp_path):
    cfg = Config(**FAST)
    reports = run_loop(problem_dir, 2, str(tmp_path / "out"), cfg)
    assert len(reports) == 2
    assert reports[1].value_rows >= reports[0].value_rows
    assert reports[1].cumulative_proved >= reports[0].cumulative_proved
    assert (tmp_path / "out" / "iter1" / "value.model").exists()


def test_loop_deterministic(problem_dir, tmp_path):
    cfg = Config(**FAST)
    run_loop(problem_dir, 2, str(tmp_path / "one"), cfg)
    run_loop(problem_dir, 2, str(tmp_path / "two"), cfg)
    for k in (0, 1):
        for name in ("report.tsv", "value.data", "policy.data", "value.model"):
            a = (tmp_path / "one" / f"iter{k}" / name).read_bytes()
            b = (tmp_path / "two" / f"iter{k}" / name).read_bytes()
            assert a == b, (k, name)


def test_worker_pool_matches_serial(problem_dir, tmp_path):
    serial = Config(**FAST)
    pooled = Config(**FAST)
    pooled.workers = 2
    run_loop(problem_dir, 1, str(tmp_path / "serial"), serial)
    run_loop(problem_dir, 1, str(tmp_path / "pooled"), pooled)
    for name in ("report.tsv", "value.data", "policy.data", "value.model"):
        a = (tmp_path / "serial" / "iter0" / name).read_bytes()
        b = (tmp_path / "pooled" / "iter0" / name).read_bytes()
        assert a == b, name


def test_solve_one_roundtrip():
    stats, trace, value_rows, policy_rows = solve_one(
        "x.p", PROBLEMS["a_chain.p"], Config(**FAST)
    )
    assert stats.outcome == "proved"
    assert trace.startswith("start ")
    assert value_rows and policy_rows is not None
