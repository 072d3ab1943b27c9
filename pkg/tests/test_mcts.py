import math
import random

from mctab.calculus import PROVED
from mctab.config import Config
from mctab.features import FeatureExtractor
from mctab.guidance import DefaultGuidance
from mctab.mcts import (
    SearchNode,
    _dedup,
    bigstep,
    extract_training_data,
    playout,
    search_problem,
    uct_score,
)
from mctab.mcts import SearchTree
from mctab.problems import parse_problem
from mctab.calculus import initial_states
from mctab.features import FeatureVector

from helpers import RewardReplay, check_tree_invariants, random_matrix

APP_A = "-p(X).\np(Y) | -q(a).\nq(a).\n"
TWO_CHOICE = "p.\n-p | r.\n-p | s.\n-s.\n"


def node_with(reward, visits, prior):
    return SearchNode(
        id=0, parent=None, action_index=None, state=None,
        prior=prior, visits=visits, reward=reward, child_priors=[],
    )


def test_uct_score_examples():
    assert uct_score(node_with(1.0, 1, 0.3), 1, 3.0) == 1.0  # ln 1 = 0
    score = uct_score(node_with(2.0, 4, 0.25), 16, 3.0)
    assert abs(score - (0.5 + 0.75 * math.sqrt(math.log(16) / 4))) < 1e-12
    assert abs(score - 1.12441) < 1e-4
    # larger prior strictly increases the score once the parent has visits
    low = uct_score(node_with(1.0, 2, 0.1), 5, 2.0)
    high = uct_score(node_with(1.0, 2, 0.4), 5, 2.0)
    assert high > low


def test_uct_argmax_matches_brute_force():
    rng = random.Random(0)
    for _ in range(2000):
        n = rng.randint(2, 6)
        parent_visits = 0
        children = []
        for i in range(n):
            visits = rng.randint(1, 50)
            reward = rng.uniform(0, visits)
            prior = rng.uniform(0.01, 1.0)
            children.append(node_with(reward, visits, prior))
            parent_visits += visits
        parent_visits += 1
        cp = rng.choice([0.5, 2.0, 3.0])
        scores = [uct_score(c, parent_visits, cp) for c in children]
        best = max(range(n), key=lambda i: (scores[i], -i))
        ref = 0
        for i in range(1, n):
            if scores[i] > scores[ref]:
                ref = i
        assert best == ref


def test_cp_extremes():
    # equal priors; child 0 has the best mean, child 1 the fewest visits
    children = [node_with(9.0, 10, 0.5), node_with(0.2, 2, 0.5), node_with(3.0, 10, 0.5)]
    n_parent = 23
    exploit = [uct_score(c, n_parent, 0.0) for c in children]
    assert exploit.index(max(exploit)) == 0
    explore = [uct_score(c, n_parent, 1e9) for c in children]
    assert explore.index(max(explore)) == 1


def test_first_playout_expands_highest_prior_root_action():
    m = parse_problem(TWO_CHOICE)
    cfg = Config(rewrite=False)
    g = DefaultGuidance()
    tree = SearchTree(m, cfg, g, initial_states(m, cfg))
    nid = playout(tree, g, cfg, cp=3.0)
    # uniform priors tie-break to the lowest action index
    assert tree.node(nid).action_index == 0
    assert tree.node(nid).parent == tree.root_id


def test_proved_leaf_backpropagates_reward_one():
    m = parse_problem(TWO_CHOICE)
    cfg = Config(rewrite=False)
    g = DefaultGuidance()
    tree = SearchTree(m, cfg, g, initial_states(m, cfg))
    while tree.proved_node is None:
        playout(tree, g, cfg, cp=3.0)
    root = tree.node(tree.root_id)
    proved = tree.node(tree.proved_node)
    assert proved.state.result == PROVED
    assert proved.reward == 1.0
    assert root.reward >= 1.0


def test_root_visits_count_playouts():
    # unprovable recursive problem: playouts keep expanding without terminals
    m = parse_problem("q(a).\n-q(X) | q(f(X)).\n")
    cfg = Config(rewrite=False, single_action_optim=False)
    g = DefaultGuidance()
    tree = SearchTree(m, cfg, g, initial_states(m, cfg))
    for p in range(30):
        playout(tree, g, cfg, cp=3.0)
    assert tree.node(tree.root_id).visits == 31  # root starts at 1


def test_tree_invariants_on_random_problems():
    rng = random.Random(42)
    cfg = Config(rewrite=False, inference_limit=60, bigstep_freq=7, path_limit=50)
    g = DefaultGuidance()
    for _ in range(30):
        m = random_matrix(rng)
        try:
            starts = initial_states(m, cfg)
        except Exception:
            continue
        tree = SearchTree(m, cfg, g, starts)
        replay = RewardReplay(tree)
        for _ in range(25):
            if tree.proved_node is not None or tree.node(tree.bigstep_root).dead:
                break
            nid = playout(tree, g, cfg, cp=3.0)
            replay.after_playout(tree, nid)
            check_tree_invariants(tree)
            replay.check(tree)
            if tree.playouts % cfg.bigstep_freq == 0:
                bigstep(tree)


def test_bigstep_moves_to_best_mean_child():
    m = parse_problem("q(a).\n-q(X) | q(f(X)).\n-q(X) | q(g(X)).\n")
    cfg = Config(rewrite=False, single_action_optim=False)
    g = DefaultGuidance()
    tree = SearchTree(m, cfg, g, initial_states(m, cfg))
    for _ in range(8):
        playout(tree, g, cfg, cp=3.0)
    root = tree.node(tree.root_id)
    assert len(root.children) == 2
    c0 = tree.node(root.children[0])
    c1 = tree.node(root.children[1])
    c0.reward, c0.visits = 3.0, 4  # mean 0.75
    c1.reward, c1.visits = 5.0, 10  # mean 0.5
    assert bigstep(tree) == c0.id
    assert tree.bigstep_nodes[-1] == c0.id
    # tie on mean: larger visit count wins
    tree.bigstep_root = tree.root_id
    c0.reward, c0.visits = 2.0, 4
    c1.reward, c1.visits = 5.0, 10
    assert bigstep(tree) == c1.id


def test_search_finds_proof_on_simple_problem():
    m = parse_problem(APP_A)
    res = search_problem(m, DefaultGuidance(), Config(rewrite=False), name="app_a")
    assert res.outcome == "proved"
    assert res.proof is not None
    assert res.stats.proof_len == len(res.proof)
    assert res.stats.line().startswith("app_a\tproved\t")


def test_zero_budget_exhausts_immediately():
    m = parse_problem(TWO_CHOICE)
    res = search_problem(m, DefaultGuidance(), Config(rewrite=False, inference_limit=0))
    assert res.outcome == "exhausted"
    assert res.proof is None


def test_unprovable_problem_exhausts():
    m = parse_problem("p(a).\n-p(b).\n")
    res = search_problem(m, DefaultGuidance(), Config(rewrite=False, inference_limit=50))
    assert res.outcome == "exhausted"


def test_fully_failed_root_stops_early():
    m = parse_problem(TWO_CHOICE.replace("-s.\n", ""))  # both branches dead-end
    cfg = Config(rewrite=False, inference_limit=10_000)
    res = search_problem(m, DefaultGuidance(), cfg)
    assert res.outcome == "exhausted"
    assert res.stats.inferences < 10  # stopped by deadness, not by budget


def test_extraction_failed_search_has_value_rows_no_policy():
    m = parse_problem(TWO_CHOICE)
    cfg = Config(rewrite=False, inference_limit=1)
    res = search_problem(m, DefaultGuidance(), cfg)
    assert res.outcome == "exhausted"
    ex = FeatureExtractor(m, 1000)
    value_rows, policy_rows = extract_training_data(res.tree, res.outcome, cfg, ex)
    assert policy_rows == []
    assert len(value_rows) >= 1
    assert all(t == -3.0 for _, t, _ in value_rows)


def test_extraction_proved_includes_proof_path_nodes():
    m = parse_problem(TWO_CHOICE)
    cfg = Config(rewrite=False)
    res = search_problem(m, DefaultGuidance(), cfg)
    assert res.outcome == "proved"
    ex = FeatureExtractor(m, 1000)
    value_rows, policy_rows = extract_training_data(res.tree, res.outcome, cfg, ex)
    # the proved node was never a bigstep node yet contributes a +3 row
    assert any(t == 3.0 for _, t, _ in value_rows)
    assert all(t > 0 for _, t, _ in value_rows)  # every extracted node leads to the proof
    assert len(policy_rows) == 2  # both root actions were expanded
    # with limited policy off, even the failed search contributes policy rows
    cfg2 = Config(rewrite=False, inference_limit=1, limited_policy=False)
    res2 = search_problem(m, DefaultGuidance(), cfg2)
    _, policy2 = extract_training_data(res2.tree, res2.outcome, cfg2, ex)
    assert res2.outcome == "exhausted"
    assert len(policy2) >= 1


def test_all_proofsteps_toggle():
    m = parse_problem(TWO_CHOICE)
    cfg_on = Config(rewrite=False, all_proofsteps=True)
    cfg_off = Config(rewrite=False, all_proofsteps=False)
    ex = FeatureExtractor(m, 1000)
    res = search_problem(m, DefaultGuidance(), cfg_on)
    v_on, _ = extract_training_data(res.tree, res.outcome, cfg_on, ex)
    v_off, _ = extract_training_data(res.tree, res.outcome, cfg_off, ex)
    assert len(v_on) > len(v_off)


def test_dedup_keeps_maximum_target():
    fv1 = FeatureVector({1: 1.0}, 10)
    fv1b = FeatureVector({1: 1.0}, 10)
    fv2 = FeatureVector({2: 2.0}, 10)
    rows = [(fv1, -3.0, 1.0), (fv2, 1.0, 1.0), (fv1b, 2.5, 1.0), (fv1, 0.0, 1.0)]
    out = _dedup(rows)
    assert len(out) == 2
    assert out[0][1] == 2.5
    assert out[1][1] == 1.0


def test_rewrite_is_conservative_on_equality_chains():
    # anything proved with rewriting on stays provable with it off, given a
    # raised inference budget and the equality axioms in the matrix
    import os
    from mctab.cli import corpus_dir

    for name in ("eq_chain_2.p", "eq_chain_4.p", "eq_chain_8.p"):
        text = open(os.path.join(corpus_dir(), name)).read()
        m = parse_problem(text)
        on = search_problem(
            m, DefaultGuidance(), Config(inference_limit=20000, bigstep_freq=100, path_limit=60)
        )
        assert on.outcome == "proved", name
        off = search_problem(
            m,
            DefaultGuidance(),
            Config(inference_limit=60000, bigstep_freq=100, path_limit=60, rewrite=False),
        )
        assert off.outcome == "proved", name


def test_multiple_start_clauses_become_root_children():
    m = parse_problem("p(a).\np(b).\n-p(X) | r.\n-r | -p(a).\n")
    cfg = Config(rewrite=False, single_action_optim=False)
    g = DefaultGuidance()
    tree = SearchTree(m, cfg, g, initial_states(m, cfg))
    root = tree.node(tree.root_id)
    assert root.state is None  # virtual root over the start choice
    assert root.action_count() == 2
    playout(tree, g, cfg, cp=3.0)
    playout(tree, g, cfg, cp=3.0)
    assert len(root.children) == 2
