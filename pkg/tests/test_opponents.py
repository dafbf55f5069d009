import math

import numpy as np
import pytest
from scipy import stats

from conftest import make_world
from swarmhrl.opponents import (
    ScriptedOpponent,
    attack_candidates,
    attack_scores,
    expert_rules,
    heuristic_attack,
    make_opponent,
    random_action,
    steer,
)
from swarmhrl.sim import TaskKind, perceive


def test_random_actions_uniform_ks():
    rng = np.random.default_rng(0)
    a = np.array([random_action(rng, 2.0) for _ in range(10_000)])
    assert stats.kstest(a[:, 0], stats.uniform(0, 2).cdf).pvalue > 0.01
    assert stats.kstest(a[:, 1], stats.uniform(-math.pi, 2 * math.pi).cdf).pvalue > 0.01


def test_scripted_opponent_random_is_seeded_and_bounded():
    w = make_world([(5, 5), (20, 10), (22, 12)], [0, 1, 1])
    p = perceive(w)
    outs = []
    for _ in range(2):
        opp = ScriptedOpponent("random")
        opp.reset(w, np.random.default_rng(3))
        outs.append(opp.act(w, p)[1])
    np.testing.assert_array_equal(outs[0], outs[1])
    assert np.all((outs[0][:, 0] >= 0) & (outs[0][:, 0] <= 2))
    with pytest.raises(ValueError):
        ScriptedOpponent("nope")
    assert make_opponent("expert").kind == "expert"


def test_steer_goes_straight_without_obstacles():
    w = make_world([(5, 5)], [1])
    a = steer(w, perceive(w), 0, (5, 9))
    assert a[0] == 2.0 and a[1] == pytest.approx(math.pi / 2)
    # close goal: speed just reaches it in one step
    a = steer(w, perceive(w), 0, (5.05, 5))
    assert a[0] == pytest.approx(0.5)


def test_steer_deflects_around_obstacle():
    w = make_world([(5, 5)], [1], rects=[(6.0, 5.0, 0.3, 0.3)])
    a = steer(w, perceive(w), 0, (10, 5))
    assert abs(a[1]) > 0.05  # no longer aimed through the obstacle


def test_expert_rule_priorities():
    chase = make_world([(10, 10), (13, 10)], [1, 0], vel=[(1, 0), (0, 0)])
    _, task = expert_rules(chase, perceive(chase), 0)
    assert task == TaskKind.CHASING
    flee = make_world([(10, 10), (13, 10)], [1, 0], vel=[(-1, 0), (0, 0)])
    act, task = expert_rules(flee, perceive(flee), 0)
    assert task == TaskKind.ESCAPING
    assert math.cos(act[1]) < 0  # heading away from the threat
    sup = make_world([(10, 10), (12, 10), (28, 2)], [1, 1, 0], task=[TaskKind.SEARCHING, TaskKind.CHASING,
                                                                       TaskKind.SEARCHING])
    _, task = expert_rules(sup, perceive(sup), 0)
    assert task == TaskKind.SUPPORTING
    lone = make_world([(10, 10), (28, 2)], [1, 0])
    state = {}
    _, task = expert_rules(lone, perceive(lone), 0, state)
    assert task == TaskKind.SEARCHING and 0 in state


def reference_scores(world, candidates, owners, enemies):
    """Same scoring written out per term."""
    out = []
    for c, e in zip(candidates, owners):
        to_c = c - world.pos[e]
        gain = -(to_c[0] * math.cos(world.heading[e]) + to_c[1] * math.sin(world.heading[e])) / math.hypot(*to_c)
        threat = 0.0
        for j in enemies:
            rel = c - world.pos[j]
            d = math.hypot(*rel)
            facing = (rel[0] * math.cos(world.heading[j]) + rel[1] * math.sin(world.heading[j])) / d
            threat += max(facing, 0.0) * math.exp(-d / world.config.attack_radius)
        out.append(gain - threat)
    return np.array(out)


def test_attack_scores_match_reference():
    w = make_world([(10, 10), (12, 10), (11, 13)], [1, 0, 0], heading=[0.0, 0.3, -2.0])
    enemies = np.array([1, 2])
    cand, owners = attack_candidates(w, enemies, 0.7, 12)
    assert cand.shape == (24, 2) and owners.tolist() == [1] * 12 + [2] * 12
    np.testing.assert_allclose(attack_scores(w, cand, owners, enemies),
                               reference_scores(w, cand, owners, enemies), rtol=1e-12)


def test_heuristic_prefers_position_behind_enemy():
    w = make_world([(10, 10), (13, 10)], [1, 0], heading=[0.0, 0.0])
    act, task = heuristic_attack(w, perceive(w), 0)
    assert task == TaskKind.CHASING
    cand, owners = attack_candidates(w, np.array([1]), 0.7, 12)
    best = cand[np.argmax(attack_scores(w, cand, owners, np.array([1])))]
    assert best[0] < 13  # behind the enemy, which faces +x


def test_expert_chases_lone_advantaged_enemy():
    w = make_world([(10, 10), (12, 11)], [1, 0], vel=[(1, 0), (0, 0)])
    act, task = expert_rules(w, perceive(w), 0)
    assert task == TaskKind.CHASING
    assert act[1] == pytest.approx(math.atan2(1, 2))


def test_patrol_without_contacts_is_bounded():
    w = make_world([(3, 3), (28, 18)], [1, 0])
    opp = ScriptedOpponent("expert")
    opp.reset(w, np.random.default_rng(0))
    p = perceive(w)
    for _ in range(3):
        ids, act, tasks = opp.act(w, p)
        assert tasks.tolist() == [TaskKind.SEARCHING]
        assert 0 <= act[0, 0] <= 2 and -math.pi <= act[0, 1] <= math.pi
