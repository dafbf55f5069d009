import numpy as np
import pytest

from swarmhrl.harness import generate_scenario, load_scenario
from swarmhrl.hrl import HrlConfig, HrlModel, MirrorOpponent, TeamController
from swarmhrl.sim import SlotCapacity, perceive
from swarmhrl.sim.world import mirror_heading
from swarmhrl.trainer import TrainConfig


def model(spec, seed=0):
    return HrlModel(TrainConfig(scenario=spec).hrl_config(), np.random.default_rng(seed))


def test_config_roundtrip():
    cfg = TrainConfig(scenario=load_scenario("v3"), feedback=False).hrl_config()
    assert HrlConfig.from_dict(cfg.to_dict()) == cfg


def test_save_load_roundtrip(tmp_path):
    spec = load_scenario("v3")
    m = model(spec)
    m.lower.updates = 7
    m.save(tmp_path / "ck")
    back = HrlModel.load(tmp_path / "ck")
    assert back.lower.updates == 7 and back.cfg == m.cfg
    x = np.random.default_rng(1).normal(size=(5, m.lower.feat_dim))
    for a, b in zip(m.lower.actors, back.lower.actors):
        np.testing.assert_array_equal(a(x), b(x))
    u = np.random.default_rng(2).normal(size=(5, m.upper.feat_dim))
    np.testing.assert_array_equal(m.upper.qnets[2](u), back.upper.qnets[2](u))


def test_load_rejects_bad_manifest(tmp_path):
    m = model(load_scenario("v3"))
    m.save(tmp_path / "ck")
    (tmp_path / "ck" / "manifest.json").write_text('{"format": "other", "version": 1}')
    with pytest.raises(ValueError):
        HrlModel.load(tmp_path / "ck")


def test_mirror_checkpoint_caps_mismatch(tmp_path):
    model(load_scenario("v3")).save(tmp_path / "ck")
    with pytest.raises(ValueError):
        MirrorOpponent.from_checkpoint(str(tmp_path / "ck"), caps=SlotCapacity(allies=2))
    assert MirrorOpponent.from_checkpoint(str(tmp_path / "ck"), caps=SlotCapacity()).model.cfg.n_agents == 3


def test_mirror_opponent_plays_the_reflected_game():
    spec = load_scenario("v5_symmetric")
    m = model(spec.with_sizes(5))
    world = generate_scenario(spec, 3)
    perc = perceive(world)
    blue = TeamController(m, world.obstacles, np.random.default_rng(0))
    blue.reset(world)
    blue.observe(world, perc)
    blue.decide(world, perc)
    ids_b, act_b, _ = blue.act(world, perc)
    red = MirrorOpponent(m)
    red.reset(world, np.random.default_rng(0))
    ids_r, act_r, _ = red.act(world, perc, 0)
    # symmetric spawn: red agent k mirrors blue agent k
    np.testing.assert_allclose(act_r[:, 0], act_b[:, 0], atol=1e-9)
    np.testing.assert_allclose(act_r[:, 1], mirror_heading(act_b[:, 1]), atol=1e-9)


def test_controller_sets_subgoals_for_live_agents():
    spec = load_scenario("v3")
    m = model(spec)
    world = generate_scenario(spec, 0)
    world.alive[1] = False
    perc = perceive(world)
    ctl = TeamController(m, world.obstacles, np.random.default_rng(0))
    ctl.reset(world)
    ctl.observe(world, perc)
    decisions, tasks = ctl.decide(world, perc)
    assert [d.agent for d in decisions] == [0, 2] and len(tasks) == 2
    ids, actions, feats = ctl.act(world, perc)
    assert ids.tolist() == [0, 2] and feats.shape == (2, m.lower.feat_dim)
    assert np.all((actions[:, 0] >= 0) & (actions[:, 0] <= 2))
