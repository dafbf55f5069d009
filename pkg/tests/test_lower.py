import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from swarmhrl.lower import LowerConfig, LowerPolicy, avoidance_reward, intrinsic_reward, lower_reward
from swarmhrl.replay import ReplayBuffer
from swarmhrl.sim.config import SlotCapacity

CAPS = SlotCapacity()


def policy(n=2, seed=0, **cfg):
    return LowerPolicy(n, CAPS, 2.0, LowerConfig(**cfg), np.random.default_rng(seed))


def random_batch(pol, b, rng, done=0.0):
    n, f = pol.n, pol.feat_dim
    return {
        "feats": rng.normal(size=(b, n, f)), "alive": np.ones((b, n)),
        "act": rng.uniform(-1, 1, (b, n, 2)), "reward": rng.normal(size=b),
        "next_feats": rng.normal(size=(b, n, f)), "next_alive": np.ones((b, n)),
        "done": np.full(b, done),
    }


def test_reward_examples():
    assert avoidance_reward(True) == -1.0 and avoidance_reward(False) == 0.0
    assert intrinsic_reward((0, 0), (0, 0), (4, 0)) == -1.0
    assert intrinsic_reward((4, 0), (0, 0), (4, 0)) == 0.0
    assert intrinsic_reward((2, 0), (0, 0), (4, 0)) == pytest.approx(-0.5, abs=1e-12)
    # start exactly on the subgoal: guarded denominator
    assert intrinsic_reward((1e-7, 0), (0, 0), (0, 0), eps_den=1e-6) == pytest.approx(-0.1)
    ra, rb = np.array([-1.0, 0.0]), np.array([-0.5, -0.25])
    assert lower_reward(ra, rb, 1.0) == -1.0
    assert lower_reward(ra, rb, 0.0) == -0.75
    assert lower_reward(-np.ones(5), -np.ones(5), 0.3) == pytest.approx(-5.0)
    with pytest.raises(ValueError):
        lower_reward(ra, rb, 1.5)


@settings(max_examples=100, deadline=None)
@given(p=st.tuples(st.floats(-50, 50), st.floats(-50, 50)), s=st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
       q=st.tuples(st.floats(-50, 50), st.floats(-50, 50)))
def test_intrinsic_reward_nonpositive(p, s, q):
    r = intrinsic_reward(p, s, q)
    assert r <= 0.0
    assert (r == 0.0) == (np.linalg.norm(np.subtract(q, p)) == 0.0)


def test_select_action_determinism_and_bounds():
    pol = policy()
    rng = np.random.default_rng(0)
    f = rng.normal(size=pol.feat_dim)
    np.testing.assert_array_equal(pol.select_action(0, f), pol.select_action(0, f))
    a = pol.select_action(0, f, noise_sigma=1e6, rng=rng)
    assert 0.0 <= a[0] <= 2.0 and -math.pi <= a[1] <= math.pi


def test_action_bounds_million_draws():
    pol = policy(n=1)
    rng = np.random.default_rng(1)
    for _ in range(10):
        feats = rng.normal(0, 5, size=(100_000, pol.feat_dim))
        raw, _ = pol.actors[0].forward(feats, pre_noise=rng.normal(0, 3, (100_000, 2)))
        act = pol.to_world(raw, feats)
        assert np.all((act[:, 0] >= 0) & (act[:, 0] <= 2))
        assert np.all((act[:, 1] >= -math.pi) & (act[:, 1] <= math.pi))


def test_goal_frame_zero_offset_points_at_subgoal():
    pol = policy(n=1)
    obs = np.zeros((1, pol.layout.lower_dim))
    obs[0, :2] = (10.0, 10.0)
    f = pol.features(obs, np.array([[10.0, 14.0]]))
    act = pol.to_world(np.array([[1.0, 0.0]]), f)
    assert act[0, 1] == pytest.approx(math.pi / 2)


def test_encode_grad_matches_finite_differences():
    pol = policy(n=1)
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(5, pol.feat_dim))
    a = rng.uniform(-0.9, 0.9, (5, 2))
    w = rng.normal(size=(5, pol.code_dim))
    g = pol.encode_grad(a, feats, w)
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1e-6
        num = (np.sum(w * pol.encode(a + e, feats), axis=1) - np.sum(w * pol.encode(a - e, feats), axis=1)) / 2e-6
        np.testing.assert_allclose(g[:, k], num, rtol=1e-6, atol=1e-9)


def test_critic_targets_gamma_zero_and_terminal():
    pol = policy()
    rng = np.random.default_rng(0)
    b = random_batch(pol, 8, rng)
    np.testing.assert_array_equal(pol.critic_targets(b, 0.0), b["reward"])
    b = random_batch(pol, 8, rng, done=1.0)
    y = pol.critic_targets(b, 0.99)
    np.testing.assert_allclose(y, np.repeat(b["reward"][:, None], pol.n, 1))


def test_critic_loss_matches_hand_value():
    pol = policy(n=1, hidden=(2,))
    for p in pol.critics[0].params:
        p[...] = 0.0
    pol.critics[0].params[-1][...] = 0.75  # Q == 0.75 everywhere
    b = random_batch(pol, 1, np.random.default_rng(0))
    b["reward"][:] = -0.25
    losses = pol.critic_update(b, gamma=0.0)
    assert losses[0] == pytest.approx(1.0)


def test_actor_flat_critic_gives_no_update():
    pol = policy(n=2, heading_prior=0.0)
    f = pol.feat_dim
    for c in pol.critics:
        w = c.params[0].reshape(pol.n, pol.block, -1)
        w[:, 1 + f:, :] = 0.0  # critic ignores every action input
    before = [p.copy() for p in pol.actors[0].params]
    pol.actor_update(random_batch(pol, 16, np.random.default_rng(0)))
    assert all(np.array_equal(a, b) for a, b in zip(before, pol.actors[0].params))


class _QuadraticCritic:
    """Q = -|a_i|^2 on agent i's (raw) action slot."""

    def __init__(self, start):
        self.start = start

    def forward(self, x):
        a = x[:, self.start:self.start + 2]
        return -np.sum(a * a, axis=1, keepdims=True), a

    def backward(self, cache, g):
        return None, _pad(-2.0 * cache * g, self.start, self.width)


def _pad(block, start, width):
    out = np.zeros((block.shape[0], width))
    out[:, start:start + 2] = block
    return out


def test_actor_pushed_toward_zero_action():
    pol = policy(n=1, action_code="raw", heading_frame="world", actor_lr=1e-3)
    critic = _QuadraticCritic(1 + pol.feat_dim)
    critic.width = pol.joint_dim
    pol.critics[0] = critic
    rng = np.random.default_rng(0)
    b = random_batch(pol, 64, rng)
    for p in pol.actors[0].params[-2:]:
        p += rng.normal(0, 0.5, p.shape)

    def norm():
        return float(np.mean(np.sum(pol.normalize(pol.actors[0](b["feats"][:, 0])) ** 2, axis=1)))

    first = norm()
    for _ in range(200):
        pol.actor_update(b)
    assert norm() < 0.1 * first


def test_actor_loss_is_negative_mean_q():
    pol = policy(n=2, heading_prior=0.0)
    b = random_batch(pol, 10, np.random.default_rng(0))
    acts = b["act"].copy()
    acts[:, 0] = pol.normalize(pol.to_world(pol.actors[0](b["feats"][:, 0]), b["feats"][:, 0]))
    q = pol.critics[0](pol.joint_input(b["feats"], b["alive"], acts))[:, 0]
    losses = pol.actor_update(b)
    assert losses[0] == pytest.approx(-q.mean(), rel=1e-12)


def test_heading_prior_pulls_offset_to_zero():
    pol = policy(n=1, actor_lr=1e-3)
    critic = pol.critics[0]
    w = critic.params[0].reshape(1, pol.block, -1)
    w[:, 1 + pol.feat_dim:, :] = 0.0  # flat critic: only the prior acts
    rng = np.random.default_rng(0)
    b = random_batch(pol, 64, rng)
    pol.actors[0].params[-1][1] = 0.8

    def offset():
        return float(np.mean(np.abs(pol.actors[0](b["feats"][:, 0])[:, 1])))

    first = offset()
    for _ in range(300):
        pol.actor_update(b)
    assert offset() < 0.2 * first


def test_update_counts_and_target_sync():
    pol = policy(n=1, target_every=3, batch=4)
    buf = pol.make_buffer()
    rng = np.random.default_rng(0)
    b = random_batch(pol, 1, rng)
    buf.add(**{k: v[0] for k, v in b.items()})
    for _ in range(3):
        pol.update(rng)
    assert pol.updates == 3
    assert all(np.array_equal(a, t) for a, t in zip(pol.actors[0].params, pol.target_actors[0].params))


def test_noise_schedule():
    pol = policy()
    assert pol.noise_at(0.0) == pytest.approx(0.3)
    assert pol.noise_at(1.0) == pytest.approx(0.05)
    assert pol.noise_at(2.0) == pytest.approx(0.05)


def test_replay_fifo_and_capacity():
    buf = ReplayBuffer(3, {"x": ()})
    for k in range(5):
        buf.add(x=k)
    assert len(buf) == 3
    assert sorted(buf.data["x"].tolist()) == [2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        ReplayBuffer(3, {"x": ()}).sample(2, np.random.default_rng(0))


def test_replay_sampling_uniform_chi2():
    buf = ReplayBuffer(50, {"x": ()})
    for k in range(50):
        buf.add(x=k)
    rng = np.random.default_rng(0)
    idx = np.concatenate([buf.sample_indices(64, rng) for _ in range(2000)])
    counts = np.bincount(idx, minlength=50)
    assert stats.chisquare(counts).pvalue > 0.001
