import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CFG, make_world
from swarmhrl import _kernels
from swarmhrl.predict import (
    ClusterSet,
    GlobalPlanner,
    PredictorConfig,
    TrackHistory,
    cluster,
    escape_candidates,
    escape_subgoal,
    potential_field_correct,
    rollout,
    search_subgoal,
    second_order_step,
)
from swarmhrl.sim import ObstacleSet, perceive

BACKENDS = sorted(_kernels.backends().items())


def reference_partition(points, threshold):
    """Naive average linkage: merge the closest pair of clusters until every link >= threshold."""
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    groups = [[i] for i in range(len(points))]
    while len(groups) > 1:
        best, pair = np.inf, None
        for a, b in itertools.combinations(range(len(groups)), 2):
            link = d[np.ix_(groups[a], groups[b])].mean()
            if link < best:
                best, pair = link, (a, b)
        if best >= threshold:
            break
        a, b = pair
        groups[a] = groups[a] + groups.pop(b)
    return {frozenset(g) for g in groups}


def partition(labels):
    return {frozenset(np.flatnonzero(labels == k).tolist()) for k in np.unique(labels)}


def test_second_order_step_examples():
    np.testing.assert_allclose(second_order_step((0, 0), (1, 0), None, 0.1), [0.1, 0.0])
    # acc = (1 - 0) / 0.1 = 10 -> 0.1 + 0.5 * 0.01 * 10
    np.testing.assert_allclose(second_order_step((0, 0), (1, 0), (0, 0), 0.1), [0.15, 0.0], atol=1e-12)
    np.testing.assert_allclose(second_order_step((1, 2), (0, 0), (0, 0), 0.1), [1, 2])


def test_potential_field_examples():
    circles = np.array([[0.0, 0.0]])
    np.testing.assert_allclose(potential_field_correct((0.1, 0.0), circles, 0.6, 0.1), [0.15, 0.0], atol=1e-12)
    np.testing.assert_array_equal(potential_field_correct((1.0, 0.0), circles, 0.6, 0.1), [1.0, 0.0])
    np.testing.assert_allclose(potential_field_correct((0.0, 0.0), circles, 0.6, 0.1), [0.06, 0.0])
    two = np.array([[-0.2, 0.0], [0.2, 0.0]])
    # symmetric pushes cancel
    np.testing.assert_allclose(potential_field_correct((0.0, 0.0), two, 0.6, 0.1), [0.0, 0.0], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_potential_field_never_pulls_inward(x, y):
    c = np.array([[0.0, 0.0]])
    p = np.array([x, y])
    q = potential_field_correct(p, c, 0.6, 0.1)
    assert np.linalg.norm(q) >= np.linalg.norm(p) - 1e-12


@pytest.mark.parametrize("name,backend", BACKENDS)
def test_cluster_matches_reference(name, backend, monkeypatch):
    monkeypatch.setattr(_kernels, "average_linkage", backend.average_linkage)
    rng = np.random.default_rng(42)
    for k in range(100):
        pts = rng.uniform(0, 10, (50, 2))
        threshold = float(rng.uniform(0.5, 4.0))
        assert partition(cluster(pts, threshold).labels) == reference_partition(pts, threshold), k


def test_cluster_examples():
    pts = np.array([[0, 0], [0.5, 0], [10, 10], [10.5, 10]], dtype=float)
    cs = cluster(pts, 2.0)
    assert cs.labels.tolist() == [0, 0, 1, 1]
    np.testing.assert_allclose(cs.centers, [[0.25, 0], [10.25, 10]])
    assert cs.sizes.tolist() == [2, 2]
    assert len(cluster(np.array([[1.0, 2.0]]), 2.0)) == 1
    with pytest.raises(ValueError):
        cluster(np.zeros((0, 2)), 2.0)


def test_linkage_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(0)
    py, cy = _kernels.backends()["python"], _kernels.backends()["cython"]
    for _ in range(20):
        pts = rng.uniform(0, 30, (60, 2))
        np.testing.assert_allclose(py.average_linkage(pts), cy.average_linkage(pts), rtol=1e-12)


def test_rollout_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(1)
    py, cy = _kernels.backends()["python"], _kernels.backends()["cython"]
    args = (rng.uniform(0, 30, (8, 2)), rng.normal(size=(8, 2)), rng.normal(size=(8, 2)),
            0.1 * rng.normal(size=(8, 25)), rng.uniform(0, 30, (40, 2)), 0.6, 0.1, 2.0, 30.0, 20.0)
    np.testing.assert_allclose(py.rollout(*args), cy.rollout(*args), rtol=1e-10, atol=1e-12)


def test_rollout_straight_line_and_bounds():
    hist = TrackHistory()
    hist.record(0, (5.0, 5.0), (1.0, 0.0))
    traj = rollout(hist, 10, 3, np.random.default_rng(0), circles=np.zeros((0, 2)), clearance=0.6,
                   dt=0.1, v_max=2.0, arena=(30, 20), jitter=0.0)
    assert traj.shape == (3, 10, 2)
    np.testing.assert_allclose(traj[0, :, 0], 5.0 + 0.1 * np.arange(1, 11))
    hist = TrackHistory()
    hist.record(0, (29.9, 19.9), (2.0, 2.0))
    traj = rollout(hist, 20, 4, np.random.default_rng(0), circles=np.zeros((0, 2)), clearance=0.6,
                   dt=0.1, v_max=2.0, arena=(30, 20), jitter=0.3)
    assert np.all((traj >= 0) & (traj <= [30, 20]))
    assert rollout(TrackHistory(), 5, 2, None, circles=np.zeros((0, 2)), clearance=0.6, dt=0.1,
                   v_max=2.0, arena=(30, 20)).shape == (0, 5, 2)


def test_track_history_acceleration():
    h = TrackHistory()
    h.record(3, (0, 0), (1, 0))
    h.record(4, (0.1, 0), (2, 0))
    np.testing.assert_allclose(h.latest(0.1)[2], [10, 0])
    h.record(6, (0.3, 0), (2, 1))
    np.testing.assert_array_equal(h.latest(0.1)[2], [0, 0])
    h.record(6, (9, 9), (9, 9))  # stale duplicate ignored
    assert len(h) == 3


def test_search_subgoal_examples():
    cs = ClusterSet(np.array([0, 1]), np.array([[0.0, 0.0], [4.0, 0.0]]), np.array([1, 1]))
    np.testing.assert_array_equal(search_subgoal(cs, (3, 0), (30, 20)), [4, 0])
    np.testing.assert_array_equal(search_subgoal(cs, (2, 0), (30, 20)), [0, 0])  # tie: lowest index
    np.testing.assert_array_equal(search_subgoal(None, (2, 0), (30, 20)), [15, 10])


def test_escape_candidates_far_from_clusters():
    cs = ClusterSet(np.zeros(1, dtype=int), np.array([[15.0, 10.0]]), np.array([1]))
    cand = escape_candidates(cs, (30, 20), 5.0, 10, np.random.default_rng(0))
    assert len(cand.points) == 10 and not cand.relaxed
    assert np.all(cand.distances > 5.0)
    goal = escape_subgoal(cand, (15, 10))
    assert np.linalg.norm(goal - [15, 10]) == pytest.approx(np.min(cand.distances))


def test_escape_candidates_relax_when_impossible():
    cs = ClusterSet(np.zeros(1, dtype=int), np.array([[15.0, 10.0]]), np.array([1]))
    cand = escape_candidates(cs, (30, 20), 100.0, 3, np.random.default_rng(0), max_rejections=50)
    assert cand.relaxed and cand.escape_distance < 100.0
    assert np.all(cand.distances > cand.escape_distance)


def test_planner_history_is_perception_gated():
    w = make_world([(10, 10), (13, 10), (25, 18)], [0, 1, 1], vel=[(1, 0), (0, 0), (0, 0)])
    gated = GlobalPlanner(PredictorConfig(), CFG, ObstacleSet(), np.random.default_rng(0))
    gated.observe(w, perceive(w))
    assert sorted(gated.tracks) == [1]
    omni = GlobalPlanner(PredictorConfig(omniscient=True), CFG, ObstacleSet(), np.random.default_rng(0))
    omni.observe(w, perceive(w))
    assert sorted(omni.tracks) == [1, 2]
    w.alive[1] = False
    omni.observe(w, perceive(w))
    assert sorted(omni.tracks) == [2]


def test_spec_examples_prediction():
    # constant velocity: zero acceleration
    np.testing.assert_allclose(second_order_step((0, 0), (1, 0), (1, 0), 0.1), [0.1, 0.0])
    np.testing.assert_allclose(second_order_step((0, 0), (2, 0), (0, 0), 0.1), [0.3, 0.0], atol=1e-12)
    np.testing.assert_allclose(potential_field_correct((0.5, 0.0), np.array([[0.0, 0.0]]), 0.6, 0.1),
                               [0.51, 0.0], atol=1e-12)


def test_symmetric_circles_push_along_axis():
    circles = np.array([[0.0, 0.2], [0.0, -0.2]])
    q = potential_field_correct((0.1, 0.0), circles, 0.6, 0.1)
    # each circle: depth 0.6 - sqrt(0.05), unit (0.1, -+0.2) / sqrt(0.05)
    d = np.sqrt(0.05)
    np.testing.assert_allclose(q, [0.1 + 2 * 0.1 * (0.6 - d) * 0.1 / d, 0.0], atol=1e-12)


def test_rollout_keeps_clearance_and_is_seeded():
    hist = TrackHistory()
    hist.record(0, (5.0, 5.0), (1.0, 0.0))
    kw = dict(circles=np.array([[7.0, 5.05]]), clearance=0.6, dt=0.1, v_max=2.0, arena=(30, 20))
    traj = rollout(hist, 40, 1, np.random.default_rng(0), jitter=0.0, **kw)
    gap = np.linalg.norm(traj[0] - kw["circles"][0], axis=1)
    assert gap[-1] >= 0.9 * 0.6
    a = rollout(hist, 20, 4, np.random.default_rng(9), jitter=0.2, **kw)
    b = rollout(hist, 20, 4, np.random.default_rng(9), jitter=0.2, **kw)
    np.testing.assert_array_equal(a, b)


def test_cluster_threshold_examples():
    pts = np.array([[0.0, 0.0], [2.0, 0.0]])
    one = cluster(pts, 3.0)
    assert len(one) == 1
    np.testing.assert_allclose(one.centers, [[1.0, 0.0]])
    assert len(cluster(pts, 1.0)) == 2


def test_subgoal_selection_examples():
    cs = ClusterSet(np.array([0, 1]), np.array([[1.0, 1.0], [9.0, 9.0]]), np.array([1, 1]))
    np.testing.assert_array_equal(search_subgoal(cs, (0, 0), (30, 20)), [1, 1])
    single = ClusterSet(np.array([0]), np.array([[4.0, 4.0]]), np.array([1]))
    np.testing.assert_array_equal(search_subgoal(single, (20, 0), (30, 20)), [4, 4])
    np.testing.assert_array_equal(escape_subgoal(np.array([[3.0, 3.0]]), (0, 0)), [3, 3])
    np.testing.assert_array_equal(escape_subgoal(np.array([[7.0, 0.0], [0.0, 2.0]]), (0, 0)), [0, 2])
    free = escape_candidates(None, (30, 20), 5.0, 10, np.random.default_rng(0))
    assert len(free.points) == 10 and np.all(np.isinf(free.distances))
    far = escape_candidates(single, (30, 20), 40.0, 2, np.random.default_rng(0), max_rejections=20)
    assert far.relaxed
