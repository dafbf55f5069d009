import numpy as np

from swarmhrl.sim import EngagementConfig, ObstacleSet, TaskKind, World

CFG = EngagementConfig()


def make_world(pos, team, heading=None, vel=None, rects=(), config=CFG, seed=0, alive=None, task=None):
    pos = np.asarray(pos, dtype=np.float64).reshape(-1, 2)
    n = len(pos)
    return World(
        pos=pos, vel=np.zeros((n, 2)) if vel is None else np.asarray(vel, dtype=np.float64).reshape(-1, 2),
        heading=np.zeros(n) if heading is None else np.asarray(heading, dtype=np.float64),
        team=np.asarray(team, dtype=np.int64),
        task=np.full(n, TaskKind.SEARCHING, dtype=np.int64) if task is None else np.asarray(task, dtype=np.int64),
        alive=np.ones(n, dtype=bool) if alive is None else np.asarray(alive, dtype=bool),
        obstacles=ObstacleSet.from_rects(list(rects), config.obstacle_radius) if rects else ObstacleSet(),
        config=config, rng=np.random.default_rng(seed),
    )


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def record_criterion(number, name, passed, detail):
    ACCEPTANCE.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name}: {detail}")
