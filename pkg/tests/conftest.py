import numpy as np
import pytest

from ecko.core import GridGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line4():
    """Four voxels on a line, 6-connected as 0-1-2-3."""
    return GridGeometry.full((4, 1, 1))


def orthonormal_design(rng, n, m):
    Q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return Q


def is_connected(members, geometry):
    """BFS over face neighbours restricted to ``members``."""
    coords = {tuple(geometry.feature_coords[k]) for k in members}
    start = next(iter(coords))
    seen, stack = {start}, [start]
    while stack:
        x, y, z = stack.pop()
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            nb = (x + d[0], y + d[1], z + d[2])
            if nb in coords and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(coords)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(number, title, passed, detail)`` records one acceptance verdict."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, title, passed, detail):
        store[number] = (title, bool(passed), detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, passed, detail = store[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
