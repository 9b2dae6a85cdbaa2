import math

import numpy as np
import pytest

from clampedplate import shapes
from clampedplate.grid import Ball, Box, Support, build_grid, make_shape


@pytest.fixture
def grid2():
    return build_grid(2, 32, Box(3.0))


@pytest.fixture
def disk_support():
    """Radius-1 disk in Box(3) at N = 64."""
    g = build_grid(2, 64, Box(3.0))
    return make_shape(g, shapes.Ball(tuple(g.center), 1.0))


def one_node(grid, idx=None):
    a = np.zeros(grid.shape, dtype=bool)
    idx = idx or tuple(s // 2 for s in grid.shape)
    a[idx] = True
    return Support(grid, a)


ACCEPTANCE = []


def record(criterion: int, name: str, passed: bool, detail: str = "") -> None:
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((criterion, name, bool(passed), detail))
    print(f"[criterion {criterion}] {name}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit} {'PASS' if ok else 'FAIL'}  {name}  {detail}")
