import time

import numpy as np
import pytest

from darcs.forward import ForwardModel
from darcs.sampling import MaskConfig, generate_poisson_mask
from darcs.synth import make_coil_maps, make_phantom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_problem():
    """16x16x8 phantom, 3 coils, R=2 mask with a 4x4 center."""
    dims = (16, 16, 8)
    gt = make_phantom(dims, seed=3)
    maps = make_coil_maps(dims, 3, seed=4)
    mask = generate_poisson_mask(MaskConfig(16, 8, 2, (4, 4), seed=5)).mask
    return gt, ForwardModel(maps, mask)


@pytest.fixture(scope="session")
def tiny_model():
    """8x8x4 volume, 2 coils, R=2: small enough to materialize A^H A."""
    dims = (8, 8, 4)
    maps = make_coil_maps(dims, 2, seed=11)
    mask = generate_poisson_mask(MaskConfig(8, 4, 2, (2, 2), seed=12)).mask
    return ForwardModel(maps, mask)


SUITE_BUDGET_S = 600.0


def pytest_sessionstart(session):
    session.config._darcs_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    elapsed = time.perf_counter() - config._darcs_t0
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, 13):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"criterion {n:2d}: NOT RUN")
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"criterion 12 (suite runtime): {'PASS' if ok else 'FAIL'}  "
                  f"{elapsed:.1f} s against a {SUITE_BUDGET_S:.0f} s budget")


@pytest.hookimpl(trylast=True)
def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - session.config._darcs_t0 >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
