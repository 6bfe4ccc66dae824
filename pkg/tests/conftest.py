from pathlib import Path

import numpy as np
import pytest

from gpival.kriging import ValuedSample
from gpival.oracles import synthetic_device
from gpival.pipeline import fit_gpi_model
from gpival.sampling import LhsPlan, generate_initial_sample

DATA = Path(__file__).parent / "data"

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line for the terminal summary."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def structured_fit():
    """Anisotropic fit on 400 points of the structured synthetic device."""
    fld = synthetic_device("structured", 0)
    pts = generate_initial_sample(LhsPlan(fld.space, 400, 0))
    return fld, fit_gpi_model(ValuedSample(pts, fld(pts)), fld.space)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
