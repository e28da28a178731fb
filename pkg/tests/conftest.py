import numpy as np
import pytest

from tiptrust.core import TrustParams
from tiptrust.equilibrium import ScheduleSpec

# acceptance tests append their PASS/FAIL lines here for the terminal summary
ACCEPTANCE_KEY = pytest.StashKey[list]()


def random_instance(rng: np.random.Generator):
    """Random valid (params_x, params_y, schedule) with both humans active."""

    def params():
        return TrustParams(
            alpha0=rng.uniform(0.5, 5),
            beta0=rng.uniform(0.5, 5),
            s=rng.uniform(0.2, 5),
            f=rng.uniform(0.2, 5),
            s_hat=rng.uniform(0, 5),
            f_hat=rng.uniform(0, 5),
        )

    sched = ScheduleSpec(
        m=int(rng.integers(1, 5)),
        n=int(rng.integers(1, 5)),
        r=float(rng.uniform(0.1, 0.95)),
        trust_x_in_y=float(rng.uniform(0.3, 1.0)),
        trust_y_in_x=float(rng.uniform(0.3, 1.0)),
    )
    return params(), params(), sched


@pytest.fixture
def instance_rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
