import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pursuitlab import _kernels_py  # noqa: E402

try:
    from pursuitlab import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS = [_kernels_py] + ([_kernels_c] if _kernels_c is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda k: k.BACKEND)
def kern(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def gaussian(rng, m, n):
    return rng.standard_normal((m, n)) / np.sqrt(m)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects ``(order, line)`` verdicts printed at the end of the run."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
