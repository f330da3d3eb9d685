import warnings

import numpy as np
import pytest

from glmequiv.expfam import FAMILY_NAMES, get_family

warnings.filterwarnings("ignore", message="The TBB threading layer requires")


@pytest.fixture(params=FAMILY_NAMES)
def family(request):
    return get_family(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240515)


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion that ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(k))
