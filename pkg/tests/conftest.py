import numpy as np
import pytest

from rigidlim.config import load_system
from rigidlim.measure import conformal_weights, estimate_dimension, moran_root

LN2, LN3 = np.log(2.0), np.log(3.0)
T_CANTOR = LN2 / LN3
T_DUST = 3 * LN2 / LN3


@pytest.fixture(scope="session")
def systems():
    names = ["cantor", "line_cantor", "koch", "sierpinski", "dust", "conjugated_dust", "two_ratio"]
    return {name: load_system(name) for name in names}


@pytest.fixture(scope="session")
def weights_for(systems):
    """Cached conformal weights at the Moran root (or bracket midpoint)."""
    cache = {}

    def get(name, depth):
        key = (name, depth)
        if key not in cache:
            system = systems[name]
            if system.is_similarity:
                t = moran_root(system.ratios, system.d)
            else:
                t = estimate_dimension(system, min(depth, 4)).midpoint
            cache[key] = conformal_weights(system, t, depth)
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
