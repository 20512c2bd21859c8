import numpy as np
import pytest

import rwass


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def members_16():
    """Six related split-tree members on 16x16 grids, full regions."""
    out = []
    for s in range(6):
        g = rwass.synth_hills((16, 16), seed=40 + s, n_hills=3)
        out.append(rwass.build_region_aware(g, "split", 0.02, 0.0, 0.0))
    return out
