import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def low_rank(rng, m, d, r, noise=0.0, decay=0.7):
    """m x d matrix of rank r (plus optional noise) with geometrically decaying spectrum."""
    U, _ = np.linalg.qr(rng.standard_normal((m, r)))
    V, _ = np.linalg.qr(rng.standard_normal((d, r)))
    S = 10.0 * decay ** np.arange(r)
    return (U * S) @ V.T * np.sqrt(m) + noise * rng.standard_normal((m, d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
