import os
import tempfile

import numpy as np
import pytest

from nctindex import numeric as nt

CACHE_DIR = os.path.join(tempfile.gettempdir(), "nctindex_test_cache")


def cached_projection(params: nt.TorusParams) -> np.ndarray:
    """Disk-cached standard projection (the LM polish is expensive)."""
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(
        CACHE_DIR, f"rieffel_{params.theta:.12f}_{params.N}.npy")
    if os.path.exists(path):
        e = np.load(path)
        if nt.coeff_norm(nt.nc_mul(params, e, e) - e) < 1e-8:
            return e
    e = nt.rieffel_projection(params)
    np.save(path, e)
    return e


@pytest.fixture(scope="session")
def p8():
    return nt.TorusParams(theta=2**-0.5, N=8)


@pytest.fixture(scope="session")
def rieffel8(p8):
    return cached_projection(p8)
