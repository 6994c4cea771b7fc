import pathlib

import numpy as np
import pytest

from valori.kernel import HnswParams, KernelConfig

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def small_config():
    return KernelConfig(dim=4, hnsw=HnswParams(m=4, ef_construction=16, ef_search=16))


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_raws(rng, dim, lo=-8.0, hi=8.0):
    return (rng.uniform(lo, hi, dim) * 65536).astype(np.int64).astype(np.int32)
