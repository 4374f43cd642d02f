import os

# Keep BLAS single threaded: the heavy tests parallelize across seeds with
# worker processes, and reruns must be bit-reproducible.
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from impedrl.robots import hopper_model, planar_arm_model  # noqa: E402


@pytest.fixture
def hopper():
    return hopper_model()


@pytest.fixture
def arm():
    return planar_arm_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
