import numpy as np
import pytest

from vacal.isotonic import pava_values


@pytest.fixture(scope="session", autouse=True)
def warm_pava_kernel():
    # First call JIT-compiles the kernel; warm it so timed suites measure
    # steady-state behavior.
    pava_values(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
