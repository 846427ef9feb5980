import numpy as np
import pytest

from gdc2 import backend


def _have_kernels() -> bool:
    try:
        from gdc2 import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_KERNELS = _have_kernels()
BACKENDS = ("pure", "compiled") if HAVE_KERNELS else ("pure",)


@pytest.fixture(params=BACKENDS)
def use_backend(request):
    """Run the test once per available backend."""
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(None)


@pytest.fixture
def rng():
    return np.random.default_rng(4711)
