import pytest

from emcl import kernels

_DEFAULT = kernels.backend_name()


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test under both kernel backends."""
    kernels.use(request.param)
    yield request.param
    kernels.use(_DEFAULT)
