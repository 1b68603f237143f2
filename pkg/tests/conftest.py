import pytest
from hypothesis import settings

from layerfem import available_backends

# jit compilation on the first numba call can blow the default deadline
settings.register_profile("layerfem", deadline=None, max_examples=50)
settings.load_profile("layerfem")

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param
