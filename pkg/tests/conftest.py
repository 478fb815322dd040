import pytest

from keylink import _kernels_py

try:
    from keylink import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = [_kernels_py] + ([_compiled] if _compiled is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.BACKEND)
def backend(request):
    return request.param


@pytest.fixture(params=["compiled", "python"])
def kernel_mode(request, monkeypatch):
    """Run a test once with the default dispatch and once forced to Python."""
    from keylink import kernels

    if request.param == "python":
        monkeypatch.setattr(kernels, "_compiled", None)
    elif kernels._compiled is None:
        pytest.skip("compiled kernels not built")
    return request.param
