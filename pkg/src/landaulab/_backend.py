"""Select the compiled kernels when available, the numpy ones otherwise.

Set ``LANDAULAB_BACKEND=python`` to force the pure numpy fallback.
"""
import os

from . import _pykernels

NAME = "python"
direct_convolve = _pykernels.direct_convolve
dissipation_sum = _pykernels.dissipation_sum

if os.environ.get("LANDAULAB_BACKEND", "auto").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    if _ckernels is not None:
        NAME = "cython"
        direct_convolve = _ckernels.direct_convolve
        dissipation_sum = _ckernels.dissipation_sum


def available():
    """Names of the importable backends."""
    try:
        from . import _ckernels  # noqa: F401

        return ["python", "cython"]
    except ImportError:
        return ["python"]
