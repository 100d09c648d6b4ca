"""Hot-kernel dispatch: compiled extension with a numpy fallback.

The compiled backend is used when the extension built; the numpy backend
otherwise. `CONVDESC_BACKEND=python|cython` forces the choice at import
time, and `use_backend()` switches it at runtime (used by the tests and
the benchmark).
"""

import os

from .. import errors
from . import _py

_impls = {"python": _py}
try:
    from . import _ext
    _impls["cython"] = _ext
except ImportError:
    _ext = None

_forced = os.environ.get("CONVDESC_BACKEND", "auto").strip().lower() or "auto"
if _forced == "auto":
    _active_name = "cython" if "cython" in _impls else "python"
elif _forced in _impls:
    _active_name = _forced
elif _forced == "cython":
    raise ImportError(
        "CONVDESC_BACKEND=cython but the compiled extension is not available"
    )
else:
    raise errors.ConfigurationError(
        f"unknown CONVDESC_BACKEND {_forced!r}; expected auto, python or cython"
    )
_active = _impls[_active_name]


def available_backends():
    return sorted(_impls)


def get_backend():
    return _active_name


def use_backend(name):
    """Switch the active backend; returns the previous backend name."""
    global _active, _active_name
    if name not in _impls:
        raise errors.ConfigurationError(
            f"backend {name!r} not available; have {available_backends()}"
        )
    previous = _active_name
    _active_name = name
    _active = _impls[name]
    return previous


def conv2d(inp, weights, biases, pads):
    return _active.conv2d(inp, weights, biases, pads)


def maxpool2(inp):
    return _active.maxpool2(inp)


def hlac_counts(bits, offsets, sizes):
    return _active.hlac_counts(bits, offsets, sizes)


def sift_histograms(mag, ori, patch, step):
    return _active.sift_histograms(mag, ori, patch, step)
