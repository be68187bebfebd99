"""Hot-loop kernels with two interchangeable backends.

``FLEXLINE_BACKEND=numba`` (default) uses the compiled kernels;
``FLEXLINE_BACKEND=numpy`` selects the vectorized pure-numpy path.  If numba
cannot be imported the numpy path is used regardless.
"""
import importlib
import logging
import os

log = logging.getLogger(__name__)

BACKEND_ENV = "FLEXLINE_BACKEND"
BACKENDS = ("numba", "numpy")
N_RULES = 10

_warned = False


def get_backend(name=None):
    global _warned
    name = (name or os.environ.get(BACKEND_ENV) or "numba").lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    if name == "numba":
        try:
            return importlib.import_module("._numba", __name__)
        except ImportError:
            if not _warned:
                log.warning("numba unavailable, falling back to the numpy kernels")
                _warned = True
            name = "numpy"
    return importlib.import_module("._numpy", __name__)


def backend_name(name=None) -> str:
    mod = get_backend(name)
    return "numpy" if mod.__name__.endswith("_numpy") else "numba"
