"""Backend selection for the hot kernels.

A compiled Cython extension (_core) and a pure numpy reference implement the
same operations. The compiled backend is preferred when importable; set
TORUSSWARM_BACKEND=python|compiled|auto to override. Both backends agree to
floating round-off, so results are interchangeable; bitwise determinism is
guaranteed within a fixed backend.
"""

import os

from . import reference

try:
    from . import _core as compiled
    HAVE_COMPILED = True
except ImportError:  # extension not built; numpy path is fully capable
    compiled = None
    HAVE_COMPILED = False

_ENV_VAR = "TORUSSWARM_BACKEND"


def resolve(name=None):
    """Return the backend module for an explicit name or the environment."""
    if not isinstance(name, (str, type(None))):
        return name  # already a backend module
    if name in (None, "", "auto"):
        name = os.environ.get(_ENV_VAR, "auto")
    if name in (None, "", "auto"):
        return compiled if HAVE_COMPILED else reference
    if name == "python":
        return reference
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled backend requested but torusswarm._accel._core is "
                "not importable; build the extension or use backend=python"
            )
        return compiled
    raise ValueError(f"unknown backend {name!r}")


def active_backend_name(name=None) -> str:
    return resolve(name).NAME
