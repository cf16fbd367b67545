"""Element kernel backend, chosen at import.

The compiled extension ``biotfem._kernels`` is used when it has been built;
otherwise, or when ``BIOTFEM_PURE_PYTHON=1`` is set, the numpy
implementation in ``biotfem._kernels_py`` is used.  Both expose the same
functions and agree to rounding.
"""
import os

from . import _kernels_py

_NAMES = (
    "elasticity_local",
    "coupling_local",
    "laplace_local",
    "mass_local",
    "load_local",
    "values_at_quad",
    "gradients_at_quad",
)


def available_backends() -> dict:
    """Map backend name to module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found


def _select():
    backends = available_backends()
    if os.environ.get("BIOTFEM_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
        return "python", backends["python"]
    if "cython" in backends:
        return "cython", backends["cython"]
    return "python", backends["python"]


BACKEND, _impl = _select()

elasticity_local = _impl.elasticity_local
coupling_local = _impl.coupling_local
laplace_local = _impl.laplace_local
mass_local = _impl.mass_local
load_local = _impl.load_local
values_at_quad = _impl.values_at_quad
gradients_at_quad = _impl.gradients_at_quad

__all__ = ["BACKEND", "available_backends", *_NAMES]
