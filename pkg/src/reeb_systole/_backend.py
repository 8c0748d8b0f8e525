"""Kernel backend selection.

The compiled extension is used when importable; otherwise the numpy fallback.
Set ``REEB_SYSTOLE_BACKEND=python`` to force the fallback.
"""
import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

if os.environ.get("REEB_SYSTOLE_BACKEND", "").lower() == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "compiled"
    except ImportError:  # extension not built
        log.info("compiled kernels unavailable; using numpy fallback")
        kernels = _fallback
        BACKEND = "python"

basis = kernels.basis
basis_grad = kernels.basis_grad
field_values = kernels.field_values
field_values_grad = kernels.field_values_grad
integrate = kernels.integrate

__all__ = ["BACKEND", "basis", "basis_grad", "field_values",
           "field_values_grad", "integrate", "kernels"]
