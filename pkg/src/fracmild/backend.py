"""Kernel backend selection.

The hot quadrature loops exist twice: a compiled Cython core
(``fracmild._fastkernels``) and the pure NumPy reference
(``fracmild._kernels_py``).  The compiled core is preferred when it
imports; set ``FRACMILD_BACKEND=python`` or ``=compiled`` to force one.
``benchmarks/bench_kernels.py`` compares the two.
"""
from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("FRACMILD_BACKEND", "auto").lower()
_impl = _kernels_py

if _requested in ("auto", "compiled"):
    try:
        from . import _fastkernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "FRACMILD_BACKEND=compiled but fracmild._fastkernels is not built; "
                "install with `pip install -e . --no-build-isolation`"
            )
        _impl = _kernels_py


def backend_name() -> str:
    return _impl.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (None = the selected one)."""
    if name in (None, "auto"):
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _fastkernels

        return _fastkernels
    raise ValueError(f"unknown backend {name!r}")


left_operator_profile = _impl.left_operator_profile
right_derivative_table = _impl.right_derivative_table
right_derivative_profile = _impl.right_derivative_profile
convolve_targets = _impl.convolve_targets
convolve_single = _impl.convolve_single
exp_conv_path = _impl.exp_conv_path
rs_conv_path = _impl.rs_conv_path
