"""Kernel backend selection.

The compiled extension ``tsshuffle._kernels`` is used when it was built;
otherwise (or when ``TSSHUFFLE_PURE=1``) the numpy versions are used.
``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

_NAMES = ("compose_block_perm", "digit_reversal_inverse", "heat_cn_run", "heat_explicit_run")


def _load():
    if os.environ.get("TSSHUFFLE_PURE", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "compiled"


_impl, BACKEND = _load()

compose_block_perm = _impl.compose_block_perm
digit_reversal_inverse = _impl.digit_reversal_inverse
heat_cn_run = _impl.heat_cn_run
heat_explicit_run = _impl.heat_explicit_run


def backend_module(name):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
