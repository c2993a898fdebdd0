"""Kernel backend selection.

The compiled ``egan._mlp`` extension is used when it imports; otherwise the
numpy module ``egan._mlp_py`` is used. Set ``EGAN_KERNELS=python`` to force
the fallback (``EGAN_KERNELS=compiled`` makes a missing extension an error).
Both backends are deterministic, but they are not bitwise-identical to each
other: the compiled path accumulates bias gradients in a different order.
"""
import importlib
import os

_choice = os.environ.get("EGAN_KERNELS", "auto").lower()


def load(name):
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name == "compiled":
        return importlib.import_module("egan._mlp")
    if name == "python":
        return importlib.import_module("egan._mlp_py")
    raise ValueError(f"unknown kernel backend {name!r}")


if _choice == "auto":
    try:
        _impl = load("compiled")
        BACKEND = "compiled"
    except ImportError:
        _impl = load("python")
        BACKEND = "python"
else:
    _impl = load(_choice)
    BACKEND = _choice

mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
adam_update = _impl.adam_update
