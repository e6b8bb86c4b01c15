"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``CROWDFLOW_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CROWDFLOW_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

IMPLEMENTATION: str = _impl.IMPLEMENTATION

shoot_endpoint = _impl.shoot_endpoint
landing_residual = _impl.landing_residual
shoot_bisect = _impl.shoot_bisect
rk4_profile = _impl.rk4_profile
dg1d_iterate = _impl.dg1d_iterate


def implementations() -> dict:
    """All importable kernel modules, keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
