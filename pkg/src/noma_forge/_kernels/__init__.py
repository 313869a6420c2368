"""Kernel backend selection.

The compiled extension is used when present; otherwise the pure NumPy
fallback with identical semantics takes over.  Set NOMA_FORGE_PURE=1 to
force the fallback (used by the parity tests and the benchmark).
"""

import os

from . import pure

if os.environ.get("NOMA_FORGE_PURE", "") not in ("", "0"):
    _impl = pure
    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        _impl = pure
        HAVE_COMPILED = False

gain_products = _impl.gain_products
decode_rates = _impl.decode_rates
achievable_sum_rate = _impl.achievable_sum_rate
smoothed_objective = _impl.smoothed_objective
smoothed_objective_grad = _impl.smoothed_objective_grad


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "pure"
