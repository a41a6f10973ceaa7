"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used.  Setting ``LTRSTACK_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LTRSTACK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
superiority_matrix = _impl.superiority_matrix
superiority = _impl.superiority
superiority_backward = _impl.superiority_backward
masked_softmax = _impl.masked_softmax
masked_softmax_backward = _impl.masked_softmax_backward
gbt_scores = _impl.gbt_scores
avg_scores = _impl.avg_scores
context_discount = _impl.context_discount
adam_update = _impl.adam_update


def available_backends():
    """Map backend name to module for every backend that imports here."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
