"""Backend dispatch for the hot numeric kernels.

``DFREG_BACKEND`` selects the implementation at import time:

* unset or ``numba``: jitted loop kernels (falls back to numpy with a
  warning only when unset and numba is not importable);
* ``numpy``: pure vectorized numpy.

Both backends expose the same functions with the same contracts. The
active choice is exported as ``BACKEND`` and echoed into every run's
resolved configuration.
"""

import os
import warnings

from ..errors import ConfigError

_requested = os.environ.get("DFREG_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ConfigError(
        f"DFREG_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_ops as _impl
elif _requested == "numba":
    from . import numba_ops as _impl
else:
    try:
        from . import numba_ops as _impl
    except ImportError:  # pragma: no cover - depends on environment
        warnings.warn("numba not importable; using the pure-numpy backend")
        from . import numpy_ops as _impl

BACKEND = _impl.BACKEND_NAME

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward
hard_bin_counts = _impl.hard_bin_counts
soft_bin_counts = _impl.soft_bin_counts
soft_bin_grad = _impl.soft_bin_grad
