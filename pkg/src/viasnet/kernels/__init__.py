"""Hot inner loops with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``VIASNET_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("VIASNET_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

gaussian_splat = _impl.gaussian_splat
auc_rank = _impl.auc_rank
angular_velocity = _impl.angular_velocity
fixation_runs = _impl.fixation_runs
channel_histograms = _impl.channel_histograms

__all__ = [
    "BACKEND",
    "gaussian_splat",
    "auc_rank",
    "angular_velocity",
    "fixation_runs",
    "channel_histograms",
]
