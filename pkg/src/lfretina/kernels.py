"""Hot-loop kernels, compiled when available.

The Cython extension ``_kernels_cy`` is used if it was built; otherwise the
numpy implementations are used.  Set ``LFRETINA_PURE_PYTHON=1`` to force the
fallback.  Every kernel writes into caller-provided C-contiguous arrays.
"""

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("LFRETINA_PURE_PYTHON") != "1":
    try:
        from . import _kernels_cy as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

pupil_block = _impl.pupil_block
accumulate_intensity = _impl.accumulate_intensity
radial_bin = _impl.radial_bin
shifted_sum = _impl.shifted_sum

__all__ = ["BACKEND", "pupil_block", "accumulate_intensity", "radial_bin", "shifted_sum"]
