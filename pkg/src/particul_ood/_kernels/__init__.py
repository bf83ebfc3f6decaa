"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the NumPy fallback keeps the
package functional without a compiler. Set ``PARTICUL_OOD_PURE_PYTHON=1`` to
force the fallback (used by the backend benchmark and equivalence tests).
"""

import os

from . import _pykernels

if os.environ.get("PARTICUL_OOD_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND

conv2d_forward = _impl.conv2d_forward
conv2d_input_grad = _impl.conv2d_input_grad
conv2d_param_grad = _impl.conv2d_param_grad
correlate_maps = _impl.correlate_maps
box3_sum = _impl.box3_sum
