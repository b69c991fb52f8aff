"""Hot-kernel dispatch: the compiled extension when built, else pure Python.

Set ``GRAINMORPH_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("GRAINMORPH_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import (incircle, orient2d, smooth_representatives,
                             triangle_pixel_stats)
    BACKEND = "python"
else:
    try:
        from ._ckernels import (incircle, orient2d, smooth_representatives,
                                triangle_pixel_stats)
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._pykernels import (incircle, orient2d, smooth_representatives,
                                 triangle_pixel_stats)
        BACKEND = "python"

__all__ = ["BACKEND", "incircle", "orient2d", "smooth_representatives",
           "triangle_pixel_stats"]
