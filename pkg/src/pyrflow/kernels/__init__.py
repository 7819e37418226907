"""Hot numeric kernels, dispatched to the numba or numpy implementation.

Both implementations expose the same functions over float32 arrays:

* ``conv2d(inp, ker, bias, stride, pad)``
* ``bilinear_sample(img, xs, ys)`` (zero border)
* ``avg_pool2(img)``
* ``lookup_level(level, cx, cy, radius)``
* ``convex_upsample(flow, logits, factor)``

Each backend is deterministic: repeated calls on identical input return
bitwise-identical output. The two backends agree to float32 rounding, not
bitwise (different summation orders).
"""

from ..backend import select_backend

ACTIVE_BACKEND = select_backend()

if ACTIVE_BACKEND == "numba":
    from .numba_impl import (  # noqa: F401
        avg_pool2,
        bilinear_sample,
        conv2d,
        convex_upsample,
        lookup_level,
    )
else:
    from .numpy_impl import (  # noqa: F401
        avg_pool2,
        bilinear_sample,
        conv2d,
        convex_upsample,
        lookup_level,
    )
