"""Backend selection: compiled extension if available, numpy fallback otherwise.

Set ``SZEGOKIT_PURE=1`` in the environment to force the fallback (used by
the benchmark and to exercise both paths in CI).
"""

import os

if os.environ.get("SZEGOKIT_PURE"):
    from . import _purepoly as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _fastpoly as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _purepoly as _impl

        BACKEND = "numpy"

eval_many = _impl.eval_many
grad_many = _impl.grad_many
hess_many = _impl.hess_many
j_quad_many = _impl.j_quad_many

__all__ = ["BACKEND", "eval_many", "grad_many", "hess_many", "j_quad_many"]
