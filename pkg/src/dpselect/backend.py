"""Kernel backend selection: compiled extension when available, numpy
fallback otherwise. Set ``DPSELECT_PURE_PYTHON=1`` to force the fallback."""

import os

if os.environ.get("DPSELECT_PURE_PYTHON"):
    from dpselect import _purepy as _impl

    HAVE_COMPILED = False
else:
    try:
        from dpselect import _kernels as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        from dpselect import _purepy as _impl

        HAVE_COMPILED = False

pgd_ridge_gram = _impl.pgd_ridge_gram
subgrad_hinge = _impl.subgrad_hinge

BACKEND_NAME = "compiled" if HAVE_COMPILED else "pure-python"
