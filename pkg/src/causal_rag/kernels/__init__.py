"""String kernels with an optional compiled fast path.

`_ckernels` (Cython) is preferred when the extension built; otherwise the
pure-Python `_pykernels` module is used. Set ``CAUSAL_RAG_PURE_PYTHON=1`` to
force the fallback, e.g. for benchmarking or debugging.
"""

import os

from . import _pykernels

if os.environ.get("CAUSAL_RAG_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

levenshtein = _impl.levenshtein
edit_ratio = _impl.edit_ratio
token_subsequence = _impl.token_subsequence

__all__ = ["BACKEND", "levenshtein", "edit_ratio", "token_subsequence"]
