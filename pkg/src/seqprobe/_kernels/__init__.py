"""Trial kernels with a compiled fast path.

Importing this package selects the Cython extension when it is available
and falls back to the pure-Python implementation otherwise. Set
SEQPROBE_PURE_PYTHON=1 to force the fallback. Both backends draw from the
random stream identically and return bit-identical results.
"""

from __future__ import annotations

import os

from ._pykernels import BERNOULLI, GAUSSIAN, POISSON, block_size, draw_block

if os.environ.get("SEQPROBE_PURE_PYTHON"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pykernels as _impl

BACKEND: str = _impl.BACKEND
run_sprt_trial = _impl.run_sprt_trial
run_composite_trial = _impl.run_composite_trial

__all__ = [
    "BACKEND",
    "POISSON",
    "GAUSSIAN",
    "BERNOULLI",
    "block_size",
    "draw_block",
    "run_sprt_trial",
    "run_composite_trial",
]
