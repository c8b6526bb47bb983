"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set PAIRSPEC_PURE_PYTHON=1 to force the fallback (useful for benchmarking and
for debugging the compiled path against the reference implementation).
"""
from __future__ import annotations

import os

from . import _phasematch_py

try:
    from . import _phasematch_cy
except ImportError:
    _phasematch_cy = None

_FORCE_PY = bool(os.environ.get("PAIRSPEC_PURE_PYTHON"))
HAVE_COMPILED = _phasematch_cy is not None
USING_COMPILED = HAVE_COMPILED and not _FORCE_PY

if USING_COMPILED:
    phase_matched_sum = _phasematch_cy.phase_matched_sum
else:
    phase_matched_sum = _phasematch_py.phase_matched_sum


def implementations():
    """Available kernel implementations, keyed by name (for the benchmark)."""
    impls = {"python": _phasematch_py.phase_matched_sum}
    if HAVE_COMPILED:
        impls["compiled"] = _phasematch_cy.phase_matched_sum
    return impls
