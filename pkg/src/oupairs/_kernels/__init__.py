"""Numerical kernels with a compiled fast path.

The Cython extension implements the hot inner loops (transition likelihoods,
the ARMA conditional-sum-of-squares recursion, exact path generation).  A
pure-numpy fallback with identical semantics is selected automatically when
the extension is unavailable; ``BACKEND`` records which one is active.

Run ``python benchmarks/bench_kernels.py`` to compare both backends.
"""
from __future__ import annotations

from . import _numpy

try:  # pragma: no cover - depends on build environment
    from . import _core as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover
    _impl = _numpy
    BACKEND = "numpy"

nll_plain = _impl.nll_plain
nll_noisy = _impl.nll_noisy
css_sse = _impl.css_sse
ou_exact_path = _impl.ou_exact_path

__all__ = ["BACKEND", "nll_plain", "nll_noisy", "css_sse", "ou_exact_path"]
