"""Selects the compiled sphere-sum kernels when built, otherwise the numpy fallback."""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("GRAZELAB_PURE_PYTHON"):
        raise ImportError("compiled kernels disabled")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised when the extension is absent
    _impl = _fallback
    BACKEND = "numpy"


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def sphere_gamma_sum(v, zr, zomega, zw, u, wub, phi, wphi, alphas, cg, ch, K, backend=None):
    impl = _fallback if backend == "numpy" else _impl
    return impl.sphere_gamma_sum(_c(v), _c(zr), _c(zomega), _c(zw), _c(u), _c(wub), _c(phi), _c(wphi),
                                 _c(alphas, np.int64), _c(cg), _c(ch), int(K))


def sphere_gauss_diff_sum(base, omega, r, w, u, wub, phi, wphi, alphas, ch, K, power, backend=None):
    impl = _fallback if backend == "numpy" else _impl
    return impl.sphere_gauss_diff_sum(_c(base), _c(omega), _c(r), _c(w), _c(u), _c(wub), _c(phi), _c(wphi),
                                      _c(alphas, np.int64), _c(ch), int(K), int(power))
