"""Diffusion iteration backends: compiled CSR kernel with a scipy fallback.

The update iterated here is ``z <- A @ z + source`` for all label columns at
once, stopping when the largest absolute entry change drops below the
tolerance or the iteration cap is reached. ``source`` is the pixel-block
product, which is constant across iterations because pixel labels never
change.

The compiled kernel (``lidarseg._diffusion_kernel``) fuses the matvec, the
source add, and the delta reduction into one pass per iteration. When the
extension is not built, a scipy-based implementation with identical semantics
is selected at import.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

try:
    from . import _diffusion_kernel

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on how the package was built
    _diffusion_kernel = None
    HAVE_COMPILED = False

__all__ = ["HAVE_COMPILED", "DEFAULT_BACKEND", "BACKENDS", "csr_diffuse"]


def _diffuse_scipy(
    matrix: sp.csr_matrix,
    z: np.ndarray,
    source: np.ndarray,
    max_iters: int,
    tolerance: float,
) -> tuple[np.ndarray, int, float]:
    z = z.copy()
    delta = np.inf
    for iteration in range(1, max_iters + 1):
        z_next = matrix @ z
        z_next += source
        delta = float(np.abs(z_next - z).max()) if z.size else 0.0
        z = z_next
        if delta < tolerance:
            return z, iteration, delta
    return z, max_iters, delta if max_iters > 0 else np.inf


def _diffuse_compiled(
    matrix: sp.csr_matrix,
    z: np.ndarray,
    source: np.ndarray,
    max_iters: int,
    tolerance: float,
) -> tuple[np.ndarray, int, float]:
    indptr = np.ascontiguousarray(matrix.indptr, dtype=np.int64)
    indices = np.ascontiguousarray(matrix.indices, dtype=np.int64)
    data = np.ascontiguousarray(matrix.data, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64).copy()
    source = np.ascontiguousarray(source, dtype=np.float64)
    if z.size == 0:
        return _diffuse_scipy(matrix, z, source, max_iters, tolerance)
    return _diffusion_kernel.csr_diffuse(
        indptr, indices, data, z, source, max_iters, tolerance
    )


BACKENDS = {"scipy": _diffuse_scipy}
if HAVE_COMPILED:
    BACKENDS["compiled"] = _diffuse_compiled

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "scipy"


def csr_diffuse(
    matrix: sp.csr_matrix,
    z0: np.ndarray,
    source: np.ndarray,
    max_iters: int,
    tolerance: float,
    backend: str | None = None,
) -> tuple[np.ndarray, int, float]:
    """Iterate ``z <- matrix @ z + source`` from ``z0`` until convergence.

    Returns ``(z, iterations_run, last_delta)``. With ``max_iters == 0`` the
    input is returned unchanged with an infinite delta. ``backend`` selects an
    entry of :data:`BACKENDS`; the default prefers the compiled kernel.
    """
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    if z0.shape != source.shape or z0.shape[0] != matrix.shape[0]:
        raise ValueError(
            f"shape mismatch: matrix {matrix.shape}, z {z0.shape}, source {source.shape}"
        )
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    if max_iters == 0:
        return z0.copy(), 0, np.inf
    name = backend or DEFAULT_BACKEND
    try:
        impl = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}")
    return impl(matrix, np.asarray(z0, dtype=np.float64), source, max_iters, tolerance)
