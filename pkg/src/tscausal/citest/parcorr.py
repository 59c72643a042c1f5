"""Partial-correlation test for linear conditional independence.

Both x and y are regressed on the conditioning set z (with an intercept, so
the statistic is invariant under affine rescaling of any input) and the
Pearson correlation of the two residual vectors is returned.  Significance
uses the two-sided Student-t transform with n - |z| - 2 degrees of freedom,
exact when the residuals are Gaussian and a close approximation otherwise.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import ConditioningError, InsufficientDataError
from .base import PARCORR, CITestResult

_NEGLIGIBLE_RESIDUAL = 1e-14


def _as_matrix(z) -> np.ndarray:
    if z is None:
        return np.empty((0, 0))
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    return z


def residuals(v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Least-squares residual of v after projecting out [1, z]."""
    v = v - v.mean()
    if z.shape[1] == 0:
        return v
    zc = z - z.mean(axis=0)
    beta, _, rank, _ = np.linalg.lstsq(zc, v, rcond=None)
    if rank < zc.shape[1]:
        raise ConditioningError(
            f"conditioning matrix is rank deficient (rank {rank} < {zc.shape[1]})"
        )
    return v - zc @ beta


def parcorr_test(x, y, z=None) -> CITestResult:
    """Partial correlation of x and y given z, with its two-sided p-value."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    z = _as_matrix(z)
    n = x.shape[0]
    if y.shape[0] != n or (z.size and z.shape[0] != n):
        raise ValueError("x, y and z must have equal sample counts")
    nz = z.shape[1]
    if n <= nz + 2:
        raise InsufficientDataError(
            f"need n > |z| + 2 samples, got n={n} with |z|={nz}"
        )

    rx = residuals(x, z)
    ry = residuals(y, z)
    sx = float(np.sqrt(rx @ rx))
    sy = float(np.sqrt(ry @ ry))
    scale = max(float(np.abs(x - x.mean()).max()), float(np.abs(y - y.mean()).max()), 1.0)
    if sx <= _NEGLIGIBLE_RESIDUAL * scale * np.sqrt(n) or sy <= _NEGLIGIBLE_RESIDUAL * scale * np.sqrt(n):
        # A variable fully explained by z carries no evidence beyond it.
        return CITestResult(statistic=0.0, p_value=1.0, n=n, test_name=PARCORR)

    r = float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))
    df = n - nz - 2
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * np.sqrt(df / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), df))
    return CITestResult(statistic=r, p_value=p, n=n, test_name=PARCORR)
