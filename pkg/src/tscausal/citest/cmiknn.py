"""Nearest-neighbour conditional mutual information estimator and shuffle test.

The estimator averages psi(k) + psi(c_z) - psi(c_xz) - psi(c_yz) over samples,
where c_* count the points strictly inside each sample's k-th-neighbour radius
in the (z), (x,z) and (y,z) subspaces.  All distances use the max norm so that
a radius measured in the joint space is directly comparable in any subspace.
Counts include the point itself, hence are always >= 1; with empty z the z
count is n and the expression reduces to the classic kNN mutual-information
estimator.  Estimates are in nats.

Significance comes from a permutation test: x is shuffled while (y, z) stay
fixed, restricting each sample's new x to come from one of its nearest
z-neighbours so the x-z dependence survives under the null.  The p-value uses
the add-one convention (1 + #{null >= observed}) / (1 + n_shuffles).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InsufficientDataError
from .base import CMI_KNN, CITestResult
from .special import digamma, digamma_table

JITTER_AMPLITUDE = 1e-10
DEFAULT_K = 10
DEFAULT_PERM_NEIGHBORS = 5


@dataclass(frozen=True)
class NeighborCounts:
    """Per-sample radii and subspace neighbour counts (self included)."""

    k: int
    eps_distances: np.ndarray
    k_z: np.ndarray
    k_xz: np.ndarray
    k_yz: np.ndarray


def _as_2d(arr, name: str) -> np.ndarray:
    if arr is None:
        return np.empty((0, 0))
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise ValueError(f"{name} must be 1- or 2-dimensional")
    return out


def _content_seed(arr: np.ndarray) -> int:
    digest = hashlib.blake2b(arr.tobytes(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def _jitter(arr: np.ndarray) -> np.ndarray:
    """Deterministic sub-resolution jitter breaking exact distance ties.

    Seeded from the array content, so identical inputs always receive the
    identical perturbation.
    """
    if arr.size == 0:
        return arr
    rng = np.random.default_rng(_content_seed(arr))
    scale = np.std(arr, axis=0)
    scale[scale == 0.0] = 1.0
    return arr + JITTER_AMPLITUDE * scale * rng.standard_normal(arr.shape)


def _strict_counts(tree: cKDTree, points: np.ndarray, eps: np.ndarray) -> np.ndarray:
    # d < eps  <=>  d <= nextafter(eps, -inf), so these counts are exact.
    return tree.query_ball_point(
        points, r=np.nextafter(eps, -np.inf), p=np.inf, return_length=True
    )


def neighbor_counts(joint, dims_x, dims_y, dims_z, k: int) -> NeighborCounts:
    """k-th-neighbour radii in the joint space and strict-radius subspace counts.

    ``dims_x``, ``dims_y`` and ``dims_z`` must be disjoint index sets covering
    all columns of ``joint``; ``dims_z`` may be empty, in which case the z
    count is n for every sample.
    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2:
        raise ValueError("joint must be a 2-d sample matrix")
    n, m = joint.shape
    dims_x = tuple(dims_x)
    dims_y = tuple(dims_y)
    dims_z = tuple(dims_z)
    all_dims = (*dims_x, *dims_y, *dims_z)
    if len(set(all_dims)) != len(all_dims) or set(all_dims) != set(range(m)):
        raise ValueError("dims_x, dims_y, dims_z must disjointly cover all columns")
    if not dims_x or not dims_y:
        raise ValueError("dims_x and dims_y must be non-empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample count n={n}")

    tree = cKDTree(joint)
    eps = tree.query(joint, k=k + 1, p=np.inf)[0][:, k]
    if eps.min() <= 0.0:
        raise ValueError(
            "duplicate points give a zero neighbour radius; de-duplicate or jitter"
        )

    xz = joint[:, dims_x + dims_z]
    yz = joint[:, dims_y + dims_z]
    k_xz = _strict_counts(cKDTree(xz), xz, eps)
    k_yz = _strict_counts(cKDTree(yz), yz, eps)
    if dims_z:
        zz = joint[:, dims_z]
        k_z = _strict_counts(cKDTree(zz), zz, eps)
    else:
        k_z = np.full(n, n, dtype=np.intp)
    return NeighborCounts(k=k, eps_distances=eps, k_z=k_z, k_xz=k_xz, k_yz=k_yz)


class _CmiWorkspace:
    """Per-test state letting shuffles reuse the (y, z) structures."""

    def __init__(self, y: np.ndarray, z: np.ndarray, k: int) -> None:
        self.n = y.shape[0]
        self.k = k
        self.z = z
        self.yz = np.hstack([y, z]) if z.shape[1] else y
        self.tree_yz = cKDTree(self.yz)
        self.tree_z = cKDTree(z) if z.shape[1] else None
        self.psi = digamma_table(self.n)

    def estimate(self, x: np.ndarray) -> float:
        joint = np.hstack([x, self.yz])
        eps = cKDTree(joint).query(joint, k=self.k + 1, p=np.inf)[0][:, self.k]
        xz = np.hstack([x, self.z]) if self.z.shape[1] else x
        c_xz = _strict_counts(cKDTree(xz), xz, eps)
        c_yz = _strict_counts(self.tree_yz, self.yz, eps)
        if self.tree_z is None:
            psi_z = self.psi[self.n]
        else:
            c_z = _strict_counts(self.tree_z, self.z, eps)
            psi_z = self.psi[c_z]
        return float(
            digamma(self.k) + np.mean(psi_z - self.psi[c_xz] - self.psi[c_yz])
        )


def _prepare(x, y, z, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = _as_2d(x, "x")
    y = _as_2d(y, "y")
    z = _as_2d(z, "z")
    n = x.shape[0]
    if n == 0 or y.shape[0] != n or (z.shape[1] and z.shape[0] != n):
        raise ValueError("x, y and z must have equal, non-zero sample counts")
    if z.shape[1] == 0:
        z = np.empty((n, 0))
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample count n={n}")
    return _jitter(x), _jitter(y), _jitter(z)


def cmi_knn_estimate(x, y, z=None, k: int = DEFAULT_K) -> float:
    """Conditional mutual information I(x; y | z) in nats."""
    xj, yj, zj = _prepare(x, y, z, k)
    return _CmiWorkspace(yj, zj, k).estimate(xj)


def _local_permutation(z: np.ndarray, rng: np.random.Generator, k_perm: int) -> np.ndarray:
    """A permutation mapping each sample to one of its nearest z-neighbours.

    With empty z this degenerates to an unrestricted permutation.  Neighbour
    slots are consumed at most once so the result is a true permutation; the
    rare sample whose neighbours are all taken falls back to a random free slot.
    """
    n = z.shape[0]
    if z.shape[1] == 0:
        return rng.permutation(n)
    k_perm = min(k_perm, n)
    neighbors = cKDTree(z).query(z, k=k_perm, p=np.inf)[1]
    if k_perm == 1:
        neighbors = neighbors[:, None]
    perm = np.empty(n, dtype=np.intp)
    used = np.zeros(n, dtype=bool)
    for i in rng.permutation(n):
        free = neighbors[i][~used[neighbors[i]]]
        if free.size:
            j = int(free[rng.integers(free.size)])
        else:
            pool = np.flatnonzero(~used)
            j = int(pool[rng.integers(pool.size)])
        perm[i] = j
        used[j] = True
    return perm


def cmi_knn_test(
    x,
    y,
    z=None,
    k: int = DEFAULT_K,
    n_shuffles: int = 200,
    seed: int = 0,
    k_perm: int = DEFAULT_PERM_NEIGHBORS,
) -> CITestResult:
    """Shuffle test of conditional independence built on the CMI estimate.

    Deterministic given ``seed``; n_shuffles >= 100 is recommended for usable
    p-value resolution.
    """
    if n_shuffles < 1:
        raise ValueError("n_shuffles must be >= 1")
    n = _as_2d(x, "x").shape[0]
    if n <= k + 1:
        raise InsufficientDataError(f"need n > k + 1 samples, got n={n} with k={k}")
    xj, yj, zj = _prepare(x, y, z, k)
    workspace = _CmiWorkspace(yj, zj, k)
    observed = workspace.estimate(xj)
    rng = np.random.default_rng(seed)
    null_at_least = 0
    for _ in range(n_shuffles):
        perm = _local_permutation(zj, rng, k_perm)
        if workspace.estimate(xj[perm]) >= observed:
            null_at_least += 1
    p = (1 + null_at_least) / (1 + n_shuffles)
    return CITestResult(statistic=observed, p_value=p, n=n, test_name=CMI_KNN)
