"""Nearest-neighbor estimators for (conditional) mutual information.

The estimator measures, for every sample point, the distance ``eps`` to
its k-th nearest neighbor in the joint (X, Y, Z) space under the maximum
norm, counts the points strictly within ``eps`` in the marginal subspaces
(XZ, YZ, Z) and averages digamma terms of those counts:

    I(X;Y|Z) = psi(k) + < psi(n_Z + 1) - psi(n_XZ + 1) - psi(n_YZ + 1) >

With no conditions (D_Z = 0) the count in the empty subspace is the full
sample, n_Z + 1 = S, which reduces the expression to the familiar
hyper-cube mutual-information form

    I(X;Y) = psi(k) + psi(S) - < psi(n_X + 1) + psi(n_Y + 1) >.

Estimates are returned raw, in nats; small negative values are not
truncated since the selection criteria downstream rely on relative
comparisons and exploit the estimator's negative bias in higher
dimensions as an implicit penalty against overfitting.

Determinism: no jitter is added to break distance ties. Exactly repeated
joint sample points make the neighborhood geometry degenerate; they are
counted with strict inequalities and reported via
:class:`DegenerateDistanceWarning`. The per-point digamma terms are summed
with ``math.fsum``, so results are independent of sample ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma
from sklearn.neighbors import KDTree

from .core import DegenerateInputError

__all__ = [
    "CmiEstimate",
    "ShuffleTestResult",
    "DegenerateDistanceWarning",
    "estimate_cmi",
    "shuffle_test",
]


class DegenerateDistanceWarning(UserWarning):
    """Exactly repeated joint sample points were encountered."""


@dataclass(frozen=True)
class CmiEstimate:
    """A single (C)MI estimate with its estimation context."""

    value: float
    k: int
    dims: tuple[int, int, int]
    n_samples: int

    @property
    def dim_cost(self) -> int:
        """D_X + D_Y + D_Z, the dimension weight of this estimate."""
        return sum(self.dims)


@dataclass(frozen=True)
class ShuffleTestResult:
    """Outcome of a permutation-surrogate significance test."""

    observed: float
    threshold: float
    surrogates: tuple[float, ...]
    significant: bool
    alpha: float
    m: int


def _as_2d(a, name: str) -> np.ndarray:
    if a is None:
        return np.empty((0, 0))
    arr = np.ascontiguousarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 1-D or 2-D array")
    return arr


def _validate(x, y, z, k):
    s = x.shape[0]
    if y.shape[0] != s or (z.size and z.shape[0] != s):
        raise ValueError("X, Y, Z must have the same number of samples")
    if x.shape[1] < 1 or y.shape[1] < 1:
        raise ValueError("X and Y must have at least one column")
    if k < 1:
        raise ValueError("k must be >= 1")
    if s <= k:
        raise ValueError(f"need more than k={k} samples, got {s}")
    for name, arr in (("X", x), ("Y", y), ("Z", z)):
        if arr.size == 0:
            continue
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
        ptp = arr.max(axis=0) - arr.min(axis=0)
        if np.any(ptp == 0.0):
            raise DegenerateInputError(
                f"{name} has a zero-variance column; neighbor distances "
                "would be degenerate"
            )


def estimate_cmi(x, y, z=None, k: int = 10) -> CmiEstimate:
    """Estimate I(X;Y|Z) in nats with the k-nearest-neighbor technique.

    Parameters
    ----------
    x, y : array-like, shape (S,) or (S, D)
        Samples of the two variables whose dependence is measured. With
        multi-column ``x`` and no conditions this is the multivariate
        mutual information of the joint X with Y.
    z : array-like, shape (S,) or (S, D_Z), optional
        Conditioning variables; omit or pass an empty array for plain MI.
    k : int
        Number of nearest neighbors defining the hyper-cube size around
        each joint sample point. Small k: low bias, high variance.

    Returns
    -------
    CmiEstimate

    Raises
    ------
    ValueError
        On non-finite input or S <= k.
    DegenerateInputError
        On zero-variance columns.

    Warns
    -----
    DegenerateDistanceWarning
        When exactly repeated joint points are present.
    """
    x = _as_2d(x, "X")
    y = _as_2d(y, "Y")
    z = _as_2d(z, "Z")
    _validate(x, y, z, k)
    s = x.shape[0]
    d_x, d_y, d_z = x.shape[1], y.shape[1], (z.shape[1] if z.size else 0)

    parts = [x, y] + ([z] if d_z else [])
    joint = np.hstack(parts)
    dist, _ = KDTree(joint, metric="chebyshev").query(joint, k=k + 1)
    if np.any(dist[:, 1] == 0.0):
        warnings.warn(
            "exactly repeated joint sample points; neighbor distances are "
            "degenerate and counts use strict inequalities",
            DegenerateDistanceWarning,
            stacklevel=2,
        )
    eps = dist[:, k]
    # largest radius strictly below eps: closed-ball counts at this radius
    # equal strict counts at eps
    r = np.nextafter(eps, 0.0)
    r[r < 0.0] = 0.0

    def count(sub: np.ndarray) -> np.ndarray:
        tree = KDTree(np.ascontiguousarray(sub), metric="chebyshev")
        return tree.query_radius(sub, r=r, count_only=True) - 1

    if d_z:
        n_xz = count(np.hstack([x, z]))
        n_yz = count(np.hstack([y, z]))
        n_z = count(z)
        total = math.fsum(
            digamma(n_z + 1.0) - digamma(n_xz + 1.0) - digamma(n_yz + 1.0)
        )
        value = float(digamma(k) + total / s)
    else:
        n_x = count(x)
        n_y = count(y)
        total = math.fsum(digamma(n_x + 1.0) + digamma(n_y + 1.0))
        value = float(digamma(k) + digamma(s) - total / s)
    return CmiEstimate(value=value, k=k, dims=(d_x, d_y, d_z), n_samples=s)


def shuffle_test(x, y, z=None, k: int = 10, m: int = 100, alpha: float = 0.05,
                 rng_seed: int = 0) -> ShuffleTestResult:
    """Permutation-surrogate significance test for I(X;Y|Z) > 0.

    ``m`` surrogate estimates are generated by independently permuting the
    rows of X (Y and Z untouched), destroying the X-Y dependence while
    keeping the marginals. The surrogates are sorted ascending and the
    value at rank ``ceil((1 - alpha) * m)`` is the significance threshold;
    the observed estimate is significant when it exceeds it.

    Each surrogate permutation derives deterministically from
    ``(rng_seed, surrogate_index)``, so results are reproducible and
    surrogates may be evaluated concurrently.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if m < 20:
        raise ValueError("shuffle test needs m >= 20 surrogates")
    if rng_seed < 0:
        raise ValueError("rng_seed must be >= 0")
    x = _as_2d(x, "X")
    y = _as_2d(y, "Y")
    z = _as_2d(z, "Z")
    observed = estimate_cmi(x, y, z if z.size else None, k)
    s = x.shape[0]
    surrogates = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDistanceWarning)
        for i in range(m):
            perm = np.random.default_rng([rng_seed, i]).permutation(s)
            est = estimate_cmi(x[perm], y, z if z.size else None, k)
            surrogates.append(est.value)
    surrogates.sort()
    rank = math.ceil((1.0 - alpha) * m)
    threshold = surrogates[rank - 1]
    return ShuffleTestResult(
        observed=observed.value,
        threshold=threshold,
        surrogates=tuple(surrogates),
        significant=observed.value > threshold,
        alpha=alpha,
        m=m,
    )
