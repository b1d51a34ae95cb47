"""Elementary symmetric polynomials and Garding cones."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DomainError

MAX_DIM = 32
DEFAULT_CONE_TOL = 1e-10

INTERIOR = "interior"
BOUNDARY = "boundary"
OUTSIDE = "outside"


def as_lambda(values, max_dim: int = MAX_DIM) -> np.ndarray:
    """Validate an eigenvalue vector and return it as a float array."""
    lam = np.asarray(values, dtype=float).reshape(-1)
    if not 1 <= lam.size <= max_dim:
        raise DomainError(f"eigenvalue vector length {lam.size} not in [1, {max_dim}]")
    if not np.all(np.isfinite(lam)):
        raise DomainError("eigenvalue vector has non-finite entries")
    return lam


def sigmas(lam, k: int) -> np.ndarray:
    """Return ``[sigma_0, ..., sigma_k]`` of ``lam``.

    Coefficients of prod(1 + lam_i x) truncated at degree k, built one
    entry at a time: O(n k) work.
    """
    lam = as_lambda(lam)
    n = lam.size
    if not 0 <= k <= n:
        raise DomainError(f"k={k} out of range for n={n}")
    e = np.zeros(k + 1)
    e[0] = 1.0
    for i, x in enumerate(lam):
        for j in range(min(i + 1, k), 0, -1):
            e[j] += x * e[j - 1]
    return e


def sigma(lam, k: int) -> float:
    """k-th elementary symmetric polynomial; sigma_0 = 1."""
    return float(sigmas(lam, k)[k])


def sigma_of_multiset(mu_r: float, mu_t: float, n: int, k: int) -> float:
    """sigma_k of ``(mu_r, mu_t, ..., mu_t)`` with mu_t repeated n-1 times."""
    if n < 2 or not 1 <= k <= n:
        raise DomainError(f"need n >= 2 and 1 <= k <= n, got n={n}, k={k}")
    return comb(n - 1, k) * mu_t**k + comb(n - 1, k - 1) * mu_t ** (k - 1) * mu_r


@dataclass(frozen=True)
class ConeClassification:
    label: str
    witness: int | None
    sigma_values: tuple

    @property
    def interior(self) -> bool:
        return self.label == INTERIOR

    @property
    def closure(self) -> bool:
        return self.label != OUTSIDE


def classify_cone(lam, k: int, tol: float = DEFAULT_CONE_TOL) -> ConeClassification:
    """Locate ``lam`` relative to the open cone Gamma_k^+.

    ``witness`` is the index j of the first sigma_j below ``-tol``
    (outside) or the first with ``|sigma_j| <= tol`` (boundary).
    """
    lam = as_lambda(lam)
    if not 1 <= k <= lam.size:
        raise DomainError(f"k={k} out of range for n={lam.size}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    s = sigmas(lam, k)[1:]
    values = tuple(float(v) for v in s)
    below = np.flatnonzero(s < -tol)
    if below.size:
        return ConeClassification(OUTSIDE, int(below[0]) + 1, values)
    small = np.flatnonzero(s <= tol)
    if small.size:
        return ConeClassification(BOUNDARY, int(small[0]) + 1, values)
    return ConeClassification(INTERIOR, None, values)
