"""Schouten tensor of conformally flat metrics g = w^-2 |dx|^2.

Sign convention for hypersurfaces (used throughout the package): the
second fundamental form of a sphere of radius R with outward normal is
-I/R, so its mean curvature is -(n-1)/R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, DomainError


def sym_matrix(a) -> np.ndarray:
    """Square float matrix with the upper triangle mirrored to the lower."""
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


@dataclass(frozen=True)
class ConformalJet:
    """Value, gradient and Hessian of w at one point."""

    w: float
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float).reshape(-1)
        hess = sym_matrix(self.hess)
        if hess.shape[0] != grad.size:
            raise DomainError("gradient and Hessian dimensions differ")
        if not np.isfinite(self.w) or self.w <= 0:
            raise DomainError(f"conformal factor must be positive, got w={self.w}")
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)

    @property
    def n(self) -> int:
        return self.grad.size


def schouten(jet: ConformalJet) -> np.ndarray:
    """A_w = w Hess(w) - |grad w|^2 I / 2."""
    n = jet.n
    return jet.w * jet.hess - 0.5 * float(jet.grad @ jet.grad) * np.eye(n)


def negative_schouten_eigenvalues(jet: ConformalJet) -> np.ndarray:
    """Eigenvalues of -A_w, ascending."""
    try:
        return np.linalg.eigvalsh(-schouten(jet))
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"eigensolver failed: {exc}") from exc


def mean_curvature_conformal(w0: float, dnu_w: float, H_sigma: float, n: int) -> float:
    """Mean curvature of a hypersurface in g = w^-2 |dx|^2.

    ``H_sigma`` is the Euclidean mean curvature and ``dnu_w`` the normal
    derivative of w, both with respect to the same unit normal.
    """
    if w0 <= 0:
        raise DomainError("w0 must be positive")
    return w0 * H_sigma + (n - 1) * dnu_w
