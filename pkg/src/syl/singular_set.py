"""Pointwise checks on a singular hypersurface Sigma.

All tangential tensors are given in a frame of T_x Sigma together with the
induced metric ``metric`` in that frame (the identity for an orthonormal
frame). ``grad_w0`` holds the components of the differential of w0, so
|grad w0|^2 = grad_w0 . metric^-1 . grad_w0. Second fundamental form sign:
a sphere of radius R with outward normal has II = -metric/R.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import linalg, optimize

from .conformal import sym_matrix
from .errors import ComputationError, DegeneracyWarning, DomainError, InconsistencyError
from .symmetric import sigmas

ROOT_TOL = 1e-8


@dataclass(frozen=True)
class SurfacePointData:
    n: int
    w0: float
    grad_w0: np.ndarray
    hess_w0: np.ndarray
    second_fund: np.ndarray
    metric: np.ndarray
    H_sigma: float

    def __post_init__(self):
        n = int(self.n)
        if n < 2:
            raise DomainError("ambient dimension must be at least 2")
        m = n - 1
        grad = np.asarray(self.grad_w0, dtype=float).reshape(-1)
        mats = {}
        for name in ("hess_w0", "second_fund", "metric"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (m, m):
                raise DomainError(f"{name} must be {m}x{m}, got {a.shape}")
            mats[name] = sym_matrix(a)
        if grad.size != m:
            raise DomainError(f"grad_w0 must have {m} entries, got {grad.size}")
        if not (np.isfinite(self.w0) and self.w0 > 0):
            raise DomainError(f"w0 must be positive, got {self.w0}")
        try:
            np.linalg.cholesky(mats["metric"])
        except np.linalg.LinAlgError:
            raise DomainError("metric is not positive definite") from None
        H = float(np.trace(np.linalg.solve(mats["metric"], mats["second_fund"])))
        if abs(H - float(self.H_sigma)) > 1e-9 * max(1.0, abs(H)):
            raise DomainError(f"H_sigma={self.H_sigma} disagrees with trace(metric^-1 II)={H}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "w0", float(self.w0))
        object.__setattr__(self, "grad_w0", grad)
        object.__setattr__(self, "H_sigma", float(self.H_sigma))
        for name, a in mats.items():
            object.__setattr__(self, name, a)

    @classmethod
    def orthonormal(cls, n, w0, grad_w0, hess_w0, second_fund):
        """Data in an orthonormal frame; H_sigma is the trace of II."""
        II = sym_matrix(second_fund)
        return cls(n, w0, grad_w0, hess_w0, II, np.eye(n - 1), float(np.trace(II)))

    @classmethod
    def from_dict(cls, d: dict) -> "SurfacePointData":
        try:
            n = int(d["n"])
            metric = d.get("metric")
            metric = np.eye(n - 1) if metric is None else np.asarray(metric, dtype=float)
            II = np.asarray(d["second_fund"], dtype=float)
            H = d.get("H_sigma")
            if H is None:
                H = float(np.trace(np.linalg.solve(metric, II)))
            return cls(n, d["w0"], d["grad_w0"], d["hess_w0"], II, metric, H)
        except KeyError as exc:
            raise DomainError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed surface point data: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "w0": self.w0,
            "grad_w0": self.grad_w0.tolist(),
            "hess_w0": self.hess_w0.tolist(),
            "second_fund": self.second_fund.tolist(),
            "metric": self.metric.tolist(),
            "H_sigma": self.H_sigma,
        }

    @property
    def grad_norm2(self) -> float:
        return float(self.grad_w0 @ np.linalg.solve(self.metric, self.grad_w0))

    @property
    def laplacian_w0(self) -> float:
        return float(np.trace(np.linalg.solve(self.metric, self.hess_w0)))


def t_alpha(data: SurfacePointData, alpha: float) -> np.ndarray:
    """T_alpha = -w0 (Hess_Sigma w0 - alpha II) + (|grad w0|^2 + alpha^2) g / 2."""
    return -data.w0 * (data.hess_w0 - alpha * data.second_fund) + 0.5 * (
        data.grad_norm2 + alpha * alpha
    ) * data.metric


def t_alpha_eigenvalues(data: SurfacePointData, alpha: float) -> np.ndarray:
    """lambda(g^-1 T_alpha) from the generalized symmetric eigenproblem."""
    try:
        return linalg.eigh(t_alpha(data, alpha), data.metric, eigvals_only=True)
    except linalg.LinAlgError as exc:
        raise ComputationError(f"eigensolver failed: {exc}") from exc


def _check_k(data, k):
    if not 2 <= k <= data.n:
        raise DomainError(f"need 2 <= k <= n, got k={k}, n={data.n}")


def theorem_a_residual(data: SurfacePointData, alpha: float, k: int, tol: float = ROOT_TOL):
    """``(sigma_{k-1}(lambda(g^-1 T_alpha)), cone_ok)``.

    ``cone_ok`` means the eigenvalues lie in the closure of Gamma_{k-1}^+
    up to ``tol``: sigma_j >= -tol for 1 <= j <= k-1.
    """
    _check_k(data, k)
    s = sigmas(t_alpha_eigenvalues(data, alpha), k - 1)
    return float(s[k - 1]), bool(np.all(s[1:] >= -tol))


def quadratic_k2(data: SurfacePointData, alpha: float) -> float:
    """Closed-form k=2 relation: -w0 Lap w0 + alpha w0 H + (n-1)(|grad w0|^2 + alpha^2)/2."""
    n = data.n
    return (
        -data.w0 * data.laplacian_w0
        + alpha * data.w0 * data.H_sigma
        + 0.5 * (n - 1) * (data.grad_norm2 + alpha * alpha)
    )


@dataclass(frozen=True)
class RootPair:
    alpha_plus: float
    alpha_minus: float
    all_roots: tuple
    admissible: tuple = field(default=())
    degenerate: bool = False


def _root_scale(data: SurfacePointData) -> float:
    """Bound on |alpha| beyond which every eigenvalue of g^-1 T_alpha is positive."""
    U = linalg.cholesky(data.metric)
    white = lambda a: linalg.solve_triangular(U, linalg.solve_triangular(U, a, trans="T").T, trans="T")
    kappa = np.abs(np.linalg.eigvalsh(white(data.second_fund))).max()
    hess = np.abs(np.linalg.eigvalsh(white(data.hess_w0))).max()
    return 1.0 + 2.0 * data.w0 * kappa + 2.0 * np.sqrt(data.w0 * hess + data.grad_norm2)


def _cluster(roots: np.ndarray, tol: float):
    """Group nearby (complex) roots; return a list of member lists."""
    remaining = list(roots)
    groups = []
    while remaining:
        seed = remaining.pop(0)
        members = [seed]
        keep = []
        for z in remaining:
            (members if abs(z - seed) <= tol else keep).append(z)
        remaining = keep
        groups.append(members)
    return groups


def _relative_residual(data, alpha, k) -> float:
    """|sigma_{k-1}(lambda)| relative to sigma_{k-1}(|lambda|)."""
    lam = t_alpha_eigenvalues(data, alpha)
    scale = sigmas(np.abs(lam), k - 1)[k - 1]
    res = abs(sigmas(lam, k - 1)[k - 1])
    return 0.0 if res <= 1e-14 else res / max(scale, 1e-300)


def _refine_simple(data, k, alpha, L) -> float:
    """Bracket a simple root of the exact function and tighten it with brentq."""
    f = lambda a: theorem_a_residual(data, a, k)[0]
    fa = f(alpha)
    if fa == 0:
        return alpha
    for delta in L * np.array([1e-10, 1e-8, 1e-6, 1e-4]):
        lo, hi = alpha - delta, alpha + delta
        flo, fhi = f(lo), f(hi)
        if flo * fhi < 0:
            return float(optimize.brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(alpha)), rtol=1e-15))
    return alpha


def _polish(coef, x, mult, steps=8):
    """Newton on the (mult-1)-th derivative, where a root of multiplicity mult is simple."""
    c = C.chebder(coef, mult - 1) if mult > 1 else coef
    dc = C.chebder(c)
    x0 = x
    for _ in range(steps):
        d = C.chebval(x, dc)
        if d == 0:
            break
        step = C.chebval(x, c) / d
        x -= step
        if abs(step) <= 1e-16 * (1 + abs(x)):
            break
    return x if abs(x - x0) <= 1e-3 else x0


def singular_alpha_roots(data: SurfacePointData, k: int, tol: float = ROOT_TOL) -> RootPair:
    """Real roots alpha of sigma_{k-1}(lambda(g^-1 T_alpha)) = 0 (degree 2k-2).

    The polynomial is sampled at 2k-1 Chebyshev points, interpolated in the
    Chebyshev basis, and its roots are the eigenvalues of the colleague
    (Chebyshev companion) matrix. Roots not in the closure of
    Gamma_{k-1}^+ are discarded; the pair holds the extreme admissible roots.
    """
    _check_k(data, k)
    deg = 2 * k - 2
    L = _root_scale(data)
    nodes = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    values = np.array([theorem_a_residual(data, L * x, k, tol)[0] for x in nodes])
    coef = C.chebfit(nodes, values, deg)

    lead = C.cheb2poly(coef)[-1]
    expected = comb(data.n - 1, k - 1) / 2 ** (k - 1) * L**deg
    if abs(lead - expected) > 1e-6 * expected:
        raise ComputationError(f"leading coefficient {lead:.6g} differs from expected {expected:.6g}")

    raw = C.chebroots(coef)
    # a root of multiplicity m is perturbed by about eps^(1/m), so cluster generously
    groups = _cluster(np.sort_complex(raw.astype(complex)), 1e-3)
    real_roots = []
    admissible = []
    for members in groups:
        z = complex(np.mean(members))
        if abs(z.imag) > 1e-6:
            continue
        mult = len(members)
        candidates = [(_polish(coef, z.real, mult), mult)]
        if mult > 1 and _relative_residual(data, L * candidates[0][0], k) > 1e-10:
            # close but distinct roots
            candidates = [(_polish(coef, u.real, 1), 1) for u in members if abs(u.imag) <= 1e-6]
        for x, m in candidates:
            alpha = float(L * x)
            if m == 1:
                alpha = _refine_simple(data, k, alpha, L)
            if _relative_residual(data, alpha, k) > 1e-6:
                continue
            real_roots.append((alpha, m))
            if theorem_a_residual(data, alpha, k, tol)[1]:
                admissible.append((alpha, m))
    if not admissible:
        raise InconsistencyError("no real admissible root: data cannot come from a singular hypersurface")
    alphas = [a for a, _ in admissible]
    lo, hi = min(alphas), max(alphas)
    degenerate = bool(hi - lo <= 1e-6 * L)
    if degenerate:
        warnings.warn(
            f"double root alpha={lo:.6g}: normal derivatives coincide, no genuine jump",
            DegeneracyWarning,
            stacklevel=2,
        )
    return RootPair(lo, hi, tuple(real_roots), tuple(admissible), degenerate)


@dataclass(frozen=True)
class MinimalityCheck:
    h_plus: float
    h_minus_reversed: float
    minimal: bool


def minimality_check_k2(data: SurfacePointData, roots: RootPair, tol: float = 1e-10) -> MinimalityCheck:
    """Sign test for Sigma being minimal w.r.t. the Lipschitz metric (k=2).

    ``h_plus`` is the conformal mean curvature on the + side w.r.t. nu and
    must be negative. ``h_minus_reversed = w0 H + (n-1) alpha_minus`` is
    minus the mean curvature on the - side w.r.t. -nu and must be positive.
    """
    n = data.n
    h_plus = data.w0 * data.H_sigma + (n - 1) * roots.alpha_plus
    h_minus = -(data.w0 * (-data.H_sigma) + (n - 1) * (-roots.alpha_minus))
    minimal = (not roots.degenerate) and h_plus < -tol and h_minus > tol
    return MinimalityCheck(float(h_plus), float(h_minus), bool(minimal))


def junction_point_data(sol) -> SurfacePointData:
    """Point data on the sphere |x| = r_* of an annulus solution (orthonormal frame)."""
    if sol.junction is None:
        raise DomainError("solution has no singular sphere (k=1)")
    n = sol.problem.n
    R = sol.junction.r_star
    m = n - 1
    return SurfacePointData.orthonormal(n, sol.junction.w0, np.zeros(m), np.zeros((m, m)), -np.eye(m) / R)
