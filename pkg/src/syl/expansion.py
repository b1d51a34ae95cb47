"""Boundary-layer ansatz on one side of a singular hypersurface (k = 2).

Near a point of Sigma, on the side the unit normal nu points into, take

    wbar(x) = w0(pi x) + w1(pi x) d(x) + w_* d(x)^p,

where pi is the closest-point projection and d the distance to Sigma.
With p = 3/2 the d^0 part of sigma_2(lambda(-A_wbar)) - 1 vanishes for a
unique w_* < 0 given by a closed form; for other p it cannot.

The check is independent of that closed form: wbar is evaluated in
high precision (mpmath), differentiated with central finite differences
and passed through the ordinary Schouten/sigma_k code in double precision.

Coordinates: Sigma is a graph x_n = phi(y') over its tangent plane at the
base point (the origin), with grad phi(0) = 0 and nu(0) = e_n, so the
second fundamental form is Hess phi(0) (sphere of radius R, outward
normal: phi = -|y'|^2 / (2R) + ...). Tangential fields are polynomials in
y': w0 is quadratic with the point's gradient and Hessian, w1 is linear.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import mpmath as mp
import numpy as np

from .conformal import ConformalJet, negative_schouten_eigenvalues, sym_matrix
from .errors import (
    DiagnosticsError,
    DomainError,
    InvariantError,
    NoRealSolutionError,
    NumericalPrecisionWarning,
)
from .radial import INNER, OUTER
from .singular_set import SurfacePointData, junction_point_data, quadratic_k2
from .symmetric import classify_cone, sigmas

CRITICAL_P = 1.5
BALANCE_TOL = 1e-8
DEFAULT_D_GRID = tuple(np.logspace(-2, -7, 11))


# -- surfaces ---------------------------------------------------------------


@dataclass(frozen=True)
class Hyperplane:
    """x_n = 0."""

    kind = "hyperplane"

    def second_fund(self, m: int) -> np.ndarray:
        return np.zeros((m, m))

    def tube_radius(self) -> float:
        return np.inf

    def project(self, x):
        """Return ``(y', d)`` for an mpmath point ``x``."""
        return list(x[:-1]), x[-1]

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Sphere:
    """Sphere of radius R through the origin, tangent to x_n = 0.

    ``normal="outward"``: the center is at -R e_n and nu = e_n points out.
    ``normal="inward"``: the center is at +R e_n and nu points to it.
    """

    radius: float
    normal: str = "outward"

    kind = "sphere"

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"sphere radius must be positive, got {self.radius}")
        if self.normal not in ("outward", "inward"):
            raise DomainError(f"normal must be 'outward' or 'inward', got {self.normal!r}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def _sign(self) -> int:
        return 1 if self.normal == "outward" else -1

    def second_fund(self, m: int) -> np.ndarray:
        return -self._sign * np.eye(m) / self.radius

    def tube_radius(self) -> float:
        return self.radius

    def project(self, x):
        R = mp.mpf(self.radius)
        center_n = -self._sign * R
        v = list(x[:-1]) + [x[-1] - center_n]
        rho = mp.sqrt(mp.fsum(c * c for c in v))
        if rho == 0:
            raise DomainError("point is the sphere center")
        y = [c * R / rho for c in v[:-1]]
        return y, self._sign * (rho - R)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius, "normal": self.normal}


@dataclass(frozen=True)
class QuadraticGraph:
    """x_n = y'.Q.y' / 2."""

    Q: np.ndarray

    kind = "graph"

    def __post_init__(self):
        object.__setattr__(self, "Q", sym_matrix(self.Q))

    def second_fund(self, m: int) -> np.ndarray:
        if self.Q.shape != (m, m):
            raise DomainError(f"graph Q must be {m}x{m}, got {self.Q.shape}")
        return self.Q.copy()

    def tube_radius(self) -> float:
        kappa = float(np.max(np.abs(np.linalg.eigvalsh(self.Q)))) if self.Q.size else 0.0
        return np.inf if kappa == 0 else 1.0 / kappa

    def project(self, x):
        m = len(x) - 1
        Q = mp.matrix(self.Q.tolist())
        xp = mp.matrix(list(x[:-1]))
        y = mp.matrix(list(x[:-1]))
        eps = mp.mpf(10) ** (-(mp.mp.dps - 5))
        for _ in range(100):
            Qy = Q * y
            phi = (y.T * Qy)[0] / 2
            gap = x[-1] - phi
            F = y - xp - gap * Qy
            J = mp.eye(m) + Qy * Qy.T - gap * Q
            step = mp.lu_solve(J, F)
            y = y - step
            if mp.norm(step) <= eps * (1 + mp.norm(y)):
                break
        else:
            raise DomainError("closest-point projection did not converge")
        Qy = Q * y
        phi = (y.T * Qy)[0] / 2
        gap = x[-1] - phi
        dist = mp.sqrt(mp.norm(xp - y) ** 2 + gap**2)
        return [y[i] for i in range(m)], dist if gap >= 0 else -dist

    def to_dict(self) -> dict:
        return {"kind": self.kind, "Q": self.Q.tolist()}


def surface_from_dict(d: dict):
    kind = d.get("kind")
    try:
        if kind == "hyperplane":
            return Hyperplane()
        if kind == "sphere":
            return Sphere(float(d["radius"]), d.get("normal", "outward"))
        if kind == "graph":
            return QuadraticGraph(np.asarray(d["Q"], dtype=float))
    except KeyError as exc:
        raise DomainError(f"surface: missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown surface kind {kind!r}")


# -- input / result ---------------------------------------------------------


@dataclass(frozen=True)
class ExpansionInput:
    """Point data of w0 on Sigma, the first normal coefficient and the surface.

    ``point`` must be given in an orthonormal frame of the tangent plane
    and its second fundamental form must be that of ``surface``.
    """

    point: SurfacePointData
    w1: float
    grad_w1: np.ndarray
    surface: object

    def __post_init__(self):
        m = self.point.n - 1
        g1 = np.asarray(self.grad_w1, dtype=float).reshape(-1)
        if g1.size != m:
            raise DomainError(f"grad_w1 must have {m} entries, got {g1.size}")
        if not np.isfinite(self.w1):
            raise DomainError("w1 must be finite")
        object.__setattr__(self, "grad_w1", g1)
        object.__setattr__(self, "w1", float(self.w1))
        if not np.allclose(self.point.metric, np.eye(m), atol=1e-12, rtol=0):
            raise DomainError("expansion input needs an orthonormal frame (metric = I)")
        II = self.surface.second_fund(m)
        if not np.allclose(self.point.second_fund, II, atol=1e-9, rtol=1e-9):
            raise InvariantError("surface-compatibility", "second_fund differs from the surface's")
        res = self.balance_residual
        if not abs(res) <= BALANCE_TOL:
            raise InvariantError("normal-balance", f"residual {res:.3e} exceeds {BALANCE_TOL:g}")

    @property
    def balance_residual(self) -> float:
        """-w0 Lap w0 + w0 w1 H + (n-1)(|grad w0|^2 + w1^2)/2 (must vanish)."""
        return quadratic_k2(self.point, self.w1)

    @property
    def mean_curvature_term(self) -> float:
        """w0 H + (n-1) w1, strictly negative for a real coefficient."""
        return self.point.w0 * self.point.H_sigma + (self.point.n - 1) * self.w1

    @classmethod
    def from_dict(cls, d: dict) -> "ExpansionInput":
        try:
            point = SurfacePointData.from_dict(d["point"])
            surface = surface_from_dict(d["surface"])
            return cls(point, float(d["w1"]), d["grad_w1"], surface)
        except KeyError as exc:
            raise DomainError(f"missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "w1": self.w1,
            "grad_w1": self.grad_w1.tolist(),
            "surface": self.surface.to_dict(),
        }


@dataclass(frozen=True)
class LimitRow:
    d: float
    sigma2: float
    residual: float
    sigma1: float
    label: str


@dataclass(frozen=True)
class ExpansionResult:
    p: float
    w_star: float
    denom: float
    numerator: float
    limit_residual: float | None = None
    cone_ok_near: bool | None = None
    slope: float | None = None
    rows: tuple = field(default=())


def trace_free_x(inp: ExpansionInput) -> np.ndarray:
    """Trace-free part of X = Hess w0 - w1 II."""
    X = inp.point.hess_w0 - inp.w1 * inp.point.second_fund
    m = X.shape[0]
    return X - np.trace(X) / m * np.eye(m)


def mixed_derivative(inp: ExpansionInput) -> np.ndarray:
    """Tangential gradient of d_n wbar on Sigma: grad w1 + II grad w0.

    The second term comes from w0(pi(x)): off the normal line through a
    point, e_n is no longer normal to Sigma, so w0(pi(x)) varies along e_n
    at a rate II(grad w0, y') to first order in the offset y'.
    """
    return inp.grad_w1 + inp.point.second_fund @ inp.point.grad_w0


def coefficient_terms(inp: ExpansionInput, p: float = CRITICAL_P) -> tuple[float, float]:
    """``(numerator, denom)`` with w_*^2 = numerator / denom.

    numerator = 1 + w0^2 (|X0|^2 + 2|grad w1 + II grad w0|^2) / 2,
    denom = -p^2 (p-1) w0 (w0 H + (n-1) w1).
    """
    w0 = inp.point.w0
    Xo = trace_free_x(inp)
    m = mixed_derivative(inp)
    num = 1.0 + 0.5 * w0 * w0 * (float(np.sum(Xo * Xo)) + 2.0 * float(m @ m))
    den = -p * p * (p - 1.0) * w0 * inp.mean_curvature_term
    return num, den


def expansion_coefficient(inp: ExpansionInput, p: float = CRITICAL_P) -> ExpansionResult:
    """Negative coefficient w_* of d^p; p = 3/2 is the only consistent choice.

    Other p are accepted so the failure of the ansatz can be demonstrated.
    """
    if not 1.0 < p < 2.0:
        raise DomainError(f"p must lie in (1, 2), got {p}")
    if not inp.mean_curvature_term < 0:
        raise NoRealSolutionError(
            f"w0 H + (n-1) w1 = {inp.mean_curvature_term:.6g} is not negative: no real coefficient"
        )
    num, den = coefficient_terms(inp, p)
    return ExpansionResult(p=float(p), w_star=-float(np.sqrt(num / den)), denom=den, numerator=num)


# -- the ansatz -------------------------------------------------------------


def _wbar_mp(inp: ExpansionInput, w_star, p, x):
    """wbar at an mpmath point; raises DomainError off the admissible side."""
    y, d = inp.surface.project(x)
    tube = inp.surface.tube_radius()
    if tube < np.inf:
        lim = mp.mpf(tube) / 2
        if abs(d) >= lim or mp.sqrt(mp.fsum(c * c for c in y)) >= lim:
            raise DomainError("point outside the tubular neighbourhood")
    if d < 0:
        # points given in double precision on Sigma can land a rounding error inside
        if d < -1e-13:
            raise DomainError("point lies on the far side of the surface (d < 0)")
        d = mp.mpf(0)
    pt = inp.point
    m = len(y)
    w0 = mp.mpf(pt.w0)
    w0 += mp.fsum(mp.mpf(pt.grad_w0[i]) * y[i] for i in range(m))
    w0 += mp.fsum(mp.mpf(pt.hess_w0[i, j]) * y[i] * y[j] for i in range(m) for j in range(m)) / 2
    w1 = mp.mpf(inp.w1) + mp.fsum(mp.mpf(inp.grad_w1[i]) * y[i] for i in range(m))
    return w0 + w1 * d + mp.mpf(w_star) * d ** mp.mpf(p)


def build_wbar(inp: ExpansionInput, result: ExpansionResult, x) -> float:
    """Value of the ansatz at the ambient point ``x`` (length n)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != inp.point.n:
        raise DomainError(f"point must have {inp.point.n} coordinates")
    with mp.workdps(30):
        return float(_wbar_mp(inp, result.w_star, result.p, [mp.mpf(c) for c in x]))


def finite_difference_jet(inp: ExpansionInput, w_star: float, p: float, d: float, dps: int = 50, h_ratio: float = 0.01) -> ConformalJet:
    """Jet of wbar at x = d e_n by second-order central differences, step d*h_ratio."""
    n = inp.point.n
    with mp.workdps(dps):
        d_mp = mp.mpf(d)
        h = d_mp * mp.mpf(h_ratio)
        base = [mp.mpf(0)] * (n - 1) + [d_mp]

        def f(*shifts):
            x = list(base)
            for i, s in shifts:
                x[i] += s * h
            return _wbar_mp(inp, w_star, p, x)

        f0 = f()
        grad = [(f((i, 1)) - f((i, -1))) / (2 * h) for i in range(n)]
        hess = [[mp.mpf(0)] * n for _ in range(n)]
        for i in range(n):
            hess[i][i] = (f((i, 1)) - 2 * f0 + f((i, -1))) / h**2
            for j in range(i + 1, n):
                v = (f((i, 1), (j, 1)) - f((i, 1), (j, -1)) - f((i, -1), (j, 1)) + f((i, -1), (j, -1))) / (4 * h**2)
                hess[i][j] = hess[j][i] = v
        return ConformalJet(float(f0), [float(g) for g in grad], [[float(v) for v in row] for row in hess])


def limit_table(inp: ExpansionInput, w_star: float, p: float, d_grid, dps: int = 50) -> list[LimitRow]:
    rows = []
    for d in d_grid:
        lam = negative_schouten_eigenvalues(finite_difference_jet(inp, w_star, p, float(d), dps))
        s = sigmas(lam, 2)
        rows.append(LimitRow(float(d), float(s[2]), abs(float(s[2]) - 1.0), float(s[1]), classify_cone(lam, 2).label))
    return rows


def _slope(rows) -> float:
    """Least-squares slope of log|sigma2 - 1| vs log d over the smaller-d half."""
    ds = np.array([r.d for r in rows])
    res = np.array([r.residual for r in rows])
    order = np.argsort(ds)
    half = order[: max(3, (len(rows) + 1) // 2)]
    keep = [i for i in half if res[i] > 0]
    if len(keep) < 2:
        return float("nan")
    return float(np.polyfit(np.log(ds[keep]), np.log(res[keep]), 1)[0])


def _check_grid(inp, d_grid) -> np.ndarray:
    d = np.asarray(d_grid, dtype=float).reshape(-1)
    if d.size < 3:
        raise DomainError("d_grid needs at least 3 points")
    if not np.all(d > 0):
        raise DomainError("d_grid must be positive")
    if d.max() >= inp.surface.tube_radius() / 2:
        raise DomainError("d_grid leaves the tubular neighbourhood")
    return np.sort(d)[::-1]


def verify_limit(inp: ExpansionInput, result: ExpansionResult, d_grid=DEFAULT_D_GRID, dps: int = 50) -> ExpansionResult:
    """Evaluate sigma_2(lambda(-A_wbar)) along the normal line through the point.

    Returns ``result`` with ``limit_residual`` (|sigma_2 - 1| at the smallest
    d), ``cone_ok_near`` (Gamma_2^+ interior at every d but the coarsest),
    ``slope`` and the per-d ``rows`` filled in.
    """
    d = _check_grid(inp, d_grid)
    rows = limit_table(inp, result.w_star, result.p, d, dps)
    floor = 10.0 ** (-dps / 3.0)
    if d.min() * 0.01 < floor:
        warnings.warn(f"finite-difference step below {floor:.1e} at dps={dps}", NumericalPrecisionWarning, stacklevel=2)
    if abs(result.p - CRITICAL_P) < 1e-12:
        tail = [r.residual for r in rows[len(rows) // 2 :]]
        if any(b > 1.5 * a for a, b in zip(tail, tail[1:])):
            warnings.warn("residual is not decreasing as d -> 0; finite differences may be cancelling", NumericalPrecisionWarning, stacklevel=2)
    cone_ok = all(r.label == "interior" for r in rows[1:])
    return replace(
        result,
        limit_residual=rows[-1].residual,
        cone_ok_near=bool(cone_ok),
        slope=_slope(rows),
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class ScanRow:
    p: float
    w_star: float
    limit_residual: float
    slope: float


def exponent_necessity_scan(inp: ExpansionInput, p_grid, d_grid=DEFAULT_D_GRID, dps: int = 50) -> list[ScanRow]:
    """For each p, run the limit check with w_* from the p-dependent balance.

    Only p = 3/2 removes the d-independent part of sigma_2 - 1. Below it the
    d^(2p-3) term blows up; above it the w_* terms vanish and sigma_2 tends
    to 1 - numerator.
    """
    out = []
    for p in p_grid:
        res = verify_limit(inp, expansion_coefficient(inp, float(p)), d_grid, dps)
        out.append(ScanRow(res.p, res.w_star, res.limit_residual, res.slope))
    return out


# -- radial annulus solutions -----------------------------------------------


def annulus_expansion_input(sol, side: str = OUTER) -> ExpansionInput:
    """Expansion data at the junction sphere, looking into ``side``."""
    point = junction_point_data(sol)
    R = sol.junction.r_star
    m = point.n - 1
    if side == OUTER:
        return ExpansionInput(point, sol.junction.dnu_w_plus, np.zeros(m), Sphere(R, "outward"))
    if side == INNER:
        point = SurfacePointData.orthonormal(point.n, point.w0, np.zeros(m), np.zeros((m, m)), np.eye(m) / R)
        return ExpansionInput(point, -sol.junction.dnu_w_minus, np.zeros(m), Sphere(R, "inward"))
    raise DomainError(f"side must be 'outer' or 'inner', got {side!r}")


@dataclass(frozen=True)
class BranchFit:
    w_star: float
    second_order: float
    n_points: int
    window: tuple


def fit_branch_coefficient(sol, side: str = OUTER, window=(1e-8, 1e-4), p: float = CRITICAL_P, min_points: int = 8) -> BranchFit:
    """Least-squares fit of w - w0 - w1 s = w_* s^p + c s^2 on a branch, s = |r - r_*|.

    ``window`` bounds s / r_*.
    """
    if sol.junction is None:
        raise DomainError("solution has no junction (k=1)")
    j = sol.junction
    br = sol.branch(side)
    w1 = j.dnu_w_plus if side == OUTER else -j.dnu_w_minus
    s = np.abs(br.r - j.r_star)
    lo, hi = window[0] * j.r_star, window[1] * j.r_star
    msk = (s >= lo) & (s <= hi)
    if msk.sum() < min_points:
        raise DiagnosticsError(f"only {int(msk.sum())} branch points in the fit window")
    s = s[msk]
    y = br.w[msk] - j.w0 - w1 * s
    A = np.column_stack([s**p, s**2])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return BranchFit(float(coef[0]), float(coef[1]), int(msk.sum()), (float(lo), float(hi)))
