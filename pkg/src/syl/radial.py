"""Radial sigma_k-Loewner-Nirenberg problem on an annulus {a < |x| < b}.

For w = w(r) the Hessian has eigenvalue w'' once and w'/r with
multiplicity n-1, so lambda(-A_w) = (mu_r, mu_t, ..., mu_t) with

    mu_r = -w w'' + w'^2/2,      mu_t = -w w'/r + w'^2/2,

and sigma_k = 1 becomes C(n-1,k) mu_t^k + C(n-1,k-1) mu_t^(k-1) mu_r = 1.
Given mu_t > 0 this is linear in mu_r (hence in w''), so there is no
branch choice when solving for w''.

For k >= 2 the equation degenerates where mu_t = 0. That is where the two
smooth branches meet: on the outer side w' = 0, on the inner side
w' = 2 w / r. Near it w'' blows up like mu_t^(1-k). The integrator
therefore runs in a parameter tau with dr/dtau = mu_t^(k-1), in which the
vector field is polynomial and regular at the junction. Each branch starts
exactly on the junction and runs to the boundary. The equation is
invariant under dilations x -> s x, so the branches are computed with
r_* = 1 and scaled afterwards. The single shooting unknown w0/r_* is fixed
by requiring the two boundary radii to have ratio b/a.

Along every branch the quantity C(n,k) mu_t^k - C(n,k) K (w/r)^n is
conserved (equal to 1) for a constant K. Its drift along the computed
grid is reported as an independent measure of integration error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb, log, sqrt

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .conformal import ConformalJet
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegeneracyError,
    DiagnosticsError,
    DomainError,
)
from .symmetric import classify_cone, sigma_of_multiset

log_ = logging.getLogger(__name__)

OUTER = "outer"
INNER = "inner"


@dataclass(frozen=True)
class AnnulusProblem:
    a: float
    b: float
    n: int
    k: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ConfigurationError("radii must be finite")
        if not 0 < self.a < self.b:
            raise ConfigurationError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigurationError(f"dimension n must be an integer >= 3, got {self.n}")
        if int(self.k) != self.k or not 1 <= self.k <= self.n:
            raise ConfigurationError(f"need 1 <= k <= n, got k={self.k}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))

    @property
    def r_sym(self) -> float:
        """Fixed radius of the inversion x -> ab x/|x|^2."""
        return sqrt(self.a * self.b)


@dataclass(frozen=True)
class SolverOptions:
    ode_tol: float = 1e-8
    eps0: float = 1e-6
    cone_floor: float = 1e-8
    rtol: float = 1e-12
    atol: float = 1e-14
    junction_tol: float = 1e-3
    junction_grid: tuple = (1e-9, 1e-2)
    points_per_decade: int = 40
    shoot_xtol: float = 1e-14

    def __post_init__(self):
        for name in ("ode_tol", "eps0", "cone_floor", "rtol", "atol", "junction_tol", "shoot_xtol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not self.eps0 < 0.5:
            raise ConfigurationError("eps0 must be a small fraction of b - a")
        lo, hi = self.junction_grid
        if not 0 < lo < hi < 1:
            raise ConfigurationError("junction_grid must satisfy 0 < lo < hi < 1")
        object.__setattr__(self, "junction_grid", (float(lo), float(hi)))


@dataclass
class Branch:
    """Radial profile on one side of the junction, sorted by increasing r."""

    side: str
    r: np.ndarray
    w: np.ndarray
    wp: np.ndarray
    wpp: np.ndarray
    mu_r: np.ndarray
    mu_t: np.ndarray
    residual: np.ndarray

    COLUMNS = ("r", "w", "wp", "wpp", "mu_r", "mu_t", "residual")

    def __len__(self):
        return self.r.size

    def interior_mask(self) -> np.ndarray:
        return self.w > 0


@dataclass(frozen=True)
class Junction:
    r_star: float
    w0: float
    dnu_w_plus: float
    dnu_w_minus: float


@dataclass
class RadialSolution:
    problem: AnnulusProblem
    options: SolverOptions
    outer: Branch
    inner: Branch
    junction: Junction | None
    stats: dict = field(default_factory=dict)

    def branch(self, side: str) -> Branch:
        if side == OUTER:
            return self.outer
        if side == INNER:
            return self.inner
        raise ConfigurationError(f"side must be 'outer' or 'inner', got {side!r}")


def boundary_slope(n: int, k: int) -> float:
    """|w'| at the boundary: the half-space model c*d solves sigma_k = 1."""
    return sqrt(2.0) * comb(n, k) ** (-0.5 / k)


def boundary_series(problem: AnnulusProblem, side: str) -> tuple[float, float]:
    """Coefficients (c, c2) of w = c d + c2 d^2 + O(d^3), d the distance to the boundary.

    Substituting into the radial equation, mu_r = c^2/2 + O(d^2) while
    mu_t = c^2/2 + (c^2/R_b + 2 c c2) d + ... at the outer boundary. The
    linearised sigma_k has a nonzero coefficient in mu_t, so the O(d) term
    must vanish: c2 = -c/(2b). At the inner boundary the curvature term
    flips sign and c2 = c/(2a). Both equal c H / (2(n-1)), with H the
    boundary mean curvature for the normal pointing into the annulus.
    """
    c = boundary_slope(problem.n, problem.k)
    if side == OUTER:
        return c, -c / (2.0 * problem.b)
    if side == INNER:
        return c, c / (2.0 * problem.a)
    raise ConfigurationError(f"side must be 'outer' or 'inner', got {side!r}")


def radial_eigenvalues(w: float, wp: float, r: float):
    """Return ``(mu_t, mu_r_of)``; ``mu_r_of`` maps w'' to mu_r."""
    if r <= 0 or w <= 0:
        raise DomainError(f"need r > 0 and w > 0, got r={r}, w={w}")
    mu_t = -w * wp / r + 0.5 * wp * wp
    half_wp2 = 0.5 * wp * wp

    def mu_r_of(wpp: float) -> float:
        return -w * wpp + half_wp2

    return mu_t, mu_r_of


def radial_lambda(mu_r: float, mu_t: float, n: int) -> np.ndarray:
    return np.array([mu_r] + [mu_t] * (n - 1))


def radial_jet(w: float, wp: float, wpp: float, x) -> ConformalJet:
    """Full n-dimensional jet of a radial function at the point x."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r <= 0:
        raise DomainError("radial jet undefined at the origin")
    e = x / r
    P = np.outer(e, e)
    hess = wpp * P + (wp / r) * (np.eye(x.size) - P)
    return ConformalJet(w, wp * e, hess)


def _mu_r_required(mu_t: float, n: int, k: int) -> float:
    A = comb(n - 1, k - 1)
    B = comb(n - 1, k)
    return (mu_t ** (1 - k) - B * mu_t) / A


def ode_rhs(w: float, wp: float, r: float, problem: AnnulusProblem, cone_floor: float = 1e-8) -> float:
    """w'' such that sigma_k(lambda(-A_w)) = 1 for the radial profile."""
    n, k = problem.n, problem.k
    mu_t, _ = radial_eigenvalues(w, wp, r)
    if k >= 2 and mu_t <= cone_floor:
        raise DegeneracyError(f"mu_t={mu_t:.3e} at or below cone floor {cone_floor:.1e} (r={r})")
    mu_r = _mu_r_required(mu_t, n, k)
    return (0.5 * wp * wp - mu_r) / w


def first_integral(w: float, wp: float, r: float, n: int, k: int) -> float:
    """K with mu_t^k - 1/C(n,k) = K (w/r)^n."""
    mu_t, _ = radial_eigenvalues(w, wp, r)
    return (mu_t**k - 1.0 / comb(n, k)) / (w / r) ** n


# --- regularised integration -------------------------------------------------


def _tau_field(n: int, k: int, direction: float):
    A = comb(n - 1, k - 1)
    B = comb(n - 1, k)

    def rhs(_tau, state):
        s, w, y = state
        r = 1.0 + s
        mu_t = -w * y / r + 0.5 * y * y
        m = mu_t ** (k - 1) if k > 1 else 1.0
        # m * w''; finite at the junction where mu_t = 0
        F = (0.5 * y * y * m - (1.0 - B * mu_t**k) / A) / w
        return [direction * m, direction * m * y, direction * F]

    return rhs


def _integrate_branch(v: float, problem: AnnulusProblem, opts: SolverOptions, side: str, dense=False):
    """Branch from the normalised junction (r=1, w=v) to the boundary.

    Returns the ODE solution and the extrapolated boundary radius.
    """
    n, k = problem.n, problem.k
    c = boundary_slope(n, k)
    if k == 1:
        # smooth case: start on the inversion sphere, where w' = w/r
        y0 = v
    else:
        y0 = 0.0 if side == OUTER else 2.0 * v
    direction = 1.0 if side == OUTER else -1.0
    width = (problem.b - problem.a) / problem.r_sym
    w_stop = c * opts.eps0 * width

    def hit_boundary(_tau, state):
        return state[1] - w_stop

    hit_boundary.terminal = True
    hit_boundary.direction = -1

    sol = solve_ivp(
        _tau_field(n, k, direction),
        (0.0, 1e4),
        [0.0, v, y0],
        method="DOP853",
        rtol=opts.rtol,
        atol=opts.atol,
        events=hit_boundary,
        dense_output=dense,
    )
    if sol.status != 1 or not sol.t_events[0].size:
        raise ConvergenceError(f"{side} branch did not reach the boundary (v={v:.6g}): {sol.message}")
    s_e, w_e, _ = sol.y_events[0][0]
    r_e = 1.0 + s_e
    # close the remaining gap with w = c d + c2 d^2, c2 = +-c/(2 R)
    c2 = -c / (2.0 * r_e) if side == OUTER else c / (2.0 * r_e)
    d = 2.0 * w_e / (c + sqrt(c * c + 4.0 * c2 * w_e))
    r_boundary = r_e + d if side == OUTER else r_e - d
    return sol, r_boundary


def _shoot(problem: AnnulusProblem, opts: SolverOptions) -> tuple[float, int]:
    target = log(problem.b / problem.a)
    calls = 0

    def mismatch(v):
        nonlocal calls
        calls += 1
        _, rb = _integrate_branch(v, problem, opts, OUTER)
        _, ra = _integrate_branch(v, problem, opts, INNER)
        if ra <= 0:
            return np.inf
        return log(rb / ra) - target

    lo, hi = 0.5, 0.5
    f_lo = f_hi = mismatch(0.5)
    for _ in range(80):
        if f_lo < 0:
            break
        lo /= 2.0
        f_lo = mismatch(lo)
    for _ in range(80):
        if f_hi > 0:
            break
        hi *= 2.0
        f_hi = mismatch(hi)
    if not (f_lo < 0 < f_hi):
        raise ConvergenceError("could not bracket the junction value w0/r_*")
    v = brentq(mismatch, lo, hi, xtol=opts.shoot_xtol * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    log_.debug("shooting converged: w0/r_* = %.16g after %d branch pairs", v, calls)
    return v, calls


def _branch_grid(sol, r_boundary, v, L, problem, opts, side) -> Branch:
    n, k = problem.n, problem.k
    A = comb(n - 1, k - 1)
    tau_end = sol.t_events[0][0]
    s_lo, s_hi = opts.junction_grid
    decades = np.log10(s_hi / s_lo)
    s_target = np.geomspace(s_lo, s_hi, int(round(decades * opts.points_per_decade)) + 1)
    # leading order near the junction: |s| = tau^k / (k A^(k-1))
    tau_target = (k * A ** (k - 1) * s_target) ** (1.0 / k) if k > 1 else s_target
    tau_steps = sol.t[(sol.t > 0) & (sol.t <= tau_end)]
    s_steps = np.abs(sol.sol(tau_steps)[0])
    taus = np.union1d(tau_target[tau_target < 0.5 * tau_end], tau_steps[s_steps >= s_lo])
    taus = np.append(taus[taus < tau_end], tau_end)
    s, W, Y = sol.sol(taus)

    r = L * (1.0 + s)
    w = L * W
    wp = Y.copy()
    wpp = np.empty_like(r)
    mu_r = np.empty_like(r)
    mu_t = np.empty_like(r)
    res = np.empty_like(r)
    for i in range(r.size):
        wpp[i] = ode_rhs(w[i], wp[i], r[i], problem, opts.cone_floor)
        mt, mr_of = radial_eigenvalues(w[i], wp[i], r[i])
        mu_t[i] = mt
        mu_r[i] = mr_of(wpp[i])
        res[i] = sigma_of_multiset(mu_r[i], mu_t[i], n, k) - 1.0

    # boundary endpoint from the two-term series
    c, c2 = boundary_series(problem, side)
    rb = L * r_boundary
    wp_b = -c if side == OUTER else c
    half = 0.5 * c * c
    bnd = (rb, 0.0, wp_b, 2.0 * c2, half, half, sigma_of_multiset(half, half, n, k) - 1.0)

    cols = [r, w, wp, wpp, mu_r, mu_t, res]
    cols = [np.append(col, x) for col, x in zip(cols, bnd)]
    order = np.argsort(cols[0])
    return Branch(side, *[col[order] for col in cols])


def _extrapolate_derivative(branch: Branch, r_star: float, k: int, m: int = 12) -> float:
    """w'(r_*) from a fit w' = alpha + q1 t + q2 t^2, t = |r - r_*|^(1/k), on the m nearest points."""
    dist = np.abs(branch.r - r_star)
    idx = np.argsort(dist)[:m]
    t = dist[idx] ** (1.0 / k)
    X = np.column_stack([np.ones(m), t, t * t])
    coef, *_ = np.linalg.lstsq(X, branch.wp[idx], rcond=None)
    return float(coef[0])


def solve_annulus(problem: AnnulusProblem, opts: SolverOptions | None = None) -> RadialSolution:
    """Solve sigma_k(lambda(-A_w)) = 1 on {a<|x|<b} with w = 0 on the boundary."""
    opts = opts or SolverOptions()
    n, k = problem.n, problem.k
    v, calls = _shoot(problem, opts)
    sol_out, rb = _integrate_branch(v, problem, opts, OUTER, dense=True)
    sol_in, ra = _integrate_branch(v, problem, opts, INNER, dense=True)
    L = problem.b / rb
    outer = _branch_grid(sol_out, rb, v, L, problem, opts, OUTER)
    inner = _branch_grid(sol_in, ra, v, L, problem, opts, INNER)

    r_star = L
    w0 = L * v
    junction = None
    if k >= 2:
        junction = Junction(
            r_star=r_star,
            w0=w0,
            dnu_w_plus=_extrapolate_derivative(outer, r_star, k),
            dnu_w_minus=_extrapolate_derivative(inner, r_star, k),
        )

    K = first_integral(w0, 0.0 if k >= 2 else v, r_star, n, k)
    C = comb(n, k)
    drift = 0.0
    for br in (outer, inner):
        msk = br.interior_mask()
        inv = C * br.mu_t[msk] ** k - C * K * (br.w[msk] / br.r[msk]) ** n
        drift = max(drift, float(np.max(np.abs(inv - 1.0))))

    stats = {
        "shooting_calls": calls,
        "w0_over_r_star": v,
        "first_integral_K": K,
        "first_integral_drift": drift,
        "max_abs_residual": max(float(np.max(np.abs(br.residual))) for br in (outer, inner)),
        "min_mu_t_interior": min(float(np.min(br.mu_t[br.interior_mask()])) for br in (outer, inner)),
        "r_center": r_star,
        "w_center": w0,
        "n_points_outer": len(outer),
        "n_points_inner": len(inner),
    }
    sol = RadialSolution(problem, opts, outer, inner, junction, stats)
    failures = check_invariants(sol)
    if failures:
        raise ConvergenceError("; ".join(failures))
    return sol


def check_invariants(sol: RadialSolution) -> list[str]:
    """Return human-readable descriptions of violated solution invariants."""
    p, opts = sol.problem, sol.options
    failures = []
    for br in (sol.outer, sol.inner):
        msk = br.interior_mask()
        worst = float(np.max(np.abs(br.residual[msk])))
        if worst > opts.ode_tol:
            failures.append(f"{br.side}: residual {worst:.3e} exceeds ode_tol {opts.ode_tol:.1e}")
        if np.any(br.w[msk] <= 0):
            failures.append(f"{br.side}: non-positive w inside the annulus")
        for i in np.flatnonzero(msk):
            lam = radial_lambda(br.mu_r[i], br.mu_t[i], p.n)
            if not classify_cone(lam, p.k).interior:
                failures.append(f"{br.side}: lambda(-A_w) leaves Gamma_{p.k} at r={br.r[i]:.17g}")
                break
    if sol.junction is not None:
        j = sol.junction
        if not j.dnu_w_plus < j.dnu_w_minus:
            failures.append("normal derivatives not ordered: dnu_w_plus >= dnu_w_minus")
    return failures


# --- inversion symmetry ------------------------------------------------------


def invert_branch(branch: Branch, problem: AnnulusProblem) -> Branch:
    """Transport a branch by w~(r) = (r^2/ab) w(ab/r)."""
    ab = problem.a * problem.b
    rho = branch.r
    rt = ab / rho
    w = (rt * rt / ab) * branch.w
    wp = (2.0 * rt / ab) * branch.w - branch.wp
    wpp = (2.0 / ab) * branch.w - (2.0 / rt) * branch.wp + (ab / (rt * rt)) * branch.wpp
    mu_t = -w * wp / rt + 0.5 * wp * wp
    mu_r = -w * wpp + 0.5 * wp * wp
    res = np.array([sigma_of_multiset(x, y, problem.n, problem.k) - 1.0 for x, y in zip(mu_r, mu_t)])
    side = INNER if branch.side == OUTER else OUTER
    order = np.argsort(rt)
    cols = [rt, w, wp, wpp, mu_r, mu_t, res]
    return Branch(side, *[c[order] for c in cols])


def inversion_symmetry_check(sol: RadialSolution) -> dict:
    """Compare the inversion of the outer branch with the computed inner branch."""
    p = sol.problem
    moved = invert_branch(sol.outer, p)
    msk = moved.w > 0
    inner = sol.inner
    spline = BPoly.from_derivatives(inner.r, np.column_stack([inner.w, inner.wp, inner.wpp]))
    lo, hi = inner.r[0], inner.r[-1]
    sel = msk & (moved.r >= lo) & (moved.r <= hi)
    mismatch = float(np.max(np.abs(spline(moved.r[sel]) - moved.w[sel])))
    out = {
        "transported_max_residual": float(np.max(np.abs(moved.residual[msk]))),
        "transported_w_at_a": float(np.interp(p.a, moved.r, moved.w)),
        "transported_r_min": float(moved.r[0]),
        "max_mismatch_vs_inner": mismatch,
    }
    if sol.junction is not None:
        j = sol.junction
        predicted = 2.0 * j.w0 / p.r_sym - j.dnu_w_plus
        out["jump_identity_rel_error"] = abs(j.dnu_w_minus - predicted) / abs(predicted)
    return out


def boundary_ratio(sol: RadialSolution, side: str, depth: float = 1e-4) -> float:
    """w/d at the interior grid point closest to distance ``depth*(b-a)`` from the boundary."""
    p = sol.problem
    br = sol.branch(side)
    d = (p.b - br.r) if side == OUTER else (br.r - p.a)
    msk = br.interior_mask()
    i = np.flatnonzero(msk)[np.argmin(np.abs(d[msk] - depth * (p.b - p.a)))]
    return float(br.w[i] / d[i])


# --- Holder exponent ---------------------------------------------------------


@dataclass(frozen=True)
class HolderFit:
    gamma: float
    r2: float
    stderr: float
    n_points: int
    window: tuple
    log_dist: np.ndarray = field(repr=False)
    log_jump: np.ndarray = field(repr=False)

    def confidence_interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.gamma - z * self.stderr, self.gamma + z * self.stderr


def fit_holder_exponent(sol: RadialSolution, side: str, min_points: int = 20) -> HolderFit:
    """Least-squares slope of log|w'(r) - w'(r_*)| against log|r - r_*|.

    Window: distances in [10 h, 1000 h], h the finest grid step on ``side``.
    """
    if sol.junction is None:
        raise ConfigurationError("solution has no junction (k=1 is smooth); nothing to fit")
    br = sol.branch(side)
    j = sol.junction
    ref = j.dnu_w_plus if side == OUTER else j.dnu_w_minus
    msk = br.interior_mask()
    r = br.r[msk]
    wp = br.wp[msk]
    dist = np.abs(r - j.r_star)
    steps = np.diff(np.sort(np.append(r, j.r_star)))
    steps = steps[steps > 0]
    if steps.size == 0:
        raise DiagnosticsError("empty branch")
    h = float(steps.min())
    lo, hi = 10.0 * h, 1e3 * h
    sel = (dist >= lo) & (dist <= hi)
    jump = np.abs(wp[sel] - ref)
    sel_idx = np.flatnonzero(sel)[jump > 0]
    if sel_idx.size < min_points:
        raise DiagnosticsError(f"fitting window [{lo:.3e}, {hi:.3e}] holds {sel_idx.size} < {min_points} points")
    x = np.log(dist[sel_idx])
    y = np.log(np.abs(wp[sel_idx] - ref))
    X = np.column_stack([x, np.ones_like(x)])
    coef, ss_res, *_ = np.linalg.lstsq(X, y, rcond=None)
    ss_res = float(ss_res[0]) if ss_res.size else float(np.sum((X @ coef - y) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    m = x.size
    stderr = sqrt(ss_res / (m - 2) / float(np.sum((x - x.mean()) ** 2))) if m > 2 else float("nan")
    return HolderFit(
        gamma=float(coef[0]),
        r2=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        stderr=stderr,
        n_points=m,
        window=(lo, hi),
        log_dist=x,
        log_jump=y,
    )
