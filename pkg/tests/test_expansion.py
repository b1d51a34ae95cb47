import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from syl.errors import DiagnosticsError, DomainError, InvariantError, NoRealSolutionError, NumericalPrecisionWarning
from syl.expansion import (
    ExpansionInput,
    Hyperplane,
    QuadraticGraph,
    Sphere,
    annulus_expansion_input,
    build_wbar,
    coefficient_terms,
    expansion_coefficient,
    exponent_necessity_scan,
    finite_difference_jet,
    fit_branch_coefficient,
    limit_table,
    mixed_derivative,
    surface_from_dict,
    verify_limit,
)
from syl.singular_set import SurfacePointData


def sphere_input(n, w0, R, normal="outward"):
    """Constant fields on a sphere; w1 from the balance relation (0 outward, -2 w0/R inward)."""
    m = n - 1
    s = 1 if normal == "outward" else -1
    point = SurfacePointData.orthonormal(n, w0, np.zeros(m), np.zeros((m, m)), -s * np.eye(m) / R)
    w1 = 0.0 if normal == "outward" else -2 * w0 / R
    return ExpansionInput(point, w1, np.zeros(m), Sphere(R, normal))


def graph_input(rng, n):
    """Random quadratic graph with non-constant fields satisfying the balance relation."""
    m = n - 1
    sym = lambda s: (lambda a: s * (a + a.T) / 2)(rng.normal(size=(m, m)))
    Q = sym(0.4)
    w0 = rng.uniform(0.5, 1.5)
    g = 0.3 * rng.normal(size=m)
    H = np.trace(Q)
    w1 = -(abs(w0 * H) + 0.5) / (n - 1)
    target = (w0 * w1 * H + 0.5 * (n - 1) * (g @ g + w1 * w1)) / w0
    hess = sym(0.3)
    hess = hess + (target - np.trace(hess)) / m * np.eye(m)
    point = SurfacePointData.orthonormal(n, w0, g, hess, Q)
    return ExpansionInput(point, w1, 0.3 * rng.normal(size=m), QuadraticGraph(Q))


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_sphere_closed_form(n):
    w0, R = 1.3, 2.0
    res = expansion_coefficient(sphere_input(n, w0, R))
    assert res.p == 1.5
    assert res.w_star == pytest.approx(-(2 / (3 * w0)) * np.sqrt(2 * R / (n - 1)), rel=1e-14)
    assert res.denom == pytest.approx(9 / 8 * w0 * w0 * (n - 1) / R)
    inner = expansion_coefficient(sphere_input(n, w0, R, "inward"))
    assert inner.w_star == pytest.approx(res.w_star, rel=1e-14)


@given(st.integers(3, 8), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_scaling(n, w0, R, s):
    # (w0, w1, lengths) -> (s w0, w1, s lengths) divides w_*^2 by s
    a = expansion_coefficient(sphere_input(n, w0, R)).w_star
    b = expansion_coefficient(sphere_input(n, s * w0, s * R)).w_star
    assert b * b == pytest.approx(a * a / s, rel=1e-12)


def test_flat_case_has_no_real_coefficient():
    m = 3
    point = SurfacePointData.orthonormal(4, 1.0, np.zeros(m), np.zeros((m, m)), np.zeros((m, m)))
    inp = ExpansionInput(point, 0.0, np.zeros(m), Hyperplane())
    with pytest.raises(NoRealSolutionError) as exc:
        expansion_coefficient(inp)
    assert exc.value.exit_code == 4


def test_balance_violation_is_named():
    m = 3
    point = SurfacePointData.orthonormal(4, 1.0, np.zeros(m), np.zeros((m, m)), -np.eye(m) / 2)
    with pytest.raises(InvariantError) as exc:
        ExpansionInput(point, 0.1, np.zeros(m), Sphere(2.0))
    assert exc.value.invariant == "normal-balance"
    assert exc.value.exit_code == 2


def test_input_validation():
    m = 2
    point = SurfacePointData.orthonormal(3, 1.0, np.zeros(m), np.zeros((m, m)), -np.eye(m) / 2)
    with pytest.raises(InvariantError):
        ExpansionInput(point, 0.0, np.zeros(m), Sphere(3.0))
    with pytest.raises(DomainError):
        ExpansionInput(point, 0.0, np.zeros(3), Sphere(2.0))
    other = SurfacePointData(3, 1.0, np.zeros(m), np.zeros((m, m)), -np.eye(m), 2 * np.eye(m), -1.0)
    with pytest.raises(DomainError):
        ExpansionInput(other, 0.0, np.zeros(m), Sphere(1.0))
    with pytest.raises(DomainError):
        surface_from_dict({"kind": "torus"})
    with pytest.raises(DomainError):
        surface_from_dict({"kind": "sphere"})
    with pytest.raises(DomainError):
        Sphere(2.0, "sideways")
    with pytest.raises(DomainError):
        expansion_coefficient(sphere_input(3, 1.0, 2.0), p=2.0)


def test_dict_round_trip(rng):
    inp = graph_input(rng, 4)
    again = ExpansionInput.from_dict(inp.to_dict())
    assert coefficient_terms(again) == coefficient_terms(inp)
    s = sphere_input(3, 1.0, 2.0, "inward")
    assert ExpansionInput.from_dict(s.to_dict()).surface == s.surface


def test_build_wbar():
    inp = sphere_input(4, 1.3, 2.0)
    res = expansion_coefficient(inp)
    assert build_wbar(inp, res, [0, 0, 0, 0]) == pytest.approx(1.3, abs=1e-15)
    d = 0.01
    assert build_wbar(inp, res, [0, 0, 0, d]) == pytest.approx(1.3 + res.w_star * d**1.5, rel=1e-14)
    # a point of the sphere off the base point: d = 0, constant fields
    R = 2.0
    x = [R * np.sin(0.3), 0, 0, -R + R * np.cos(0.3)]
    assert build_wbar(inp, res, x) == pytest.approx(1.3, rel=1e-14)
    with pytest.raises(DomainError):
        build_wbar(inp, res, [0, 0, 0, -0.1])
    with pytest.raises(DomainError):
        build_wbar(inp, res, [0, 0, 0, 1.5])
    with pytest.raises(DomainError):
        build_wbar(inp, res, [0, 0, 0.1])


def test_normal_derivative_of_ansatz():
    inp = sphere_input(4, 1.3, 2.0, "inward")
    res = expansion_coefficient(inp)
    for d in (1e-2, 1e-3, 1e-4):
        jet = finite_difference_jet(inp, res.w_star, res.p, d)
        expected = inp.w1 + 1.5 * res.w_star * d**0.5
        assert jet.grad[-1] == pytest.approx(expected, abs=1e-4 * abs(res.w_star) * d**0.5)
        assert jet.hess[-1, -1] == pytest.approx(0.75 * res.w_star * d**-0.5, rel=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_graph_projection(x_off, seed):
    rng = np.random.default_rng(seed)
    Q = (lambda a: 0.5 * (a + a.T))(rng.normal(size=(2, 2)))
    surf = QuadraticGraph(Q)
    with mp.workdps(40):
        x = [mp.mpf(v) for v in x_off]
        y, d = surf.project(x)
        foot = y + [(mp.matrix(y).T * mp.matrix(Q.tolist()) * mp.matrix(y))[0] / 2]
        diff = [a - b for a, b in zip(x, foot)]
        # x - foot is parallel to the normal (-Q y, 1) and has length |d|
        Qy = mp.matrix(Q.tolist()) * mp.matrix(y)
        for i in range(2):
            assert abs(diff[i] + Qy[i] * diff[2]) < mp.mpf(10) ** -30
        assert abs(mp.sqrt(mp.fsum(c * c for c in diff)) - abs(d)) < mp.mpf(10) ** -30
        assert (d >= 0) == (diff[2] >= 0)


def test_sphere_projection_distance():
    with mp.workdps(40):
        x = [mp.mpf("0.01"), mp.mpf("-0.02"), mp.mpf("0.003")]
        y, d = Sphere(2.0, "outward").project(x)
        r = mp.sqrt(x[0] ** 2 + x[1] ** 2 + (x[2] + 2) ** 2)
        assert abs(d - (r - 2)) < mp.mpf(10) ** -35
        y, d = Sphere(2.0, "inward").project(x)
        r = mp.sqrt(x[0] ** 2 + x[1] ** 2 + (x[2] - 2) ** 2)
        assert abs(d - (2 - r)) < mp.mpf(10) ** -35


@pytest.mark.parametrize("normal", ["outward", "inward"])
def test_limit_on_sphere(normal):
    inp = sphere_input(4, 1.3, 2.0, normal)
    res = verify_limit(inp, expansion_coefficient(inp))
    assert res.limit_residual < 3e-3
    assert res.cone_ok_near
    assert res.slope == pytest.approx(0.5, abs=0.05)
    assert all(r.sigma1 > 0 for r in res.rows)
    assert [r.d for r in res.rows] == sorted((r.d for r in res.rows), reverse=True)


@pytest.mark.parametrize("n", [3, 4])
def test_limit_on_random_graph(rng, n):
    # non-zero trace-free X, grad w1 and II grad w0 all enter the coefficient
    inp = graph_input(rng, n)
    assert np.abs(mixed_derivative(inp) - inp.grad_w1).max() > 1e-3
    res = verify_limit(inp, expansion_coefficient(inp), d_grid=np.logspace(-3, -7, 5))
    assert res.limit_residual < 1e-2
    assert res.cone_ok_near
    assert res.slope == pytest.approx(0.5, abs=0.05)


def test_zero_coefficient_plateau(rng):
    inp = graph_input(rng, 3)
    num, _ = coefficient_terms(inp)
    rows = limit_table(inp, 0.0, 1.5, [1e-5, 1e-6])
    assert rows[-1].residual == pytest.approx(num, rel=1e-4)
    assert num > 1


def test_coefficient_is_the_residual_minimiser():
    # independent 1-d search: the w_* making sigma_2 = 1 at small d
    inp = sphere_input(4, 1.3, 2.0)
    closed = expansion_coefficient(inp).w_star
    f = lambda ws: limit_table(inp, ws, 1.5, [1e-6])[0].sigma2 - 1.0
    found = brentq(f, 2 * closed, 0.5 * closed, xtol=1e-10)
    assert found == pytest.approx(closed, rel=1e-2)


def test_exponent_scan():
    inp = sphere_input(4, 1.3, 2.0)
    rows = {r.p: r for r in exponent_necessity_scan(inp, [1.25, 1.5, 1.75])}
    assert rows[1.25].slope == pytest.approx(-0.5, abs=0.1)
    assert rows[1.25].limit_residual > 1.0
    assert rows[1.5].limit_residual < 1e-3
    assert rows[1.75].limit_residual >= 0.5
    assert abs(rows[1.75].slope) < 0.1


def test_precision_warning():
    inp = sphere_input(3, 1.0, 2.0)
    res = expansion_coefficient(inp)
    with pytest.warns(NumericalPrecisionWarning):
        verify_limit(inp, res, d_grid=[1e-4, 1e-6, 1e-8], dps=20)


def test_grid_validation():
    inp = sphere_input(3, 1.0, 2.0)
    res = expansion_coefficient(inp)
    for grid in ([1e-3, 1e-4], [1e-3, -1e-4, 1e-5], [1.5, 1e-3, 1e-4]):
        with pytest.raises(DomainError):
            verify_limit(inp, res, d_grid=grid)


@pytest.mark.parametrize("side", ["outer", "inner"])
def test_annulus_branch_fit(solve, side):
    sol = solve(4, 2)
    inp = annulus_expansion_input(sol, side)
    closed = expansion_coefficient(inp).w_star
    fit = fit_branch_coefficient(sol, side)
    assert fit.w_star == pytest.approx(closed, rel=1e-3)
    assert fit.n_points >= 8


def test_annulus_input_errors(solve):
    with pytest.raises(DomainError):
        annulus_expansion_input(solve(4, 2), "middle")
    with pytest.raises(DomainError):
        fit_branch_coefficient(solve(3, 1))
    with pytest.raises(DiagnosticsError):
        fit_branch_coefficient(solve(4, 2), window=(1e-3, 1.0001e-3))
