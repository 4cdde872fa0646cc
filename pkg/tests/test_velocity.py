import numpy as np
import pytest
import sympy as sp

from stratflow.grid import Grid
from stratflow.manufactured import case, convergence_table, observed_order
from stratflow.velocity import (IPM, STOKES, StreamSolver, get_solver, solve_ipm_stream,
                                solve_stokes_stream, velocity_residuals)


@pytest.fixture(scope="module")
def grid():
    return Grid(32, 65, 4)


def test_stokes_source_matches_symbolic_expansion():
    x1, x2 = sp.symbols("x1 x2")
    psi = sp.sin(x1) * sp.sin(sp.pi * x2) ** 2
    lap = lambda f: sp.diff(f, x1, 2) + sp.diff(f, x2, 2)
    q = sp.simplify(lap(lap(psi)) / sp.sin(x1))
    qf = sp.lambdify(x2, q, "numpy")
    g = Grid(8, 33)
    theta, _ = case(g, STOKES)
    X1, X2 = g.mesh
    assert np.allclose(theta, -np.cos(X1) * qf(X2), rtol=1e-12, atol=1e-9)


def test_ipm_manufactured_symbolic():
    x1, x2 = sp.symbols("x1 x2")
    psi = sp.sin(x1) * sp.sin(sp.pi * x2)
    theta = -(1 + sp.pi**2) * sp.cos(x1) * sp.sin(sp.pi * x2)
    assert sp.simplify(-(sp.diff(psi, x1, 2) + sp.diff(psi, x2, 2)) - sp.diff(theta, x1)) == 0


@pytest.mark.parametrize("model", [IPM, STOKES])
def test_zero_and_stratified_give_rest(grid, model):
    for theta in (np.zeros(grid.shape), grid.lift(np.sin(3 * grid.x2))):
        sol = get_solver(grid, model).solve(theta)
        assert not np.any(sol.psi) and not np.any(sol.u1) and not np.any(sol.u2)


@pytest.mark.parametrize("model", [IPM, STOKES])
def test_manufactured_accuracy(grid, model):
    theta, exact = case(grid, model)
    sol = get_solver(grid, model).solve(theta)
    assert np.max(np.abs(sol.psi - exact)) < 1e-5


@pytest.mark.parametrize("model,order", [(IPM, 2), (IPM, 4), (STOKES, 2), (STOKES, 4)])
def test_convergence_orders(model, order):
    rows = convergence_table(model, order, levels=3, n1=8)
    assert observed_order(rows) >= {2: 1.9, 4: 3.7}[order]


def test_ipm_residual_order():
    for order in (2, 4):
        rows = convergence_table(IPM, order, levels=3, n1=8)
        res = [r.pde_residual for r in rows]
        assert min(np.log2(res[0] / res[1]), np.log2(res[1] / res[2])) >= order - 0.1


@pytest.mark.parametrize("model", [IPM, STOKES])
def test_structural_invariants(grid, model):
    rng = np.random.default_rng(7)
    X1, X2 = grid.mesh
    t1 = np.sin(X1) * np.sin(np.pi * X2) ** 2 + 0.3 * np.cos(3 * X1) * X2 * (1 - X2)
    t2 = rng.normal(size=grid.shape)
    s = get_solver(grid, model)
    a, b = s.solve(t1), s.solve(t2)
    ab = s.solve(2.0 * t1 - 3.0 * t2)
    assert np.max(np.abs(ab.psi - (2 * a.psi - 3 * b.psi))) <= 1e-10 * np.max(np.abs(ab.psi))
    assert np.all(np.isreal(a.psi))
    # zero horizontal mean up to transform roundoff
    assert np.max(np.abs(grid.to_modal(a.psi)[0])) <= 1e-14 * np.max(np.abs(a.psi))
    assert not np.any(a.psi[:, [0, -1]]) and not np.any(a.u2[:, [0, -1]])
    res = velocity_residuals(grid, a, t1)
    assert res["bc_residual"] == 0.0


def test_div_residual_small():
    g = Grid(16, 257, 4)
    for model in (IPM, STOKES):
        theta, _ = case(g, model)
        sol = get_solver(g, model).solve(theta)
        unorm = np.sqrt(g.integrate(sol.u1**2 + sol.u2**2))
        assert velocity_residuals(g, sol, theta)["div_residual"] <= 1e-8 * unorm


def test_stokes_clamp_converges():
    res = []
    for n2 in (33, 65, 129):
        g = Grid(16, n2)
        theta, _ = case(g, STOKES)
        res.append(velocity_residuals(g, get_solver(g, STOKES).solve(theta), theta)["clamp_residual"])
    assert res[-1] < 1e-6
    assert min(np.log2(res[0] / res[1]), np.log2(res[1] / res[2])) >= 4.0


@pytest.mark.parametrize("model", [IPM, STOKES])
def test_energy_pairing(model):
    errs = []
    for n2 in (33, 65):
        g = Grid(16, n2, 4)
        X1, X2 = g.mesh
        theta = np.sin(X1) * np.sin(np.pi * X2) ** 2 + 0.5 * np.cos(2 * X1) * np.sin(2 * np.pi * X2)
        sol = get_solver(g, model).solve(theta)
        if model == IPM:
            k = g.integrate(sol.u1**2 + sol.u2**2)
        else:
            lap = g.laplacian(sol.psi)
            k = g.integrate(lap * lap)
        errs.append(abs(g.integrate(sol.u2 * theta) + k) / k)
    assert errs[1] <= 10 * g.dx2**2


def test_threads_identical(grid):
    theta = np.random.default_rng(2).normal(size=grid.shape)
    for model in (IPM, STOKES):
        s = get_solver(grid, model)
        a = s.solve(theta, threads=1)
        b = s.solve(theta, threads=3)
        assert np.array_equal(a.psi, b.psi)


def test_wrappers_report_residual(grid):
    theta, _ = case(grid, IPM)
    assert np.isfinite(solve_ipm_stream(grid, theta).residual_norm)
    theta, _ = case(grid, STOKES)
    assert np.isfinite(solve_stokes_stream(grid, theta).residual_norm)
    with pytest.raises(ValueError):
        StreamSolver(grid, "darcy")
