"""Closed-form stream solutions for solver convergence checks.

IPM:    ``psi = sin(x1) sin(pi x2)``,    ``theta = -(1 + pi^2) cos(x1) sin(pi x2)``
Stokes: ``psi = sin(x1) sin(pi x2)^2``,  ``theta = -cos(x1) q(x2)`` with
``q = sin^2(pi x2) - 4 pi^2 cos(2 pi x2) - 8 pi^4 cos(2 pi x2)``, the
``x2`` factor of ``Lap^2 psi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .velocity import IPM, STOKES, solve_stream, velocity_residuals

# required observed order per vertical accuracy
ORDER_FLOOR = {2: 1.9, 4: 3.7}


def case(grid, model):
    """``(theta, psi_exact)`` on ``grid``."""
    X1, X2 = grid.mesh
    if model == IPM:
        psi = np.sin(X1) * np.sin(np.pi * X2)
        theta = -(1.0 + np.pi**2) * np.cos(X1) * np.sin(np.pi * X2)
    elif model == STOKES:
        s = np.sin(np.pi * X2) ** 2
        c = np.cos(2.0 * np.pi * X2)
        q = s - 4.0 * np.pi**2 * c - 8.0 * np.pi**4 * c
        psi = np.sin(X1) * s
        theta = -np.cos(X1) * q
    else:
        raise ValueError(f"unknown model {model!r}")
    return theta, psi


@dataclass(frozen=True)
class ConvergenceRow:
    n2: int
    error: float
    pde_residual: float
    order: float


def convergence_table(model, fd_order=4, levels=3, n1=16, n2_start=65):
    """Max-norm error of the solver against the exact stream function under doubling."""
    rows = []
    prev = None
    for i in range(levels):
        n2 = (n2_start - 1) * 2**i + 1
        grid = Grid(n1, n2, fd_order)
        theta, exact = case(grid, model)
        sol = solve_stream(grid, theta, model)
        err = float(np.max(np.abs(sol.psi - exact)))
        res = velocity_residuals(grid, sol, theta)["pde_residual"]
        order = float("nan") if prev is None else float(np.log2(prev / err))
        rows.append(ConvergenceRow(n2, err, res, order))
        prev = err
    return rows


def observed_order(rows):
    """Smallest pairwise order in a table (``nan`` for a single level)."""
    orders = [r.order for r in rows[1:]]
    return min(orders) if orders else float("nan")
