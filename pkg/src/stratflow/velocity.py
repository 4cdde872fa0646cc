"""Stream function and velocity from the density perturbation.

Both models reduce, mode by mode in ``x1``, to a two-point boundary value
problem in ``x2``:

* IPM:    ``(d2^2 - k^2) psi_k = -i k theta_k``,  ``psi_k = 0`` at the walls
* Stokes: ``(d2^2 - k^2)^2 psi_k = i k theta_k``, ``psi_k = d2 psi_k = 0`` at the walls

The ``k = 0`` mode of ``psi`` is identically zero. Velocity is
``u = (-d2 psi, d1 psi)``.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import fd_matrix

IPM = "ipm"
STOKES = "stokes"
MODELS = (IPM, STOKES)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class StreamSolution:
    psi: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    model: str
    psi_hat: np.ndarray
    residual_norm: float = float("nan")


def _to_banded(A):
    n = A.shape[0]
    rows, cols = np.nonzero(A)
    lower = int(np.max(rows - cols, initial=0))
    upper = int(np.max(cols - rows, initial=0))
    ab = np.zeros((lower + upper + 1, n))
    for i, j in zip(rows, cols):
        ab[upper + i - j, j] = A[i, j]
    return (lower, upper), ab


class StreamSolver:
    """Per-mode solution operators for one grid and model.

    Each operator is assembled as a banded matrix with its boundary rows,
    factored once, and cached as the dense map from the interior right-hand
    side to the full column of ``psi_k``.
    """

    def __init__(self, grid, model):
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}")
        self.grid = grid
        self.model = model
        n = grid.n2
        if model == IPM:
            self.rows = np.arange(1, n - 1)
        else:
            self.rows = np.arange(2, n - 2)
        # Nyquist mode excluded: its odd derivatives vanish on the grid
        self.modes = np.arange(1, grid.n1 // 2)
        ops = [self._operator(k) for k in self.modes]
        self.G = np.ascontiguousarray(np.stack(ops))
        k = self.modes.astype(float)
        self.coeff = (-1j * k if model == IPM else 1j * k)[:, None]

    def matrix(self, k):
        """Dense boundary-value matrix for mode ``k``.

        Stokes rows carrying the squared operator are scaled by ``dx2**4``.
        """
        g = self.grid
        n = g.n2
        Dk = g.D2.toarray() - k**2 * np.eye(n)
        if self.model == IPM:
            A = Dk
            A[0] = 0.0
            A[-1] = 0.0
            A[0, 0] = A[-1, -1] = 1.0
        else:
            A = Dk @ Dk
            A[[0, -1]] = 0.0
            A[0, 0] = A[-1, -1] = 1.0
            # clamp rows two orders sharper than the interior; at the
            # interior order the closure dominates the error on coarse grids
            D1 = fd_matrix(n, 1, g.fd_order + 2, g.dx2).toarray()
            A[1] = D1[0]
            A[-2] = D1[-1]
            # bring the wide rows to unit scale before factoring
            A[2:-2] *= g.dx2**4
        return A

    def _operator(self, k):
        A = self.matrix(k)
        bands, ab = _to_banded(A)
        rhs = np.zeros((A.shape[0], len(self.rows)))
        scale = self.grid.dx2**4 if self.model == STOKES else 1.0
        rhs[self.rows, np.arange(len(self.rows))] = scale
        try:
            sol = scipy.linalg.solve_banded(bands, ab, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"{self.model} boundary value problem singular at mode k={k}") from exc
        if not np.all(np.isfinite(sol)):
            raise SolverError(f"{self.model} boundary value problem ill-conditioned at mode k={k}")
        return sol

    def solve_modal(self, theta_hat, threads=1):
        """``psi_hat`` from ``theta_hat`` (both modal)."""
        b = self.coeff * theta_hat[self.modes][:, self.rows]
        v = np.stack([b.real, b.imag], axis=-1)
        out = np.empty((len(self.modes), self.grid.n2, 2))
        if threads <= 1:
            np.matmul(self.G, v, out=out)
        else:
            chunks = np.array_split(np.arange(len(self.modes)), threads)

            def work(idx):
                out[idx] = np.matmul(self.G[idx], v[idx])

            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(work, [c for c in chunks if len(c)]))
        psi_hat = np.zeros(self.grid.modal_shape, dtype=complex)
        psi_hat[self.modes] = out[..., 0] + 1j * out[..., 1]
        return psi_hat

    def velocity(self, psi_hat):
        g = self.grid
        psi = g.to_physical(psi_hat)
        u1 = -g.to_physical(g.modal_ddx2(psi_hat))
        u2 = g.to_physical(g.modal_ddx1(psi_hat))
        # walls: psi is pinned exactly, so is its horizontal derivative
        psi[:, [0, -1]] = 0.0
        u2[:, [0, -1]] = 0.0
        return psi, u1, u2

    def solve(self, theta, threads=1, residual=False, theta_hat=None):
        g = self.grid
        if theta_hat is None:
            theta_hat = g.to_modal(theta)
        psi_hat = self.solve_modal(theta_hat, threads=threads)
        psi, u1, u2 = self.velocity(psi_hat)
        sol = StreamSolution(psi, u1, u2, self.model, psi_hat)
        if residual:
            res = pde_residual(g, sol, theta)
            sol = StreamSolution(psi, u1, u2, self.model, psi_hat, res)
        return sol


_cache = {}
_cache_lock = threading.Lock()


def get_solver(grid, model):
    key = (grid, model)
    with _cache_lock:
        solver = _cache.get(key)
        if solver is None:
            solver = _cache[key] = StreamSolver(grid, model)
    return solver


def solve_stream(grid, theta, model, threads=1, residual=True):
    theta = grid.check(theta)
    return get_solver(grid, model).solve(theta, threads=threads, residual=residual)


def solve_ipm_stream(grid, theta, threads=1, residual=True):
    """Solve ``-Lap psi = d1 theta`` with ``psi = 0`` on the walls."""
    return solve_stream(grid, theta, IPM, threads, residual)


def solve_stokes_stream(grid, theta, threads=1, residual=True):
    """Solve ``Lap^2 psi = d1 theta`` with clamped walls."""
    return solve_stream(grid, theta, STOKES, threads, residual)


def _interior_l2(grid, f, reach):
    mask = np.zeros(grid.n2, dtype=bool)
    mask[reach:grid.n2 - reach] = True
    w = grid.weights2 * mask
    return float(np.sqrt(grid.dx1 * np.sum(f * f * w)))


def pde_residual(grid, sol, theta):
    """L2 norm of the model equation evaluated with composed first derivatives.

    Only rows where every composed stencil is centered are included, so the
    check is independent of the solver's own operator and boundary closure.
    """
    g = grid

    def lap(f):
        return g.ddx1(g.ddx1(f)) + g.ddx2(g.ddx2(f))

    d1theta = g.ddx1(theta)
    if sol.model == IPM:
        res = -lap(sol.psi) - d1theta
        reach = 2 * g.stencil_half_width
    else:
        res = lap(lap(sol.psi)) - d1theta
        reach = 4 * g.stencil_half_width
    return _interior_l2(g, res, reach)


def velocity_residuals(grid, sol, theta):
    """Verification residuals of a stream solution.

    Returns a dict with ``pde_residual`` (model equation, interior rows),
    ``div_residual`` (L2 norm of ``div u``), ``bc_residual`` (largest ``|psi|``
    on the walls) and, for Stokes, ``clamp_residual`` (largest ``|d2 psi|`` on
    the walls).
    """
    theta = grid.check(theta)
    div = grid.ddx1(sol.u1) + grid.ddx2(sol.u2)
    out = {
        "pde_residual": pde_residual(grid, sol, theta),
        "div_residual": grid.norm(div, "L2"),
        "bc_residual": float(np.max(np.abs(sol.psi[:, [0, -1]]))),
    }
    if sol.model == STOKES:
        out["clamp_residual"] = float(np.max(np.abs(sol.u1[:, [0, -1]])))
    return out
