"""Discretization of the periodic channel T x (0, 1).

Fields are plain ``numpy`` arrays:

* scalar field -- real array of shape ``(n1, n2)``, ``f[i, j] = f(x1_i, x2_j)``
* modal field  -- complex array of shape ``(n1 // 2 + 1, n2)`` holding the
  per-row Fourier coefficients ``f_k(x2_j)`` of the real-input half spectrum,
  normalized so that ``cos(3 x1)`` has coefficient ``1/2`` at ``k = 3``
* profile      -- real array of shape ``(n2,)``, a function of ``x2`` alone

The horizontal direction is Fourier collocation on ``[0, 2 pi)``; the
vertical direction is a uniform grid including both walls, differentiated
with finite differences of order 2 or 4 and integrated with the trapezoid
rule plus Gregory end corrections (fourth order). The plain trapezoid rule
is available with ``quadrature="trapezoid"``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
import scipy.sparse as sp

PERIOD = 2.0 * np.pi
QUADRATURES = ("gregory", "trapezoid")
# end weights of the fourth-order Gregory rule; the interior weight is 1
_GREGORY_END = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


def fd_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative at 0.

    ``offsets`` are stencil node positions in units of the grid spacing.
    """
    z = np.asarray(offsets, dtype=float)
    npts = len(z)
    if npts <= order:
        raise ValueError("stencil too small for derivative order")
    V = np.array([z**q / factorial(q) for q in range(npts)])
    rhs = np.zeros(npts)
    rhs[order] = 1.0
    return np.linalg.solve(V, rhs)


def fd_matrix(n, order, accuracy, h):
    """Sparse ``n x n`` derivative matrix on a uniform grid with spacing ``h``.

    Interior rows use centered stencils; rows too close to an edge use a
    one-sided window of ``order + accuracy`` nodes with the same accuracy.
    """
    half = (order + accuracy - 1) // 2
    width = order + accuracy
    rows, cols, vals = [], [], []
    for j in range(n):
        if half <= j < n - half:
            idx = np.arange(j - half, j + half + 1)
        else:
            start = 0 if j < half else n - width
            idx = np.arange(start, start + width)
        w = fd_weights(idx - j, order) / h**order
        rows.extend([j] * len(idx))
        cols.extend(idx)
        vals.extend(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of the channel.

    Parameters
    ----------
    n1 : int
        Number of equispaced horizontal nodes on ``[0, 2 pi)``. Even, >= 8.
    n2 : int
        Number of vertical nodes on ``[0, 1]`` including both walls. >= 9.
    fd_order : int
        Accuracy of the vertical finite differences, 2 or 4.
    quadrature : str
        Vertical quadrature, ``"gregory"`` (default) or ``"trapezoid"``.
    """

    n1: int
    n2: int
    fd_order: int = 4
    quadrature: str = "gregory"

    def __post_init__(self):
        if self.n1 < 8 or self.n1 % 2:
            raise ValueError(f"n1 must be even and >= 8, got {self.n1}")
        if self.n2 < 9:
            raise ValueError(f"n2 must be >= 9, got {self.n2}")
        if self.fd_order not in (2, 4):
            raise ValueError(f"fd_order must be 2 or 4, got {self.fd_order}")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}, got {self.quadrature!r}")

    # -- coordinates -------------------------------------------------------

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def modal_shape(self):
        return (self.n1 // 2 + 1, self.n2)

    @property
    def dx1(self):
        return PERIOD / self.n1

    @property
    def dx2(self):
        return 1.0 / (self.n2 - 1)

    @cached_property
    def x1(self):
        return np.arange(self.n1) * (PERIOD / self.n1)

    @cached_property
    def x2(self):
        return np.arange(self.n2) / (self.n2 - 1)

    @cached_property
    def mesh(self):
        """``(X1, X2)`` coordinate arrays of shape ``(n1, n2)``."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @cached_property
    def wavenumbers(self):
        return np.arange(self.n1 // 2 + 1)

    @cached_property
    def weights2(self):
        """Quadrature weights in ``x2``."""
        w = np.full(self.n2, self.dx2)
        if self.quadrature == "trapezoid":
            w[0] = w[-1] = 0.5 * self.dx2
        else:
            w[:3] *= _GREGORY_END
            w[-3:] *= _GREGORY_END[::-1]
        return w

    @property
    def stencil_half_width(self):
        """Half width of the centered first-derivative stencil."""
        return self.fd_order // 2

    # -- differentiation matrices -------------------------------------------

    @cached_property
    def D1(self):
        """First vertical derivative, order ``fd_order``."""
        return fd_matrix(self.n2, 1, self.fd_order, self.dx2)

    @cached_property
    def D2(self):
        """Second vertical derivative, order ``fd_order``."""
        return fd_matrix(self.n2, 2, self.fd_order, self.dx2)

    @cached_property
    def _ik(self):
        ik = 1j * self.wavenumbers.astype(float)
        ik[-1] = 0.0  # Nyquist mode has no real odd derivative
        return ik[:, None]

    # -- validation ------------------------------------------------------

    def check(self, f):
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("field contains non-finite values")
        return f

    def check_modal(self, m):
        m = np.asarray(m)
        if m.shape != self.modal_shape:
            raise ValueError(f"modal shape {m.shape} does not match grid {self.modal_shape}")
        return m

    # -- transforms ------------------------------------------------------

    def to_modal(self, f):
        f = self.check(f)
        return np.fft.rfft(f, axis=0) / self.n1

    def to_physical(self, m):
        m = self.check_modal(m)
        return np.fft.irfft(m * self.n1, n=self.n1, axis=0)

    def dealias(self, m):
        """Zero every horizontal mode ``k > n1 / 3`` (2/3 rule)."""
        m = self.check_modal(m)
        out = m.copy()
        out[self.wavenumbers > self.n1 / 3] = 0.0
        return out

    # -- derivatives -----------------------------------------------------

    def modal_ddx1(self, m):
        return self._ik * m

    def modal_ddx2(self, m):
        return (self.D1 @ m.T).T

    def modal_d2dx2(self, m):
        return (self.D2 @ m.T).T

    def ddx1(self, f):
        return self.to_physical(self.modal_ddx1(self.to_modal(f)))

    def ddx2(self, f):
        f = self.check(f)
        return (self.D1 @ f.T).T

    def d2dx2(self, f):
        """Second vertical derivative with the direct second-derivative stencil."""
        f = self.check(f)
        return (self.D2 @ f.T).T

    def laplacian(self, f):
        m = self.to_modal(f)
        k2 = self.wavenumbers.astype(float)[:, None] ** 2
        return self.to_physical(self.modal_d2dx2(m) - k2 * m)

    # -- quadrature and norms ----------------------------------------------

    def integrate(self, f):
        """Rectangle rule in ``x1`` times the vertical rule of ``weights2``."""
        f = self.check(f)
        # np.sum reduces contiguous memory pairwise in a fixed order
        return float(self.dx1 * np.sum(f * self.weights2))

    def x1_average(self, f):
        return self.to_modal(f)[0].real.copy()

    def lift(self, profile):
        """Profile -> scalar field constant in ``x1``."""
        p = np.asarray(profile, dtype=float)
        if p.shape != (self.n2,):
            raise ValueError(f"profile length {p.shape} does not match n2={self.n2}")
        return np.broadcast_to(p, self.shape).copy()

    def mixed_derivatives(self, f, k):
        """All ``d1^a d2^b f`` with ``a + b <= k`` keyed by ``(a, b)``."""
        out = {(0, 0): self.check(f)}
        for total in range(1, k + 1):
            for a in range(total + 1):
                b = total - a
                if b > 0:
                    out[(a, b)] = self.ddx2(out[(a, b - 1)])
                else:
                    out[(a, b)] = self.ddx1(out[(a - 1, b)])
        return out

    def norm(self, f, kind="L2"):
        """Discrete norm of a scalar field.

        ``kind`` is one of ``"L2"``, ``"Linf"``, ``"W1inf"`` or ``"H<k>"`` with
        ``k <= 4``. Sobolev norms sum the squared L2 norms of every mixed
        derivative of order ``<= k``.
        """
        f = self.check(f)
        if kind == "L2":
            return float(np.sqrt(max(self.integrate(f * f), 0.0)))
        if kind == "Linf":
            return float(np.max(np.abs(f)))
        if kind == "W1inf":
            return max(self.norm(f, "Linf"), self.norm(self.ddx1(f), "Linf"),
                       self.norm(self.ddx2(f), "Linf"))
        match = re.fullmatch(r"H(\d+)", kind)
        if not match:
            raise ValueError(f"unknown norm kind {kind!r}")
        k = int(match.group(1))
        if k > 4:
            raise ValueError("Sobolev index above 4 is not supported")
        derivs = self.mixed_derivatives(f, k)
        total = 0.0
        for key in sorted(derivs):
            d = derivs[key]
            total += self.integrate(d * d)
        return float(np.sqrt(max(total, 0.0)))
