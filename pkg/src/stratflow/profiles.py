"""Stratified background densities ``rho_s(x2)``."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True)
class Stratification:
    """Polynomial stratified density ``rho_s(x2) = sum_i c_i x2**i``."""

    coeffs: tuple

    @classmethod
    def parse(cls, descriptor):
        """Build from ``"1-x2"`` or ``"poly:c0,c1,..."``."""
        text = descriptor.strip().replace(" ", "")
        if text in ("1-x2", "linear"):
            return cls((1.0, -1.0))
        if text.startswith("poly:"):
            coeffs = tuple(float(c) for c in text[5:].split(",") if c)
            if not coeffs:
                raise ValueError("empty polynomial descriptor")
            return cls(coeffs)
        raise ValueError(f"unknown rho_s descriptor {descriptor!r}")

    @property
    def descriptor(self):
        if self.coeffs == (1.0, -1.0):
            return "1-x2"
        return "poly:" + ",".join(repr(c) for c in self.coeffs)

    def __call__(self, x2):
        return P.polyval(np.asarray(x2, dtype=float), self.coeffs)

    def derivative(self, x2, order=1):
        return P.polyval(np.asarray(x2, dtype=float), P.polyder(self.coeffs, order))

    @cached_property
    def gamma(self):
        """``inf(-d rho_s / d x2)`` over ``[0, 1]``."""
        x = np.linspace(0.0, 1.0, 4001)
        crit = P.polyroots(P.polyder(self.coeffs, 2)) if len(self.coeffs) > 2 else []
        crit = [c.real for c in np.atleast_1d(crit) if abs(c.imag) < 1e-12 and 0 <= c.real <= 1]
        x = np.concatenate([x, crit])
        return float(np.min(-self.derivative(x)))

    @property
    def is_reference(self):
        """True for ``rho_s = 1 - x2``."""
        return self.coeffs == (1.0, -1.0)

    def inverse(self, s):
        """``phi_0 = rho_s^{-1}`` on the image interval, by bisection."""
        s = np.asarray(s, dtype=float)
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            above = self(mid) > s
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return 0.5 * (lo + hi)
