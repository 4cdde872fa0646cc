"""Decay lemmas for sampled trajectories, with explicit constants.

Each check first tests its differential hypothesis on the samples and
returns ``not_applicable`` when that fails, so a violated hypothesis can
never produce a passing verdict.

Constants (obtained by following each proof with every inequality kept):

* ``f' <= -a^-alpha f^n`` gives
  ``f(t)^(n-1) <= 1 / ((n-1) tau^(alpha+1) A^-alpha)``, with ``tau`` the
  elapsed time and ``A`` the integral of ``a`` over it
* ``f' <= -g``, ``g' <= -h``, ``f <= C t^-n`` give
  ``avg(g, t) <= 2^(n+1) C t^-(n+1)`` and ``avg(h, t) <= 2^(2n+3) C t^-(n+2)``
* ``avg(f, t) <= E t^-n`` on ``[2, T]`` gives
  ``int_1^T f^alpha <= 2^(-n alpha) (1 + 1/(1 - 2^(1 - alpha n))) E^alpha``

``avg(f, t)`` is the window mean ``(2/t) int_{t/2}^t f``. For ``f = E t^-n``
it equals ``E * 2 (2**(n-1) - 1) / (n - 1) * t^-n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

HOLDS = "holds"
FAILS = "fails"
NOT_APPLICABLE = "not_applicable"

ABS_SLACK = 1e-8


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(t) < 3:
            raise ValueError("a trajectory needs at least 3 samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("values must be finite and nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def clipped(cls, times, values):
        """Build from data whose roundoff may dip below zero."""
        return cls(times, np.maximum(np.asarray(values, dtype=float), 0.0))

    def window(self, t_min, t_max):
        keep = (self.times >= t_min) & (self.times <= t_max)
        return Trajectory(self.times[keep], self.values[keep])

    def __len__(self):
        return len(self.times)

    def _cumulative(self):
        t, v = self.times, self.values
        return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (v[1:] + v[:-1]))])

    def integral_to(self, tau):
        """Trapezoid integral from the first sample to ``tau``."""
        t, v = self.times, self.values
        tau = np.asarray(tau, dtype=float)
        j = np.clip(np.searchsorted(t, tau, side="right") - 1, 0, len(t) - 2)
        f_tau = np.interp(tau, t, v)
        return self._cumulative()[j] + 0.5 * (tau - t[j]) * (v[j] + f_tau)


@dataclass(frozen=True)
class Verdict:
    status: str
    margin: float = float("nan")
    value: float = float("nan")
    bound: float = float("nan")
    note: str = ""

    @property
    def holds(self):
        return self.status == HOLDS

    @property
    def applicable(self):
        return self.status != NOT_APPLICABLE


@dataclass(frozen=True)
class Lemma22Result:
    g: Verdict
    h: Verdict
    admissible: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def g_holds(self):
        return self.g.holds

    @property
    def h_holds(self):
        return self.h.holds


def time_average(tr, t):
    """``(2/t) int_{t/2}^t f``; trapezoid rule, linear interpolation at the ends."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t / 2 < tr.times[0]) or np.any(t > tr.times[-1]):
        raise ValueError(f"[t/2, t] outside the sampled range [{tr.times[0]}, {tr.times[-1]}]")
    out = (2.0 / t) * (tr.integral_to(t) - tr.integral_to(t / 2))
    return float(out) if out.ndim == 0 else out


def _relative_margin(bound, value):
    bound = np.asarray(bound, dtype=float)
    value = np.asarray(value, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(bound > 0, (bound - value) / bound, np.where(value <= 0, 1.0, -np.inf))
    return float(np.min(m)) if m.size else 1.0


def derivative_hypothesis(tr, rhs, rel_slack=0.0):
    """Check ``f' <= -rhs`` at interior samples with centered differences.

    Slack per sample is ``1e-8 (1 + |f|) + rel_slack |rhs|``. Returns the
    index of the worst violation or ``None``.
    """
    t, f = tr.times, tr.values
    rhs = np.asarray(rhs, dtype=float)
    d = (f[2:] - f[:-2]) / (t[2:] - t[:-2])
    slack = ABS_SLACK * (1.0 + np.abs(f[1:-1])) + rel_slack * np.abs(rhs[1:-1])
    excess = d + rhs[1:-1] - slack
    if np.any(excess > 0):
        return int(np.argmax(excess)) + 1
    return None


def _aligned(*trs):
    t = trs[0].times
    for other in trs[1:]:
        if other.times.shape != t.shape or np.any(other.times != t):
            raise ValueError("trajectories must share sample times")


def lemma21_bound(f, a, alpha, n, rel_slack=0.0):
    """``f' <= -a^-alpha f^n``  implies  ``f^(n-1) <= 1 / ((n-1) tau^(alpha+1) A^-alpha)``.

    ``tau`` is the time elapsed since the first sample and ``A`` the
    trapezoid integral of ``a`` over the same span.
    """
    if not alpha > 0 or not n > 1:
        raise ValueError("need alpha > 0 and n > 1")
    _aligned(f, a)
    fv, av = f.values, a.values
    with np.errstate(divide="ignore"):
        rhs = np.where(fv > 0, np.where(av > 0, av ** -alpha, np.inf) * fv**n, 0.0)
    bad = derivative_hypothesis(f, rhs, rel_slack)
    if bad is not None:
        return Verdict(NOT_APPLICABLE, note=f"hypothesis fails at t={f.times[bad]:g}")
    tau = f.times - f.times[0]
    A = a.integral_to(f.times)
    use = tau > 0
    with np.errstate(divide="ignore"):
        bound = (1.0 / ((n - 1) * tau[use] ** (alpha + 1) * A[use] ** -alpha)) ** (1.0 / (n - 1))
    margin = _relative_margin(bound, fv[use])
    i = int(np.argmin(np.where(bound > 0, (bound - fv[use]) / np.where(bound > 0, bound, 1), np.inf)))
    return Verdict(HOLDS if margin >= 0 else FAILS, margin, float(fv[use][i]), float(bound[i]))


def lemma22_constants(n):
    return 2.0 ** (n + 1), 2.0 ** (2 * n + 3)


def lemma22_check(f, g, h, n, C, rel_slack=0.0):
    """Window-averaged decay of ``g`` and ``h`` from ``f' <= -g``, ``g' <= -h``, ``f <= C t^-n``.

    Conclusions are tested at every sample ``t`` with ``t/4`` inside the
    sampled range (``t/2`` for ``g``).
    """
    if not n > 0:
        raise ValueError("need n > 0")
    _aligned(f, g, h)
    t = f.times
    for tr, rhs, name in ((f, g.values, "f' <= -g"), (g, h.values, "g' <= -h")):
        bad = derivative_hypothesis(tr, rhs, rel_slack)
        if bad is not None:
            na = Verdict(NOT_APPLICABLE, note=f"{name} fails at t={t[bad]:g}")
            return Lemma22Result(na, na)
    pos = t > 0
    cap = C * t[pos] ** -n + ABS_SLACK * (1.0 + f.values[pos])
    if np.any(f.values[pos] > cap):
        i = int(np.argmax(f.values[pos] - cap))
        na = Verdict(NOT_APPLICABLE, note=f"f <= C t^-n fails at t={t[pos][i]:g}")
        return Lemma22Result(na, na)
    cg, ch = lemma22_constants(n)
    out = []
    for tr, const, power, lo in ((g, cg, n + 1, 2.0), (h, ch, n + 2, 4.0)):
        ts = t[(t > 0) & (t / lo >= t[0])]
        if len(ts) == 0:
            out.append(Verdict(NOT_APPLICABLE, note="no admissible times"))
            continue
        avg = np.atleast_1d(time_average(tr, ts))
        bound = const * C * ts ** -power
        margin = _relative_margin(bound, avg)
        i = int(np.argmax(avg - bound))
        out.append(Verdict(HOLDS if margin >= 0 else FAILS, margin, float(avg[i]), float(bound[i])))
    admissible = t[(t > 0) & (t / 4 >= t[0])]
    return Lemma22Result(out[0], out[1], admissible)


def lemma23_constant(alpha, n):
    return 2.0 ** (-n * alpha) * (1.0 + 1.0 / (1.0 - 2.0 ** (1.0 - alpha * n)))


def dyadic_points(T):
    """``T, T/2, ..., T_{N-1}`` and ``2``, where ``T/2^(N+1) <= 1 <= T/2^N <= 2``."""
    pts = [T]
    while pts[-1] / 2 >= 2:
        pts.append(pts[-1] / 2)
    pts.append(2.0)
    return np.unique(pts)


def lemma23_check(f, n, E, alpha, T=None, rel_slack=0.0):
    """``avg(f, t) <= E t^-n``  implies  ``int_1^T f^alpha <= C E^alpha``.

    The hypothesis is checked at ``t = 2`` and the dyadic points ``T 2^-i``
    used by the dyadic-sum argument.
    """
    if not n > 1:
        raise ValueError("need n > 1")
    if not (1.0 / n < alpha <= 1.0):
        raise ValueError("need 1/n < alpha <= 1")
    if T is None:
        T = float(f.times[-1])
    if not T > 2 or f.times[0] > 1 or f.times[-1] < T:
        raise ValueError("samples must cover [1, T] with T > 2")
    pts = dyadic_points(T)
    avg = np.atleast_1d(time_average(f, pts))
    cap = E * pts ** -n
    slack = ABS_SLACK * (1.0 + cap) + rel_slack * cap
    if np.any(avg > cap + slack):
        i = int(np.argmax(avg - cap - slack))
        return Verdict(NOT_APPLICABLE, note=f"average decay fails at t={pts[i]:g}")
    powered = Trajectory(f.times, f.values**alpha)
    integral = float(powered.integral_to(T) - powered.integral_to(1.0))
    bound = lemma23_constant(alpha, n) * E**alpha
    margin = _relative_margin(bound, integral)
    return Verdict(HOLDS if margin >= 0 else FAILS, margin, integral, bound)


def averaged_constant(E, n):
    """Window-mean constant of ``E t^-n``: ``avg = E * 2 (2^(n-1) - 1)/(n - 1) * t^-n``."""
    return E * 2.0 * (2.0 ** (n - 1) - 1.0) / (n - 1)


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    r2: float
    prefactor: float
    count: int


def fit_power_law(tr, t_min, t_max, min_samples=8):
    """Least-squares slope of ``log f`` against ``log t`` on ``[t_min, t_max]``.

    Nonpositive samples are dropped; fewer than ``min_samples`` survivors
    raise ``ValueError``.
    """
    t, v = tr.times, tr.values
    keep = (t >= t_min) & (t <= t_max) & (t > 0) & (v > 0)
    if np.count_nonzero(keep) < min_samples:
        raise ValueError(f"only {np.count_nonzero(keep)} positive samples in [{t_min}, {t_max}]")
    x, y = np.log(t[keep]), np.log(v[keep])
    if np.ptp(y) == 0.0:
        return PowerFit(0.0, 1.0, float(v[keep][0]), int(keep.sum()))
    fit = stats.linregress(x, y)
    return PowerFit(float(fit.slope), float(fit.rvalue**2), float(np.exp(fit.intercept)), int(keep.sum()))


def envelope_constant(tr, n, t_min=0.0):
    """Smallest ``C`` with ``f(t) <= C t^-n`` at every sample ``t > t_min``."""
    keep = (tr.times > max(t_min, 0.0))
    return float(np.max(tr.values[keep] * tr.times[keep] ** n))


def cascade_suite(times, E, K, u2sq, a=None, window=(10.0, 50.0), k=3):
    """Run the three lemmas on a measured ``(E, K, ||u2||^2)`` series.

    * decay exponent ``-n`` of ``E`` fitted on ``window``; ``C`` is the
      smallest envelope constant with ``E <= C t^-n`` for ``t > 0``
    * ``f' <= -g, g' <= -h`` with ``(f, g, h) = (E, K, ||u2||^2)``
    * window-averaged decay of ``K`` with ``n + 1`` and ``2^(n+1) C`` feeds the
      integrability bound with ``alpha = 1`` (needs ``n > 0``)
    * ``E' <= -(lam a)^(-1/k) E^(1 + 1/k)`` where ``a`` is a supplied series
      (e.g. ``||theta||_Hk^2``) and ``lam`` the smallest scale that leaves half
      of ``K`` as margin
    """
    t = np.asarray(times, dtype=float)
    pos = t > 0
    tE = Trajectory.clipped(t[pos], E[pos])
    tK = Trajectory.clipped(t[pos], K[pos])
    tU = Trajectory.clipped(t[pos], u2sq[pos])
    fit = fit_power_law(tE, *window)
    n = -fit.exponent
    out = {"fit": fit, "n": n}
    if n <= 0:
        return out
    C = envelope_constant(tE, n)
    out["C"] = C
    out["lemma22"] = lemma22_check(tE, tK, tU, n, C)
    if tK.times[0] <= 1.0 and tK.times[-1] > 2.0:
        out["lemma23"] = lemma23_check(tK, n + 1, lemma22_constants(n)[0] * C, 1.0)
    if a is not None:
        av = np.asarray(a, dtype=float)[pos]
        alpha, m = 1.0 / k, 1.0 + 1.0 / k
        Ev, Kv = tE.values, tK.values
        ok = (Ev > 0) & (Kv > 0) & (av > 0)
        lam = float(np.max((2.0 * Ev[ok] ** m / Kv[ok]) ** (1.0 / alpha) / av[ok]))
        out["lemma21_scale"] = lam
        out["lemma21"] = lemma21_bound(tE, Trajectory(t[pos], lam * av), alpha, m)
    return out
