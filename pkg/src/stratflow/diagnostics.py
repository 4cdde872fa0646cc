"""Energy observables sampled along a run."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .velocity import IPM

FLOOR = 1e-14

COLUMNS = (
    "t", "E_P", "E", "K", "u2_l2sq", "u_l2sq",
    "theta_h0", "theta_h1", "theta_h2", "theta_h3", "theta_h4",
    "gradpsi_hk", "d2E_integrand", "mass", "linf", "bc_drift",
)


class DiagnosticsError(FloatingPointError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E_P: float
    E: float
    K: float
    u2_l2sq: float
    u_l2sq: float
    theta_h0: float
    theta_h1: float
    theta_h2: float
    theta_h3: float
    theta_h4: float
    gradpsi_hk: float
    d2E_integrand: float
    mass: float
    linf: float
    bc_drift: float

    def as_tuple(self):
        return astuple(self)

    @classmethod
    def from_sequence(cls, values):
        return cls(*(float(v) for v in values))


assert tuple(f.name for f in fields(DiagnosticsRecord)) == COLUMNS


def sobolev_norms(grid, f, kmax):
    """``[||f||_H0, ..., ||f||_Hkmax]`` sharing one set of mixed derivatives."""
    derivs = grid.mixed_derivatives(f, kmax)
    level = [0.0] * (kmax + 1)
    for (a, b) in sorted(derivs):
        d = derivs[(a, b)]
        level[a + b] += grid.integrate(d * d)
    return [float(np.sqrt(max(sum(level[: k + 1]), 0.0))) for k in range(kmax + 1)]


def kinetic(grid, model, stream):
    """``||grad psi||^2`` (IPM) or ``||Lap psi||^2`` (Stokes)."""
    if model == IPM:
        return grid.integrate(stream.u1**2 + stream.u2**2)
    lap = laplacian_modal(grid, stream.psi_hat)
    return grid.integrate(lap * lap)


def laplacian_modal(grid, psi_hat):
    k2 = grid.wavenumbers.astype(float)[:, None] ** 2
    return grid.to_physical(grid.modal_d2dx2(psi_hat) - k2 * psi_hat)


def record(state, sobolev_k=3):
    """Observables of a :class:`~stratflow.transport.SimState`."""
    g = state.grid
    theta = state.theta
    s = state.stream
    x2 = g.x2[None, :]
    rho_s = g.lift(state.rho_s_values)
    E_P = g.integrate(rho_s * x2) + g.integrate(theta * x2)
    E = g.integrate((theta - state.delta_star[None, :]) * x2)
    K = kinetic(g, state.model, s)
    u2sq = g.integrate(s.u2**2)
    usq = g.integrate(s.u1**2) + u2sq
    hk = sobolev_norms(g, theta, 4)
    if state.model == IPM:
        a, b = sobolev_norms(g, s.u1, sobolev_k), sobolev_norms(g, s.u2, sobolev_k)
        gradpsi = float(np.hypot(a[-1], b[-1]))
    else:
        gradpsi = sobolev_norms(g, laplacian_modal(g, s.psi_hat), 2)[-1]
    d1rho = g.ddx1(theta)
    d2rho = g.ddx2(theta) + state.drho[None, :]
    d2E = -2.0 * g.integrate(s.u2 * (s.u1 * d1rho + s.u2 * d2rho))
    rec = DiagnosticsRecord(
        t=float(state.t), E_P=E_P, E=E, K=K, u2_l2sq=u2sq, u_l2sq=usq,
        theta_h0=hk[0], theta_h1=hk[1], theta_h2=hk[2], theta_h3=hk[3], theta_h4=hk[4],
        gradpsi_hk=gradpsi, d2E_integrand=d2E, mass=g.integrate(theta),
        linf=float(np.max(np.abs(theta))), bc_drift=float(state.bc_drift),
    )
    bad = [name for name, v in zip(COLUMNS, rec.as_tuple()) if not np.isfinite(v)]
    if bad:
        raise DiagnosticsError(f"non-finite observable(s) {', '.join(bad)} at t={state.t}")
    return rec


def check_dissipation(r_prev, r_mid, r_next, floor=FLOOR):
    """Relative residuals of ``E' = -K`` and ``K' = -E''`` at ``r_mid``.

    Derivatives are centered differences over the neighbouring records;
    ``E''`` is the logged ``d2E_integrand``.
    """
    h1 = r_mid.t - r_prev.t
    h2 = r_next.t - r_mid.t
    if h1 <= 0 or abs(h1 - h2) > 1e-9 * max(abs(h1), abs(h2)):
        raise ValueError(f"records not equally spaced: {r_prev.t}, {r_mid.t}, {r_next.t}")
    dt2 = r_next.t - r_prev.t
    dE = (r_next.E - r_prev.E) / dt2
    dK = (r_next.K - r_prev.K) / dt2
    resid_E = abs(dE + r_mid.K) / max(r_mid.K, floor)
    resid_K = abs(dK + r_mid.d2E_integrand) / max(abs(r_mid.d2E_integrand), floor)
    return {"resid_E": resid_E, "resid_K": resid_K}


def dissipation_series(records, k_min=1e-12):
    """``(t, resid_E, resid_K)`` at every interior record with ``K > k_min``."""
    out = []
    for a, b, c in zip(records, records[1:], records[2:]):
        if b.K > k_min:
            r = check_dissipation(a, b, c)
            out.append((b.t, r["resid_E"], r["resid_K"]))
    return np.array(out).reshape(-1, 3)


def monotone_violations(values, floor=FLOOR):
    """Indices ``i`` where ``values[i+1] > values[i]`` by more than ``floor``."""
    v = np.asarray(values, dtype=float)
    return np.nonzero(np.diff(v) > floor)[0]
