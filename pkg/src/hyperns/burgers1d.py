"""Hyperbolically relaxed Burgers equation ``eps u'' + u' + (u^2)_x = u_xx + g``.

Second-order IMEX stepping: damping and diffusion by the trapezoidal rule
(one constant-coefficient tridiagonal solve per stage), the flux ``(u^2)_x``
by central differences with Heun. Diagnostics cover finite propagation
(support and cone energy) and the exponential moment ``y = int e^{-x} u``.

Sign convention for the moment: with the flux in divergence form,
``y'' + y' = y - int e^{-x} u^2``, so ``Y = -y`` obeys
``Y'' + Y' >= Y + c(T) Y^2`` and the blow-up certificate is stated for
``Y``. Large data with ``int e^{-x} u < 0`` (negative amplitude) blows up.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from . import kernels
from .grids import Grid1D

BLOWUP_THRESHOLD = 1e6
DT_FLOOR = 1e-12


class DomainTooSmallError(RuntimeError):
    pass


class ComparisonViolatedError(RuntimeError):
    pass


@dataclass
class BurgersState:
    grid: Grid1D
    u: np.ndarray
    ut: np.ndarray
    eps: float
    t: float = 0.0
    flag: str | None = None
    u_prev: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_data(cls, grid, u0, ut0=None, eps=1.0):
        x = grid.x
        u = np.asarray(u0(x) if callable(u0) else u0, dtype=float).copy()
        if ut0 is None:
            ut = np.zeros_like(u)
        else:
            ut = np.asarray(ut0(x) if callable(ut0) else ut0, dtype=float).copy()
        grid.pin(u)
        grid.pin(ut)
        return cls(grid, u, ut, eps)

    def u_inf(self) -> float:
        return float(np.abs(self.u).max())


def stable_dt(state: BurgersState) -> float:
    h = state.grid.h
    return min(0.4 * h / max(1.0, state.u_inf()), 0.4 * h * math.sqrt(state.eps))


def _flux(u, h):
    return kernels.burgers_flux(np.ascontiguousarray(u), h)


def _d2(u, h):
    return kernels.second_difference(np.ascontiguousarray(u), h)


def _trapezoid(u0, v0, eps, dt, h, F):
    # (eps + dt/2) v1 - dt^2/4 v1_xx = (eps - dt/2) v0 + dt u0_xx + dt^2/4 v0_xx + dt F
    q = 0.25 * dt * dt / (h * h)
    rhs = (eps - 0.5 * dt) * v0 + dt * _d2(u0, h) + (0.25 * dt * dt) * _d2(v0, h) + dt * F
    v1 = np.zeros_like(v0)
    v1[1:-1] = kernels.toeplitz_tridiag_solve(eps + 0.5 * dt + 2.0 * q, -q, np.ascontiguousarray(rhs[1:-1]))
    u1 = u0 + 0.5 * dt * (v0 + v1)
    u1[0] = u1[-1] = 0.0
    return u1, v1


def burgers_step(state: BurgersState, dt: float, g=None, linear: bool = False) -> BurgersState:
    if state.flag:
        return state
    h = state.grid.h
    g = 0.0 if g is None else g
    u0, v0 = state.u, state.ut
    if linear:
        F = np.zeros_like(u0) + g
    else:
        N0 = _flux(u0, h)
        us, _ = _trapezoid(u0, v0, state.eps, dt, h, g - N0)
        F = g - 0.5 * (N0 + _flux(us, h))
    F = np.asarray(F, dtype=float)
    u1, v1 = _trapezoid(u0, v0, state.eps, dt, h, F)
    new = BurgersState(state.grid, u1, v1, state.eps, state.t + dt)
    if not (np.isfinite(u1).all() and np.isfinite(v1).all()):
        new.flag = "blow-up: non-finite values"
    elif new.u_inf() > BLOWUP_THRESHOLD:
        new.flag = "blow-up: |u|_inf exceeded threshold"
    return new


def leapfrog_dt(grid: Grid1D, eps: float) -> float:
    """Unit Courant number for the wave speed ``1/sqrt(eps)``."""
    return grid.h * math.sqrt(eps)


def leapfrog_step(state: BurgersState, g=None) -> BurgersState:
    """Explicit centred step at ``dt = h sqrt(eps)``.

    At unit Courant number the discrete wave operator is exact (d'Alembert)
    and every update reads only nodes ``j-1, j, j+1`` of the previous level,
    so the numerical domain of dependence coincides with the light cone:
    data supported in ``[a, b]`` stays in ``[a - t/sqrt(eps), b + t/sqrt(eps)]``
    exactly. Damping is centred and implicit per node.
    """
    if state.flag:
        return state
    grid, eps = state.grid, state.eps
    h = grid.h
    dt = leapfrog_dt(grid, eps)
    g = 0.0 if g is None else g
    u = state.u
    forcing = g - _flux(u, h)
    lap = np.zeros_like(u)
    lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    if state.u_prev is None:
        # Taylor start: u(-dt) = u - dt ut + dt^2/2 utt
        utt = (_d2(u, h) - state.ut + forcing) / eps
        prev = u - dt * state.ut + 0.5 * dt * dt * utt
    else:
        prev = state.u_prev
    k = 0.5 * dt / eps
    new = (2.0 * u - (1.0 - k) * prev + lap + (dt * dt / eps) * forcing) / (1.0 + k)
    grid.pin(new)
    ut = (3.0 * new - 4.0 * u + prev) / (2.0 * dt)
    grid.pin(ut)
    out = BurgersState(grid, new, ut, eps, state.t + dt, u_prev=u)
    if not (np.isfinite(new).all() and np.isfinite(ut).all()):
        out.flag = "blow-up: non-finite values"
    elif out.u_inf() > BLOWUP_THRESHOLD:
        out.flag = "blow-up: |u|_inf exceeded threshold"
    return out


def parabolic_step(u: np.ndarray, dt: float, h: float, g=None) -> np.ndarray:
    """One Crank-Nicolson/Heun step of ``u' + (u^2)_x = u_xx + g`` (the eps = 0 model)."""
    g = 0.0 if g is None else g
    q = 0.5 * dt / (h * h)

    def solve(F):
        rhs = u + 0.5 * dt * _d2(u, h) + dt * F
        out = np.zeros_like(u)
        out[1:-1] = kernels.toeplitz_tridiag_solve(1.0 + 2.0 * q, -q, np.ascontiguousarray(rhs[1:-1]))
        return out

    N0 = _flux(u, h)
    us = solve(g - N0)
    return solve(g - 0.5 * (N0 + _flux(us, h)))


# -- diagnostics ------------------------------------------------------------

def support_width(state: BurgersState, threshold: float = 1e-8):
    """Outermost node positions where ``max(|u|, |ut|) > threshold``.

    Returns ``None`` for an empty support.
    """
    active = np.flatnonzero(np.maximum(np.abs(state.u), np.abs(state.ut)) > threshold)
    if active.size == 0:
        return None
    lo, hi = int(active[0]), int(active[-1])
    if lo <= 1 or hi >= state.grid.n - 1:
        raise DomainTooSmallError("domain too small for cone test")
    x = state.grid.x
    return float(x[lo]), float(x[hi])


def cone_energy(state: BurgersState, R: float, center: float = 0.0) -> float:
    """``int (u_t^2 + u_x^2)`` over ``|x - center| <= R - t`` (trapezoidal rule)."""
    half = R - state.t
    if half <= 0:
        raise ValueError(f"cone section undefined for t={state.t:g} >= R={R:g}")
    x = state.grid.x
    h = state.grid.h
    ux = np.gradient(state.u, h)
    mask = np.abs(x - center) <= half + 1e-12 * h
    if mask.sum() < 2:
        return 0.0
    dens = state.ut[mask] ** 2 + ux[mask] ** 2
    return float(trapezoid(dens, x[mask]))


def moment_y(state_or_grid, u=None) -> float:
    """Trapezoidal ``int e^{-x} u dx``."""
    if u is None:
        grid, u = state_or_grid.grid, state_or_grid.u
    else:
        grid = state_or_grid
    w = np.exp(-grid.x)
    return float(grid.h * (np.dot(w, u) - 0.5 * (w[0] * u[0] + w[-1] * u[-1])))


def comparison_coefficient(horizon: float) -> float:
    """``c(T) = e^{-(T+1)} / (2(T+1))`` from Jensen on the support ``[-(T+1), T+1]``."""
    return math.exp(-(horizon + 1.0)) / (2.0 * (horizon + 1.0))


def comparison_ode(z0: float, zp0: float, c: float, horizon: float, t_eval=None, cap: float = 1e10):
    """Integrate ``z'' + z' = z + c z^2`` until ``horizon`` or ``z > cap``.

    Returns ``(sol, t_blow)``; ``t_blow`` adds the analytic tail
    ``int_cap^inf dz / sqrt(2c/3 z^3)`` to the time at which ``z`` hits ``cap``.
    """

    def rhs(t, s):
        return [s[1], -s[1] + s[0] + c * s[0] * s[0]]

    def hit(t, s):
        return s[0] - cap

    hit.terminal = True
    hit.direction = 1
    sol = solve_ivp(rhs, (0.0, horizon), [z0, zp0], method="DOP853", rtol=1e-11, atol=1e-12,
                    events=hit, dense_output=True, t_eval=t_eval)
    t_blow = None
    if sol.t_events[0].size:
        t_blow = float(sol.t_events[0][0]) + 2.0 / math.sqrt(2.0 * c * cap / 3.0)
    return sol, t_blow


@dataclass
class BlowupCertificate:
    y0: float
    yp0: float
    cT: float
    t_blow_comparison: float | None
    t_blow_observed: float | None
    amplitude: float = 0.0
    horizon: float = 0.0
    verdict: str = ""
    min_margin: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def bump_data(M: float):
    """``M * max(0, 1 - x^2) * e^x``, supported in ``[-1, 1]``."""
    return lambda x: M * np.maximum(0.0, 1.0 - x * x) * np.exp(x)


def critical_amplitude(horizon: float, sign: float = -1.0, lo: float = 1.0, hi: float = 1e6,
                       rel_tol: float = 1e-4) -> float:
    """Smallest ``|M|`` whose comparison ODE blows up before ``horizon``.

    Uses the exact moment of the bump data, ``y(0) = 4M/3``, ``y'(0) = 0``.
    """
    c = comparison_coefficient(horizon)

    def blows(mag):
        Y0 = -(sign * mag) * 4.0 / 3.0
        if Y0 <= 0:
            return False
        t = comparison_ode(Y0, 0.0, c, horizon)[1]
        return t is not None and t < horizon

    if not blows(hi):
        raise ValueError("no amplitude below the search cap certifies blow-up")
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if blows(mid):
            hi = mid
        else:
            lo = mid
    return hi


def run_burgers(state: BurgersState, horizon: float, *, g=None, dt: float | None = None,
                sample_every: float = 0.05, on_sample=None, scheme: str = "imex"):
    """Step to ``horizon`` and call ``on_sample`` on sampled states.

    ``scheme="imex"`` uses the adaptive rule (or a fixed ``dt``) and lands
    exactly on multiples of ``sample_every``; ``scheme="leapfrog"`` uses its
    fixed unit-Courant step and samples the first step at or past each
    multiple. The final state is returned.
    """
    if scheme not in ("imex", "leapfrog"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if on_sample:
        on_sample(state)
    k = 1
    while not state.flag and horizon - state.t > 1e-12:
        target = min(k * sample_every, horizon)
        if scheme == "leapfrog":
            state = leapfrog_step(state, g)
        else:
            step = dt if dt is not None else stable_dt(state)
            step = min(step, target - state.t)
            if step < DT_FLOOR:
                state = replace(state, flag="blow-up: time step underflow")
            else:
                state = burgers_step(state, step, g)
                if abs(state.t - target) < 1e-12:
                    state.t = target
        if state.flag or state.t >= target - 1e-12:
            if on_sample:
                on_sample(state)
            while k * sample_every <= state.t + 1e-12:
                k += 1
    return state


TRACE_COLUMNS = ("t", "y", "z", "u_inf", "support_left", "support_right", "cone_energy")


def blowup_certificate(amplitude: float, horizon: float, h: float = 0.05,
                       sample_every: float = 0.01, tol_rel: float = 1e-3,
                       trace: list | None = None) -> BlowupCertificate:
    """Evolve bump data of the given amplitude with eps = 1 and certify blow-up.

    Tracks ``Y = -y`` against the comparison ODE and raises
    ``ComparisonViolatedError`` if ``Y < z - tol_rel * (1 + |z|)`` at any
    sample while ``|z| < 1e6``.
    """
    grid = Grid1D.whole_line(horizon, h)
    state = BurgersState.from_data(grid, bump_data(amplitude), eps=1.0)
    y0 = moment_y(state)
    yp0 = moment_y(grid, state.ut)
    c = comparison_coefficient(horizon)
    sol, t_cmp = comparison_ode(-y0, -yp0, c, horizon)
    # y0 > 0 cannot feed the quadratic term of the comparison ODE
    certified_side = -y0 > 0
    margins = []

    def z_at(t):
        if t > sol.t[-1]:
            return math.inf
        return float(sol.sol(t)[0])

    def record(s):
        y = moment_y(s)
        z = z_at(s.t)
        Y = -y
        if certified_side and abs(z) < 1e6 and not s.flag:
            gap = Y - z + tol_rel * (1.0 + abs(z))
            margins.append(gap)
            if gap < 0:
                raise ComparisonViolatedError(
                    f"comparison violated at t={s.t:.6g}: -y={Y:.6g} < z={z:.6g}"
                )
        if trace is not None:
            try:
                sup = support_width(s) or (math.nan, math.nan)
            except DomainTooSmallError:
                sup = (math.nan, math.nan)
            R = horizon + 1.0
            cone = cone_energy(s, R) if s.t < R else math.nan
            trace.append((s.t, y, z if certified_side else math.nan, s.u_inf(), sup[0], sup[1], cone))

    final = run_burgers(state, horizon, sample_every=sample_every, on_sample=record)
    observed = final.t if final.flag else None
    if not certified_side or t_cmp is None or t_cmp > horizon:
        verdict = "no blow-up certified"
    else:
        verdict = "blow-up certified"
    return BlowupCertificate(
        y0=y0, yp0=yp0, cT=c, t_blow_comparison=t_cmp, t_blow_observed=observed,
        amplitude=amplitude, horizon=horizon, verdict=verdict,
        min_margin=min(margins) if margins else math.nan,
    )
