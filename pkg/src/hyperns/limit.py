"""Singular limit eps -> 0: difference and corrected remainder against Navier-Stokes.

``w = u_eps - v`` is the raw difference. With an initial time derivative
``u0'`` that differs from the one the limit equation selects, a fast
transient ``eps (u0' - v'(0)) (1 - exp(-t/eps))`` is subtracted, leaving
the remainder ``wbar`` that converges at the faster rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .energy import XiPair, full_norm
from .hns2d import (
    HnsState,
    LimitState,
    ModelConfig,
    as_forcing,
    choose_dt,
    hns_step,
    initial_state,
    ns_limit_step,
    time_derivative_initial,
)
from .grids import VelocityField
from .stokes import StokesContext


class SweepMemberFlagged(RuntimeError):
    def __init__(self, message, eps_values=()):
        super().__init__(message)
        self.eps_values = list(eps_values)


def layer_amplitude(ctx: StokesContext, u0prime: VelocityField, v0: VelocityField, g) -> VelocityField:
    """``u0' - v'(0)``, the mismatch that drives the initial layer."""
    return u0prime - time_derivative_initial(ctx, v0, g)


def boundary_layer_term(ctx: StokesContext, u0prime: VelocityField, v0: VelocityField, g,
                        eps: float, t: float) -> VelocityField:
    return (eps * -math.expm1(-t / eps)) * layer_amplitude(ctx, u0prime, v0, g)


def boundary_layer_rate(delta: VelocityField, eps: float, t: float) -> VelocityField:
    """Time derivative of the layer term for a precomputed mismatch ``delta``."""
    return math.exp(-t / eps) * delta


@dataclass
class RemainderSample:
    t: float
    w: VelocityField
    wt: VelocityField
    wbar: VelocityField
    wbar_t: VelocityField


def remainder_sample(ctx: StokesContext, hstate: HnsState, lstate: LimitState, g,
                     delta: VelocityField, eps: float) -> RemainderSample:
    if abs(hstate.t - lstate.t) > 1e-9 * max(1.0, abs(hstate.t)):
        raise ValueError(f"misaligned traces: t={hstate.t} vs t={lstate.t}")
    t = hstate.t
    w = hstate.u - lstate.v
    vt = time_derivative_initial(ctx, lstate.v, g, t)
    wt = hstate.ut - vt
    layer = (eps * -math.expm1(-t / eps)) * delta
    return RemainderSample(t, w, wt, w - layer, wt - boundary_layer_rate(delta, eps, t))


def compute_remainder(trace_eps, trace_limit, ctx: StokesContext, eps: float) -> list:
    """Remainders along two traces recorded with ``keep_states=True``."""
    hs, ls = list(trace_eps.states), list(trace_limit.states)
    if len(hs) != len(ls) or not hs:
        raise ValueError("misaligned traces: different sample counts")
    g = as_forcing(hs[0].g, hs[0].u.grid)
    delta = layer_amplitude(ctx, hs[0].ut, ls[0].v, g)
    return [remainder_sample(ctx, h, l, g, delta, eps) for h, l in zip(hs, ls)]


# -- rate fitting ----------------------------------------------------------------

SLOPE_BOUND_W = 0.5 - 0.15
SLOPE_BOUND_WBAR = 1.0 - 0.2


@dataclass
class LimitStudyResult:
    eps_values: np.ndarray
    w_h_norms: np.ndarray
    wbar_eminus1_norms: np.ndarray
    fitted_rate_w: float
    fitted_rate_wbar: float
    t_star: float
    C_w: float = math.nan
    C_wbar: float = math.nan

    @property
    def ratio_wbar(self) -> np.ndarray:
        return self.wbar_eminus1_norms / self.eps_values

    def ratio_nonincreasing(self, slack: float = 0.2) -> bool:
        order = np.argsort(-self.eps_values)
        r = self.ratio_wbar[order]
        return bool(np.all(r[1:] <= (1.0 + slack) * r[:-1]))

    def slopes_ok(self) -> bool:
        return self.fitted_rate_w >= SLOPE_BOUND_W and self.fitted_rate_wbar >= SLOPE_BOUND_WBAR

    def to_json(self) -> dict:
        return {
            "eps": [float(e) for e in self.eps_values],
            "w_h": [float(x) for x in self.w_h_norms],
            "wbar_em1": [float(x) for x in self.wbar_eminus1_norms],
            "slope_w": float(self.fitted_rate_w),
            "slope_wbar": float(self.fitted_rate_wbar),
            "t_star": float(self.t_star),
        }


def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def rate_fit(eps_values, w_h_norms, wbar_norms, t_star: float = 1.0, flagged=()) -> LimitStudyResult:
    eps = np.asarray(eps_values, dtype=float)
    if eps.size < 3:
        raise ValueError("need ≥ 3 eps values")
    if flagged:
        raise SweepMemberFlagged(
            "flagged sweep members: " + ", ".join(f"{e:g}" for e in flagged), flagged
        )
    w = np.asarray(w_h_norms, dtype=float)
    wb = np.asarray(wbar_norms, dtype=float)
    return LimitStudyResult(
        eps, w, wb, loglog_slope(eps, w), loglog_slope(eps, wb), float(t_star),
        C_w=float(np.max(w / eps**0.5)), C_wbar=float(np.max(wb / eps)),
    )


# -- sweep -------------------------------------------------------------------------

@dataclass
class MemberResult:
    eps: float
    dt: float
    times: np.ndarray
    w_l2: np.ndarray
    wt_l2: np.ndarray
    wbar_t_l2: np.ndarray
    wbar_em1: np.ndarray
    flag: str | None = None

    def at(self, name: str, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"no sample at t={t}")
        return float(getattr(self, name)[i])


def run_member(ctx: StokesContext, cfg: ModelConfig, eps: float, t_star: float = 1.0,
               horizon: float = 2.0, sample_every: float = 0.05) -> MemberResult:
    """Run the hyperbolic model and its limit in lockstep and sample the remainder.

    Samples: every step up to ``t = 4 eps`` (resolving the layer), then
    every ``sample_every``; ``t = eps`` and ``t_star`` are always included.
    """
    cfg = replace(cfg, model="hyperbolic", eps=eps, horizon=horizon)
    hstate, g = initial_state(ctx, cfg)
    lstate = LimitState(hstate.u.copy(), g)
    dt = choose_dt(ctx, cfg, hstate.u, g)
    # land on eps, t_star and the sampling grid exactly
    per_eps = max(4, int(math.ceil(eps / dt)))
    dt = eps / per_eps
    n_steps = int(round(horizon / dt))
    stride = max(1, int(round(sample_every / dt)))
    star_step = int(round(t_star / dt))
    delta = layer_amplitude(ctx, hstate.ut, lstate.v, g)
    rows = []

    def record(h, l):
        s = remainder_sample(ctx, h, l, g, delta, eps)
        em1 = full_norm(ctx, XiPair(s.wbar, s.wbar_t, eps), -1)
        rows.append((s.t, s.w.norm(), s.wt.norm(), s.wbar_t.norm(), em1))

    record(hstate, lstate)
    flag = None
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            hstate = hns_step(ctx, hstate, dt)
            lstate = ns_limit_step(ctx, lstate, dt)
        if hstate.flag or lstate.flag:
            flag = f"{hstate.flag or lstate.flag} at t={k * dt:.6g}"
            break
        hstate.t = lstate.t = k * dt
        if k <= 4 * per_eps or k % stride == 0 or k == star_step:
            record(hstate, lstate)
    cols = list(zip(*rows))
    return MemberResult(eps, dt, *(np.array(c) for c in cols), flag=flag)


@dataclass
class LayerDiagnostics:
    dt_w_at_eps: float
    dt_w_at_end: float
    wbar_t_max: float
    wbar_t_min: float
    wbar_t_at_end: float

    @property
    def uncorrected_drop(self) -> float:
        return self.dt_w_at_eps / self.dt_w_at_end

    @property
    def corrected_variation(self) -> float:
        return self.wbar_t_max / self.wbar_t_min

    @property
    def corrected_peak_ratio(self) -> float:
        return self.wbar_t_max / self.wbar_t_at_end


def layer_diagnostics(member: MemberResult, t_end: float = 1.0) -> LayerDiagnostics:
    """Compare ``|dw/dt|`` and ``|dwbar/dt|`` over ``[eps, t_end]``."""
    window = (member.times >= member.eps - 1e-12) & (member.times <= t_end + 1e-12)
    wbt = member.wbar_t_l2[window]
    return LayerDiagnostics(
        member.at("wt_l2", member.eps), member.at("wt_l2", t_end), float(wbt.max()), float(wbt.min()),
        member.at("wbar_t_l2", t_end),
    )


def run_limit_study(ctx: StokesContext, cfg: ModelConfig, eps_values, t_star: float = 1.0,
                    horizon: float = 2.0, jobs: int = 1):
    """ε-sweep; returns ``(LimitStudyResult, members)``.

    ``jobs > 1`` runs members in worker processes; the reduction is order
    independent (members are sorted by eps).
    """
    eps_values = [float(e) for e in eps_values]
    if len(eps_values) < 3:
        raise ValueError("need ≥ 3 eps values")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(_member_job, [(ctx.grid.n, cfg, e, t_star, horizon) for e in eps_values]))
    else:
        members = [run_member(ctx, cfg, e, t_star, horizon) for e in eps_values]
    members.sort(key=lambda m: -m.eps)
    flagged = [m.eps for m in members if m.flag]
    result = rate_fit(
        [m.eps for m in members],
        [m.at("w_l2", t_star) if not m.flag else math.nan for m in members],
        [m.at("wbar_em1", t_star) if not m.flag else math.nan for m in members],
        t_star,
        flagged,
    )
    return result, members


def _member_job(args):
    from .stokes import make_context

    n, cfg, eps, t_star, horizon = args
    return run_member(make_context(n), cfg, eps, t_star, horizon)
