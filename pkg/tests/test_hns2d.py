import math

import numpy as np
import pytest

from hyperns.grids import VelocityField, discrete_divergence, divergence_residual
from hyperns.hns2d import (
    Forcing,
    HnsState,
    JeffreyState,
    LimitState,
    ModelConfig,
    PenalizedState,
    _relaxation_weights,
    convection,
    hns_rhs,
    hns_step,
    initial_state,
    is_oscillatory,
    jeffrey_step,
    make_forcing,
    ns_limit_step,
    penalized_dt_bound,
    penalized_step,
    run_model,
    scalar_mode_solution,
    time_derivative_initial,
)
from hyperns.stokes import random_solenoidal


def _zero(ctx):
    return VelocityField.zeros(ctx.grid)


def _smooth(ctx):
    return VelocityField.from_stream_function(
        ctx.grid, lambda x, y: np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y) ** 2
    )


# -- closed forms ---------------------------------------------------------------

@pytest.mark.parametrize("eps,lam", [(1.0, 52.0), (0.01, 52.0), (1 / (4 * 52.0), 52.0), (0.002, 10.0)])
def test_scalar_mode_solution_matches_integrator(eps, lam):
    from scipy.integrate import solve_ivp

    t = np.linspace(0, 1, 51)
    ref = solve_ivp(lambda _, s: [s[1], -(s[1] + lam * s[0]) / eps], (0, 1), [1.3, -0.7],
                    method="Radau", t_eval=t, rtol=1e-11, atol=1e-13)
    y = scalar_mode_solution(eps, lam, 1.3, -0.7, t)
    np.testing.assert_allclose(y, ref.y[0], atol=1e-8)


def test_is_oscillatory():
    assert is_oscillatory(1.0, 52.0)
    assert not is_oscillatory(1e-3, 52.0)


# -- right-hand side ------------------------------------------------------------

def test_rhs_of_zero_is_forcing(ctx16):
    g = make_forcing(ctx16, {"kind": "vortex", "amplitude": 3.0})
    st = HnsState(_zero(ctx16), _zero(ctx16), g, 0.1)
    assert (hns_rhs(ctx16, st) - g.at(0.0)).norm() <= 1e-12 * 3.0
    assert (time_derivative_initial(ctx16, _zero(ctx16), g) - g.at(0.0)).norm() <= 1e-12 * 3.0


def test_rhs_is_solenoidal_and_convection_skew(ctx16, rng):
    for _ in range(5):
        u = 3.0 * random_solenoidal(ctx16, rng, smooth=True)
        st = HnsState(u, _zero(ctx16), _zero(ctx16), 0.1)
        assert divergence_residual(hns_rhs(ctx16, st)) < 1e-9
        c = ctx16.project(convection(u))
        h1 = math.sqrt(u.dot(ctx16.apply(u)))
        assert abs(c.dot(u)) <= 1e-8 * h1**3


def test_manufactured_equilibrium(ctx16):
    ustar = _smooth(ctx16)
    g_lin = ctx16.apply(ustar)
    st = HnsState(ustar.copy(), _zero(ctx16), g_lin, 0.05)
    for _ in range(10):
        st = hns_step(ctx16, st, 0.01, nonlinear=False)
    assert (st.u - ustar).norm() <= 1e-8 * ustar.norm()
    lst = LimitState(ustar.copy(), g_lin)
    for _ in range(10):
        lst = ns_limit_step(ctx16, lst, 0.01, nonlinear=False)
    assert (lst.v - ustar).norm() <= 1e-8 * ustar.norm()
    g_full = g_lin + ctx16.project(convection(ustar))
    assert time_derivative_initial(ctx16, ustar, g_full).norm() <= 1e-9 * g_full.norm()


def test_time_derivative_matches_one_step(ctx16):
    v0 = 2.0 * _smooth(ctx16)
    g = make_forcing(ctx16, {"kind": "vortex", "amplitude": 10.0})
    vp = time_derivative_initial(ctx16, v0, g)
    errs = []
    for dt in (1e-3, 5e-4):
        v1 = ns_limit_step(ctx16, LimitState(v0.copy(), g), dt).v
        errs.append(((v1 - v0) / dt - vp).norm())
    assert errs[1] < errs[0] and errs[0] / errs[1] == pytest.approx(2.0, rel=0.2)


# -- steppers ---------------------------------------------------------------------

def test_zero_trajectories(ctx16):
    z = _zero(ctx16)
    st = hns_step(ctx16, HnsState(z, z, z, 0.1), 0.01)
    assert st.u.norm() == st.ut.norm() == 0
    js = jeffrey_step(ctx16, JeffreyState.at_rest_stress(z, 0.1), 0.01)
    assert js.u.norm() == 0 and js.stress_norm_sq() == 0
    ps = penalized_step(ctx16, PenalizedState(z, z, 0.1, 0.1), 0.01)
    assert ps.u.norm() == 0


def test_linear_eigenmode_oracle(ctx16):
    lam, v1 = ctx16.eigenpair()
    eps, T = 0.1, 0.5
    errs = []
    for dt in (0.01, 0.005):
        st = HnsState(v1.copy(), _zero(ctx16), _zero(ctx16), eps)
        for _ in range(int(round(T / dt))):
            st = hns_step(ctx16, st, dt, nonlinear=False)
        errs.append(abs(st.u.dot(v1) - scalar_mode_solution(eps, lam, 1.0, 0.0, T)))
    assert 3.6 <= errs[0] / errs[1] <= 4.4


def test_limit_energy_decreases_without_forcing(ctx16, rng):
    st = LimitState(5.0 * random_solenoidal(ctx16, rng, smooth=True), _zero(ctx16))
    prev = st.v.norm()
    for _ in range(50):
        st = ns_limit_step(ctx16, st, 0.005)
        cur = st.v.norm()
        assert cur <= prev + 1e-10
        prev = cur


def test_limit_dissipative_envelope(ctx16):
    cfg = ModelConfig(model="limit", n=16, horizon=3.0, initial={"kind": "vortex", "amplitude": 20.0},
                      forcing={"kind": "vortex", "amplitude": 100.0}, sample_stride=5)
    rep = run_model(ctx16, "limit", cfg).energy_report()
    assert rep.fitted_alpha > 0


def test_jeffrey_relaxation_weights():
    for dt, eps in ((0.01, 1.0), (0.1, 1e-3), (1e-9, 1.0)):
        a, b, c = _relaxation_weights(dt, eps)
        assert a == pytest.approx(math.exp(-dt / eps))
        assert a + b + c == pytest.approx(1.0, abs=1e-14)


def test_jeffrey_frozen_velocity_oracle(ctx16):
    from hyperns import kernels

    u = _smooth(ctx16)
    eps = 0.2
    st = JeffreyState(u, *[np.random.default_rng(3).standard_normal(s) for s in
                           ((16, 16), (16, 16), (17, 17))], eps)
    s0 = (st.s11.copy(), st.s22.copy(), st.s12.copy())
    gam = kernels.strain_rate(u.u1, u.u2, ctx16.grid.h)
    dt, n = 0.03, 10
    for _ in range(n):
        st = jeffrey_step(ctx16, st, dt, frozen_u=True)
    decay = math.exp(-n * dt / eps)
    for got, init, gm in zip((st.s11, st.s22, st.s12), s0, gam):
        expect = decay * init + (1 - decay) * gm
        assert np.max(np.abs(got - expect)) <= 1e-10 * max(1.0, np.max(np.abs(expect)))


def test_penalized_compressibility_decay(ctx16):
    g = ctx16.grid
    u0 = VelocityField.from_functions(g, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), lambda x, y: 0 * x)
    d0 = discrete_divergence(u0).norm()
    for alpha in (0.1, 0.05):
        st = PenalizedState(u0, _zero(ctx16), 1e-3, alpha)
        dt = penalized_dt_bound(g.h, 1e-3, alpha)
        hit = None
        while st.t < alpha and hit is None:
            st = penalized_step(ctx16, st, dt, nonlinear=False)
            if discrete_divergence(st.u).norm() < d0 / 10:
                hit = st.t
        assert hit is not None and hit <= alpha


# -- configuration and driver --------------------------------------------------

def test_rotating_forcing_is_periodic(ctx16):
    g = make_forcing(ctx16, {"kind": "rotating", "amplitude": 2.0, "omega": 2 * math.pi})
    assert not g.is_constant
    assert (g.at(0.25) - g.at(1.25)).norm() < 1e-12
    assert g.at(0.0).norm() == pytest.approx(2.0, rel=1e-2)
    assert isinstance(g, Forcing)


def test_unknown_kinds_rejected(ctx16):
    with pytest.raises(ValueError):
        ModelConfig(model="euler")
    with pytest.raises(ValueError, match="unknown forcing kind"):
        make_forcing(ctx16, {"kind": "swirl", "amplitude": 1.0})
    with pytest.raises(ValueError, match="unknown ut kind"):
        initial_state(ctx16, ModelConfig(n=16, initial={"kind": "vortex", "ut": "wild"}))


def test_orbit_initial_state_is_periodic_start(ctx16):
    cfg = ModelConfig(n=16, initial={"kind": "orbit", "spinup": 1.0},
                      forcing={"kind": "rotating", "amplitude": 20.0, "omega": 4 * math.pi})
    a, _ = initial_state(ctx16, cfg)
    cfg2 = ModelConfig(n=16, initial={"kind": "orbit", "spinup": 1.5},
                       forcing={"kind": "rotating", "amplitude": 20.0, "omega": 4 * math.pi})
    b, _ = initial_state(ctx16, cfg2)
    assert (a.u - b.u).norm() <= 1e-6 * a.u.norm()


def test_horizon_zero_gives_single_sample(ctx16):
    tr = run_model(ctx16, "hyperbolic", ModelConfig(n=16, horizon=0.0))
    assert len(tr.rows) == 1 and tr.rows[0][0] == 0.0


@pytest.mark.parametrize("model", ["hyperbolic", "limit", "jeffrey", "penalized"])
def test_runs_are_deterministic(ctx16, model):
    cfg = ModelConfig(model=model, n=16, horizon=0.05, initial={"kind": "random", "amplitude": 1.0},
                      sample_stride=2, seed=7)
    a = list(run_model(ctx16, model, cfg).csv_rows())
    b = list(run_model(ctx16, model, cfg).csv_rows())
    assert a == b and len(a) > 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_is_flagged_not_raised(ctx16):
    cfg = ModelConfig(model="hyperbolic", n=16, eps=1.0, horizon=0.5, dt_rule=0.05,
                      initial={"kind": "random", "amplitude": 1e4}, sample_stride=1)
    tr = run_model(ctx16, "hyperbolic", cfg)
    assert tr.flag and "blow-up" in tr.flag
    assert tr.rows[-1][5] == tr.flag
