import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mrisr.errors import StepFailure
from mrisr.integrator import (IntegrationRecord, NewtonConfig, SplitIVP,
                              StepStats, integrate_fixed, solve_fast_ivp,
                              step)
from mrisr.rk import inner_method
from mrisr.tableau import BUILTIN_NAMES, load_builtin


def _linear_problem(lamF=-4.0, lamE=-0.9, lamI=-1.7):
    return SplitIVP(dim=1,
                    fF=lambda t, y: lamF * y,
                    fE=lambda t, y: lamE * y,
                    fI=lambda t, y: lamI * y,
                    y0=np.array([1.0]))


def _nonstiff_problem():
    # y' = -y (fast) + cos t (explicit) + -0.5 y (implicit)
    return SplitIVP(dim=1,
                    fF=lambda t, y: -1.0 * y,
                    fE=lambda t, y: np.array([math.cos(t)]),
                    fI=lambda t, y: -0.5 * y,
                    y0=np.array([1.0]))


def _dirk_step(t, lams, H, y0=1.0):
    """Zero-fast limit: the slow update reduces to the base IMEX pair."""
    from mrisr.theory import base_ark
    ark = base_ark(t)
    s = len(ark.c)
    AE = np.array([[float(x) for x in r] for r in ark.AE])
    AI = np.array([[float(x) for x in r] for r in ark.AI])
    zE, zI = lams[0] * H, lams[1] * H
    Y = np.linalg.solve(np.eye(s) - zE * AE - zI * AI, np.full(s, y0))
    return Y[-1]


_INNER_BY = {2: "heun", 3: "bogacki-shampine", 4: "zonneveld"}


def _inner_for(name):
    from mrisr.theory import method_order
    p = method_order(load_builtin(name), 6)
    return inner_method(_INNER_BY[min(p, 4)])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_zero_fast_limit_matches_base_imex_pair(name):
    # fF = 0 collapses the fast solves; the step is the base ARK pair,
    # provided the inner method integrates the tendency polynomials exactly
    t = load_builtin(name)
    inner = {1: "heun", 2: "heun", 3: "bogacki-shampine",
             4: "zonneveld"}[t.n_omega]
    lamE, lamI = -0.8, -1.1
    p = SplitIVP(dim=1, fF=lambda tt, y: 0.0 * y,
                 fE=lambda tt, y: lamE * y, fI=lambda tt, y: lamI * y,
                 y0=np.array([1.0]))
    H = 0.3
    y1, _, _ = step(p, t, inner_method(inner), p.y0, 0.0, H, 3,
                    stats=StepStats(), want_embedded=False)
    assert y1[0] == pytest.approx(_dirk_step(t, (lamE, lamI), H), abs=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_convergence_order_on_linear_problem(name):
    t = load_builtin(name)
    inner = _inner_for(name)
    from mrisr.theory import method_order
    p_ord = method_order(t, inner.order)
    prob = _linear_problem()
    lam = -4.0 - 0.9 - 1.7
    exact = math.exp(lam * 1.0)
    errs = []
    Hs = [0.1 * 2.0 ** (-k) for k in range(4)]
    for H in Hs:
        rec = integrate_fixed(prob, t, inner, 1.0, H, 10)
        errs.append(abs(rec.y[-1][0] - exact))
    slope = np.polyfit(np.log(Hs), np.log(errs), 1)[0]
    assert slope > p_ord - 0.5


def test_fast_limit_exponential():
    # pure fast problem: the step reduces to M inner-RK substeps of y' = -y
    t = load_builtin("imex-mri-sr21")
    p = SplitIVP(dim=1, fF=lambda tt, y: -1.0 * y,
                 fE=lambda tt, y: 0.0 * y, fI=lambda tt, y: 0.0 * y,
                 y0=np.array([1.0]))
    y1, _, _ = step(p, t, inner_method("zonneveld"), p.y0, 0.0, 1.0, 50,
                    stats=StepStats(), want_embedded=False)
    assert y1[0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_solve_fast_ivp_polynomial_forcing_exact():
    # v' = 3 theta^2 with fF = 0 is integrated exactly by a second-order RK
    p = SplitIVP(dim=1, fF=lambda tt, y: 0.0 * y,
                 fE=lambda tt, y: 0.0 * y, fI=lambda tt, y: 0.0 * y,
                 y0=np.array([0.0]))
    v = solve_fast_ivp(p, lambda th: np.array([3.0 * th ** 2]), 0.0, 1.0,
                       np.array([0.0]), inner_method("bogacki-shampine"), 4)
    assert v[0] == pytest.approx(1.0, abs=1e-14)


def test_step_stats_counts():
    t = load_builtin("imex-mri-sr21")
    p = _nonstiff_problem()
    stats = StepStats()
    step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 4, stats=stats)
    assert stats.slow_e_evals == 3  # s - 1 stages
    # fI is also evaluated inside each Newton residual
    assert stats.slow_i_evals >= 3
    assert stats.fast_f_evals > 0
    assert stats.implicit_solves == 3  # nonzero diagonal gamma rows


def test_pinned_step_values():
    # frozen one-step outputs on the coupled benchmark initial data
    from mrisr.problems import kpr_problem
    p = kpr_problem()
    t = load_builtin("imex-mri-sr21")
    y1, yhat, _ = step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 5,
                       stats=StepStats())
    assert y1 == pytest.approx([1.6081771001298533, 1.7306843270610364],
                               abs=1e-12)
    assert yhat == pytest.approx([1.6081768124357632, 1.7303370608596722],
                                 abs=1e-12)
    t = load_builtin("merk3")
    y1, yhat, _ = step(p, t, inner_method("bogacki-shampine"), p.y0, 0.0,
                       0.1, 5, stats=StepStats())
    assert yhat is None
    assert y1 == pytest.approx([1.6074465250452463, 1.730611015284307],
                               abs=1e-12)


def test_embedding_pass_is_optional():
    t = load_builtin("imex-mri-sr21")
    p = _nonstiff_problem()
    s1, s2 = StepStats(), StepStats()
    step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 4, stats=s1,
         want_embedded=False)
    step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 4, stats=s2,
         want_embedded=True)
    assert s2.fast_f_evals > s1.fast_f_evals


def test_substep_counts_scale_with_abscissae():
    # stage with c = 17/15 > 1 must take ceil(c*M) substeps
    t = load_builtin("imex-mri-sr32")
    p = _nonstiff_problem()
    stats = StepStats()
    step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 15, stats=stats,
         want_embedded=False)
    c = [float(x) for x in t.c]
    expect = sum(max(1, math.ceil(ci * 15)) for ci in c[1:]) * 2
    assert stats.fast_f_evals == expect


def test_integrate_fixed_validates_schedule():
    t = load_builtin("imex-mri-sr21")
    p = _nonstiff_problem()
    with pytest.raises(ValueError):
        integrate_fixed(p, t, inner_method("heun"), 1.0, 0.3, 4)
    with pytest.raises(ValueError):
        integrate_fixed(p, t, inner_method("heun"), 1.0, 0.25, 4,
                        sample_points=[0.1])


def test_integrate_fixed_samples_and_accuracy():
    t = load_builtin("imex-mri-sr32")
    p = _nonstiff_problem()
    pts = [0.25, 0.5, 0.75, 1.0]
    rec = integrate_fixed(p, t, inner_method("bogacki-shampine"), 1.0,
                          0.0125, 8, sample_points=pts)
    assert rec.t == pts
    ref = solve_ivp(lambda tt, y: -1.5 * y + math.cos(tt), (0, 1), [1.0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    for ts, ys in zip(rec.t, rec.y):
        assert ys[0] == pytest.approx(ref.sol(ts)[0], abs=5e-8)


def test_step_failure_reports_stage():
    # an implicit RHS whose Newton solve cannot converge
    p = SplitIVP(dim=1, fF=lambda tt, y: 0.0 * y,
                 fE=lambda tt, y: 0.0 * y,
                 fI=lambda tt, y: np.array([float("nan")]),
                 y0=np.array([1.0]))
    t = load_builtin("imex-mri-sr21")
    with pytest.raises(StepFailure):
        step(p, t, inner_method("heun"), p.y0, 0.0, 0.1, 2,
             stats=StepStats())


def test_integrate_fixed_partial_record_on_failure():
    seen = {"n": 0}

    def fF(tt, y):
        seen["n"] += 1
        return np.array([math.inf]) if tt > 0.5 else -y

    p = SplitIVP(dim=1, fF=fF, fE=lambda tt, y: 0.0 * y,
                 fI=lambda tt, y: 0.0 * y, y0=np.array([1.0]))
    t = load_builtin("imex-mri-sr21")
    rec = integrate_fixed(p, t, inner_method("heun"), 1.0, 0.25, 4)
    assert rec.failed and "stage" in rec.failure
    assert rec.accepted < 4
