import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elbowid.errors import DomainError, ValidationError
from elbowid.signals import PulseSpec, StepProfile, ZeroProfile, make_pulse
from elbowid.sysid import (DeConfig, ImpedanceEstimate, SinusoidFitPoint, differential_evolution,
                           dominant_component, estimate_inertia, fit_kb, predict_response)
from elbowid.trace import Trace

from oracles import pulse_response, rosenbrock

K0, B0, I0 = 11.65, 0.50, 0.081
MII_PULSE = PulseSpec(20.0, 0.05)


def test_dominant_component_pure_sine():
    t = np.arange(20000) * 1e-3
    f, amp, _ = dominant_component(0.3 * np.sin(2 * np.pi * 5 * t), dt=1e-3)
    assert f == pytest.approx(5.0, rel=5e-3) and amp == pytest.approx(0.3, rel=5e-3)


def test_dominant_component_integer_periods_exact():
    t = np.arange(4000) * 1e-3
    _, amp, phase = dominant_component(1.7 * np.cos(2 * np.pi * 8 * t + 0.4), dt=1e-3)
    assert abs(amp - 1.7) <= 1e-10
    assert phase == pytest.approx(0.4, abs=1e-10)


def test_dominant_component_two_tone_and_trace_input():
    t = np.arange(20000) * 1e-3
    x = np.sin(2 * np.pi * 5 * t) + 0.2 * np.sin(2 * np.pi * 12 * t)
    assert dominant_component(x, dt=1e-3)[0] == pytest.approx(5.0)
    tr = Trace(dt=1e-3, theta=x, tau_ext=np.zeros_like(x))
    assert dominant_component(tr)[0] == pytest.approx(5.0)


def test_dominant_component_errors():
    with pytest.raises(DomainError, match="no dominant component"):
        dominant_component(np.full(100, 2.0), dt=1e-3)
    with pytest.raises(DomainError, match="no dominant component"):
        dominant_component(np.zeros(100), dt=1e-3)
    with pytest.raises(DomainError):
        dominant_component(np.ones(10), dt=1e-3)
    with pytest.raises(DomainError):
        dominant_component(np.ones(100))


def test_estimate_inertia_examples():
    pts = [SinusoidFitPoint(f, 0.081 * 4 * np.pi ** 2 * f ** 2 * 0.01, 0.01) for f in (10, 14, 20)]
    I, curve = estimate_inertia(pts)
    assert I == pytest.approx(0.081, rel=1e-12)
    assert [c[0] for c in curve] == [10, 14, 20]
    x = 4 * np.pi ** 2 * 144 * 0.2
    assert estimate_inertia([SinusoidFitPoint(12, x, 0.2)])[0] == pytest.approx(1.0)


def test_estimate_inertia_cutoff_and_scale():
    pts = [SinusoidFitPoint(2, 5.0, 0.5), SinusoidFitPoint(12, 3.0, 0.01), SinusoidFitPoint(18, 2.0, 0.002)]
    I, curve = estimate_inertia(pts)
    assert len(curve) == 3
    doubled = [SinusoidFitPoint(p.f, 2 * p.T_s, p.A_s) for p in pts]
    assert estimate_inertia(doubled)[0] == pytest.approx(2 * I, rel=1e-12)
    with pytest.raises(DomainError):
        estimate_inertia(pts[:1])
    with pytest.raises(DomainError):
        SinusoidFitPoint(-1.0, 1.0, 1.0)


def test_predict_zero_and_step():
    z = predict_response(K0, B0, I0, ZeroProfile(), duration=1.0)
    assert np.all(z.theta == 0)
    s = predict_response(K0, B0, I0, StepProfile(2.0), duration=10.0)
    assert s.theta[-1] == pytest.approx(2.0 / K0, rel=1e-3)


def test_predict_matches_closed_form_pulse():
    p = make_pulse(MII_PULSE)
    tr = predict_response(K0, B0, I0, p, dt=1e-4, duration=0.5)
    ref = pulse_response(K0, B0, I0, 20.0, 0.05, tr.t)
    assert np.max(np.abs(tr.theta - ref)) <= 1e-6


def test_predict_converges_at_least_second_order():
    p = make_pulse(MII_PULSE)
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        tr = predict_response(K0, B0, I0, p, dt=dt, duration=0.4)
        errs.append(np.max(np.abs(tr.theta - pulse_response(K0, B0, I0, 20.0, 0.05, tr.t))))
    assert errs[0] / errs[1] >= 4 and errs[1] / errs[2] >= 4


def test_predict_validation():
    with pytest.raises(DomainError):
        predict_response(K0, B0, 0.0, ZeroProfile())
    with pytest.raises(DomainError):
        predict_response(K0, B0, I0, ZeroProfile(), duration=0.0)


def test_fit_kb_self_consistency():
    p = make_pulse(MII_PULSE)
    est = fit_kb(predict_response(K0, B0, I0, p, duration=0.5), p, I0)
    assert est.K == pytest.approx(K0, rel=5e-3) and est.B == pytest.approx(B0, rel=5e-3)
    assert est.residual < 1e-8 and not est.bound_limited and not est.degenerate
    assert est.fit_window == pytest.approx((0.0, 0.4))


def test_fit_kb_flags_bound_limited():
    p = make_pulse(MII_PULSE)
    est = fit_kb(predict_response(K0, B0, I0, p, duration=0.5), p, I0, bounds=((0, 8), (0, 2)))
    assert est.bound_limited and est.K == pytest.approx(8.0, abs=0.08)


def test_fit_kb_degenerate_input():
    p = make_pulse(MII_PULSE)
    tr = Trace(dt=1e-3, theta=np.zeros(500), tau_ext=np.zeros(500))
    est = fit_kb(tr, p, I0)
    assert est.degenerate and np.isnan(est.K) and np.isnan(est.B)


def test_estimate_json_round_trip():
    est = ImpedanceEstimate(11.6, 0.49, 0.081, 1e-4, (0.0, 0.4), ((0, 300), (0, 10)), True, 42)
    assert ImpedanceEstimate.from_json(est.to_json()) == est
    deg = ImpedanceEstimate(float("nan"), float("nan"), 0.081, float("nan"), (0.0, 0.4), ((0, 1), (0, 1)),
                            degenerate=True)
    j = deg.to_json()
    assert j["K"] is None and ImpedanceEstimate.from_json(j).degenerate


def test_de_sphere():
    c = np.array([1.3, -0.7])
    res = differential_evolution(lambda x: float(np.sum((x - c) ** 2)), [(-5, 5), (-5, 5)])
    assert np.max(np.abs(res.x - c)) <= 1e-6


def test_de_rosenbrock_vectorized():
    res = differential_evolution(rosenbrock, [(-5, 5), (-5, 5)], DeConfig(max_generations=1000),
                                 vectorized=True)
    assert np.max(np.abs(res.x - 1.0)) <= 1e-3


def test_de_determinism_and_monotone_history():
    cfg = DeConfig(seed=9, max_generations=50)
    a = differential_evolution(rosenbrock, [(-5, 5), (-5, 5)], cfg, vectorized=True)
    b = differential_evolution(rosenbrock, [(-5, 5), (-5, 5)], cfg, vectorized=True)
    assert np.array_equal(a.x, b.x) and a.fun == b.fun and a.generations == b.generations
    assert all(y <= x for x, y in zip(a.best_history, a.best_history[1:]))


def test_de_validation():
    for bad in (DeConfig(population_size=3), DeConfig(crossover_rate=0.0), DeConfig(mutation=(0.5, 2.5))):
        with pytest.raises(ValidationError):
            bad.validate()
    with pytest.raises(DomainError):
        differential_evolution(rosenbrock, [(0, 0), (0, 1)], vectorized=True)


@settings(max_examples=8, deadline=None)
@given(K=st.floats(5, 150), B=st.floats(0.1, 5))
def test_fit_kb_round_trip_property(K, B):
    p = make_pulse(MII_PULSE)
    est = fit_kb(predict_response(K, B, I0, p, duration=0.5), p, I0)
    assert est.K == pytest.approx(K, rel=5e-3) and est.B == pytest.approx(B, rel=5e-3)
