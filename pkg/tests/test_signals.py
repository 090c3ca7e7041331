import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elbowid.errors import ValidationError
from elbowid.signals import (PulseProfile, PulseSpec, SineSpec, StepProfile, SumProfile, ZeroProfile,
                             make_pulse, make_sine, profile_from_json)
from elbowid.sysid import dominant_component


def test_pulse_values_at_sample_times():
    p = make_pulse(PulseSpec(20.0, 0.05, onset=0.5, first_polarity=1))
    assert p(0.52) == 20.0
    assert p(0.57) == -20.0
    assert p(0.7) == 0.0
    assert p(0.49) == 0.0
    assert p.support == (0.5, 0.6)


def test_pulse_negative_first_polarity():
    p = make_pulse(PulseSpec(40.0, 0.05, first_polarity=-1))
    assert p(0.01) == -40.0 and p(0.06) == 40.0
    assert np.max(np.abs(p.sample(0.0, 1e-3, 200))) == 40.0


@given(amp=st.floats(0.1, 100.0), half=st.floats(0.04, 0.5), onset=st.floats(0.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_pulse_integrates_to_zero(amp, half, onset):
    p = make_pulse(PulseSpec(amp, half, onset))
    # snap to a grid on which both edges fall between samples symmetrically
    n = 20000
    t = np.linspace(onset, onset + 2 * half, n, endpoint=False) + half / n
    assert abs(np.mean(p(t))) < 1e-9 * amp


def test_pulse_on_step_grid_has_zero_impulse():
    p = make_pulse(PulseSpec(20.0, 0.05, 0.5))
    assert p.sample(0.0, 1e-3, 1000).sum() == 0.0


@pytest.mark.parametrize("half", [0.01, 0.02, 0.039])
def test_short_pulse_rejected_with_refresh_message(half):
    with pytest.raises(ValidationError, match="0.02 s"):
        make_pulse(PulseSpec(20.0, half))


def test_pulse_spec_validation():
    with pytest.raises(ValidationError):
        make_pulse(PulseSpec(0.0, 0.05))
    with pytest.raises(ValidationError):
        make_pulse(PulseSpec(20.0, 0.05, first_polarity=0))
    make_pulse(PulseSpec(20.0, 0.04))  # exactly two refresh periods is allowed
    assert PulseSpec(20.0, 0.05).duration == pytest.approx(0.1)


def test_sine_values():
    s = make_sine(SineSpec(2.0, 10.0, 20.0))
    assert s(0.125) == pytest.approx(10.0, abs=1e-12)
    assert s(0.0) == 0.0
    t = np.arange(0, 1.0, 1e-4)  # two whole cycles
    assert abs(np.mean(s(t))) < 1e-12
    assert s(20.0) == 0.0


def test_sine_needs_ten_cycles():
    with pytest.raises(ValidationError):
        make_sine(SineSpec(2.0, 10.0, 4.0))
    with pytest.raises(ValidationError):
        make_sine(SineSpec(0.0, 10.0, 20.0))
    make_sine(SineSpec(2.0, 10.0, 5.0))


@pytest.mark.parametrize("f", [2.0, 7.0, 13.0, 20.0])
def test_sine_dominant_frequency(f):
    s = make_sine(SineSpec(f, 10.0, 20.0))
    tau = s.sample(0.0, 1e-3, 20000)
    f_hat, amp, _ = dominant_component(tau, 1e-3)
    assert f_hat == pytest.approx(f)
    assert amp == pytest.approx(10.0, rel=1e-9)


def test_profiles_zero_outside_support():
    for p in (make_pulse(PulseSpec(5.0, 0.05, 1.0)), make_sine(SineSpec(5.0, 1.0, 2.0)),
              StepProfile(3.0, 0.5, 0.8), ZeroProfile()):
        assert p(-1.0) == 0.0
        assert p(100.0) == 0.0


def test_sum_profile_adds():
    a, b = make_pulse(PulseSpec(5.0, 0.05, 0.0)), StepProfile(1.0, 0.0, 1.0)
    s = SumProfile(a, b)
    t = np.linspace(0, 1.2, 97)
    assert np.array_equal(s(t), a(t) + b(t))
    assert s.support == (0.0, 1.0)


@pytest.mark.parametrize("profile", [
    make_pulse(PulseSpec(20.0, 0.05, 0.5, -1)),
    make_sine(SineSpec(3.0, 10.0, 20.0)),
    StepProfile(2.0, 0.1, 0.9),
    ZeroProfile(),
    SumProfile(make_pulse(PulseSpec(40.0, 0.05, 1.0)), make_pulse(PulseSpec(40.0, 0.05, 3.0, -1))),
])
def test_profile_json_round_trip(profile):
    obj = json.loads(json.dumps(profile.to_json()))
    assert set(obj) == {"kind", "parameters"}
    back = profile_from_json(obj)
    t = np.linspace(-0.5, 5.0, 1001)
    assert np.array_equal(back(t), profile(t))


def test_unknown_profile_kind():
    with pytest.raises(ValidationError):
        profile_from_json({"kind": "chirp", "parameters": {}})


def test_pulse_profile_direct_construction_skips_validation():
    # the fitter builds onset-relative copies of already validated pulses
    p = PulseProfile(PulseSpec(20.0, 0.05))
    assert p(0.0) == 20.0
