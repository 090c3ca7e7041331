import json
from dataclasses import replace

import numpy as np
import pytest

from elbowid.errors import DomainError, ValidationError
from elbowid.plant import PlantConfig
from elbowid.policy import PolicyParams
from elbowid.protocols import (DEG, ControllerSpec, Movement, default_spec, difference_trace, mean_trace,
                               run, run_dii, run_ie, run_mii, run_sii, save_report)
from elbowid.signals import PulseSpec, make_pulse
from elbowid.sysid import predict_response
from elbowid.trace import Trace, read_csv


def _trace(theta, dt=1e-3, origin=0.0):
    theta = np.asarray(theta, float)
    return Trace(dt=dt, theta=theta, tau_ext=np.zeros_like(theta), origin_time=origin)


def test_mean_trace_examples():
    x = np.sin(np.linspace(0, 3, 50))
    assert np.array_equal(mean_trace([_trace(x)]).theta, x)
    assert np.all(mean_trace([_trace(x), _trace(-x)]).theta == 0)
    assert np.allclose(mean_trace([_trace(x)] * 5).theta, x, rtol=0, atol=1e-15)
    with pytest.raises(DomainError):
        mean_trace([_trace(x), _trace(x[:-1])])
    with pytest.raises(DomainError):
        mean_trace([_trace(x), _trace(x, dt=2e-3)])
    with pytest.raises(DomainError):
        mean_trace([])


def test_difference_trace_examples():
    rng = np.random.default_rng(0)
    ref = _trace(1.0 + np.cumsum(rng.standard_normal(1000)) * 1e-3)
    zero = difference_trace(ref, ref, 0.3)
    assert np.all(zero.theta == 0) and len(zero) == 700 and zero.origin_time == 0.0

    p = make_pulse(PulseSpec(20, 0.05))
    resp = predict_response(30.0, 1.0, 0.081, p, dt=1e-3, duration=0.5).theta
    pert = ref.theta.copy()
    pert[300:801] += resp
    diff = difference_trace(_trace(pert), ref, 0.3)
    assert diff.theta[0] == 0.0
    assert np.max(np.abs(diff.theta[:501] - resp)) <= 1e-12
    with pytest.raises(DomainError):
        difference_trace(_trace(pert[:-1]), ref, 0.3)
    with pytest.raises(DomainError):
        difference_trace(_trace(pert, origin=1.0), ref, 1.2)


def test_movement_reference():
    mv = Movement()
    assert mv.reference(0.0) == 0.0
    assert mv.reference(mv.flexion_start + mv.duration) == pytest.approx(150 * DEG)
    assert mv.reference(mv.total) == pytest.approx(0.0, abs=1e-12)
    f, e = mv.onsets()
    assert mv.reference(f) == pytest.approx(75 * DEG) and mv.reference(e) == pytest.approx(75 * DEG)
    t = np.linspace(0, mv.total, 2001)
    r = mv.reference(t)
    assert r.min() >= 0 and r.max() <= 150 * DEG + 1e-12


def test_spec_validation():
    assert len(default_spec("SII").targets) == 16
    default_spec("DII").validate()
    with pytest.raises(ValidationError):
        default_spec("IE", controller=ControllerSpec("pd", kp=10)).validate()
    with pytest.raises(ValidationError):
        default_spec("MII", pulse=PulseSpec(20, 0.01, 0.5)).validate()
    with pytest.raises(ValidationError):
        default_spec("SII", targets=()).validate()
    with pytest.raises(ValidationError):
        default_spec("MII", trials=0).validate()
    with pytest.raises(ValidationError):
        default_spec("XX")
    with pytest.raises(ValidationError):
        ControllerSpec("policy", policy_path="/nonexistent/policy.json").validate()


def test_ie_scales_with_inertia():
    freqs = (10.0, 15.0, 20.0)
    a = run_ie(default_spec("IE", frequencies=freqs, sine_duration=5.0))
    # scaling I, K and B together halves the response exactly, so the estimate doubles
    base = PlantConfig()
    doubled = replace(base, inertia_I=2 * base.inertia_I, passive_K=2 * base.passive_K,
                      passive_B=2 * base.passive_B)
    b = run_ie(default_spec("IE", frequencies=freqs, sine_duration=5.0, plant=doubled))
    assert b.estimates["inertia"] / a.estimates["inertia"] == pytest.approx(2.0, rel=1e-9)
    assert [p["f"] for p in a.estimates["points"]] == list(freqs)


def test_ie_flags_low_frequency_limit_hits():
    rep = run_ie(default_spec("IE", frequencies=(2.0, 12.0), sine_duration=5.0))
    assert any("2 Hz" in f for f in rep.flags)
    assert [p["f"] for p in rep.estimates["points"]] == [12.0]


def test_mii_trials_identical_and_reproducible():
    spec = default_spec("MII", trials=3)
    rep = run_mii(spec)
    trials = list(rep.trials.values())
    for tr in trials[1:]:
        assert np.array_equal(tr.theta, trials[0].theta)
    assert np.allclose(rep.mean_traces["mii_mean"].theta, trials[0].theta, rtol=0, atol=1e-15)
    assert run(spec).content_hash() == rep.content_hash()
    human = rep.to_json()["baselines"]["human_static"]
    assert (human["K"], human["B"]) == (60.0, 0.6)


def test_sii_passive_at_equilibrium_matches_mii():
    eq = PlantConfig().equilibrium_angle
    mii = run_mii(default_spec("MII", trials=1)).estimates["estimate"]
    sii = run_sii(default_spec("SII", trials=1, targets=(eq,)))
    est = sii.estimates["per_target"][0]["estimate"]
    assert est["K"] == pytest.approx(mii["K"], rel=0.02)
    assert est["B"] == pytest.approx(mii["B"], rel=0.05)
    assert sii.baselines["passive"] == {"K": 11.65, "B": 0.5}


def test_sii_rejects_unsettled_holds():
    # a relaxed elbow away from its equilibrium drifts: every redraw fails
    rep = run_sii(default_spec("SII", trials=1, targets=(2.0,), max_redraws=2))
    row = rep.estimates["per_target"][0]
    assert row["estimate"] is None and row["rejections"] == 3
    assert any("not settled" in f for f in rep.flags) and any("no estimate" in f for f in rep.flags)


def test_dii_zero_amplitude_is_degenerate():
    ctrl = ControllerSpec("policy", deterministic=True, policy=PolicyParams.zeros())
    rep = run_dii(default_spec("DII", trials=2, controller=ctrl, pulse=PulseSpec(0.0, 0.05)))
    for phase in ("flexion", "extension"):
        assert rep.estimates[phase]["degenerate"] and rep.estimates[phase]["K"] is None
        assert np.all(rep.mean_traces[f"dii_{phase}_difference"].theta == 0)
    assert len(rep.flags) == 2
    json.dumps(rep.to_json(), allow_nan=False)


def test_save_report_layout(tmp_path):
    rep = run_mii(default_spec("MII", trials=2))
    path = save_report(rep, tmp_path / "run")
    data = json.loads(path.read_text())
    assert data == json.loads(json.dumps(rep.to_json()))
    for rel in data["trial_files"] + data["mean_trace_files"]:
        tr = read_csv(tmp_path / "run" / rel)
        assert len(tr) == len(rep.trials["mii_trial00"])
    for rel in data["plot_files"]:
        assert (tmp_path / "run" / rel).read_text().startswith("t,measured,predicted")
    again = save_report(run_mii(default_spec("MII", trials=2)), tmp_path / "again")
    assert again.read_bytes() == path.read_bytes()
