"""The four identification experiments and their reports.

IE   inertia from steady sinusoidal torque trials on the relaxed elbow.
MII  stiffness/viscosity of the relaxed elbow from bi-polar torque pulses.
SII  stiffness/viscosity while a controller holds a series of target angles.
DII  stiffness/viscosity during flexion/extension movements, identified
     from the difference between perturbed and unperturbed mean traces.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from elbowid import baselines as baseline_data
from elbowid.control import PassiveController, PdConfig, PdController, PolicyController
from elbowid.errors import DomainError, ValidationError
from elbowid.plant import PlantConfig, PlantState, run_batch
from elbowid.policy import PolicyParams
from elbowid.signals import (PulseProfile, PulseSpec, SineSpec, SumProfile, TorqueProfile,
                             ZeroProfile, make_pulse, make_sine)
from elbowid.sysid import (DEFAULT_BOUNDS, DeConfig, ImpedanceEstimate, SinusoidFitPoint,
                           dominant_component, estimate_inertia, fit_kb, predict_response)
from elbowid.trace import Trace, write_csv

log = logging.getLogger(__name__)

KINDS = ("IE", "MII", "SII", "DII")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
DEG = math.pi / 180.0


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "passive"             # passive | pd | policy
    kp: float = 0.0
    kd: float = 0.0
    latency: float = 0.0
    cocontraction_baseline: float = 0.0
    policy_path: Optional[str] = None
    deterministic: bool = False
    policy: Optional[PolicyParams] = field(default=None, compare=False, repr=False)

    def validate(self) -> "ControllerSpec":
        if self.kind not in ("passive", "pd", "policy"):
            raise ValidationError(f"unknown controller kind {self.kind!r}")
        if self.kind == "policy" and self.policy is None:
            if not self.policy_path or not Path(self.policy_path).exists():
                raise ValidationError(f"policy file {self.policy_path!r} does not exist")
        return self

    def build(self, plant: PlantConfig):
        self.validate()
        if self.kind == "passive":
            return PassiveController()
        if self.kind == "pd":
            return PdController(PdConfig(self.kp, self.kd, self.latency, self.cocontraction_baseline), plant)
        params = self.policy if self.policy is not None else PolicyParams.load(self.policy_path)
        return PolicyController(params, self.deterministic)

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "pd":
            d.update(kp=self.kp, kd=self.kd, latency=self.latency,
                     cocontraction_baseline=self.cocontraction_baseline)
        if self.kind == "policy":
            params = self.policy if self.policy is not None else PolicyParams.load(self.policy_path)
            blob = json.dumps(params.to_json(), sort_keys=True).encode()
            d.update(deterministic=self.deterministic,
                     policy_sha256=hashlib.sha256(blob).hexdigest())
        return d


@dataclass(frozen=True)
class Movement:
    # the default duration keeps the peak reference speed (1.875 * span / duration,
    # 1.23 rad/s) well under what the activated plant can reach (~1.7 rad/s: the
    # intrinsic stiffness about the lagging operating point drags like a
    # kappa * op_point_tau damper); faster movements saturate the agonists
    start: float = 0.0
    end: float = 150 * DEG
    duration: float = 4.0
    hold_before: float = 0.5
    hold_between: float = 1.5
    hold_after: float = 1.5
    onset_fraction: float = 0.5

    @property
    def flexion_start(self) -> float:
        return self.hold_before

    @property
    def extension_start(self) -> float:
        return self.hold_before + self.duration + self.hold_between

    @property
    def total(self) -> float:
        return self.extension_start + self.duration + self.hold_after

    def reference(self, t):
        """Minimum-jerk out-and-back reference angle at time ``t``."""
        t = np.asarray(t, dtype=float)

        def mj(s):
            s = np.clip(s, 0.0, 1.0)
            return s ** 3 * (10 - 15 * s + 6 * s * s)

        span = self.end - self.start
        out = (self.start + span * mj((t - self.flexion_start) / self.duration)
               - span * mj((t - self.extension_start) / self.duration))
        return float(out) if out.ndim == 0 else out

    def onsets(self) -> Tuple[float, float]:
        off = self.onset_fraction * self.duration
        return self.flexion_start + off, self.extension_start + off


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    trials: int = 1
    pulse: Optional[PulseSpec] = None
    frequencies: Tuple[float, ...] = ()
    sine_amplitude: float = 10.0
    sine_duration: float = 20.0
    targets: Tuple[float, ...] = ()
    movement: Optional[Movement] = None
    seed: int = 0
    inertia: float = 0.081
    settle_time: float = 1.0
    fit_settle: float = 0.3
    f_cutoff: float = 10.0
    tail_fraction: float = 0.8
    settle_tolerance: float = 0.05
    max_redraws: int = 3
    bounds: Tuple[Tuple[float, float], Tuple[float, float]] = DEFAULT_BOUNDS
    de: DeConfig = field(default_factory=DeConfig)

    def validate(self) -> "ExperimentSpec":
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        self.plant.validate()
        self.controller.validate()
        self.de.validate()
        if self.kind == "IE":
            if not self.frequencies:
                raise ValidationError("IE needs at least one frequency")
            for f in self.frequencies:
                SineSpec(f, self.sine_amplitude, self.sine_duration).validate()
        else:
            if self.pulse is None:
                raise ValidationError(f"{self.kind} needs a pulse")
            if not (self.kind == "DII" and self.pulse.amplitude == 0):
                self.pulse.validate(self.plant.control_dt)
            else:
                replace(self.pulse, amplitude=1.0).validate(self.plant.control_dt)
        if self.kind in ("IE", "MII") and self.controller.kind != "passive":
            raise ValidationError(f"{self.kind} runs on the relaxed elbow; controller must be passive")
        if self.kind == "SII" and not self.targets:
            raise ValidationError("SII needs at least one target angle")
        if self.kind == "DII" and self.movement is None:
            raise ValidationError("DII needs a movement")
        if not self.inertia > 0:
            raise ValidationError("inertia must be > 0")
        return self

    def to_json(self) -> dict:
        d = {
            "kind": self.kind, "plant": self.plant.to_dict(), "controller": self.controller.to_json(),
            "trials": self.trials, "seed": self.seed, "inertia": self.inertia,
            "settle_time": self.settle_time, "fit_settle": self.fit_settle,
            "bounds": [list(b) for b in self.bounds], "de": asdict(self.de),
        }
        if self.kind == "IE":
            d.update(frequencies=list(self.frequencies), sine_amplitude=self.sine_amplitude,
                     sine_duration=self.sine_duration, f_cutoff=self.f_cutoff,
                     tail_fraction=self.tail_fraction)
        else:
            d["pulse"] = asdict(self.pulse)
        if self.kind == "SII":
            d.update(targets=list(self.targets), settle_tolerance=self.settle_tolerance,
                     max_redraws=self.max_redraws)
        if self.kind == "DII":
            d["movement"] = asdict(self.movement)
            d["onsets"] = list(self.movement.onsets())
        return d


def default_spec(kind: str, **overrides) -> ExperimentSpec:
    """Protocol defaults: 10 N·m sines at 2..20 Hz; 20 N·m pulses (40 for DII)."""
    kind = kind.upper()
    base = {
        "IE": dict(frequencies=tuple(float(f) for f in range(2, 21)), trials=1),
        "MII": dict(trials=10, pulse=PulseSpec(20.0, 0.05, 0.5, 1), settle_time=0.5),
        "SII": dict(trials=5, pulse=PulseSpec(20.0, 0.05, 1.0, 1), settle_time=1.0,
                    targets=tuple(k * 10 * DEG for k in range(16))),
        "DII": dict(trials=10, pulse=PulseSpec(40.0, 0.05, 0.0, 1), movement=Movement()),
    }
    if kind not in base:
        raise ValidationError(f"unknown experiment kind {kind!r}")
    params = {**base[kind], **overrides}
    return ExperimentSpec(kind=kind, **params)


@dataclass
class ExperimentReport:
    kind: str
    spec: dict
    estimates: dict
    metrics: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    trials: Dict[str, Trace] = field(default_factory=dict, repr=False)
    mean_traces: Dict[str, Trace] = field(default_factory=dict, repr=False)
    plots: Dict[str, dict] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec,
            "estimates": self.estimates,
            "metrics": self.metrics,
            "baselines": self.baselines,
            "flags": list(self.flags),
            "trial_files": [f"trials/{name}.csv" for name in self.trials],
            "mean_trace_files": [f"{name}.csv" for name in self.mean_traces],
            "plot_files": [f"plots/{name}.csv" for name in self.plots],
        }

    def content_hash(self) -> str:
        return hashlib.sha256(dumps(self.to_json()).encode()).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


# ---------------------------------------------------------------------------
# trace aggregation

def _check_same_sampling(traces: List[Trace]):
    first = traces[0]
    for tr in traces[1:]:
        if tr.dt != first.dt or len(tr) != len(first):
            raise DomainError("traces differ in sampling interval or length")


def mean_trace(trials: List[Trace]) -> Trace:
    """Pointwise mean of equally sampled traces."""
    if not trials:
        raise DomainError("mean_trace needs at least one trace")
    trials = list(trials)
    _check_same_sampling(trials)

    def avg(name):
        cols = [getattr(t, name) for t in trials]
        return None if any(c is None for c in cols) else np.mean(np.stack(cols), axis=0)

    return Trace(dt=trials[0].dt, theta=avg("theta"), theta_dot=avg("theta_dot"),
                 tau_ext=avg("tau_ext"), activations=avg("activations"),
                 origin_time=trials[0].origin_time)


def difference_trace(perturbed: Trace, reference: Trace, onset: float) -> Trace:
    """Perturbed minus reference, re-origined at ``onset`` with zero start value."""
    _check_same_sampling([perturbed, reference])
    if perturbed.origin_time != reference.origin_time:
        raise DomainError("traces start at different times")
    idx = perturbed.index_of(onset)
    diff = Trace(dt=perturbed.dt, theta=perturbed.theta - reference.theta,
                 theta_dot=(None if perturbed.theta_dot is None or reference.theta_dot is None
                            else perturbed.theta_dot - reference.theta_dot),
                 tau_ext=(None if perturbed.tau_ext is None or reference.tau_ext is None
                          else perturbed.tau_ext - reference.tau_ext),
                 origin_time=perturbed.origin_time)
    return diff.reorigin(idx)


# ---------------------------------------------------------------------------
# helpers

def _trial_rng(spec: ExperimentSpec, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.seed, _KIND_CODE[spec.kind], *keys]))


def _onset_pulse(pulse: PulseSpec) -> PulseProfile:
    return PulseProfile(replace(pulse, onset=0.0))


def _duration(spec_dt: float, seconds: float) -> float:
    return round(seconds / spec_dt) * spec_dt


def _fit_plot(aligned: Trace, est: ImpedanceEstimate, pulse: TorqueProfile) -> dict:
    n = int(round(est.fit_window[1] / aligned.dt))
    t = aligned.dt * np.arange(n + 1)
    measured = aligned.theta[:n + 1]
    if est.degenerate:
        predicted = np.zeros_like(measured)
    else:
        predicted = predict_response(est.K, est.B, est.I, pulse, dt=aligned.dt,
                                     duration=n * aligned.dt).theta
    return {"t": t, "measured": measured, "predicted": predicted}


def _baselines() -> dict:
    data = baseline_data.load()
    return {"human_static": data["human_static"], "version": data["version"]}


# ---------------------------------------------------------------------------
# protocols

def run_ie(spec: ExperimentSpec) -> ExperimentReport:
    """Inertia from one steady sinusoidal trial per frequency on the relaxed elbow."""
    spec = spec.validate()
    plant = spec.plant
    dt = plant.physics_dt
    profiles = [make_sine(SineSpec(f, spec.sine_amplitude, spec.sine_duration)) for f in spec.frequencies]
    start = PlantState.rest(plant.equilibrium_angle)
    traces = run_batch(plant, [start] * len(profiles), PassiveController(), profiles,
                       _duration(dt, spec.sine_duration))
    n_tail = int(round(spec.tail_fraction * (len(traces[0]) - 1)))
    points, flags, trials = [], [], {}
    for f, tr in zip(spec.frequencies, traces):
        trials[f"ie_{f:g}Hz"] = tr
        if tr.theta.min() <= plant.joint_min or tr.theta.max() >= plant.joint_max:
            flags.append(f"IE {f:g} Hz: trial reached a joint limit; excluded")
            continue
        # last n_tail steps: theta after each step, torque held during it
        f_out, amp_out, _ = dominant_component(tr.theta[-n_tail:], dt)
        f_in, amp_in, _ = dominant_component(tr.tau_ext[-n_tail - 1:-1], dt)
        if abs(f_out - f) > 0.5 / (n_tail * dt) or abs(f_in - f) > 0.5 / (n_tail * dt):
            flags.append(f"IE {f:g} Hz: dominant component at {f_out:g} Hz; excluded")
            continue
        points.append(SinusoidFitPoint(f, amp_in, amp_out))
    inertia, curve = estimate_inertia(points, spec.f_cutoff)
    estimates = {
        "inertia": inertia,
        "f_cutoff": spec.f_cutoff,
        "points": [{"f": p.f, "T_s": p.T_s, "A_s": p.A_s, "X": p.X, "I": p.inertia} for p in points],
    }
    truth = plant.inertia_I
    metrics = {
        "ground_truth_inertia": truth,
        "pooled_rel_error": (inertia - truth) / truth,
        "max_rel_error_above_cutoff": max(abs(p.inertia - truth) / truth
                                          for p in points if p.f >= spec.f_cutoff),
    }
    plots = {"inertia_vs_frequency": {"f": np.array([c[0] for c in curve]),
                                      "I": np.array([c[1] for c in curve]),
                                      "ground_truth": np.full(len(curve), truth)}}
    return ExperimentReport("IE", spec.to_json(), estimates, metrics, _baselines(), flags,
                            trials=trials, plots=plots)


def run_mii(spec: ExperimentSpec) -> ExperimentReport:
    """Passive K, B at the equilibrium angle from repeated pulse trials."""
    spec = spec.validate()
    plant, pulse = spec.plant, spec.pulse
    dt = plant.physics_dt
    onset = pulse.onset
    duration = _duration(dt, onset + pulse.duration + spec.fit_settle + 0.6)
    profile = make_pulse(pulse, plant.control_dt)
    start = PlantState.rest(plant.equilibrium_angle)
    ctrl = spec.controller.build(plant)
    rngs = [_trial_rng(spec, 0, i) for i in range(spec.trials)]
    traces = run_batch(plant, [start] * spec.trials, ctrl, profile, duration, rngs=rngs)
    mean = mean_trace(traces)
    aligned = mean.reorigin(mean.index_of(onset))
    onset_pulse = _onset_pulse(pulse)
    est = fit_kb(aligned, onset_pulse, spec.inertia, spec.bounds, spec.de,
                 window=pulse.duration + spec.fit_settle)
    trials = {f"mii_trial{i:02d}": tr for i, tr in enumerate(traces)}
    metrics = {"peak_displacement_rad": float(np.max(np.abs(aligned.theta)))}
    return ExperimentReport("MII", spec.to_json(), {"estimate": est.to_json()}, metrics, _baselines(),
                            trials=trials, mean_traces={"mii_mean": mean},
                            plots={"mii_fit": _fit_plot(aligned, est, onset_pulse)})


def run_sii(spec: ExperimentSpec) -> ExperimentReport:
    """K, B while the controller holds each target; pulses after a settling hold."""
    spec = spec.validate()
    plant, pulse = spec.plant, spec.pulse
    dt = plant.physics_dt
    onset = spec.settle_time
    pulse = replace(pulse, onset=onset)
    profile = make_pulse(pulse, plant.control_dt)
    duration = _duration(dt, onset + pulse.duration + spec.fit_settle + 0.2)
    ctrl = spec.controller.build(plant)
    onset_idx = int(round(onset / dt))
    n_t, n_tr = len(spec.targets), spec.trials

    accepted: Dict[int, List[Trace]] = {j: [] for j in range(n_t)}
    all_trials: Dict[str, Trace] = {}
    flags: List[str] = []
    rejected = {j: 0 for j in range(n_t)}
    pending = [(j, i) for j in range(n_t) for i in range(n_tr)]
    for redraw in range(spec.max_redraws + 1):
        if not pending:
            break
        initial = [PlantState.rest(spec.targets[j]) for j, _ in pending]
        targets = np.array([spec.targets[j] for j, _ in pending])
        rngs = [_trial_rng(spec, j, i, redraw) for j, i in pending]
        traces = run_batch(plant, initial, ctrl, profile, duration, target=targets, rngs=rngs)
        still = []
        for (j, i), tr in zip(pending, traces):
            err = abs(tr.theta[onset_idx] - spec.targets[j])
            if err < spec.settle_tolerance:
                accepted[j].append(tr)
                all_trials[f"sii_target{j:02d}_trial{i:02d}"] = tr
            else:
                rejected[j] += 1
                still.append((j, i))
        pending = still
    for j, i in pending:
        flags.append(f"SII target {spec.targets[j]:.4f} rad trial {i}: not settled "
                     f"after {spec.max_redraws} redraws; excluded")

    onset_pulse = _onset_pulse(pulse)
    window = pulse.duration + spec.fit_settle
    rows, mean_traces, plots = [], {}, {}
    for j, target in enumerate(spec.targets):
        trials = accepted[j]
        row = {"target": target, "trials_used": len(trials), "rejections": rejected[j]}
        if not trials:
            flags.append(f"SII target {target:.4f} rad: no settled trials; no estimate")
            row["estimate"] = None
            rows.append(row)
            continue
        aligned = mean_trace([tr.reorigin(onset_idx) for tr in trials])
        est = fit_kb(aligned, onset_pulse, spec.inertia, spec.bounds, spec.de, window=window)
        row["estimate"] = est.to_json()
        rows.append(row)
        mean_traces[f"sii_target{j:02d}_aligned_mean"] = aligned
        plots[f"sii_fit_target{j:02d}"] = _fit_plot(aligned, est, onset_pulse)

    ok = [r for r in rows if r["estimate"] is not None]
    plots["sii_impedance_vs_target"] = {
        "target": np.array([r["target"] for r in ok]),
        "K": np.array([r["estimate"]["K"] for r in ok]),
        "B": np.array([r["estimate"]["B"] for r in ok]),
    }
    baselines = _baselines()
    baselines["passive"] = {"K": plant.passive_K, "B": plant.passive_B}
    return ExperimentReport("SII", spec.to_json(), {"per_target": rows}, {}, baselines, flags,
                            trials=all_trials, mean_traces=mean_traces, plots=plots)


def _settling_time(theta: np.ndarray, dt: float, target: float, band: float, start: float) -> float:
    """Time after ``start`` (s, relative) from which ``theta`` stays within ``band`` of target."""
    outside = np.nonzero(np.abs(theta - target) >= band)[0]
    if outside.size == 0:
        return 0.0
    return (outside[-1] + 1) * dt


def _phase_metrics(ref: Trace, pert: Trace, start_t: float, stop_t: float, target: float,
                   direction: float, band: float) -> dict:
    i0, i1 = ref.index_of(start_t), ref.index_of(stop_t)
    r, p = ref.theta[i0:i1 + 1], pert.theta[i0:i1 + 1]
    ref_settle = _settling_time(r, ref.dt, target, band, start_t)
    pert_settle = _settling_time(p, ref.dt, target, band, start_t)
    return {
        "target": target,
        "overshoot_rad": float(max(0.0, np.max((p - target) * direction))),
        "reference_overshoot_rad": float(max(0.0, np.max((r - target) * direction))),
        "settling_time_s": pert_settle,
        "reference_settling_time_s": ref_settle,
        "settling_delta_s": pert_settle - ref_settle,
        "final_error_rad": float(abs(p[-1] - target)),
        "reference_final_error_rad": float(abs(r[-1] - target)),
        "max_deviation_rad": float(np.max(np.abs(p - r))),
    }


def run_dii(spec: ExperimentSpec) -> ExperimentReport:
    """K, B during flexion and extension from perturbed-minus-reference mean traces."""
    spec = spec.validate()
    plant, mv = spec.plant, spec.movement
    dt = plant.physics_dt
    duration = _duration(dt, mv.total)
    ctrl = spec.controller.build(plant)
    on_flex, on_ext = mv.onsets()
    template = replace(spec.pulse, amplitude=max(spec.pulse.amplitude, 1.0))
    # opposing pulses: first phase pushes against the direction of motion
    flex_pulse = replace(template, onset=on_flex, first_polarity=-1)
    ext_pulse = replace(template, onset=on_ext, first_polarity=1)
    if spec.pulse.amplitude > 0:
        perturbation: TorqueProfile = SumProfile(make_pulse(flex_pulse, plant.control_dt),
                                                 make_pulse(ext_pulse, plant.control_dt))
    else:
        perturbation = ZeroProfile()

    start = PlantState.rest(mv.start)
    n = spec.trials
    # reference and perturbed trial i share a noise stream
    rngs_ref = [_trial_rng(spec, i) for i in range(n)]
    rngs_pert = [_trial_rng(spec, i) for i in range(n)]
    ref = run_batch(plant, [start] * n, ctrl, None, duration, target=mv.reference, rngs=rngs_ref)
    pert = run_batch(plant, [start] * n, ctrl, perturbation, duration, target=mv.reference,
                     rngs=rngs_pert)
    ref_mean, pert_mean = mean_trace(ref), mean_trace(pert)

    estimates, metrics, plots, mean_traces, flags = {}, {}, {}, {}, []
    mean_traces.update(dii_reference_mean=ref_mean, dii_perturbed_mean=pert_mean)
    window = template.duration + spec.fit_settle
    phases = {
        "flexion": (flex_pulse, mv.flexion_start, mv.extension_start, mv.end, 1.0),
        "extension": (ext_pulse, mv.extension_start, mv.total, mv.start, -1.0),
    }
    for name, (pulse, t_start, t_stop, target, direction) in phases.items():
        onset = pulse.onset
        diff = difference_trace(pert_mean, ref_mean, onset)
        profile = _onset_pulse(replace(pulse, amplitude=spec.pulse.amplitude)) \
            if spec.pulse.amplitude > 0 else ZeroProfile()
        est = fit_kb(diff, profile, spec.inertia, spec.bounds, spec.de, window=window)
        if est.degenerate:
            flags.append(f"DII {name}: difference trace is identically zero; estimate degenerate")
        row = est.to_json()
        row["onset_s"] = onset
        row["onset_angle_rad"] = float(ref_mean.theta[ref_mean.index_of(onset)])
        row["reference_angle_at_onset_rad"] = float(mv.reference(onset))
        estimates[name] = row
        metrics[name] = _phase_metrics(ref_mean, pert_mean, t_start,
                                       t_stop - dt if name == "flexion" else t_stop,
                                       target, direction, spec.settle_tolerance)
        mean_traces[f"dii_{name}_difference"] = diff
        plots[f"dii_fit_{name}"] = _fit_plot(diff, est, profile)

    t = ref_mean.t
    plots["dii_movement"] = {"t": t, "reference": ref_mean.theta, "perturbed": pert_mean.theta,
                             "command": mv.reference(t), "torque": pert_mean.tau_ext}
    trials = {f"dii_reference{i:02d}": tr for i, tr in enumerate(ref)}
    trials.update({f"dii_perturbed{i:02d}": tr for i, tr in enumerate(pert)})
    baselines = _baselines()
    baselines["dynamic"] = baseline_data.load()["dynamic"]
    return ExperimentReport("DII", spec.to_json(), estimates, metrics, baselines, flags,
                            trials=trials, mean_traces=mean_traces, plots=plots)


RUNNERS = {"IE": run_ie, "MII": run_mii, "SII": run_sii, "DII": run_dii}


def run(spec: ExperimentSpec) -> ExperimentReport:
    return RUNNERS[spec.kind](spec)


# ---------------------------------------------------------------------------
# persistence

def write_plot_csv(series: dict, path: Path):
    keys = list(series)
    cols = [np.asarray(series[k], dtype=float) for k in keys]
    with path.open("w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_report(report: ExperimentReport, run_dir, emit_svg: bool = False) -> Path:
    """Write report.json, trial/mean trace CSVs and plot data into ``run_dir``."""
    run_dir = Path(run_dir)
    (run_dir / "trials").mkdir(parents=True, exist_ok=True)
    (run_dir / "plots").mkdir(exist_ok=True)
    for name, tr in report.trials.items():
        write_csv(tr, run_dir / "trials" / f"{name}.csv")
    for name, tr in report.mean_traces.items():
        write_csv(tr, run_dir / f"{name}.csv")
    for name, series in report.plots.items():
        write_plot_csv(series, run_dir / "plots" / f"{name}.csv")
    if emit_svg:
        from elbowid.plotting import write_svgs

        write_svgs(report, run_dir / "plots")
    path = run_dir / "report.json"
    path.write_text(dumps(report.to_json()) + "\n")
    return path
