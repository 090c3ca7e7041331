"""INI run configuration with a strict schema.

Every section and key is declared in ``SCHEMA``; anything else is rejected so
that a typo in a protocol parameter fails loudly instead of silently falling
back to a default. ``RunConfig.dumps`` writes the full canonical form, and
parsing that text again gives back an identical config.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from elbowid.errors import ValidationError
from elbowid.plant import BETA_TOTAL, KAPPA_TOTAL, PlantConfig, default_muscles
from elbowid.protocols import ControllerSpec, ExperimentSpec, Movement, default_spec
from elbowid.rl import NpgConfig, RewardConfig
from elbowid.signals import PulseSpec
from elbowid.sysid import DEFAULT_BOUNDS, DeConfig

DEG = math.pi / 180.0

_P, _N, _R = PlantConfig(), NpgConfig(), RewardConfig()
_MV, _DE = Movement(), DeConfig()
_IE, _MII, _SII, _DII = (default_spec(k) for k in ("IE", "MII", "SII", "DII"))

# (type, default); types: float, int, bool, str, optstr, floats
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "run": {
        "seed": ("int", 0),
        "out": ("optstr", None),
        "emit_svg": ("bool", False),
    },
    "plant": {
        "inertia_I": ("float", _P.inertia_I),
        "passive_K": ("float", _P.passive_K),
        "passive_B": ("float", _P.passive_B),
        "equilibrium_angle": ("float", _P.equilibrium_angle),
        "joint_min": ("float", _P.joint_min),
        "joint_max": ("float", _P.joint_max),
        "physics_dt": ("float", _P.physics_dt),
        "control_dt": ("float", _P.control_dt),
        "op_point_tau": ("float", _P.op_point_tau),
        "kappa_total": ("float", KAPPA_TOTAL),
        "beta_total": ("float", BETA_TOTAL),
        "act_tau": ("float", _P.muscles[0].act_tau),
        "deact_tau": ("float", _P.muscles[0].deact_tau),
    },
    "controller": {
        "kind": ("str", "policy"),
        "kp": ("float", 60.0),
        "kd": ("float", 0.6),
        "latency": ("float", 0.0),
        "cocontraction_baseline": ("float", 0.0),
        "policy_path": ("optstr", None),
        "deterministic": ("bool", False),
    },
    "rl": {
        "gamma": ("float", _N.gamma),
        "gae_lambda": ("float", _N.gae_lambda),
        "step_size_delta": ("float", _N.step_size_delta),
        "value_lr": ("float", _N.value_lr),
        "value_epochs": ("int", _N.value_epochs),
        "value_batch": ("int", _N.value_batch),
        "batch_trajectories": ("int", _N.batch_trajectories),
        "horizon": ("int", _N.horizon),
        "iterations": ("int", _N.iterations),
        "cg_iters": ("int", _N.cg_iters),
        "cg_damping": ("float", _N.cg_damping),
        "max_start_time": ("float", _N.max_start_time),
        "w_pose": ("float", _R.w_pose),
        "w_act": ("float", _R.w_act),
        "bonus": ("float", _R.bonus),
        "bonus_radius": ("float", _R.bonus_radius),
    },
    "fit": {
        "inertia": ("float", _MII.inertia),
        "fit_settle": ("float", _MII.fit_settle),
        "k_min": ("float", DEFAULT_BOUNDS[0][0]),
        "k_max": ("float", DEFAULT_BOUNDS[0][1]),
        "b_min": ("float", DEFAULT_BOUNDS[1][0]),
        "b_max": ("float", DEFAULT_BOUNDS[1][1]),
        "de_population": ("int", _DE.population_size),
        "de_generations": ("int", _DE.max_generations),
        "de_crossover": ("float", _DE.crossover_rate),
        "de_tolerance": ("float", _DE.tolerance),
        "de_seed": ("int", _DE.seed),
    },
    "ie": {
        "frequencies": ("floats", _IE.frequencies),
        "amplitude": ("float", _IE.sine_amplitude),
        "duration": ("float", _IE.sine_duration),
        "f_cutoff": ("float", _IE.f_cutoff),
        "tail_fraction": ("float", _IE.tail_fraction),
    },
    "mii": {
        "trials": ("int", _MII.trials),
        "pulse_amplitude": ("float", _MII.pulse.amplitude),
        "pulse_half_duration": ("float", _MII.pulse.half_duration),
        "pulse_onset": ("float", _MII.pulse.onset),
    },
    "sii": {
        "trials": ("int", _SII.trials),
        "pulse_amplitude": ("float", _SII.pulse.amplitude),
        "pulse_half_duration": ("float", _SII.pulse.half_duration),
        "settle_time": ("float", _SII.settle_time),
        "targets_deg": ("floats", tuple(float(10 * k) for k in range(16))),
        "settle_tolerance": ("float", _SII.settle_tolerance),
        "max_redraws": ("int", _SII.max_redraws),
    },
    "dii": {
        "trials": ("int", _DII.trials),
        "pulse_amplitude": ("float", _DII.pulse.amplitude),
        "pulse_half_duration": ("float", _DII.pulse.half_duration),
        "start_deg": ("float", 0.0),
        "end_deg": ("float", 150.0),
        "duration": ("float", _MV.duration),
        "hold_before": ("float", _MV.hold_before),
        "hold_between": ("float", _MV.hold_between),
        "hold_after": ("float", _MV.hold_after),
        "onset_fraction": ("float", _MV.onset_fraction),
        "settle_tolerance": ("float", _DII.settle_tolerance),
    },
}


def _parse(kind: str, text: str, where: str):
    text = text.strip()
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "str":
            return text
        if kind == "optstr":
            return text or None
        if kind == "floats":
            return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {text!r} as {kind}") from None
    raise AssertionError(kind)


def _format(kind: str, value) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "optstr":
        return "" if value is None else str(value)
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class RunConfig:
    values: Dict[str, Dict[str, object]] = field(
        default_factory=lambda: {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})
    source: Optional[str] = None

    # -- parsing --------------------------------------------------------------

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, strict=True)
        parser.optionxform = str  # keys are case-sensitive
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ValidationError(f"{source}: {exc}") from None
        cfg = cls(source=source)
        for section in parser.sections():
            if section not in SCHEMA:
                raise ValidationError(f"{source}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ValidationError(f"{source}: unknown key {key!r} in [{section}]")
                kind = SCHEMA[section][key][0]
                cfg.values[section][key] = _parse(kind, raw, f"{source} [{section}] {key}")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file {path} does not exist")
        cfg = cls.loads(path.read_text(), source=str(path))
        pp = cfg.values["controller"]["policy_path"]
        if pp:
            # policy paths are relative to the config file
            resolved = Path(pp) if Path(pp).is_absolute() else path.parent / pp
            if not resolved.exists():
                raise ValidationError(f"{path}: policy file {pp!r} does not exist")
        return cfg

    def resolved_policy_path(self) -> Optional[str]:
        pp = self.values["controller"]["policy_path"]
        if pp and not Path(pp).is_absolute() and self.source and Path(self.source).exists():
            return str(Path(self.source).parent / pp)
        return pp

    def dumps(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (kind, _) in keys.items():
                lines.append(f"{key} = {_format(kind, self.values[section][key])}".rstrip())
            lines.append("")
        return "\n".join(lines)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set(self, section: str, key: str, value) -> "RunConfig":
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ValidationError(f"unknown config key [{section}] {key}")
        self.values[section][key] = value
        return self

    def validate(self) -> "RunConfig":
        self.plant_config().validate()
        kind = self.get("controller", "kind")
        if kind not in ("passive", "pd", "policy"):
            raise ValidationError(f"controller kind must be passive, pd or policy, not {kind!r}")
        return self

    # -- builders -------------------------------------------------------------

    def plant_config(self) -> PlantConfig:
        p = self.values["plant"]
        muscles = default_muscles(p["kappa_total"], p["beta_total"], p["act_tau"], p["deact_tau"])
        return PlantConfig(
            inertia_I=p["inertia_I"], passive_K=p["passive_K"], passive_B=p["passive_B"],
            equilibrium_angle=p["equilibrium_angle"], joint_min=p["joint_min"], joint_max=p["joint_max"],
            muscles=muscles, physics_dt=p["physics_dt"], control_dt=p["control_dt"],
            op_point_tau=p["op_point_tau"])

    def controller_spec(self, kind: Optional[str] = None) -> ControllerSpec:
        c = self.values["controller"]
        return ControllerSpec(kind=kind or c["kind"], kp=c["kp"], kd=c["kd"], latency=c["latency"],
                              cocontraction_baseline=c["cocontraction_baseline"],
                              policy_path=self.resolved_policy_path(), deterministic=c["deterministic"])

    def npg_config(self, seed: Optional[int] = None) -> NpgConfig:
        r = self.values["rl"]
        reward = RewardConfig(r["w_pose"], r["w_act"], r["bonus"], r["bonus_radius"])
        keys = [k for k in r if k not in ("w_pose", "w_act", "bonus", "bonus_radius")]
        seed = self.get("run", "seed") if seed is None else seed
        return NpgConfig(**{k: r[k] for k in keys}, seed=seed, reward=reward)

    def experiment_spec(self, kind: str, seed: Optional[int] = None,
                        controller: Optional[ControllerSpec] = None) -> ExperimentSpec:
        kind = kind.upper()
        f = self.values["fit"]
        seed = self.get("run", "seed") if seed is None else seed
        common = dict(
            plant=self.plant_config(), seed=seed, inertia=f["inertia"], fit_settle=f["fit_settle"],
            bounds=((f["k_min"], f["k_max"]), (f["b_min"], f["b_max"])),
            de=DeConfig(population_size=f["de_population"], max_generations=f["de_generations"],
                        crossover_rate=f["de_crossover"], tolerance=f["de_tolerance"], seed=f["de_seed"]),
        )
        if kind in ("IE", "MII"):
            common["controller"] = ControllerSpec("passive")
        else:
            common["controller"] = controller or self.controller_spec()
        if kind == "IE":
            s = self.values["ie"]
            return default_spec("IE", frequencies=tuple(s["frequencies"]), sine_amplitude=s["amplitude"],
                                sine_duration=s["duration"], f_cutoff=s["f_cutoff"],
                                tail_fraction=s["tail_fraction"], **common)
        if kind == "MII":
            s = self.values["mii"]
            pulse = PulseSpec(s["pulse_amplitude"], s["pulse_half_duration"], s["pulse_onset"], 1)
            return default_spec("MII", trials=s["trials"], pulse=pulse, **common)
        if kind == "SII":
            s = self.values["sii"]
            pulse = PulseSpec(s["pulse_amplitude"], s["pulse_half_duration"], s["settle_time"], 1)
            return default_spec("SII", trials=s["trials"], pulse=pulse, settle_time=s["settle_time"],
                                targets=tuple(d * DEG for d in s["targets_deg"]),
                                settle_tolerance=s["settle_tolerance"], max_redraws=s["max_redraws"],
                                **common)
        if kind == "DII":
            s = self.values["dii"]
            pulse = PulseSpec(s["pulse_amplitude"], s["pulse_half_duration"], 0.0, 1)
            mv = Movement(start=s["start_deg"] * DEG, end=s["end_deg"] * DEG, duration=s["duration"],
                          hold_before=s["hold_before"], hold_between=s["hold_between"],
                          hold_after=s["hold_after"], onset_fraction=s["onset_fraction"])
            return default_spec("DII", trials=s["trials"], pulse=pulse, movement=mv,
                                settle_tolerance=s["settle_tolerance"], **common)
        raise ValidationError(f"unknown experiment kind {kind!r}")
