"""Perturbation torque profiles: bi-polar pulses, sinusoids and a few helpers.

Profiles are immutable and evaluate on scalars or arrays of times. They are
zero outside their declared support. The simulator samples them at the
midpoint of each physics step and holds the value over the step, so pulse
edges that fall on step boundaries are delivered exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from elbowid.errors import ValidationError

DEFAULT_CONTROL_DT = 0.02


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float
    half_duration: float
    onset: float = 0.0
    first_polarity: int = 1

    def validate(self, control_dt: float = DEFAULT_CONTROL_DT) -> "PulseSpec":
        if not (np.isfinite(self.amplitude) and self.amplitude > 0):
            raise ValidationError(f"pulse amplitude must be > 0, got {self.amplitude}")
        if self.first_polarity not in (1, -1):
            raise ValidationError(f"first_polarity must be +1 or -1, got {self.first_polarity}")
        if not np.isfinite(self.onset):
            raise ValidationError("pulse onset must be finite")
        if not self.half_duration >= 2 * control_dt - 1e-12:
            raise ValidationError(
                f"pulse half-duration {self.half_duration} s is shorter than twice the "
                f"{control_dt} s controller refresh period ({2 * control_dt:.3g} s); "
                f"pulses shorter than that are not resolved by a controller running "
                f"every {control_dt} s")
        return self

    @property
    def duration(self) -> float:
        return 2 * self.half_duration


@dataclass(frozen=True)
class SineSpec:
    frequency: float
    amplitude: float
    duration: float

    def validate(self) -> "SineSpec":
        if not self.frequency > 0:
            raise ValidationError(f"sine frequency must be > 0, got {self.frequency}")
        if not self.amplitude > 0:
            raise ValidationError(f"sine amplitude must be > 0, got {self.amplitude}")
        if self.duration * self.frequency < 10 - 1e-9:
            raise ValidationError(
                f"sine duration {self.duration} s holds fewer than 10 cycles at {self.frequency} Hz")
        return self


class TorqueProfile:
    """Torque as a function of time with a declared ``support = (start, stop)``."""

    kind = "abstract"

    def __init__(self, start: float, stop: float):
        self.support = (float(start), float(stop))

    def _value(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        start, stop = self.support
        inside = (t_arr >= start) & (t_arr < stop)
        out = np.where(inside, self._value(t_arr), 0.0)
        return float(out) if out.ndim == 0 else out

    def sample(self, t0: float, dt: float, n: int) -> np.ndarray:
        """Held value for each of ``n`` steps starting at ``t0`` (mid-step samples)."""
        return self(t0 + dt * (np.arange(n) + 0.5))

    def parameters(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.kind, "parameters": self.parameters()}

    def __repr__(self):
        return f"{type(self).__name__}({self.parameters()})"


class PulseProfile(TorqueProfile):
    kind = "pulse"

    def __init__(self, spec: PulseSpec):
        self.spec = spec
        super().__init__(spec.onset, spec.onset + 2 * spec.half_duration)

    def _value(self, t):
        s = self.spec
        first = t < s.onset + s.half_duration
        return np.where(first, 1.0, -1.0) * s.first_polarity * s.amplitude

    def parameters(self):
        return asdict(self.spec)


class SineProfile(TorqueProfile):
    kind = "sine"

    def __init__(self, spec: SineSpec):
        self.spec = spec
        super().__init__(0.0, spec.duration)

    def _value(self, t):
        return self.spec.amplitude * np.sin(2 * np.pi * self.spec.frequency * t)

    def parameters(self):
        return asdict(self.spec)


class StepProfile(TorqueProfile):
    kind = "step"

    def __init__(self, amplitude: float, onset: float = 0.0, stop: float = np.inf):
        self.amplitude = float(amplitude)
        super().__init__(onset, stop)

    def _value(self, t):
        return np.full_like(t, self.amplitude)

    def parameters(self):
        return {"amplitude": self.amplitude, "onset": self.support[0], "stop": self.support[1]}


class ZeroProfile(TorqueProfile):
    kind = "zero"

    def __init__(self):
        super().__init__(0.0, 0.0)

    def _value(self, t):
        return np.zeros_like(t)

    def parameters(self):
        return {}


class SumProfile(TorqueProfile):
    kind = "sum"

    def __init__(self, *parts: TorqueProfile):
        self.parts = tuple(parts)
        starts = [p.support[0] for p in parts] or [0.0]
        stops = [p.support[1] for p in parts] or [0.0]
        super().__init__(min(starts), max(stops))

    def _value(self, t):
        return sum((p(t) for p in self.parts), np.zeros_like(t))

    def parameters(self):
        return {"parts": [p.to_json() for p in self.parts]}


def make_pulse(spec: PulseSpec, control_dt: float = DEFAULT_CONTROL_DT) -> PulseProfile:
    """Bi-polar symmetric pulse; rejects pulses shorter than two controller ticks."""
    return PulseProfile(spec.validate(control_dt))


def make_sine(spec: SineSpec) -> SineProfile:
    return SineProfile(spec.validate())


def profile_from_json(obj: dict) -> TorqueProfile:
    kind, params = obj["kind"], obj.get("parameters", {})
    if kind == "pulse":
        return PulseProfile(PulseSpec(**params))
    if kind == "sine":
        return SineProfile(SineSpec(**params))
    if kind == "step":
        return StepProfile(**params)
    if kind == "zero":
        return ZeroProfile()
    if kind == "sum":
        return SumProfile(*(profile_from_json(p) for p in params["parts"]))
    raise ValidationError(f"unknown torque profile kind {kind!r}")
