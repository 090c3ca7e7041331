"""Controllers mapping observations to 7-component actions.

Observation layout (10 scalars)::

    0 time | 1 exo angle | 2 exo velocity | 3..8 muscle activations | 9 pose error

Action layout (7 components in [-1, 1])::

    0 exoskeleton channel | 1..6 muscle commands, excitation = (c + 1) / 2

A controller is a callable ``(history, rngs) -> actions`` where ``history``
is the list of observation batches seen so far (oldest first). Controllers
hold no state of their own; anything stateful lives in the episode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from elbowid.errors import DomainError, ValidationError

if TYPE_CHECKING:
    from elbowid.plant import PlantConfig, PlantState
    from elbowid.policy import PolicyParams

N_OBS = 10
N_ACTION = 7
OBS_TIME, OBS_ANGLE, OBS_VEL, OBS_ERR = 0, 1, 2, 9
OBS_ACT = slice(3, 9)


def make_observation(t, theta, theta_dot, activations, target) -> np.ndarray:
    """Array-level observation builder; leading axes are batch axes."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape + (N_OBS,))
    out[..., OBS_TIME] = t
    out[..., OBS_ANGLE] = theta
    out[..., OBS_VEL] = theta_dot
    out[..., OBS_ACT] = activations
    out[..., OBS_ERR] = theta - np.asarray(target, dtype=float)
    return out


observe = make_observation


def observe_state(state: "PlantState", target: float) -> np.ndarray:
    """Observation of a single plant state; pose error is ``theta - target``."""
    return make_observation(state.t, state.theta, state.theta_dot, state.activations, target)


def excitations(action: np.ndarray) -> np.ndarray:
    """Muscle excitations in [0, 1] from the muscle components of ``action``."""
    return 0.5 * (np.asarray(action)[..., 1:] + 1.0)


def _as_batch(history: Sequence[np.ndarray]) -> int:
    return np.atleast_2d(history[-1]).shape[0]


class PassiveController:
    """All muscles relaxed, exoskeleton idle."""

    def __call__(self, history, rngs=None):
        batch = _as_batch(history)
        action = np.full((batch, N_ACTION), -1.0)
        action[:, 0] = 0.0
        return action

    def describe(self) -> dict:
        return {"kind": "passive"}


@dataclass(frozen=True)
class PdConfig:
    kp: float
    kd: float
    latency: float = 0.0
    cocontraction_baseline: float = 0.0

    def validate(self, control_dt: float = 0.02) -> "PdConfig":
        if self.kp < 0 or self.kd < 0:
            raise ValidationError("PD gains must be >= 0")
        if not 0.0 <= self.cocontraction_baseline <= 1.0:
            raise ValidationError("cocontraction_baseline must lie in [0, 1]")
        ticks = self.latency / control_dt
        if self.latency < 0 or abs(ticks - round(ticks)) > 1e-9:
            raise ValidationError(
                f"PD latency {self.latency} s must be a non-negative multiple of control_dt {control_dt} s")
        return self

    def latency_ticks(self, control_dt: float) -> int:
        return int(round(self.latency / control_dt))


def act_pd(config: PdConfig, history: Sequence[np.ndarray], signs: np.ndarray,
           flexor_capacity: float, extensor_capacity: float, control_dt: float) -> np.ndarray:
    """Delayed PD reflex surrogate.

    Uses the observation ``latency`` seconds old (zeros before the episode
    start). The desired torque ``-kp * error - kd * velocity`` is delivered by
    the flexors when positive and by the extensors otherwise, each selected
    muscle excited in proportion to its group's share of the demand on top of
    the co-contraction baseline. Antagonists sit at the baseline.
    """
    lag = config.latency_ticks(control_dt)
    if len(history) > lag:
        obs = np.atleast_2d(history[-1 - lag])
    else:
        obs = np.zeros((_as_batch(history), N_OBS))
    tau_d = -config.kp * obs[:, OBS_ERR] - config.kd * obs[:, OBS_VEL]
    flex_level = np.where(tau_d > 0, np.minimum(1.0, np.abs(tau_d) / flexor_capacity), 0.0)
    ext_level = np.where(tau_d > 0, 0.0, np.minimum(1.0, np.abs(tau_d) / extensor_capacity))
    flexor = np.asarray(signs) > 0
    u = np.where(flexor, flex_level[:, None], ext_level[:, None]) + config.cocontraction_baseline
    u = np.clip(u, 0.0, 1.0)
    action = np.empty((obs.shape[0], N_ACTION))
    action[:, 0] = 0.0
    action[:, 1:] = 2.0 * u - 1.0
    return action


class PdController:
    def __init__(self, config: PdConfig, plant: "PlantConfig"):
        self.config = config.validate(plant.control_dt)
        self.signs = np.array([m.sign for m in plant.muscles], dtype=float)
        self.flexor_capacity = plant.flexor_capacity
        self.extensor_capacity = plant.extensor_capacity
        self.control_dt = plant.control_dt

    def __call__(self, history, rngs=None):
        return act_pd(self.config, history, self.signs, self.flexor_capacity,
                      self.extensor_capacity, self.control_dt)

    def describe(self) -> dict:
        c = self.config
        return {"kind": "pd", "kp": c.kp, "kd": c.kd, "latency": c.latency,
                "cocontraction_baseline": c.cocontraction_baseline}


def gaussian_noise(rngs, shape) -> np.ndarray:
    """Standard normal draws; ``rngs`` is one generator or one per batch row."""
    if isinstance(rngs, np.random.Generator):
        return rngs.standard_normal(shape)
    rngs = list(rngs)
    if len(rngs) != shape[0]:
        raise DomainError(f"need {shape[0]} generators, got {len(rngs)}")
    return np.stack([g.standard_normal(shape[1:]) for g in rngs])


def act_policy(params: "PolicyParams", obs: np.ndarray, rng=None,
               deterministic: bool = False, return_raw: bool = False):
    """Gaussian policy action, clamped to [-1, 1].

    With ``return_raw`` the unclamped sample is returned as well (it is what
    the likelihood is evaluated on during training).
    """
    if not params.is_finite():
        raise DomainError("policy parameters are not finite")
    obs = np.asarray(obs, dtype=float)
    single = obs.ndim == 1
    obs2 = np.atleast_2d(obs)
    mean = params.mean(obs2)
    if deterministic:
        raw = mean
    else:
        if rng is None:
            raise DomainError("stochastic policy execution needs an rng")
        raw = mean + np.exp(params.log_std) * gaussian_noise(rng, mean.shape)
    action = np.clip(raw, -1.0, 1.0)
    if single:
        action, raw = action[0], raw[0]
    return (action, raw) if return_raw else action


class PolicyController:
    def __init__(self, params: "PolicyParams", deterministic: bool = False):
        self.params = params
        self.deterministic = deterministic

    def __call__(self, history, rngs=None):
        return act_policy(self.params, np.atleast_2d(history[-1]), rngs, self.deterministic)

    def describe(self) -> dict:
        return {"kind": "policy", "deterministic": self.deterministic}
