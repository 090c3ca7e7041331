"""Fixed-step dynamics of a single-DOF elbow.

The joint carries a passive spring-damper about ``equilibrium_angle``, six
torque-level muscle actuators (three flexors, three extensors) with first-order
activation dynamics, and an external torque channel used by the perturbation
protocols. Active muscles add short-range stiffness and viscosity in proportion
to their activation; the stiffness acts about a slowly tracked operating point
so that it resists fast perturbations without biasing the steady hold.

Everything is vectorised over a leading batch axis so that many trials can be
simulated together; a single-trial call is a batch of one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from elbowid.control import N_ACTION, observe
from elbowid.errors import DomainError, ValidationError
from elbowid.signals import TorqueProfile, ZeroProfile
from elbowid.trace import Trace

N_MUSCLES = 6


@dataclass(frozen=True)
class MuscleParams:
    name: str
    sign: int
    max_torque: float
    act_tau: float = 0.01
    deact_tau: float = 0.04
    kappa: float = 0.0
    beta: float = 0.0

    def validate(self):
        if self.sign not in (1, -1):
            raise ValidationError(f"muscle {self.name}: sign must be +1 or -1")
        if not self.max_torque > 0:
            raise ValidationError(f"muscle {self.name}: max_torque must be > 0")
        if not (self.act_tau > 0 and self.deact_tau > 0):
            raise ValidationError(f"muscle {self.name}: time constants must be > 0")
        if self.kappa < 0 or self.beta < 0:
            raise ValidationError(f"muscle {self.name}: kappa and beta must be >= 0")
        return self


# (name, sign, max torque). Flexor and extensor capacities sum to the same
# value so that symmetric co-contraction produces no net torque.
_MUSCLE_TABLE = (
    ("triceps_long", -1, 18.0),
    ("triceps_lateral", -1, 14.0),
    ("triceps_medial", -1, 8.0),
    ("biceps_long", 1, 16.0),
    ("biceps_short", 1, 12.0),
    ("brachioradialis", 1, 12.0),
)
KAPPA_TOTAL = 180.0
BETA_TOTAL = 4.0


def default_muscles(kappa_total: float = KAPPA_TOTAL, beta_total: float = BETA_TOTAL,
                    act_tau: float = 0.01, deact_tau: float = 0.04):
    """Six-muscle set with intrinsic gains split in proportion to max torque."""
    total = sum(m[2] for m in _MUSCLE_TABLE)
    return tuple(
        MuscleParams(name, sign, tmax, act_tau, deact_tau,
                     kappa=kappa_total * tmax / total, beta=beta_total * tmax / total)
        for name, sign, tmax in _MUSCLE_TABLE
    )


@dataclass(frozen=True)
class PlantConfig:
    inertia_I: float = 0.081
    passive_K: float = 11.65
    passive_B: float = 0.50
    equilibrium_angle: float = 0.773
    # hard stops sit outside the 0-150 deg task range so that holds and
    # movements at the range ends do not ride on the stop
    joint_min: float = -0.349
    joint_max: float = 2.967
    muscles: tuple = field(default_factory=default_muscles)
    physics_dt: float = 1e-3
    control_dt: float = 0.02
    op_point_tau: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "muscles", tuple(
            m if isinstance(m, MuscleParams) else MuscleParams(**m) for m in self.muscles))

    def validate(self) -> "PlantConfig":
        if not self.inertia_I > 0:
            raise ValidationError("inertia_I must be > 0")
        if self.passive_K < 0 or self.passive_B < 0:
            raise ValidationError("passive_K and passive_B must be >= 0")
        if not self.joint_min < self.equilibrium_angle < self.joint_max:
            raise ValidationError("need joint_min < equilibrium_angle < joint_max")
        if len(self.muscles) != N_MUSCLES:
            raise ValidationError(f"plant needs exactly {N_MUSCLES} muscles")
        for m in self.muscles:
            m.validate()
        signs = [m.sign for m in self.muscles]
        if signs.count(1) != 3 or signs.count(-1) != 3:
            raise ValidationError("plant needs three flexors (+1) and three extensors (-1)")
        if not (self.physics_dt > 0 and self.control_dt > 0 and self.op_point_tau > 0):
            raise ValidationError("physics_dt, control_dt and op_point_tau must be > 0")
        ratio = self.control_dt / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValidationError("physics_dt must divide control_dt exactly")
        return self

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @property
    def flexor_capacity(self) -> float:
        return sum(m.max_torque for m in self.muscles if m.sign > 0)

    @property
    def extensor_capacity(self) -> float:
        return sum(m.max_torque for m in self.muscles if m.sign < 0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PlantConfig":
        d = dict(d)
        if "muscles" in d:
            d["muscles"] = tuple(MuscleParams(**m) for m in d["muscles"])
        return cls(**d)

    def with_(self, **changes) -> "PlantConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class PlantState:
    t: float
    theta: float
    theta_dot: float
    activations: np.ndarray
    op_point: float

    def __post_init__(self):
        object.__setattr__(self, "activations", np.asarray(self.activations, dtype=float))

    @classmethod
    def rest(cls, theta: float, t: float = 0.0) -> "PlantState":
        """At rest at ``theta`` with relaxed muscles."""
        return cls(t=t, theta=theta, theta_dot=0.0, activations=np.zeros(N_MUSCLES), op_point=theta)


class _Muscles:
    """Per-config constant arrays consumed by the integrator."""

    def __init__(self, config: PlantConfig):
        ms = config.muscles
        # columns: drive torque, intrinsic stiffness, intrinsic viscosity
        self.W = np.array([[m.sign * m.max_torque, m.kappa, m.beta] for m in ms])
        self.act_tau = np.array([m.act_tau for m in ms])
        self.deact_tau = np.array([m.deact_tau for m in ms])
        self.sign = np.array([m.sign for m in ms], dtype=float)


@lru_cache(maxsize=32)
def _muscles(config: PlantConfig) -> _Muscles:
    return _Muscles(config)


def _gains(act, W):
    # fixed summation order keeps a batched episode bit-identical to a single one
    out = act[..., 0, None] * W[0]
    for i in range(1, W.shape[0]):
        out = out + act[..., i, None] * W[i]
    return out


def _advance(config: PlantConfig, theta, vel, act, op, u, tau):
    """One physics step for batched state arrays; returns the new arrays.

    Excitations ``u`` and torque ``tau`` are held over the step. Activations
    follow their exact first-order solution; (theta, theta_dot, op_point) use
    classical RK4 with the activation-dependent gains evaluated at the exact
    activation values of each stage time.
    """
    mus = _muscles(config)
    h = config.physics_dt
    tau_c = np.where(u > act, mus.act_tau, mus.deact_tau)
    decay = np.exp(-h / (2.0 * tau_c))
    gap = act - u
    a_mid = u + gap * decay
    a_end = u + gap * (decay * decay)
    c0, cm, c1 = _gains(act, mus.W), _gains(a_mid, mus.W), _gains(a_end, mus.W)

    I, K, B, eq, tau_op = (config.inertia_I, config.passive_K, config.passive_B,
                           config.equilibrium_angle, config.op_point_tau)

    def f(th, v, o, c):
        acc = (tau + c[..., 0] - K * (th - eq) - B * v
               - c[..., 1] * (th - o) - c[..., 2] * v) / I
        return v, acc, (th - o) / tau_op

    k1 = f(theta, vel, op, c0)
    k2 = f(theta + 0.5 * h * k1[0], vel + 0.5 * h * k1[1], op + 0.5 * h * k1[2], cm)
    k3 = f(theta + 0.5 * h * k2[0], vel + 0.5 * h * k2[1], op + 0.5 * h * k2[2], cm)
    k4 = f(theta + h * k3[0], vel + h * k3[1], op + h * k3[2], c1)
    theta = theta + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    vel = vel + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    op = op + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])

    hit = (theta < config.joint_min) | (theta > config.joint_max)
    if np.any(hit):
        theta = np.clip(theta, config.joint_min, config.joint_max)
        vel = np.where(hit, 0.0, vel)
    return theta, vel, a_end, op


def _check_inputs(u, tau):
    if not np.all(np.isfinite(tau)):
        raise DomainError("external torque is not finite")
    if not np.all(np.isfinite(u)):
        raise DomainError("muscle excitations are not finite")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("muscle excitations must lie in [0, 1]")


def step(config: PlantConfig, state: PlantState, excitations, tau_ext: float) -> PlantState:
    """Advance ``state`` by one ``physics_dt`` under held inputs."""
    u = np.asarray(excitations, dtype=float)
    if u.shape != (N_MUSCLES,):
        raise DomainError(f"expected {N_MUSCLES} excitations, got shape {u.shape}")
    _check_inputs(u, tau_ext)
    theta, vel, act, op = _advance(
        config, np.float64(state.theta), np.float64(state.theta_dot),
        state.activations, np.float64(state.op_point), u, float(tau_ext))
    return PlantState(t=state.t + config.physics_dt, theta=float(theta), theta_dot=float(vel),
                      activations=act, op_point=float(op))


def passive_energy(config: PlantConfig, state: PlantState) -> float:
    dq = state.theta - config.equilibrium_angle
    return 0.5 * config.inertia_I * state.theta_dot ** 2 + 0.5 * config.passive_K * dq ** 2


# ---------------------------------------------------------------------------
# simulation loop

Controller = Callable[[list, object], np.ndarray]
TargetLike = Union[None, float, Sequence[float], np.ndarray, Callable[[float], object]]


def _target_fn(target: TargetLike, batch: int, default: np.ndarray):
    if target is None:
        return lambda t: default
    if callable(target):
        return lambda t: np.broadcast_to(np.asarray(target(t), dtype=float), (batch,))
    arr = np.broadcast_to(np.asarray(target, dtype=float), (batch,)).copy()
    return lambda t: arr


def run_batch(config: PlantConfig, initial: Union[PlantState, Sequence[PlantState]],
              controller: Controller, torque=None, duration: float = 1.0,
              target: TargetLike = None, rngs=None, exo_gain: float = 0.0,
              observer: Optional[Callable] = None) -> list:
    """Simulate a batch of episodes in lock-step.

    ``initial`` is one state or a sequence (one per episode); ``torque`` is a
    profile, a sequence of profiles, or ``None``. Profiles and a callable
    ``target`` are evaluated in episode-relative time. The controller sees the
    observation history (list of ``(batch, 10)`` arrays, oldest first) at each
    control tick and its action is held until the next tick. Action component
    0 drives the exoskeleton channel scaled by ``exo_gain`` (N·m per unit).

    ``observer(tick, theta, theta_dot, activations, op_point, action)`` is an
    optional hook called at every control tick after the controller.
    """
    config.validate()
    initials = [initial] if isinstance(initial, PlantState) else list(initial)
    batch = len(initials)
    dt, sub = config.physics_dt, config.substeps
    n_steps = int(round(duration / dt))
    if duration <= 0 or abs(n_steps * dt - duration) > 1e-9 * max(1.0, duration):
        raise DomainError(f"duration {duration} must be a positive multiple of physics_dt")

    if torque is None:
        torque = ZeroProfile()
    profiles = [torque] * batch if isinstance(torque, TorqueProfile) else list(torque)
    if len(profiles) != batch:
        raise DomainError("need one torque profile per episode")
    tau = np.stack([p.sample(0.0, dt, n_steps) for p in profiles])
    if not np.all(np.isfinite(tau)):
        raise DomainError("torque profile is not finite on its support")

    t0 = np.array([s.t for s in initials])
    theta = np.array([s.theta for s in initials], dtype=float)
    vel = np.array([s.theta_dot for s in initials], dtype=float)
    act = np.stack([s.activations for s in initials]).astype(float)
    op = np.array([s.op_point for s in initials], dtype=float)
    target_at = _target_fn(target, batch, theta.copy())

    rec_theta = np.empty((batch, n_steps + 1))
    rec_vel = np.empty((batch, n_steps + 1))
    rec_tau = np.empty((batch, n_steps + 1))
    rec_act = np.empty((batch, n_steps + 1, N_MUSCLES))
    rec_theta[:, 0], rec_vel[:, 0], rec_act[:, 0] = theta, vel, act

    history = []
    u = exo = None
    for n in range(n_steps):
        if n % sub == 0:
            t_rel = n * dt
            obs = observe(t0 + t_rel, theta, vel, act, target_at(t_rel))
            history.append(obs)
            action = np.asarray(controller(history, rngs), dtype=float)
            if action.shape != (batch, N_ACTION):
                raise DomainError(f"controller returned shape {action.shape}, "
                                  f"expected {(batch, N_ACTION)}")
            if not np.all(np.isfinite(action)) or np.any(np.abs(action) > 1.0):
                raise DomainError("controller returned an action outside [-1, 1]")
            u = 0.5 * (action[:, 1:] + 1.0)
            exo = exo_gain * action[:, 0]
            if observer is not None:
                observer(n // sub, theta, vel, act, op, action)
        tau_n = tau[:, n] + exo
        rec_tau[:, n] = tau_n
        theta, vel, act, op = _advance(config, theta, vel, act, op, u, tau_n)
        rec_theta[:, n + 1], rec_vel[:, n + 1], rec_act[:, n + 1] = theta, vel, act
    # torque held over the step that would follow the final sample
    tail = np.array([p.sample(n_steps * dt, dt, 1)[0] for p in profiles])
    rec_tau[:, n_steps] = tail + (exo if exo is not None else 0.0)

    return [Trace(dt=dt, theta=rec_theta[b], theta_dot=rec_vel[b], tau_ext=rec_tau[b],
                  activations=rec_act[b], origin_time=float(t0[b]))
            for b in range(batch)]


def run_episode(config: PlantConfig, initial: PlantState, controller: Controller,
                torque: Optional[TorqueProfile] = None, duration: float = 1.0,
                target: TargetLike = None, rng=None, exo_gain: float = 0.0) -> Trace:
    """Single-episode form of :func:`run_batch`."""
    rngs = None if rng is None else [rng]
    return run_batch(config, [initial], controller, torque, duration, target, rngs, exo_gain)[0]


def final_state(trace: Trace, op_point: Optional[float] = None) -> PlantState:
    """Plant state at the last sample of ``trace`` (op point defaults to theta)."""
    theta = float(trace.theta[-1])
    return PlantState(t=float(trace.t[-1]), theta=theta, theta_dot=float(trace.theta_dot[-1]),
                      activations=trace.activations[-1].copy(),
                      op_point=theta if op_point is None else op_point)
