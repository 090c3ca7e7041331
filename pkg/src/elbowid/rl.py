"""Natural policy gradient training of hold/reach policies for the elbow plant.

One iteration: roll out a batch of trajectories with the stochastic policy,
estimate advantages with GAE on the current value baseline, take a
normalised natural-gradient step (Fisher matrix from per-sample scores,
solved by conjugate gradient), then refit the baseline.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from elbowid.control import act_policy, make_observation
from elbowid.errors import DomainError, ValidationError
from elbowid.plant import PlantConfig, PlantState, run_batch
from elbowid.policy import PolicyParams, ValueParams

log = logging.getLogger(__name__)

TARGET_RANGE = (0.0, 2.618)


@dataclass(frozen=True)
class RewardConfig:
    w_pose: float = 1.0
    w_act: float = 0.01
    bonus: float = 1.0
    bonus_radius: float = 0.035


@dataclass(frozen=True)
class NpgConfig:
    gamma: float = 0.995
    gae_lambda: float = 0.97
    step_size_delta: float = 0.1
    value_lr: float = 1e-3
    value_epochs: int = 2
    value_batch: int = 64
    batch_trajectories: int = 64
    horizon: int = 100
    iterations: int = 50
    cg_iters: int = 10
    cg_damping: float = 1e-4
    seed: int = 0
    max_start_time: float = 8.0
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if isinstance(self.reward, dict):
            object.__setattr__(self, "reward", RewardConfig(**self.reward))

    def validate(self) -> "NpgConfig":
        if not 0 < self.gamma <= 1:
            raise ValidationError("gamma must lie in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValidationError("gae_lambda must lie in [0, 1]")
        if not self.step_size_delta > 0:
            raise ValidationError("step_size_delta must be > 0")
        if self.horizon < 1 or self.batch_trajectories < 1 or self.iterations < 0:
            raise ValidationError("horizon and batch_trajectories must be >= 1, iterations >= 0")
        if self.cg_iters < 1 or self.cg_damping < 0:
            raise ValidationError("cg_iters must be >= 1 and cg_damping >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    observations: np.ndarray        # (T, 10)
    actions: np.ndarray             # (T, 7) unclamped samples
    rewards: np.ndarray             # (T,)
    values: np.ndarray              # (T + 1,) incl. bootstrap value
    terminal: bool = False
    target: float = 0.0
    theta: Optional[np.ndarray] = None   # (T + 1,) angle at each control tick
    advantages: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.rewards)
        if len(self.observations) != n or len(self.actions) != n or len(self.values) != n + 1:
            raise DomainError("trajectory sequences have inconsistent lengths")

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))


# ---------------------------------------------------------------------------
# reward and rollouts

def reward_array(theta, target, action, cfg: RewardConfig = RewardConfig()) -> np.ndarray:
    err = np.abs(np.asarray(theta) - np.asarray(target))
    muscle = np.asarray(action)[..., 1:]
    return (-cfg.w_pose * err - cfg.w_act * np.sum(muscle * muscle, axis=-1)
            + cfg.bonus * (err < cfg.bonus_radius))


def reward(state: PlantState, target: float, action, cfg: RewardConfig = RewardConfig()) -> float:
    """Pose-tracking reward: distance penalty, effort penalty, in-band bonus."""
    return float(reward_array(state.theta, target, action, cfg))


def uniform_targets(lo: float = TARGET_RANGE[0], hi: float = TARGET_RANGE[1]):
    return lambda rng: float(rng.uniform(lo, hi))


def rollout(plant: PlantConfig, policy: PolicyParams, target_sampler: Callable, horizon: int,
            rng: np.random.Generator, n_trajectories: int = 1, start_sampler: Optional[Callable] = None,
            value: Optional[ValueParams] = None, deterministic: bool = False,
            reward_cfg: RewardConfig = RewardConfig(), max_start_time: float = 0.0,
            rngs: Optional[Sequence[np.random.Generator]] = None) -> List[Trajectory]:
    """Simulate ``n_trajectories`` episodes of ``horizon`` control steps.

    Each trajectory draws its target, start angle, start clock and action
    noise from its own generator: ``rngs`` if given, otherwise children
    spawned from ``rng``. Start angles default to the target range.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    if rngs is None:
        rngs = rng.spawn(n_trajectories)
    rngs = list(rngs)
    n = len(rngs)
    start_sampler = start_sampler or uniform_targets()
    targets = np.empty(n)
    initial = []
    for i, g in enumerate(rngs):
        targets[i] = target_sampler(g)
        t0 = float(g.uniform(0.0, max_start_time)) if max_start_time > 0 else 0.0
        initial.append(PlantState.rest(float(start_sampler(g)), t=t0))

    raws, clipped = [], []

    def controller(history, _):
        a, raw = act_policy(policy, history[-1], rngs, deterministic, return_raw=True)
        raws.append(raw)
        clipped.append(a)
        return a

    traces = run_batch(plant, initial, controller, None, horizon * plant.control_dt,
                       target=targets, rngs=rngs)
    sub = plant.substeps
    idx = np.arange(horizon + 1) * sub
    out = []
    for i, tr in enumerate(traces):
        theta = tr.theta[idx]
        obs_all = make_observation(tr.t[idx], theta, tr.theta_dot[idx], tr.activations[idx], targets[i])
        acts = np.stack([a[i] for a in clipped])
        rew = reward_array(theta[1:], targets[i], acts, reward_cfg)
        vals = value.predict(obs_all) if value is not None else np.zeros(horizon + 1)
        out.append(Trajectory(observations=obs_all[:-1], actions=np.stack([r[i] for r in raws]),
                              rewards=rew, values=vals, terminal=False, target=float(targets[i]),
                              theta=theta))
    return out


# ---------------------------------------------------------------------------
# advantage estimation

def compute_gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """GAE advantages; ``values`` carries one extra (bootstrap) entry."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (rewards.size + 1,):
        raise DomainError(f"values must have length len(rewards) + 1 = {rewards.size + 1}, "
                          f"got {values.size}")
    deltas = rewards + gamma * values[1:] - values[:-1]
    adv = np.empty_like(deltas)
    acc = 0.0
    for t in range(deltas.size - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def discounted_returns(rewards, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    out = np.empty(len(rewards))
    acc = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


# ---------------------------------------------------------------------------
# natural gradient step

def conjugate_gradient(matvec: Callable, b: np.ndarray, iters: int = 10, tol: float = 1e-12) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(iters):
        if rr <= tol * tol:
            break
        Ap = matvec(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


@dataclass
class NpgStep:
    grad_norm: float
    gTx: float
    alpha: float
    degenerate: bool


def npg_update(policy: PolicyParams, trajectories: Sequence[Trajectory], config: NpgConfig,
               advantages: Optional[np.ndarray] = None):
    """One normalised natural-gradient step; returns ``(policy, NpgStep)``.

    ``advantages`` defaults to the concatenated ``trajectory.advantages``.
    """
    if not trajectories:
        raise DomainError("npg_update needs at least one trajectory")
    obs = np.concatenate([tr.observations for tr in trajectories])
    acts = np.concatenate([tr.actions for tr in trajectories])
    if advantages is None:
        advantages = np.concatenate([tr.advantages for tr in trajectories])
    advantages = np.asarray(advantages, dtype=float)
    S = policy.score(obs, acts)
    n = S.shape[0]
    g = S.T @ advantages / n
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return policy, NpgStep(0.0, 0.0, 0.0, True)

    def fvp(v):
        return S.T @ (S @ v) / n + config.cg_damping * v

    x = conjugate_gradient(fvp, g, config.cg_iters)
    gTx = float(g @ x)
    if not gTx > 0:
        log.warning("degenerate natural-gradient step (g^T x = %g); update skipped", gTx)
        return policy, NpgStep(gnorm, gTx, 0.0, True)
    alpha = float(np.sqrt(config.step_size_delta / gTx))
    return policy.with_flat(policy.flat() + alpha * x), NpgStep(gnorm, gTx, alpha, False)


def fit_value(value: ValueParams, trajectories: Sequence[Trajectory], config: NpgConfig,
              rng: np.random.Generator, returns: Optional[np.ndarray] = None) -> ValueParams:
    """Minibatch Adam regression of the baseline onto discounted returns."""
    if not trajectories:
        raise DomainError("fit_value needs at least one trajectory")
    obs = np.concatenate([tr.observations for tr in trajectories])
    if returns is None:
        returns = np.concatenate([
            discounted_returns(tr.rewards, config.gamma, 0.0 if tr.terminal else tr.values[-1])
            for tr in trajectories])
    out = value.copy()
    n = len(returns)
    for _ in range(config.value_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.value_batch):
            batch = order[start:start + config.value_batch]
            out.adam_step(obs[batch], returns[batch], config.value_lr)
    return out


# ---------------------------------------------------------------------------
# training and evaluation

@dataclass
class TrainResult:
    policy: PolicyParams
    value: ValueParams
    curve: List[tuple]          # (iteration, mean_return, std_return)
    steps: List[NpgStep]


def _iteration_rngs(seed: int, iteration: int, n: int):
    ss = np.random.SeedSequence([seed, iteration])
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _init_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 2**31 - 1]))


def initial_policy(seed: int = 0) -> PolicyParams:
    """The policy :func:`train` starts from for a given seed."""
    return PolicyParams.init(_init_rng(seed))


def train(plant: PlantConfig, config: NpgConfig, policy: Optional[PolicyParams] = None,
          progress: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Run ``config.iterations`` NPG iterations; reproducible from ``config.seed``."""
    config.validate()
    plant.validate()
    init_rng = _init_rng(config.seed)
    if policy is None:
        policy = PolicyParams.init(init_rng)
    value = ValueParams.init(init_rng)
    value_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2**31 - 2]))
    curve, steps = [], []
    targets = uniform_targets()
    for it in range(config.iterations):
        rngs = _iteration_rngs(config.seed, it, config.batch_trajectories)
        trajs = rollout(plant, policy, targets, config.horizon, None, value=value, rngs=rngs,
                        reward_cfg=config.reward, max_start_time=config.max_start_time)
        totals = np.array([tr.total_reward for tr in trajs])
        curve.append((it, float(totals.mean()), float(totals.std())))
        for tr in trajs:
            tr.advantages = compute_gae(tr.rewards, tr.values, config.gamma, config.gae_lambda)
        adv = np.concatenate([tr.advantages for tr in trajs])
        adv = (adv - adv.mean()) / (adv.std() + 1e-6)
        policy, info = npg_update(policy, trajs, config, advantages=adv)
        steps.append(info)
        value = fit_value(value, trajs, config, value_rng)
        log.info("iter %d mean return %.3f (alpha %.3g)", it, totals.mean(), info.alpha)
        if progress is not None:
            progress(it, float(totals.mean()))
    return TrainResult(policy, value, curve, steps)


EVAL_SEED = 10_000


def evaluate(plant: PlantConfig, policy: PolicyParams, n_episodes: int = 20, horizon: int = 100,
             seed: int = EVAL_SEED, deterministic: bool = False, max_start_time: float = 8.0,
             reward_cfg: RewardConfig = RewardConfig()):
    """Held-out episodes; returns (mean return, per-episode steady-state |error|).

    Steady-state error is the mean absolute pose error over the final quarter
    of the episode.
    """
    rngs = _iteration_rngs(seed, 0, n_episodes)
    trajs = rollout(plant, policy, uniform_targets(), horizon, None, rngs=rngs,
                    deterministic=deterministic, reward_cfg=reward_cfg, max_start_time=max_start_time)
    totals = np.array([tr.total_reward for tr in trajs])
    tail = max(1, horizon // 4)
    ss_err = np.array([np.mean(np.abs(tr.theta[-tail:] - tr.target)) for tr in trajs])
    return float(totals.mean()), ss_err


def write_curve_csv(curve, path):
    with open(path, "w") as fh:
        fh.write("iteration,mean_return,std_return\n")
        for it, m, s in curve:
            fh.write(f"{it},{m!r},{s!r}\n")
