"""Identification of the lumped K-B-I joint model from perturbation traces.

Inertia comes from steady sinusoidal trials: at high frequency the joint is
dominated by its inertia, so ``I ~ T_s / (4 pi^2 f^2 A_s)``. Stiffness and
viscosity come from pulse trials by searching (K, B) with differential
evolution so that the integrated model response matches the measured trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from elbowid.errors import DomainError, ValidationError
from elbowid.signals import TorqueProfile
from elbowid.trace import Trace

DEFAULT_BOUNDS = ((0.0, 300.0), (0.0, 10.0))


# ---------------------------------------------------------------------------
# frequency-domain amplitude extraction

def dominant_component(signal: Union[Trace, np.ndarray], dt: Optional[float] = None):
    """Largest non-DC DFT bin of a mean-removed signal.

    Returns ``(frequency_hz, amplitude, phase)`` with ``amplitude = 2|X_k|/N``.
    Accepts a :class:`Trace` (its ``theta`` series) or an array plus ``dt``.
    """
    if isinstance(signal, Trace):
        x, dt = signal.theta, signal.dt
    else:
        x = np.asarray(signal, dtype=float)
        if dt is None:
            raise DomainError("dt is required for array input")
    if x.size < 32:
        raise DomainError("dominant_component needs at least 32 samples")
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    x = x - x.mean()
    spectrum = np.fft.rfft(x)
    mags = np.abs(spectrum[1:])
    k = int(np.argmax(mags)) + 1
    amplitude = 2.0 * mags[k - 1] / x.size
    if scale == 0.0 or amplitude <= 1e-12 * scale:
        raise DomainError("no dominant component: signal has no AC content")
    return k / (x.size * dt), float(amplitude), float(np.angle(spectrum[k]))


@dataclass(frozen=True)
class SinusoidFitPoint:
    f: float
    T_s: float
    A_s: float

    def __post_init__(self):
        if not (self.f > 0 and self.T_s > 0 and self.A_s >= 0):
            raise DomainError(f"invalid sinusoid fit point {self}")

    @property
    def X(self) -> float:
        return 4.0 * math.pi ** 2 * self.f ** 2 * self.A_s

    @property
    def inertia(self) -> float:
        return self.T_s / self.X


def estimate_inertia(points: Sequence[SinusoidFitPoint], f_cutoff: float = 10.0):
    """Pooled inertia from points at or above ``f_cutoff``.

    The pooled value is the least-squares slope through the origin of T_s
    against X. Returns ``(I, [(f, I_f), ...])`` with the per-point curve over
    all points.
    """
    curve = [(p.f, p.inertia) for p in points]
    used = [p for p in points if p.f >= f_cutoff]
    if not used:
        raise DomainError(f"no sinusoid points at or above {f_cutoff} Hz")
    X = np.array([p.X for p in used])
    T = np.array([p.T_s for p in used])
    return float(X @ T / (X @ X)), curve


# ---------------------------------------------------------------------------
# time-domain response prediction

def _rk4_propagators(K, B, I, h):
    """RK4 step for x' = A x + b u with u held; returns (M, g) per candidate.

    For a linear system with held input one classical RK4 step is exactly
    ``x <- M x + g u`` with ``M = sum_{k<=4} (hA)^k / k!`` and
    ``g = h (1 + hA/2 + (hA)^2/6 + (hA)^3/24) b``.
    """
    K = np.atleast_1d(np.asarray(K, dtype=float))
    B = np.atleast_1d(np.asarray(B, dtype=float))
    K, B = np.broadcast_arrays(K, B)
    n = K.size
    hA = np.zeros((n, 2, 2))
    hA[:, 0, 1] = h
    hA[:, 1, 0] = -h * K.ravel() / I
    hA[:, 1, 1] = -h * B.ravel() / I
    eye = np.broadcast_to(np.eye(2), (n, 2, 2))
    A2 = hA @ hA
    A3 = A2 @ hA
    A4 = A3 @ hA
    M = eye + hA + A2 / 2.0 + A3 / 6.0 + A4 / 24.0
    G = eye + hA / 2.0 + A2 / 6.0 + A3 / 24.0
    g = h * G[:, :, 1] / I
    return M, g


def predict_many(K, B, I: float, tau: np.ndarray, dt: float,
                 theta0: float = 0.0, theta_dot0: float = 0.0) -> np.ndarray:
    """Predicted angle for each (K, B) candidate; shape ``(n_candidates, len(tau) + 1)``.

    ``tau[n]`` is the torque held over step n.
    """
    M, g = _rk4_propagators(K, B, I, dt)
    n_c, n_t = M.shape[0], len(tau)
    m00, m01, m10, m11 = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    g0, g1 = g[:, 0], g[:, 1]
    out = np.empty((n_c, n_t + 1))
    th = np.full(n_c, float(theta0))
    v = np.full(n_c, float(theta_dot0))
    out[:, 0] = th
    for n in range(n_t):
        u = tau[n]
        th, v = m00 * th + m01 * v + g0 * u, m10 * th + m11 * v + g1 * u
        out[:, n + 1] = th
    return out


def predict_response(K: float, B: float, I: float, profile: TorqueProfile, theta0: float = 0.0,
                     theta_dot0: float = 0.0, dt: float = 1e-3, duration: float = 0.4) -> Trace:
    """Integrate ``I th'' + B th' + K th = tau(t)`` with fixed-step RK4.

    The torque is held over each step at its mid-step value, matching how the
    simulator delivers perturbations.
    """
    if not I > 0:
        raise DomainError("inertia must be > 0")
    n = int(round(duration / dt))
    if duration <= 0 or n < 1:
        raise DomainError("duration must cover at least one step")
    tau = profile.sample(0.0, dt, n)
    theta = predict_many(K, B, I, tau, dt, theta0, theta_dot0)[0]
    return Trace(dt=dt, theta=theta, tau_ext=np.append(tau, profile.sample(n * dt, dt, 1)))


# ---------------------------------------------------------------------------
# differential evolution

@dataclass(frozen=True)
class DeConfig:
    population_size: int = 30
    max_generations: int = 200
    mutation: Tuple[float, float] = (0.5, 1.0)
    crossover_rate: float = 0.9
    tolerance: float = 1e-10
    seed: int = 0

    def validate(self) -> "DeConfig":
        lo, hi = self.mutation
        if self.population_size < 4:
            raise ValidationError("DE population_size must be >= 4")
        if not 0 < self.crossover_rate <= 1:
            raise ValidationError("DE crossover_rate must lie in (0, 1]")
        if not (0 < lo <= hi < 2):
            raise ValidationError("DE mutation range must lie inside (0, 2)")
        if self.max_generations < 1:
            raise ValidationError("DE max_generations must be >= 1")
        return self


@dataclass
class DeResult:
    x: np.ndarray
    fun: float
    generations: int
    best_history: List[float] = field(default_factory=list)


def differential_evolution(objective: Callable, bounds: Sequence[Tuple[float, float]],
                           config: DeConfig = DeConfig(), vectorized: bool = False) -> DeResult:
    """Minimise ``objective`` over a box with DE/rand/1/bin.

    The mutation factor is redrawn from ``config.mutation`` every generation.
    With ``vectorized=True`` the objective maps an ``(n, d)`` array to ``n``
    values. Stops when the population's objective spread falls below
    ``tolerance`` relative to its mean, or after ``max_generations``.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise DomainError("DE bounds must be finite with lo < hi")
    dim, n_pop = lo.size, config.population_size

    def evaluate(pop):
        if vectorized:
            return np.asarray(objective(pop), dtype=float)
        return np.array([objective(x) for x in pop], dtype=float)

    pop = lo + rng.random((n_pop, dim)) * (hi - lo)
    fit = evaluate(pop)
    history = [float(fit.min())]
    generations = 0
    idx = np.arange(n_pop)
    for generations in range(1, config.max_generations + 1):
        F = rng.uniform(*config.mutation)
        # three distinct donors per member, all different from the member
        donors = np.empty((n_pop, 3), dtype=int)
        for i in range(n_pop):
            donors[i] = rng.choice(np.delete(idx, i), 3, replace=False)
        a, b, c = pop[donors[:, 0]], pop[donors[:, 1]], pop[donors[:, 2]]
        mutant = np.clip(a + F * (b - c), lo, hi)
        cross = rng.random((n_pop, dim)) < config.crossover_rate
        cross[idx, rng.integers(0, dim, n_pop)] = True
        trial = np.where(cross, mutant, pop)
        trial_fit = evaluate(trial)
        better = trial_fit <= fit
        pop = np.where(better[:, None], trial, pop)
        fit = np.where(better, trial_fit, fit)
        history.append(float(fit.min()))
        spread = np.std(fit)
        if spread <= config.tolerance * abs(np.mean(fit)) or spread == 0.0:
            break
    best = int(np.argmin(fit))
    return DeResult(pop[best].copy(), float(fit[best]), generations, history)


# ---------------------------------------------------------------------------
# stiffness / viscosity fit

@dataclass
class ImpedanceEstimate:
    K: float
    B: float
    I: float
    residual: float
    fit_window: Tuple[float, float]
    bounds_used: Tuple[Tuple[float, float], Tuple[float, float]]
    bound_limited: bool = False
    de_generations: int = 0
    degenerate: bool = False

    def to_json(self) -> dict:
        def num(x):
            return None if x is None or not np.isfinite(x) else float(x)

        return {
            "K": num(self.K), "B": num(self.B), "I": float(self.I),
            "residual_rms_rad": num(self.residual),
            "fit_window_s": [float(self.fit_window[0]), float(self.fit_window[1])],
            "bounds": [list(map(float, b)) for b in self.bounds_used],
            "bound_limited": bool(self.bound_limited),
            "de_generations": int(self.de_generations),
            "degenerate": bool(self.degenerate),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ImpedanceEstimate":
        def num(x):
            return float("nan") if x is None else float(x)

        return cls(K=num(d["K"]), B=num(d["B"]), I=float(d["I"]), residual=num(d["residual_rms_rad"]),
                   fit_window=tuple(d["fit_window_s"]), bounds_used=tuple(tuple(b) for b in d["bounds"]),
                   bound_limited=d["bound_limited"], de_generations=d["de_generations"],
                   degenerate=d.get("degenerate", False))


def default_fit_window(profile: TorqueProfile, settle: float = 0.3) -> float:
    return profile.support[1] + settle


def fit_kb(measured: Trace, profile: TorqueProfile, I_fixed: float,
           bounds=DEFAULT_BOUNDS, de_config: DeConfig = DeConfig(),
           window: Optional[float] = None, theta_dot0: float = 0.0) -> ImpedanceEstimate:
    """Fit (K, B) with inertia fixed by minimising the RMS angle error.

    ``measured`` must start at the perturbation onset with zero displacement;
    ``profile`` is expressed in the same (onset-relative) time. The fit covers
    ``[0, window]``, by default the pulse plus a 0.3 s settle.
    """
    if window is None:
        window = default_fit_window(profile)
    dt = measured.dt
    n_fit = min(len(measured), int(round(window / dt)) + 1)
    if n_fit < 2:
        raise DomainError("fit window holds fewer than 2 samples")
    y = measured.theta[:n_fit]
    window_used = (0.0, (n_fit - 1) * dt)
    bounds = tuple(tuple(map(float, b)) for b in bounds)
    if np.max(np.abs(y)) < 1e-12:
        return ImpedanceEstimate(float("nan"), float("nan"), I_fixed, float("nan"), window_used,
                                 bounds, degenerate=True)
    tau = profile.sample(0.0, dt, n_fit - 1)

    def objective(pop):
        pred = predict_many(pop[:, 0], pop[:, 1], I_fixed, tau, dt, 0.0, theta_dot0)
        return np.sqrt(np.mean((pred - y) ** 2, axis=1))

    res = differential_evolution(objective, bounds, de_config, vectorized=True)
    K, B = map(float, res.x)
    limited = False
    for value, (lo, hi) in zip((K, B), bounds):
        margin = 0.01 * (hi - lo)
        limited |= value - lo < margin or hi - value < margin
    return ImpedanceEstimate(K, B, I_fixed, res.fun, window_used, bounds,
                             bound_limited=bool(limited), de_generations=res.generations)
