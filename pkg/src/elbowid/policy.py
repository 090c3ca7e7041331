"""Small tanh MLPs for the stochastic policy and the value baseline.

Weights are stored ``(out, in)`` so a layer computes ``h @ W.T + b``.
Gradients are written out by hand; the policy additionally exposes
per-sample score vectors, which the natural-gradient step needs for its
Fisher matrix.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import numpy as np

from elbowid.errors import DomainError, ValidationError

FORMAT_VERSION = 1
POLICY_DIMS = (10, 32, 32, 7)
VALUE_DIMS = (10, 128, 128, 1)
INIT_LOG_STD = -0.25
MIN_LOG_STD = -1.0


def _init_layers(dims, rng, last_scale):
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
        if i == len(dims) - 2:
            w *= last_scale
        weights.append(w)
        biases.append(np.zeros(n_out))
    return weights, biases


def _forward(weights, biases, x, squash_output):
    """Return the list of layer activations, input first."""
    hs = [x]
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = hs[-1] @ w.T + b
        last = i == len(weights) - 1
        hs.append(np.tanh(z) if (not last or squash_output) else z)
    return hs


class PolicyParams:
    """MLP mean (tanh-squashed output) plus a state-independent log std."""

    def __init__(self, weights: List[np.ndarray], biases: List[np.ndarray], log_std: np.ndarray,
                 min_log_std: float = MIN_LOG_STD):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.log_std = np.maximum(np.asarray(log_std, dtype=float), min_log_std)
        self.min_log_std = float(min_log_std)
        dims = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        for w, b, n_in, n_out in zip(self.weights, self.biases, dims[:-1], dims[1:]):
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ValidationError("policy layer shapes are inconsistent")
        if self.log_std.shape != (dims[-1],):
            raise ValidationError("log_std must have one entry per action component")
        self.layer_dims = tuple(dims)

    @classmethod
    def init(cls, rng: np.random.Generator, dims=POLICY_DIMS, init_log_std=INIT_LOG_STD,
             min_log_std=MIN_LOG_STD, last_scale=0.01) -> "PolicyParams":
        weights, biases = _init_layers(dims, rng, last_scale)
        return cls(weights, biases, np.full(dims[-1], init_log_std), min_log_std)

    @classmethod
    def zeros(cls, dims=POLICY_DIMS, log_std=INIT_LOG_STD) -> "PolicyParams":
        weights = [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])]
        biases = [np.zeros(o) for o in dims[1:]]
        return cls(weights, biases, np.full(dims[-1], log_std))

    # -- flat parameter vector ----------------------------------------------

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases)) + self.log_std.size

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        parts.append(self.log_std)
        return np.concatenate(parts)

    def with_flat(self, theta: np.ndarray) -> "PolicyParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise DomainError("flat parameter vector has the wrong length")
        weights, biases, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[k:k + w.size].reshape(w.shape))
            k += w.size
            biases.append(theta[k:k + b.size].copy())
            k += b.size
        return PolicyParams(weights, biases, theta[k:], self.min_log_std)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (*self.weights, *self.biases, self.log_std))

    # -- evaluation -----------------------------------------------------------

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return _forward(self.weights, self.biases, np.atleast_2d(obs), True)[-1]

    def log_likelihood(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        mean = self.mean(obs)
        z = (np.atleast_2d(actions) - mean) * np.exp(-self.log_std)
        return (-0.5 * np.sum(z * z, axis=1) - np.sum(self.log_std)
                - 0.5 * mean.shape[1] * np.log(2 * np.pi))

    def score(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Per-sample gradient of the log-likelihood, shape ``(n, n_params)``."""
        obs, actions = np.atleast_2d(obs), np.atleast_2d(actions)
        hs = _forward(self.weights, self.biases, obs, True)
        mean = hs[-1]
        inv_var = np.exp(-2 * self.log_std)
        diff = actions - mean
        g_log_std = diff * diff * inv_var - 1.0
        delta = diff * inv_var * (1.0 - mean * mean)  # d/dz of the output layer
        n = obs.shape[0]
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = hs[i]
            grads.append(delta)                                        # bias
            grads.append((delta[:, :, None] * h_in[:, None, :]).reshape(n, -1))  # weight
            if i > 0:
                delta = (delta @ self.weights[i]) * (1.0 - h_in * h_in)
        grads.reverse()
        return np.concatenate(grads + [g_log_std], axis=1)

    # -- persistence ----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "layer_dims": list(self.layer_dims),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "log_std": self.log_std.tolist(),
            "min_log_std": self.min_log_std,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PolicyParams":
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"unsupported policy format_version {obj.get('format_version')!r}")
        params = cls(obj["weights"], obj["biases"], obj["log_std"], obj.get("min_log_std", MIN_LOG_STD))
        if list(params.layer_dims) != list(obj["layer_dims"]):
            raise ValidationError("policy layer_dims do not match the weight arrays")
        return params

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json()))
        return path

    @classmethod
    def load(cls, path) -> "PolicyParams":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"policy file {path} does not exist")
        return cls.from_json(json.loads(path.read_text()))


class ValueParams:
    """Linear-output MLP regressing discounted returns, trained with Adam."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self._adam: Optional[tuple] = None

    @classmethod
    def init(cls, rng: np.random.Generator, dims=VALUE_DIMS) -> "ValueParams":
        weights, biases = _init_layers(dims, rng, last_scale=0.1)
        return cls(weights, biases)

    @classmethod
    def zeros(cls, dims=VALUE_DIMS) -> "ValueParams":
        weights = [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])]
        return cls(weights, [np.zeros(o) for o in dims[1:]])

    def copy(self) -> "ValueParams":
        out = ValueParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])
        if self._adam is not None:
            m, v, t = self._adam
            out._adam = ([x.copy() for x in m], [x.copy() for x in v], t)
        return out

    def predict(self, obs: np.ndarray) -> np.ndarray:
        return _forward(self.weights, self.biases, np.atleast_2d(obs), False)[-1][:, 0]

    def loss(self, obs, targets) -> float:
        return float(np.mean((self.predict(obs) - targets) ** 2))

    def gradients(self, obs, targets):
        hs = _forward(self.weights, self.biases, np.atleast_2d(obs), False)
        delta = (2.0 / len(targets)) * (hs[-1][:, 0] - targets)[:, None]
        gw, gb = [], []
        for i in range(len(self.weights) - 1, -1, -1):
            gw.append(delta.T @ hs[i])
            gb.append(delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i]) * (1.0 - hs[i] * hs[i])
        return gw[::-1], gb[::-1]

    def adam_step(self, obs, targets, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        gw, gb = self.gradients(obs, targets)
        grads = gw + gb
        params = self.weights + self.biases
        if self._adam is None:
            self._adam = ([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)
        m, v, t = self._adam
        t += 1
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= beta1
            mi += (1 - beta1) * g
            vi *= beta2
            vi += (1 - beta2) * g * g
            m_hat = mi / (1 - beta1 ** t)
            v_hat = vi / (1 - beta2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        self._adam = (m, v, t)
