"""Uniformly sampled joint-angle time series and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from elbowid.errors import DomainError

CSV_HEADER = ["t", "theta", "theta_dot", "tau_ext", "a1", "a2", "a3", "a4", "a5", "a6"]


@dataclass(frozen=True)
class Trace:
    """Joint angle sampled every ``dt`` seconds starting at ``origin_time``.

    ``theta_dot``, ``tau_ext`` and ``activations`` are optional parallel
    series; ``activations`` has shape ``(n, 6)``.
    """

    dt: float
    theta: np.ndarray
    theta_dot: Optional[np.ndarray] = None
    tau_ext: Optional[np.ndarray] = None
    activations: Optional[np.ndarray] = None
    origin_time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        if not self.dt > 0:
            raise DomainError(f"trace dt must be positive, got {self.dt}")
        if theta.ndim != 1 or theta.size < 2:
            raise DomainError("trace needs a 1-D theta series with at least 2 samples")
        for name in ("theta_dot", "tau_ext", "activations"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if value.shape[0] != theta.size:
                raise DomainError(f"{name} length {value.shape[0]} != theta length {theta.size}")
            object.__setattr__(self, name, value)
        for name in ("theta", "theta_dot", "tau_ext", "activations"):
            value = getattr(self, name)
            if value is not None and not np.all(np.isfinite(value)):
                raise DomainError(f"trace {name} contains non-finite samples")

    def __len__(self):
        return self.theta.size

    @property
    def t(self) -> np.ndarray:
        return self.origin_time + self.dt * np.arange(self.theta.size)

    @property
    def duration(self) -> float:
        return self.dt * (self.theta.size - 1)

    def index_of(self, time: float) -> int:
        """Sample index closest to absolute ``time``."""
        idx = int(round((time - self.origin_time) / self.dt))
        if not 0 <= idx < self.theta.size:
            raise DomainError(f"time {time} outside trace support")
        return idx

    def window(self, start: int, stop: Optional[int] = None) -> "Trace":
        """Samples ``start:stop`` as a new trace (origin shifted accordingly)."""
        sl = slice(start, stop)

        def cut(x):
            return None if x is None else x[sl]

        return Trace(
            dt=self.dt,
            theta=self.theta[sl],
            theta_dot=cut(self.theta_dot),
            tau_ext=cut(self.tau_ext),
            activations=cut(self.activations),
            origin_time=self.origin_time + start * self.dt,
        )

    def reorigin(self, onset_index: int) -> "Trace":
        """Cut at ``onset_index``, set t = 0 there and subtract the onset angle."""
        w = self.window(onset_index)
        return Trace(
            dt=w.dt,
            theta=w.theta - w.theta[0],
            theta_dot=w.theta_dot,
            tau_ext=w.tau_ext,
            activations=w.activations,
            origin_time=0.0,
        )


def write_csv(trace: Trace, path) -> Path:
    """Write ``trace`` using the plant export header; missing columns are zero."""
    path = Path(path)
    n = len(trace)
    zeros = np.zeros(n)
    acts = trace.activations if trace.activations is not None else np.zeros((n, 6))
    cols = [trace.t, trace.theta,
            trace.theta_dot if trace.theta_dot is not None else zeros,
            trace.tau_ext if trace.tau_ext is not None else zeros]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(n):
            row = [cols[0][i], cols[1][i], cols[2][i], cols[3][i], *acts[i]]
            writer.writerow([repr(float(v)) for v in row])
    return path


def read_csv(path) -> Trace:
    """Read a trace CSV written by :func:`write_csv` (or any file with that header)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t", "theta"]:
            raise DomainError(f"{path}: expected a header starting with 't,theta'")
        header = [h.strip() for h in header]
        rows = [[float(v) for v in row] for row in reader if row]
    if len(rows) < 2:
        raise DomainError(f"{path}: need at least 2 samples")
    data = np.array(rows)
    col = {name: i for i, name in enumerate(header)}
    t = data[:, 0]
    # printed times carry rounding noise; the step itself is a short decimal
    dt = float(f"{(t[-1] - t[0]) / (len(t) - 1):.12g}")

    def get(name):
        return data[:, col[name]] if name in col else None

    acts = None
    if all(f"a{i}" in col for i in range(1, 7)):
        acts = data[:, [col[f"a{i}"] for i in range(1, 7)]]
    return Trace(dt=dt, theta=get("theta"), theta_dot=get("theta_dot"),
                 tau_ext=get("tau_ext"), activations=acts, origin_time=float(t[0]))
