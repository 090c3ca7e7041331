"""Independent reference computations used by the tests.

Nothing here imports the package's integrators or fitters: these are the
closed-form or brute-force counterparts the package is checked against.
"""

import numpy as np


def step_response(K, B, I, tau0, s):
    """Closed-form response of I x'' + B x' + K x = tau0 * H(s) from rest (underdamped)."""
    s = np.asarray(s, dtype=float)
    wn = np.sqrt(K / I)
    zeta = B / (2.0 * np.sqrt(K * I))
    assert zeta < 1.0, "closed form written for the underdamped case"
    wd = wn * np.sqrt(1.0 - zeta ** 2)
    env = np.exp(-zeta * wn * s)
    x = tau0 / K * (1.0 - env * (np.cos(wd * s) + zeta / np.sqrt(1.0 - zeta ** 2) * np.sin(wd * s)))
    return np.where(s >= 0.0, x, 0.0)


def pulse_response(K, B, I, amplitude, half, t, onset=0.0, polarity=1):
    """Bi-polar pulse as three superposed steps: +A at 0, -2A at half, +A at 2*half."""
    t = np.asarray(t, dtype=float) - onset
    a = polarity * amplitude
    return (step_response(K, B, I, a, t) + step_response(K, B, I, -2 * a, t - half)
            + step_response(K, B, I, a, t - 2 * half))


def plant_rhs(params, theta, vel, act, op, u, tau):
    """Full muscle-plant vector field, written from the model equations directly."""
    I, K, B, eq, sign, tmax, kap, bet, ta, td, op_tau = params
    tau_m = np.sum(sign * tmax * act)
    k_i = np.sum(kap * act)
    b_i = np.sum(bet * act)
    acc = (tau + tau_m - K * (theta - eq) - B * vel - k_i * (theta - op) - b_i * vel) / I
    rate = np.where(u > act, 1.0 / ta, 1.0 / td)
    return vel, acc, (u - act) * rate, (theta - op) / op_tau


def fine_rk4_plant(config, theta0, u_ticks, tau_fn, duration, h=1e-5):
    """Classic RK4 on the full state at step ``h``; excitations held per control tick.

    External torque is held over each ``config.physics_dt`` step at its mid-step
    value, as the plant's sampled input is. Returns theta sampled every
    ``config.physics_dt``.
    """
    ms = config.muscles
    params = (config.inertia_I, config.passive_K, config.passive_B, config.equilibrium_angle,
              np.array([m.sign for m in ms], float), np.array([m.max_torque for m in ms]),
              np.array([m.kappa for m in ms]), np.array([m.beta for m in ms]),
              np.array([m.act_tau for m in ms]), np.array([m.deact_tau for m in ms]),
              config.op_point_tau)
    n = int(round(duration / h))
    per_sample = int(round(config.physics_dt / h))
    per_tick = int(round(config.control_dt / h))
    th, v, a, op = theta0, 0.0, np.zeros(6), theta0
    out = [th]
    for k in range(n):
        u = u_ticks[min(k // per_tick, len(u_ticks) - 1)]
        tau = tau_fn((k // per_sample + 0.5) * config.physics_dt)

        def f(th_, v_, a_, op_):
            return plant_rhs(params, th_, v_, a_, op_, u, tau)

        k1 = f(th, v, a, op)
        k2 = f(th + h / 2 * k1[0], v + h / 2 * k1[1], a + h / 2 * k1[2], op + h / 2 * k1[3])
        k3 = f(th + h / 2 * k2[0], v + h / 2 * k2[1], a + h / 2 * k2[2], op + h / 2 * k2[3])
        k4 = f(th + h * k3[0], v + h * k3[1], a + h * k3[2], op + h * k3[3])
        th = th + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        a = a + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        op = op + h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if (k + 1) % per_sample == 0:
            out.append(th)
    return np.array(out)


def brute_force_gae(rewards, values, gamma, lam):
    """Advantages from the explicit double sum over future TD residuals."""
    T = len(rewards)
    deltas = [rewards[t] + gamma * values[t + 1] - values[t] for t in range(T)]
    return np.array([sum((gamma * lam) ** (k - t) * deltas[k] for k in range(t, T)) for t in range(T)])


def brute_force_discounted(rewards, gamma):
    T = len(rewards)
    return np.array([sum(gamma ** (k - t) * rewards[k] for k in range(t, T)) for t in range(T)])


def rosenbrock(x):
    x = np.atleast_2d(x)
    return (1 - x[:, 0]) ** 2 + 100 * (x[:, 1] - x[:, 0] ** 2) ** 2
