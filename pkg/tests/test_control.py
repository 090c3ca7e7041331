import numpy as np
import pytest

from elbowid.control import (N_ACTION, N_OBS, PassiveController, PdConfig, PdController, PolicyController,
                             act_pd, act_policy, excitations, make_observation, observe_state)
from elbowid.errors import DomainError, ValidationError
from elbowid.plant import PlantConfig, PlantState, run_episode
from elbowid.policy import PolicyParams
from elbowid.signals import StepProfile

PLANT = PlantConfig()
SIGNS = np.array([m.sign for m in PLANT.muscles], dtype=float)


def obs(err=0.0, vel=0.0, n=1):
    return make_observation(0.0, np.full(n, 1.0 + err), vel, np.zeros((n, 6)), 1.0)


def test_observation_layout():
    s = PlantState(0.3, 1.0, 0.2, np.arange(6) / 10, 1.0)
    o = observe_state(s, 0.5)
    assert o.shape == (N_OBS,) == (10,)
    assert o[0] == 0.3 and o[1] == 1.0 and o[2] == 0.2
    assert np.array_equal(o[3:9], np.arange(6) / 10)
    assert o[9] == 0.5
    assert observe_state(s, 1.0)[9] == 0.0


def test_excitation_mapping():
    assert np.array_equal(excitations(np.array([0.3, -1, 1, 0, -1, 1, 0])), [0, 1, 0.5, 0, 1, 0.5])


def test_passive_controller():
    a = PassiveController()([obs(n=3)])
    assert a.shape == (3, N_ACTION)
    assert np.all(a[:, 0] == 0) and np.all(excitations(a) == 0)


def test_pd_at_rest_gives_zero_excitation():
    a = act_pd(PdConfig(60, 0.6), [obs()], SIGNS, 40, 40, 0.02)
    assert a[0, 0] == 0.0
    assert np.all(excitations(a) == 0.0)


def test_pd_routes_to_flexors_and_extensors():
    cfg = PdConfig(60, 0.6, cocontraction_baseline=0.1)
    a = act_pd(cfg, [obs(err=-0.2)], SIGNS, 40, 40, 0.02)  # tau_d = +12 -> flexors
    u = excitations(a)[0]
    # equal up to the affine action round trip (one ulp)
    assert np.allclose(u[SIGNS < 0], 0.1, rtol=0, atol=1e-15)
    assert u[SIGNS > 0] == pytest.approx(np.full(3, 12 / 40 + 0.1))
    a = act_pd(cfg, [obs(err=0.2)], SIGNS, 40, 40, 0.02)  # tau_d = -12 -> extensors
    u = excitations(a)[0]
    assert np.allclose(u[SIGNS > 0], 0.1, rtol=0, atol=1e-15)
    assert u[SIGNS < 0] == pytest.approx(np.full(3, 0.4))


def test_pd_saturates():
    a = act_pd(PdConfig(60, 0.6, cocontraction_baseline=0.2), [obs(err=-5.0)], SIGNS, 40, 40, 0.02)
    assert np.all(excitations(a)[0, SIGNS > 0] == 1.0)


def test_pd_velocity_term():
    a = act_pd(PdConfig(0, 2.0), [obs(vel=-4.0)], SIGNS, 40, 40, 0.02)
    assert excitations(a)[0, SIGNS > 0] == pytest.approx(np.full(3, 8 / 40))


def test_pd_latency_validation():
    with pytest.raises(ValidationError):
        PdConfig(60, 0.6, latency=0.03).validate(0.02)
    with pytest.raises(ValidationError):
        PdConfig(-1, 0.6).validate()
    assert PdConfig(60, 0.6, latency=0.06).latency_ticks(0.02) == 3


@pytest.mark.parametrize("latency", [0.0, 0.04, 0.1])
def test_pd_latency_delays_response_exactly(latency):
    # a step disturbance starting at t = 0.2 s; record excitation per control tick
    ctrl = PdController(PdConfig(60, 0.6, latency=latency), PLANT)
    seen = []

    def hook(history, rngs=None):
        a = ctrl(history, rngs)
        seen.append(excitations(a)[0].copy())
        return a

    run_episode(PLANT, PlantState.rest(PLANT.equilibrium_angle), hook, StepProfile(5.0, 0.2), 0.6)
    active = [i for i, u in enumerate(seen) if np.any(u > 0)]
    # the disturbance is first visible to the controller at tick 11 (t = 0.22 s)
    assert active[0] == 11 + int(round(latency / 0.02))


def test_zero_policy_deterministic_is_zero_action():
    p = PolicyParams.zeros()
    a = act_policy(p, obs()[0], deterministic=True)
    assert a.shape == (7,) and np.all(a == 0.0)


def test_policy_noise_std_at_floor():
    p = PolicyParams.zeros(log_std=-1.0)
    rng = np.random.default_rng(0)
    _, raw = act_policy(p, np.zeros((20000, 10)), rng, return_raw=True)
    assert raw.std(axis=0) == pytest.approx(np.full(7, np.exp(-1.0)), rel=0.03)
    low = PolicyParams.zeros(log_std=-3.0)
    assert np.all(low.log_std == -1.0)


def test_policy_sampling_is_reproducible_and_clamped():
    p = PolicyParams.init(np.random.default_rng(1))
    o = np.random.default_rng(2).standard_normal((50, 10))
    a1 = act_policy(p, o, np.random.default_rng(5))
    a2 = act_policy(p, o, np.random.default_rng(5))
    assert np.array_equal(a1, a2)
    big = PolicyParams(p.weights, p.biases, np.full(7, 2.0))
    a = act_policy(big, o, np.random.default_rng(5))
    assert np.all(np.abs(a) <= 1.0)


def test_policy_non_finite_rejected():
    p = PolicyParams.zeros()
    p.biases[0][0] = np.nan
    with pytest.raises(DomainError):
        act_policy(p, np.zeros(10), deterministic=True)
    with pytest.raises(DomainError):
        act_policy(PolicyParams.zeros(), np.zeros(10))  # stochastic without an rng


def test_policy_controller_is_pure():
    p = PolicyParams.init(np.random.default_rng(4))
    c = PolicyController(p, deterministic=True)
    o = [obs(err=0.3)]
    assert np.array_equal(c(o), c(o))
    assert c.describe()["kind"] == "policy"
