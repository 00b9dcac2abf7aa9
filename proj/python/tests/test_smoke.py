import os
import pathlib

import numpy as np
import pytest

import secant

REPO = pathlib.Path(__file__).resolve().parents[2]


def small_config():
    config = secant.EnvConfig()
    config.height = 16
    config.width = 16
    config.episode_length = 40
    return config


def test_env_reset_and_step_shapes():
    env = secant.PixelEnv("point-reach", "train", small_config(), seed=3)
    obs = env.reset()
    assert obs.shape == (9, 16, 16)
    assert obs.dtype == np.float32
    assert 0.0 <= obs.min() and obs.max() <= 1.0
    nxt, reward, done = env.step(np.zeros(env.action_dim, dtype=np.float32))
    assert nxt.shape == obs.shape
    assert np.isfinite(reward)
    assert not done


def test_env_is_seeded():
    a = secant.PixelEnv("point-reach", "test-color", small_config(), seed=5, variant_seed=2)
    b = secant.PixelEnv("point-reach", "test-color", small_config(), seed=5, variant_seed=2)
    np.testing.assert_array_equal(a.reset(), b.reset())


def test_episode_terminates_after_agent_steps():
    config = small_config()
    env = secant.PixelEnv("point-reach", "train", config, seed=1)
    env.reset()
    steps = 0
    done = False
    while not done:
        _, _, done = env.step(np.zeros(env.action_dim, dtype=np.float32))
        steps += 1
    assert steps <= config.agent_steps()


def test_cycle_consistency_self_pair_is_one():
    u = np.random.default_rng(0).normal(size=(12, 4)).astype(np.float32)
    assert secant.cycle_consistency(u, u) == 1.0


def test_scripted_controller_beats_zero():
    returns = secant.scripted_returns("point-reach", "train", small_config(), 2, 0)
    assert len(returns) == 2
    assert min(returns) > 0.0


def test_cli_usage_error_exit_code():
    assert secant.run_cli(["no-such-command"]) == 1


def test_train_and_load_policy(tmp_path):
    out = tmp_path / "expert"
    code = secant.run_cli(
        ["train-expert", "--config", str(REPO / "configs" / "smoke.ini"), "--seed", "1", "--out", str(out)]
    )
    assert code == 0
    policy = secant.Policy.load(str(out / "seed1" / "expert.ckpt"))
    env = secant.PixelEnv("point-reach", "train", small_config(), seed=0)
    obs = env.reset()
    action = policy.act(obs)
    assert action.shape == (policy.action_dim,)
    assert action.strides == (action.itemsize,)
    assert np.all(np.abs(action) <= 1.0)
    np.testing.assert_array_equal(action, policy.act(obs))
    features = policy.features(obs)
    assert features.ndim == 1
    assert features.strides == (features.itemsize,)
    assert len(set(features.tolist())) > 1
