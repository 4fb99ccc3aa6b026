import numpy as np
import pytest

from fcbp import (
    TrainConfig,
    adam_step,
    adam_step_tensors,
    build_dataset,
    build_system_matrix,
    init_adam_state,
    init_network_params,
    load_checkpoint,
    lr_at,
    network_backward,
    save_checkpoint,
    train,
)
from fcbp.errors import ConfigError, FormatError
from fcbp.network import named_tensors
from fcbp.training import AdamState


def test_lr_schedule_staircase():
    cfg = TrainConfig()
    assert lr_at(cfg, 0) == pytest.approx(1e-5)
    assert lr_at(cfg, 999) == pytest.approx(1e-5)
    assert lr_at(cfg, 1000) == pytest.approx(9.6e-6)
    assert lr_at(cfg, 1999) == pytest.approx(9.6e-6)
    assert lr_at(cfg, 2000) == pytest.approx(1e-5 * 0.96**2)


def test_lr_schedule_non_increasing():
    cfg = TrainConfig(decay_every_steps=10)
    rates = [lr_at(cfg, s) for s in range(100)]
    assert all(b <= a for a, b in zip(rates, rates[1:]))
    # Piecewise constant on windows of decay_every_steps.
    for start in range(0, 100, 10):
        assert len({rates[s] for s in range(start, start + 10)}) == 1


def test_lr_rejects_negative_step():
    with pytest.raises(ValueError):
        lr_at(TrainConfig(), -1)


def test_adam_zero_gradient_is_noop():
    theta = np.array([1.5, -2.0])
    state = AdamState(m={"t": np.zeros(2)}, v={"t": np.zeros(2)})
    adam_step_tensors(state, {"t": theta}, {"t": np.zeros(2)}, lr=0.1)
    assert np.array_equal(theta, [1.5, -2.0])
    assert state.step == 1


def test_adam_hand_example():
    theta = np.array([0.0])
    state = AdamState(m={"t": np.zeros(1)}, v={"t": np.zeros(1)})
    adam_step_tensors(state, {"t": theta}, {"t": np.ones(1)}, lr=0.1)
    # m_hat = 1, v_hat = 1 -> delta = -0.1 / (1 + 1e-8)
    assert theta[0] == pytest.approx(-0.1 / (1.0 + 1e-8), abs=1e-12)


def test_adam_first_step_gradient_scale_invariant():
    deltas = []
    for scale in (1.0, 10.0):
        theta = np.array([0.0])
        state = AdamState(m={"t": np.zeros(1)}, v={"t": np.zeros(1)})
        adam_step_tensors(state, {"t": theta}, {"t": scale * np.ones(1)}, lr=0.1)
        deltas.append(theta[0])
    assert deltas[0] == pytest.approx(deltas[1], rel=1e-6)


def test_adam_second_moment_stays_nonnegative(rng):
    theta = rng.standard_normal(16)
    state = AdamState(m={"t": np.zeros(16)}, v={"t": np.zeros(16)})
    for _ in range(25):
        adam_step_tensors(state, {"t": theta}, {"t": rng.standard_normal(16)}, lr=0.01)
        assert (state.v["t"] >= 0).all()
    assert state.step == 25


def test_adam_step_full_params(tiny_geom, rng):
    params = init_network_params(tiny_geom, conv_channels=(2, 2, 2, 2, 1), seed=0)
    state = init_adam_state(params)
    sinos = rng.standard_normal((2, 2, 4)).astype(np.float32)
    targets = rng.uniform(0, 1, (2, 4, 4)).astype(np.float32)
    before = {k: t.copy() for k, t in named_tensors(params).items()}
    _, grads = network_backward(params, sinos, targets)
    adam_step(state, params, grads, lr=1e-3)
    changed = any(
        not np.array_equal(before[k], t) for k, t in named_tensors(params).items()
    )
    assert changed
    assert state.step == 1


@pytest.fixture(scope="module")
def tiny_setup():
    import fcbp

    geom = fcbp.FanBeamGeometry(
        n_views=6,
        angular_step_deg=30.0,
        n_detectors=12,
        detector_pitch_mm=8.0,
        image_rows=8,
        image_cols=8,
    )
    sm = build_system_matrix(geom)
    ds = build_dataset(6, 17, geom, sm)
    return geom, sm, ds


def _tiny_params(geom, seed=0):
    return init_network_params(geom, conv_channels=(2, 2, 2, 2, 1), seed=seed)


def test_train_deterministic(tiny_setup):
    geom, _, ds = tiny_setup
    cfg = TrainConfig(base_lr=1e-3, batch_size=2, epochs=3, seed=5)
    r1 = train(cfg, ds, _tiny_params(geom))
    r2 = train(cfg, ds, _tiny_params(geom))
    for name, tensor in named_tensors(r1.params).items():
        assert np.array_equal(tensor, named_tensors(r2.params)[name])
    assert [h["mean_loss"] for h in r1.history] == [
        h["mean_loss"] for h in r2.history
    ]


def test_train_loss_decreases(tiny_setup):
    geom, _, ds = tiny_setup
    cfg = TrainConfig(base_lr=1e-3, batch_size=2, epochs=12, seed=5)
    result = train(cfg, ds, _tiny_params(geom))
    assert result.history[-1]["mean_loss"] < result.history[0]["mean_loss"]
    assert result.state.step == 12 * 3


def test_train_rejects_bad_configs(tiny_setup):
    geom, _, ds = tiny_setup
    with pytest.raises(ConfigError):
        train(TrainConfig(epochs=0), ds, _tiny_params(geom))
    with pytest.raises(ConfigError):
        train(TrainConfig(batch_size=100), ds, _tiny_params(geom))
    with pytest.raises(ConfigError):
        train(TrainConfig(base_lr=0.0), ds, _tiny_params(geom))


def test_train_writes_metrics_log(tiny_setup, tmp_path):
    import json

    geom, _, ds = tiny_setup
    cfg = TrainConfig(base_lr=1e-3, batch_size=3, epochs=2, seed=1)
    metrics = tmp_path / "metrics.jsonl"
    train(cfg, ds, _tiny_params(geom), metrics_path=metrics)
    lines = metrics.read_text().strip().splitlines()
    assert len(lines) == 2
    for i, line in enumerate(lines):
        record = json.loads(line)
        assert record["epoch"] == i + 1
        assert set(record) == {"epoch", "mean_loss", "lr", "wall_seconds"}


def test_checkpoint_round_trip(tiny_setup, tmp_path):
    geom, _, ds = tiny_setup
    params = _tiny_params(geom)
    state = init_adam_state(params)
    cfg = TrainConfig(base_lr=1e-3, batch_size=2, epochs=2, seed=5)
    train(cfg, ds, params, state=state)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(path, params, state, state.step, geom=geom, epochs_completed=2)
    ck = load_checkpoint(path)
    assert ck.step == state.step
    assert ck.geom == geom
    assert ck.epochs_completed == 2
    for name, tensor in named_tensors(params).items():
        assert np.array_equal(tensor, named_tensors(ck.params)[name])
    for name in state.m:
        assert np.array_equal(state.m[name], ck.state.m[name])
        assert np.array_equal(state.v[name], ck.state.v[name])


def test_resume_matches_uninterrupted(tiny_setup, tmp_path):
    geom, _, ds = tiny_setup
    full_cfg = TrainConfig(base_lr=1e-3, batch_size=2, epochs=6, seed=9)
    full = train(full_cfg, ds, _tiny_params(geom, seed=2))

    # First half, checkpoint at the epoch boundary, then resume.
    half_cfg = TrainConfig(base_lr=1e-3, batch_size=2, epochs=3, seed=9)
    params = _tiny_params(geom, seed=2)
    half = train(half_cfg, ds, params)
    path = tmp_path / "half.ckpt"
    save_checkpoint(path, half.params, half.state, half.state.step, geom=geom, epochs_completed=3)

    ck = load_checkpoint(path)
    resumed = train(full_cfg, ds, ck.params, state=ck.state, start_epoch=ck.epochs_completed)
    for name, tensor in named_tensors(full.params).items():
        assert np.array_equal(tensor, named_tensors(resumed.params)[name])
    # The lr schedule continued from the restored step.
    assert resumed.state.step == full.state.step


def test_checkpoint_bad_magic(tiny_setup, tmp_path):
    geom, _, _ = tiny_setup
    params = _tiny_params(geom)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(path, params, init_adam_state(params), 0, geom=geom)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncation_names_tensor(tiny_setup, tmp_path):
    geom, _, _ = tiny_setup
    params = _tiny_params(geom)
    path = tmp_path / "ck.ckpt"
    save_checkpoint(path, params, init_adam_state(params), 0, geom=geom)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 64])
    with pytest.raises(FormatError, match="adam_v/"):
        load_checkpoint(path)
