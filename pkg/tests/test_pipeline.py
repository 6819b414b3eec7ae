import json

import numpy as np
import pytest

from aevqc import kernels, nn
from aevqc.data import synth_dataset
from aevqc.errors import ConfigError, DataError, DivergenceError, FormatError
from aevqc.head import count_head_params
from aevqc.pipeline import (
    ModelConfig, TrainConfig, build_model, evaluate, load_checkpoint, predict, save_checkpoint, train,
)


def quantum_cfg(**kw):
    base = dict(head_kind="quantum", n_classes=2, input_shape=(1, 8, 8), backbone_channels=(4,),
                ansatz="a1", depth=1, seed=3)
    base.update(kw)
    return ModelConfig(**base)


def classical_cfg(**kw):
    base = dict(head_kind="classical", n_classes=2, input_shape=(1, 8, 8), backbone_channels=(4,),
                pooling_mode="gap", seed=3)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def data():
    return synth_dataset(2, 12, 5, 8, 0.05, seed=9)


def test_quantum_build_qubits():
    m = build_model(quantum_cfg(input_shape=(1, 10, 10), backbone_channels=(2,)))
    assert m.feature_len == 32
    assert m.head.n_qubits == 5
    assert m.params["fc"].shape == (2, 5)


def test_classical_fc_shape():
    m = build_model(classical_cfg(backbone_channels=(8,), n_classes=3))
    assert m.params["fc"].shape == (3, 8)
    assert m.params_after_backbone() == 24


def test_param_audit_matches_count():
    m = build_model(quantum_cfg(ansatz="a2", depth=2, n_classes=3))
    assert m.params_after_backbone() == count_head_params(m.head.spec, 3)[2]


@pytest.mark.parametrize("bad", [
    dict(n_classes=1), dict(ansatz=None), dict(depth=0), dict(pooling_mode="gap"),
    dict(head_kind="other"), dict(input_shape=(1, 3, 3)),
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        build_model(quantum_cfg(**bad))


def test_classical_rejects_quantum_fields():
    with pytest.raises(ConfigError):
        classical_cfg(ansatz="a1", depth=1)


def test_train_config_guards():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    assert TrainConfig() == TrainConfig(200, 32, 0.001)


def test_same_seed_same_outputs(rng):
    x = rng.uniform(size=(3, 1, 8, 8))
    a, b = build_model(quantum_cfg()), build_model(quantum_cfg())
    np.testing.assert_array_equal(a.logits(x), b.logits(x))
    c = build_model(quantum_cfg(seed=4))
    assert not np.array_equal(a.logits(x), c.logits(x))


def test_heads_share_backbone_and_logit_shape(rng):
    q, c = build_model(quantum_cfg(n_classes=3)), build_model(classical_cfg(n_classes=3))
    np.testing.assert_array_equal(q.params["conv0"], c.params["conv0"])
    x = rng.uniform(size=(4, 1, 8, 8))
    assert q.logits(x).shape == c.logits(x).shape == (4, 3)


def test_lr_zero_keeps_parameters(data):
    m = build_model(quantum_cfg())
    before = {k: v.copy() for k, v in m.params.items()}
    train(m, data.train_x, data.train_y, TrainConfig(3, 5, 0.0))
    for k in before:
        np.testing.assert_array_equal(m.params[k], before[k])


def test_training_reduces_loss(data):
    m = build_model(quantum_cfg(backbone_channels=(16,)))
    _, hist = train(m, data.train_x, data.train_y, TrainConfig(50, 32, 1e-3))
    assert hist[-1].loss < hist[0].loss
    assert len(hist) == 50 and m.epoch == 50


def test_training_deterministic(data):
    runs = []
    for _ in range(2):
        m = build_model(quantum_cfg(ansatz="a2"))
        _, hist = train(m, data.train_x, data.train_y, TrainConfig(4, 7, 1e-2))
        runs.append([(h.loss, h.train_acc) for h in hist])
    assert runs[0] == runs[1]


def test_thread_count_does_not_change_results(data):
    if "cython" not in kernels.BACKENDS:
        pytest.skip("compiled kernels not built")
    results = []
    for threads in (1, 3):
        kernels.set_num_threads(threads)
        try:
            m = build_model(quantum_cfg(ansatz="a2"))
            _, hist = train(m, data.train_x, data.train_y, TrainConfig(3, 8, 1e-2))
        finally:
            kernels.set_num_threads(1)
        results.append(([h.loss for h in hist], m.params["theta"].tobytes()))
    assert results[0] == results[1]


@pytest.mark.parametrize("make", [quantum_cfg, classical_cfg])
def test_every_block_receives_gradient(make, rng):
    m = build_model(make(backbone_channels=(4, 3), input_shape=(1, 12, 12)))
    x = rng.uniform(size=(8, 1, 12, 12))
    y = rng.integers(0, 2, size=8)
    logits, cache = m.forward(x)
    _, d = nn.softmax_ce(logits, y)
    grads = m.backward(cache, d)
    assert set(grads) == set(m.params)
    for name, g in grads.items():
        assert g.shape == (8, *m.params[name].shape)
        assert np.any(g != 0), name


@pytest.mark.parametrize("make", [quantum_cfg, classical_cfg])
def test_model_gradient_matches_finite_differences(make, rng):
    m = build_model(make(backbone_channels=(3,)))
    x = rng.uniform(size=(4, 1, 8, 8))
    y = np.array([0, 1, 1, 0])

    def loss():
        return float(np.mean(nn.softmax_ce(m.logits(x), y)[0]))

    logits, cache = m.forward(x)
    _, d = nn.softmax_ce(logits, y)
    grads = {k: g.mean(axis=0) for k, g in m.backward(cache, d).items()}
    h = 1e-5
    for name, p in m.params.items():
        for idx in list(np.ndindex(p.shape))[:: max(1, p.size // 6)]:
            old = p[idx]
            p[idx] = old + h
            up = loss()
            p[idx] = old - h
            dn = loss()
            p[idx] = old
            fd = (up - dn) / (2 * h)
            assert abs(grads[name][idx] - fd) <= 1e-6 + 1e-4 * abs(fd), (name, idx)


def test_bad_labels(data):
    m = build_model(quantum_cfg())
    with pytest.raises(DataError):
        train(m, data.train_x, data.train_y + 5, TrainConfig(1))


def test_divergence_aborts(data):
    m = build_model(classical_cfg())
    m.params["fc"][:] = np.nan
    with pytest.raises(DivergenceError):
        train(m, data.train_x, data.train_y, TrainConfig(1))


def test_vanished_features_abort(data):
    m = build_model(quantum_cfg())
    m.params["conv0"][:] = -1.0  # inputs in [0, 1] -> every ReLU output is zero
    with pytest.raises(DivergenceError, match="vanished"):
        train(m, data.train_x, data.train_y, TrainConfig(1))


def test_evaluate_constant_model(data):
    m = build_model(classical_cfg())
    m.params["fc"][:] = 0.0  # all logits tie -> class 0
    assert np.all(predict(m, data.test_x) == 0)
    rep = evaluate(m, data.test_x, data.test_y)
    assert rep.accuracy == 0.5
    assert rep.confusion.sum() == len(data.test_y)


def test_evaluate_trained_quantum(data):
    m = build_model(quantum_cfg(backbone_channels=(16,)))
    train(m, data.train_x, data.train_y, TrainConfig(30, 8, 1e-3))
    rep = evaluate(m, data.test_x, data.test_y)
    assert rep.accuracy == 1.0 and rep.macro_f1 == 1.0


def test_checkpoint_round_trip(tmp_path, data, rng):
    m = build_model(quantum_cfg(ansatz="a2", depth=2))
    train(m, data.train_x, data.train_y, TrainConfig(2, 8, 1e-2))
    path = tmp_path / "ck.json"
    save_checkpoint(m, path)
    loaded = load_checkpoint(path)
    x = rng.uniform(size=(10, 1, 8, 8))
    np.testing.assert_array_equal(loaded.logits(x), m.logits(x))
    assert loaded.epoch == 2
    for k in m.params:
        np.testing.assert_array_equal(loaded.adam[k].m, m.adam[k].m)
        np.testing.assert_array_equal(loaded.adam[k].v, m.adam[k].v)
        assert loaded.adam[k].t == m.adam[k].t
    save_checkpoint(loaded, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_checkpoint_float_precision(tmp_path):
    m = build_model(classical_cfg())
    save_checkpoint(m, tmp_path / "ck.json")
    doc = json.loads((tmp_path / "ck.json").read_text())
    text = (tmp_path / "ck.json").read_text()
    assert doc["format_version"] == 1
    # every parameter float is written with 17 significant digits
    first = text.split('"fc": [[', 1)[1].split(",", 1)[0]
    assert len(first.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) == 17


def test_checkpoint_truncated(tmp_path):
    m = build_model(classical_cfg())
    save_checkpoint(m, tmp_path / "ck.json")
    text = (tmp_path / "ck.json").read_text()
    (tmp_path / "cut.json").write_text(text[: len(text) // 2])
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "cut.json")


def test_checkpoint_future_version(tmp_path):
    m = build_model(classical_cfg())
    save_checkpoint(m, tmp_path / "ck.json")
    doc = json.loads((tmp_path / "ck.json").read_text())
    doc["format_version"] = 99
    (tmp_path / "v.json").write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="99"):
        load_checkpoint(tmp_path / "v.json")


def test_checkpoint_wrong_shape(tmp_path):
    m = build_model(classical_cfg())
    save_checkpoint(m, tmp_path / "ck.json")
    doc = json.loads((tmp_path / "ck.json").read_text())
    doc["params"]["fc"] = [[0.0]]
    (tmp_path / "s.json").write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="fc"):
        load_checkpoint(tmp_path / "s.json")
