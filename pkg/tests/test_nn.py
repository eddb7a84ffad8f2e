import json
import math

import numpy as np
import pytest

from fracact.activations import make_activation
from fracact.data import Dataset, gen_two_moons
from fracact.errors import CacheMismatchError, DomainError, NonFiniteError, NotYetRunError, TrainingAborted
from fracact.gradcheck import model_grad_errors, toy_model
from fracact.nn import (
    MlpModel,
    TrainConfig,
    backward,
    clip_global_norm,
    count_cached_planes,
    evaluate,
    fdo_histogram,
    forward,
    global_norm,
    load_checkpoint,
    loss_label_smoothed_ce,
    save_checkpoint,
    sgd_step,
    train,
)


def test_build_registry():
    m = MlpModel.build([2, 8, 8, 3], make_activation("falu"), seed=0)
    names = [p.name for p in m.registry]
    assert "layer0.order" in names and "layer1.beta" in names and "layer2.order" not in names
    for p in m.registry:
        assert p.decay_excluded == (p.kind in ("order", "beta"))
    assert m.sizes == [2, 8, 8, 3]
    assert len(m.fdo_params()) == 2


def test_build_deterministic():
    a = MlpModel.build([2, 5, 2], make_activation("fsig"), seed=3, fdo_init="uniform")
    b = MlpModel.build([2, 5, 2], make_activation("fsig"), seed=3, fdo_init="uniform")
    for p, q in zip(a.registry, b.registry):
        assert np.array_equal(p.value, q.value)
    assert 0.0 <= float(a.param("layer0.order").value) < 1.0


def test_loss_examples():
    logits = np.zeros((1, 2))
    loss, grad = loss_label_smoothed_ce(logits, np.array([0]), 0.1)
    assert loss == pytest.approx(math.log(2), rel=1e-15)
    logits = np.array([[1.0, -2.0, 0.5]])
    loss0, _ = loss_label_smoothed_ce(logits, np.array([2]), 0.0)
    lse = math.log(sum(math.exp(v) for v in logits[0]))
    assert loss0 == pytest.approx(lse - 0.5, rel=1e-14)
    with pytest.raises(DomainError):
        loss_label_smoothed_ce(logits, np.array([3]), 0.1)


def test_loss_gradient_fd():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(4, 3))
    y = np.array([0, 2, 1, 2])
    _, g = loss_label_smoothed_ce(logits, y, 0.1)
    for i, j in [(0, 0), (3, 2), (1, 1)]:
        e = np.zeros_like(logits)
        e[i, j] = 1e-6
        fd = (loss_label_smoothed_ce(logits + e, y, 0.1)[0] - loss_label_smoothed_ce(logits - e, y, 0.1)[0]) / 2e-6
        assert g[i, j] == pytest.approx(fd, rel=1e-6)


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    assert global_norm(grads) == 5.0
    clipped = clip_global_norm(grads, 1.0)
    assert global_norm(clipped) <= 1.0 + 1e-12
    assert clip_global_norm(grads, 10.0)["a"][0] == 3.0
    with pytest.raises(DomainError):
        clip_global_norm(grads, 0.0)


@pytest.mark.parametrize("name", ["sig", "fsig", "fgelu", "fmish", "falu", "prelu", "softplus"])
def test_model_gradients(name, backend):
    model = toy_model(name, 11)
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(8, 2)), rng.integers(0, 2, size=8)
    err, where = model_grad_errors(model, x, y)
    assert err <= 1e-4, where


def test_per_channel_model_gradients():
    model = MlpModel.build([2, 3, 2], make_activation("fsig", terms=3), seed=1, per_channel=True, order_init=0.6)
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(5, 2)), rng.integers(0, 2, size=5)
    err, where = model_grad_errors(model, x, y)
    assert err <= 1e-4, where


def test_sgd_decay_exclusion():
    m = MlpModel.build([2, 6, 6, 2], make_activation("falu"), seed=1)
    for p in m.registry:
        if p.kind in ("order", "beta"):
            p.value[...] = 0.7 if p.kind == "order" else 2.0
        elif p.kind == "bias":
            p.value[...] = 0.3
    before = m.copy_values()
    cfg = TrainConfig(momentum=0.0, learning_rate=0.05, weight_decay=5e-4)
    sgd_step(m, {}, cfg)
    for p in m.registry:
        if p.decay_excluded:
            assert np.array_equal(p.value, before[p.name])
        else:
            assert np.array_equal(p.value, before[p.name] * (1 - 0.05 * 5e-4))


def test_sgd_momentum_and_clamp():
    m = MlpModel.build([1, 1, 1], make_activation("fsig"), seed=0)
    cfg = TrainConfig(momentum=0.9, learning_rate=1.0, weight_decay=0.0)
    order = m.param("layer0.order")
    sgd_step(m, {"layer0.order": np.array(-0.5)}, cfg)
    assert float(order.value) == 0.5
    sgd_step(m, {"layer0.order": np.array(-0.5)}, cfg)
    # v = 0.9*(-0.5) - 0.5 = -0.95, 0.5 + 0.95 = 1.45
    assert float(order.value) == pytest.approx(1.45)
    sgd_step(m, {"layer0.order": np.array(-5.0)}, cfg)
    assert float(order.value) == 2.0


def test_forward_nonfinite_names_layer():
    m = MlpModel.build([2, 4, 2], make_activation("sig"), seed=0)
    m.param("layer0.weight").value[0, 1] = np.inf
    with pytest.raises(NonFiniteError) as ei:
        forward(m, np.ones((3, 2)))
    assert ei.value.layer.startswith("layer0")


def test_backward_cache_mismatch():
    m = MlpModel.build([2, 4, 2], make_activation("fsig"), seed=0)
    logits, caches = forward(m, np.ones((3, 2)))
    with pytest.raises(CacheMismatchError):
        backward(m, caches[:1], np.zeros_like(logits))


def test_count_cached_planes():
    m = MlpModel.build([2, 4, 4, 4, 2], make_activation("fsig", terms=5), seed=0)
    with pytest.raises(NotYetRunError):
        count_cached_planes(m)
    forward(m, np.zeros((2, 2)))
    assert count_cached_planes(m) == 15
    m = MlpModel.build([2, 4, 4, 2], make_activation("relu"), seed=0)
    forward(m, np.zeros((2, 2)))
    assert count_cached_planes(m) == 2


def test_histogram_mass_and_range():
    m = MlpModel.build([2, 4, 4, 2], make_activation("fsig"), seed=0, per_channel=True, fdo_init="uniform")
    h = fdo_histogram(m)
    assert h.mass == 8
    assert h.edges[0] == 0.0 and h.edges[-1] == 2.0
    m.param("layer1.order").value[...] = 2.0
    assert fdo_histogram(m).counts[-1] == 4


def small_moons():
    return gen_two_moons(200, 0.1, 0)


def test_train_epochs_zero():
    tr, te = small_moons()
    m = MlpModel.build([2, 8, 2], make_activation("fsig"), seed=0)
    metrics = train(m, tr, te, TrainConfig(epochs=0))
    assert metrics.epochs == [0]
    assert metrics.fdo_hist_end.mass == 1


def test_train_deterministic_and_learns():
    tr, te = small_moons()
    cfg = TrainConfig(epochs=30, batch_size=32, seed=5)
    runs = []
    for _ in range(2):
        m = MlpModel.build([2, 16, 16, 2], make_activation("fsig"), seed=5)
        runs.append((train(m, tr, te, cfg), m.copy_values()))
    (a, va), (b, vb) = runs
    assert a.train_loss == b.train_loss and a.test_acc == b.test_acc
    assert all(np.array_equal(va[k], vb[k]) for k in va)
    assert a.best_test_acc >= 0.85
    assert a.train_loss[-1] < a.train_loss[0]


def test_nan_abort_has_attribution():
    tr, te = small_moons()
    m = MlpModel.build([2, 8, 8, 2], make_activation("relu"), seed=0)
    cfg = TrainConfig(epochs=3, learning_rate=1e300, momentum=0.0, clip_max_norm=1e300, weight_decay=0.0)
    with pytest.raises(TrainingAborted) as ei:
        train(m, tr, te, cfg)
    assert ei.value.epoch >= 1 and ei.value.layer
    assert f"epoch {ei.value.epoch}" in str(ei.value)


def test_evaluate_accuracy_range():
    tr, te = small_moons()
    m = MlpModel.build([2, 8, 2], make_activation("gelu"), seed=0)
    loss, acc = evaluate(m, te)
    assert 0.0 <= acc <= 1.0 and math.isfinite(loss)


def test_checkpoint_roundtrip(tmp_path):
    m = MlpModel.build([2, 4, 2], make_activation("falu"), seed=2)
    m.param("layer0.order").value[...] = 1.25
    path = tmp_path / "ck.json"
    save_checkpoint(m, path)
    doc = json.loads(path.read_text())
    assert doc["format"] == "fracact-checkpoint"
    m2 = load_checkpoint(path)
    x = np.random.default_rng(0).normal(size=(4, 2))
    assert np.array_equal(forward(m, x)[0], forward(m2, x)[0])
    for p in m.registry:
        q = m2.param(p.name)
        assert q.decay_excluded == p.decay_excluded and q.clamp_box == p.clamp_box


def test_dataset_validation():
    with pytest.raises(Exception):
        Dataset(np.zeros((3, 2)), np.zeros(2))
