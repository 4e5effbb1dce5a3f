import h5py
import numpy as np
import pytest

from hilbertfc.exceptions import BoundsError, ConfigurationError, DataError, ModelStateError
from hilbertfc.network.gradcheck import gradient_check
from hilbertfc.network.ioports import CheckpointError, load_checkpoint, save_checkpoint
from hilbertfc.network.layers import MaxPool2x2, loss_softmax_ce, softmax
from hilbertfc.network.models import (
    backward,
    build_model,
    build_net2,
    build_net4,
    forward,
    layer_param_counts,
    model_size_kib,
    param_count,
    predict,
)
from hilbertfc.network.optim import adam_step


def random_matrices(count, size, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.uniform(-1.0, 1.0, size=(count, size, size))
    values = (values + values.transpose(0, 2, 1)) / 2
    for matrix in values:
        np.fill_diagonal(matrix, 1.0)
    return values


def test_net4_parameter_counts():
    model = build_net4()
    assert layer_param_counts(model) == {
        "conv1": 36, "conv2": 288, "conv3": 1_152, "dense1": 73_728,
    }
    assert param_count(model) == 75_204
    assert param_count(model, core_only=False) == 75_204 + 64
    assert model_size_kib(model, "single") == pytest.approx(293.77, abs=0.01)


def test_net2_parameter_counts():
    model = build_net2()
    assert layer_param_counts(model) == {"conv1": 36, "dense1": 64_800}
    assert param_count(model) == 64_836
    assert param_count(model, core_only=False) == 64_836 + 16


def test_net4_shape_trace():
    trace = build_net4().shape_trace()
    spatial = [shape[1] for shape in trace if len(shape) == 3]
    assert sorted(set(spatial), reverse=True) == [90, 45, 23, 12]
    assert trace[-4] == (2304,)
    assert trace[-1] == (2,)


def test_construction_is_deterministic():
    first, second = build_net4(seed=3), build_net4(seed=3)
    for name, value in first.params.items():
        assert np.array_equal(value, second.params[name])
    assert not np.array_equal(first.params["conv1.weight"], build_net4(seed=4).params["conv1.weight"])


@pytest.mark.parametrize("arch, precision", [("net3", "double"), ("net2", "half")])
def test_unknown_model(arch, precision):
    with pytest.raises(ConfigurationError):
        build_model(arch, precision=precision)


def test_forward_shapes():
    model = build_net2(input_size=10)
    matrices = random_matrices(5, 10)
    assert forward(model, matrices[0]).shape == (2,)
    assert forward(model, matrices).shape == (5, 2)
    assert predict(model, matrices).shape == (5,)

    with pytest.raises(DataError):
        forward(model, random_matrices(1, 9))
    bad = matrices.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(DataError):
        forward(model, bad)


def test_single_precision_model():
    model = build_net4(precision="single", input_size=12)
    assert model.params["conv1.weight"].dtype == np.float32
    assert forward(model, random_matrices(2, 12)).dtype == np.float32


def test_backward_before_forward():
    model = build_net2(input_size=6)
    with pytest.raises(ModelStateError):
        backward(model, np.zeros((1, 2)))
    with pytest.raises(ModelStateError):
        adam_step(model, 1e-3)


def test_odd_pooling_takes_the_partial_window():
    pool = MaxPool2x2("pool")
    x = np.arange(9.0).reshape(1, 1, 3, 3)
    assert pool.forward(x).tolist() == [[[[4.0, 5.0], [7.0, 8.0]]]]
    grad = pool.backward(np.ones((1, 1, 2, 2)))
    assert grad[0, 0].tolist() == [[0, 0, 0], [0, 1, 1], [0, 1, 1]]


def test_loss_is_stable_for_large_logits():
    loss, grad = loss_softmax_ce(np.array([[1000.0, -1000.0], [0.0, 0.0]]), np.array([0, 1]))
    assert np.isfinite(loss)
    assert loss == pytest.approx(np.log(2) / 2)
    assert np.allclose(grad.sum(axis=1), 0.0)
    assert np.allclose(softmax(np.array([1e4, 1e4])), [0.5, 0.5])

    with pytest.raises(BoundsError):
        loss_softmax_ce(np.zeros((2, 2)), np.array([0, 2]))


@pytest.mark.parametrize("arch", ["net2", "net4"])
def test_gradient_check_passes(arch):
    model = build_model(arch, seed=1)
    report = gradient_check(model, random_matrices(2, 90, seed=1))
    assert report.passed
    assert report.max_rel_error <= 1e-4
    assert report.n_checked == param_count(model, core_only=False)
    assert set(report.per_parameter) == set(model.params)


@pytest.mark.parametrize("arch", ["net2", "net4"])
def test_gradient_check_detects_corruption(arch):
    model = build_model(arch, seed=1)
    report = gradient_check(model, random_matrices(2, 90, seed=1), corrupt="conv1.weight")
    assert not report.passed
    assert report.max_rel_error > 1e-4
    assert report.worst_parameter == "conv1.weight"


def test_gradient_check_needs_double_precision():
    model = build_net2(precision="single", input_size=6)
    with pytest.raises(ConfigurationError):
        gradient_check(model, random_matrices(2, 6))
    with pytest.raises(ConfigurationError):
        gradient_check(build_net2(input_size=6), random_matrices(2, 6), eps=0.0)


def test_adam_lowers_the_loss():
    model = build_net2(seed=2, input_size=8)
    matrices = random_matrices(8, 8, seed=2)
    labels = np.arange(8) % 2

    losses = []
    for _ in range(30):
        loss, logits_grad = loss_softmax_ce(forward(model, matrices), labels)
        losses.append(loss)
        backward(model, logits_grad)
        adam_step(model, 1e-2)
    assert losses[-1] < losses[0]
    assert model.adam.step == 30


def model_with_gradients(seed=3):
    model = build_net2(seed=seed, input_size=8)
    _, logits_grad = loss_softmax_ce(forward(model, random_matrices(4, 8, seed=seed)), np.arange(4) % 2)
    backward(model, logits_grad)
    return model


def test_first_adam_step_moves_by_the_learning_rate():
    model = model_with_gradients()
    before = {name: value.copy() for name, value in model.params.items()}
    grads = {name: grad.copy() for name, grad in model.grads.items()}
    adam_step(model, 1e-3)

    assert model.adam.step == 1
    for name, value in model.params.items():
        step = value - before[name]
        grad = grads[name]
        assert np.allclose(step, -1e-3 * grad / (np.abs(grad) + 1e-8), rtol=1e-6, atol=1e-15)
        large = np.abs(grad) > 1e-4
        assert np.allclose(step[large], -1e-3 * np.sign(grad[large]), rtol=1e-3, atol=0)


def test_zero_gradient_leaves_parameters_unchanged():
    model = model_with_gradients()
    for grad in model.grads.values():
        grad[...] = 0.0
    before = {name: value.copy() for name, value in model.params.items()}
    adam_step(model, 1e-3)

    for name, value in model.params.items():
        assert np.array_equal(value, before[name])


def test_checkpoint_roundtrip(tmp_path):
    model = build_net4(seed=5, input_size=10)
    matrices = random_matrices(4, 10)
    _, logits_grad = loss_softmax_ce(forward(model, matrices), np.array([0, 1, 0, 1]))
    backward(model, logits_grad)
    adam_step(model, 1e-3)

    path = tmp_path / "model.h5"
    save_checkpoint(model, path)
    restored = load_checkpoint(path)

    assert restored.arch == "net4" and restored.input_size == 10
    assert restored.adam.step == 1
    for name, value in model.params.items():
        assert np.array_equal(restored.params[name], value)
        assert np.array_equal(restored.adam.m[name], model.adam.m[name])
    assert np.array_equal(forward(restored, matrices), forward(model, matrices))


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.h5")

    path = tmp_path / "other.h5"
    with h5py.File(path, "w") as h5_file:
        h5_file.attrs["format"] = "something-else"
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    save_checkpoint(build_net2(input_size=6), path)
    with h5py.File(path, "a") as h5_file:
        del h5_file["params/dense1.weight"]
        h5_file["params/dense1.weight"] = np.zeros((3, 3))
    with pytest.raises(CheckpointError, match="dense1.weight"):
        load_checkpoint(path)
