import numpy as np
import pytest

from driftflow.netcore import TransportNet, transport
from driftflow.sampler import InferenceError, TimeGrid, generate
from driftflow.synthdata import PointBatch


def constant_net(c):
    net = TransportNet(hidden=6, seed=0)
    net.layers[2][1][:] = c
    return net


def test_grid_validation():
    for bad in ([0.0], [0.0, 0.5], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0]):
        with pytest.raises(ValueError):
            TimeGrid(bad)
    with pytest.raises(ValueError):
        TimeGrid.uniform(0)


def test_uniform_grid_points():
    np.testing.assert_allclose(TimeGrid.uniform(5).points, [0, 0.2, 0.4, 0.6, 0.8, 1.0], atol=1e-15)
    assert TimeGrid.uniform(7).nfe == 7


def test_zero_net_is_identity(rng):
    x = rng.normal(size=(9, 2))
    out = generate(TransportNet(hidden=8, seed=1), x, TimeGrid.uniform(10))
    np.testing.assert_array_equal(out.data, x)


@pytest.mark.parametrize("nfe", [1, 2, 10, 50])
def test_constant_velocity_telescopes(nfe, rng):
    x = rng.normal(size=(5, 2))
    out = generate(constant_net([0.7, -1.3]), x, TimeGrid.uniform(nfe))
    np.testing.assert_allclose(out.data, x + [0.7, -1.3], atol=1e-12)


def test_single_step_is_one_transport(rng):
    net = TransportNet(hidden=8, seed=0)
    net.params[:] = rng.normal(scale=0.3, size=net.n_params)
    x = rng.normal(size=(6, 2))
    np.testing.assert_array_equal(generate(net, x, TimeGrid.uniform(1)).data, transport(net, x, 0.0, 1.0))


def test_trajectory_records_every_state(rng):
    x = rng.normal(size=(4, 2))
    out, states = generate(constant_net([1.0, 0.0]), x, TimeGrid.uniform(5), record_trajectory=True)
    assert len(states) == 6
    np.testing.assert_array_equal(states[0], x)
    np.testing.assert_array_equal(states[-1], out.data)


def test_instantaneous_euler(rng):
    x = rng.normal(size=(4, 2))
    out = generate(constant_net([0.5, 0.5]), x, TimeGrid.uniform(4), instantaneous=True)
    np.testing.assert_allclose(out.data, x + 0.5, atol=1e-12)


def test_labels_carried_through(rng):
    net = TransportNet(hidden=4, n_classes=2, seed=0)
    out = generate(net, PointBatch(rng.normal(size=(4, 2)), np.array([0, 1, 1, 0])), TimeGrid.uniform(2))
    np.testing.assert_array_equal(out.labels, [0, 1, 1, 0])


def test_deterministic(rng):
    net = TransportNet(hidden=8, seed=0)
    net.params[:] = rng.normal(scale=0.3, size=net.n_params)
    x = rng.normal(size=(20, 2))
    a = generate(net, x, TimeGrid.uniform(7)).data
    b = generate(net, x, TimeGrid.uniform(7)).data
    assert a.tobytes() == b.tobytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_raises_with_step():
    net = constant_net([1e308, 1e308])
    with pytest.raises(InferenceError, match="inference step"):
        generate(net, np.ones((2, 2)) * 1e308, TimeGrid.uniform(3))
