import numpy as np
import pytest

from storyanchor.errors import StoryAnchorError
from storyanchor.optim import AdamState, ParamStore, adam_step


def store_with(**arrays):
    store = ParamStore()
    for name, value in arrays.items():
        store.add(name, np.asarray(value, dtype=np.float64))
    return store


def test_names_sorted():
    store = store_with(zeta=[1.0], alpha=[2.0], mid=[3.0])
    assert store.names() == ["alpha", "mid", "zeta"]


def test_first_step_magnitude():
    # With a unit gradient, the very first Adam update moves by almost
    # exactly -lr regardless of the gradient's scale history.
    store = store_with(w=[0.0])
    state = AdamState(lr=0.1)
    adam_step(store, {"w": np.array([1.0])}, state)
    moved = store["w"].data[0]
    assert moved == pytest.approx(-0.1, rel=1e-7)
    assert state.step == 1


def test_zero_lr_leaves_params_but_advances_moments():
    store = store_with(w=[1.0, -2.0])
    state = AdamState(lr=0.0)
    before = store["w"].data.copy()
    adam_step(store, {"w": np.array([3.0, -1.0])}, state)
    np.testing.assert_array_equal(store["w"].data, before)
    assert state.step == 1
    adam_step(store, {"w": np.array([3.0, -1.0])}, state)
    assert state.step == 2


def test_descends_on_quadratic():
    # Minimize f(w) = 0.5 * |w - target|^2.
    target = np.array([1.0, -3.0, 0.5])
    store = store_with(w=np.zeros(3))
    state = AdamState(lr=0.05)
    for _ in range(2000):
        w = store["w"].data
        adam_step(store, {"w": w - target}, state)
    np.testing.assert_allclose(store["w"].data, target, atol=1e-3)


def test_frozen_param_not_in_grads():
    store = store_with(w=[1.0], frozen=[5.0])
    store.set_trainable("frozen", False)
    state = AdamState(lr=0.1)
    adam_step(store, {"w": np.array([1.0])}, state)
    assert store["frozen"].data[0] == 5.0
    assert store["w"].data[0] != 1.0


def test_grads_must_match_trainable_set():
    store = store_with(w=[1.0], v=[1.0])
    state = AdamState()
    with pytest.raises(StoryAnchorError):
        adam_step(store, {"w": np.array([1.0])}, state)
    with pytest.raises(StoryAnchorError):
        adam_step(store, {"w": np.array([1.0]), "v": np.array([1.0]),
                          "ghost": np.array([1.0])}, state)


def test_clip_norm_scales_update():
    # A huge gradient with aggressive clipping behaves like a unit-scale one.
    big = store_with(w=[0.0])
    small = store_with(w=[0.0])
    sa, sb = AdamState(lr=0.1), AdamState(lr=0.1)
    adam_step(big, {"w": np.array([1e6])}, sa, clip_norm=1.0)
    adam_step(small, {"w": np.array([1.0])}, sb, clip_norm=None)
    assert big["w"].data[0] == pytest.approx(small["w"].data[0], rel=1e-9)


def test_deterministic_sequence():
    def run():
        store = store_with(w=np.arange(4, dtype=np.float64))
        state = AdamState(lr=0.01)
        rng = np.random.default_rng(9)
        for _ in range(25):
            adam_step(store, {"w": rng.normal(size=4)}, state)
        return store["w"].data.copy()

    np.testing.assert_array_equal(run(), run())
