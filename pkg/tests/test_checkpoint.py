import numpy as np
import pytest

from storyanchor import checkpoint as ck
from storyanchor.errors import FormatError
from storyanchor.optim import AdamState, ParamStore


def sample_store():
    store = ParamStore()
    rng = np.random.default_rng(12)
    store.add("b.bias", rng.normal(size=3))
    store.add("a.weight", rng.normal(size=(4, 3)))
    store.add("frozen", rng.normal(size=2))
    store.set_trainable("frozen", False)
    return store


def test_roundtrip_exact():
    store = sample_store()
    meta = {"stage": 1, "note": "unit"}
    raw = ck.serialize(store, meta)
    loaded, meta2, adam = ck.deserialize(raw)
    assert adam is None
    assert meta2 == meta
    assert loaded.names() == store.names()
    for name, t in store.items():
        np.testing.assert_array_equal(loaded[name].data, t.data)
        assert loaded.is_trainable(name) == store.is_trainable(name)


def test_roundtrip_with_adam_state():
    store = sample_store()
    state = AdamState(lr=0.002)
    from storyanchor.optim import adam_step
    grads = {n: np.ones_like(t.data) for n, t in store.items()
             if store.is_trainable(n)}
    adam_step(store, grads, state)
    raw = ck.serialize(store, {}, state)
    _, _, state2 = ck.deserialize(raw)
    assert state2.step == 1
    assert state2.lr == 0.002
    for name in state.m:
        np.testing.assert_array_equal(state2.m[name], state.m[name])
        np.testing.assert_array_equal(state2.v[name], state.v[name])


def test_byte_determinism():
    a = ck.serialize(sample_store(), {"k": [1, 2], "z": "x"})
    b = ck.serialize(sample_store(), {"z": "x", "k": [1, 2]})
    assert a == b  # same content serializes identically, key order included


def test_header():
    raw = ck.serialize(sample_store(), {})
    assert raw[:4] == b"SANC"
    assert int.from_bytes(raw[4:6], "little") == 1


def test_file_roundtrip(tmp_path):
    store = sample_store()
    path = tmp_path / "model.sanc"
    ck.save(path, store, {"epoch": 7})
    loaded, meta, _ = ck.load(path)
    assert meta["epoch"] == 7
    np.testing.assert_array_equal(loaded["a.weight"].data,
                                  store["a.weight"].data)


def test_bad_magic_rejected():
    raw = bytearray(ck.serialize(sample_store(), {}))
    raw[:4] = b"XXXX"
    with pytest.raises(FormatError):
        ck.deserialize(bytes(raw))


def test_truncation_rejected():
    raw = ck.serialize(sample_store(), {})
    with pytest.raises(FormatError):
        ck.deserialize(raw[: len(raw) - 5])


def test_unknown_version_rejected():
    raw = bytearray(ck.serialize(sample_store(), {}))
    raw[4:6] = (99).to_bytes(2, "little")
    with pytest.raises(FormatError):
        ck.deserialize(bytes(raw))
