import numpy as np
import pytest

from freqface.errors import UsageError
from freqface.params import (ParamStore, load_arrays, read_float_map, same_files,
                             save_arrays, write_float_map)


def test_store_registers_and_rejects_duplicates(rng):
    store = ParamStore()
    t = store.add("layer.w", rng.standard_normal((3, 4)))
    assert t.requires_grad and t.dtype == np.float32
    assert "layer.w" in store and len(store) == 1
    with pytest.raises(UsageError):
        store.add("layer.w", np.zeros(2))
    with pytest.raises(UsageError):
        store.add("bad name", np.zeros(2))


def test_save_load_roundtrip_bit_exact(tmp_path, rng):
    arrays = {
        "a.w": rng.standard_normal((4, 3, 3, 3)).astype(np.float32),
        "a.b": rng.standard_normal(4).astype(np.float32),
        "deep.nested.name": rng.standard_normal((2, 2)).astype(np.float32),
    }
    prefix = str(tmp_path / "params")
    save_arrays(prefix, arrays)
    loaded = load_arrays(prefix)
    assert list(loaded) == list(arrays)
    for name in arrays:
        np.testing.assert_array_equal(loaded[name], arrays[name])
        assert loaded[name].dtype == np.float32


def test_manifest_format(tmp_path, rng):
    prefix = str(tmp_path / "p")
    save_arrays(prefix, {"x.w": np.zeros((2, 3), np.float32), "x.b": np.zeros(5, np.float32)})
    lines = open(prefix + ".manifest").read().splitlines()
    assert lines[0] == "x.w 2x3 0"
    assert lines[1] == "x.b 5 24"  # offset 2*3*4 bytes


def test_store_state_roundtrip(tmp_path, rng):
    store = ParamStore()
    store.add("a", rng.standard_normal((3, 3)))
    store.add("b", rng.standard_normal(7))
    before = {k: v.copy() for k, v in store.state_arrays().items()}
    prefix = str(tmp_path / "s")
    store.save(prefix)
    for t in store.tensors():
        t.data = np.zeros_like(t.data)
    store.load(prefix)
    for name, arr in before.items():
        np.testing.assert_array_equal(store[name].data, arr)


def test_load_state_validates_names(rng):
    store = ParamStore()
    store.add("a", np.zeros(3, np.float32))
    with pytest.raises(UsageError):
        store.load_state({"b": np.zeros(3, np.float32)})
    with pytest.raises(UsageError):
        store.load_state({"a": np.zeros(4, np.float32)})


def test_float_map_roundtrip(tmp_path, rng):
    arr = rng.standard_normal((64, 4, 4)).astype(np.float32)
    path = str(tmp_path / "grid.f32")
    write_float_map(path, arr)
    loaded = read_float_map(path)
    np.testing.assert_array_equal(loaded, arr)
    assert loaded.dtype == np.float32


def test_float_map_rejects_garbage(tmp_path):
    path = str(tmp_path / "bad.f32")
    with open(path, "wb") as f:
        f.write(b"not a float map\n1234")
    with pytest.raises(UsageError):
        read_float_map(path)


def test_same_files(tmp_path):
    a, b, c = (tmp_path / n for n in ("a", "b", "c"))
    a.write_bytes(b"hello")
    b.write_bytes(b"hello")
    c.write_bytes(b"hellO")
    assert same_files(str(a), str(b))
    assert not same_files(str(a), str(c))
