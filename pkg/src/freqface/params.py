"""Named parameter store and its on-disk formats.

Two formats live here:

* parameter stores: ``<prefix>.manifest`` (text lines ``name dims offset``)
  plus ``<prefix>.bin`` holding the concatenated little-endian float32 arrays;
* single-array float maps: one file with an ASCII header line
  ``f32map <rank> <d0> <d1> ...`` followed by the raw little-endian float32
  payload (used for DCT coefficient-grid dumps).

Both round-trip float32 data bit-exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .autograd import Tensor
from .errors import UsageError


class ParamStore:
    """Ordered name -> Tensor registry for one network's learnable state."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter name {name!r}")
        if " " in name:
            raise UsageError(f"parameter names must not contain spaces: {name!r}")
        t = Tensor(np.asarray(array, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        if set(arrays) != set(self._params):
            missing = set(self._params) - set(arrays)
            extra = set(arrays) - set(self._params)
            raise UsageError(f"parameter set mismatch (missing={sorted(missing)}, extra={sorted(extra)})")
        for name, t in self._params.items():
            arr = np.asarray(arrays[name], dtype=self.dtype)
            if arr.shape != t.data.shape:
                raise UsageError(f"shape mismatch for {name!r}: {arr.shape} vs {t.data.shape}")
            t.data = arr

    def save(self, prefix: str):
        save_arrays(prefix, self.state_arrays())

    def load(self, prefix: str):
        self.load_state(load_arrays(prefix))


def _dims_token(shape) -> str:
    return "x".join(str(d) for d in shape) if shape else "0"


def save_arrays(prefix: str, arrays: dict[str, np.ndarray]):
    """Write a manifest + flat little-endian float32 blob pair."""
    lines = []
    offset = 0
    with open(prefix + ".bin", "wb") as blob:
        for name, arr in arrays.items():
            raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            lines.append(f"{name} {_dims_token(arr.shape)} {offset}\n")
            blob.write(raw)
            offset += len(raw)
    with open(prefix + ".manifest", "w") as manifest:
        manifest.writelines(lines)


def load_arrays(prefix: str) -> dict[str, np.ndarray]:
    """Read a manifest + blob pair back into float32 arrays."""
    arrays: dict[str, np.ndarray] = {}
    with open(prefix + ".bin", "rb") as blob:
        raw = blob.read()
    with open(prefix + ".manifest") as manifest:
        for line in manifest:
            line = line.strip()
            if not line:
                continue
            name, dims, offset = line.split(" ")
            shape = tuple(int(d) for d in dims.split("x"))
            count = int(np.prod(shape))
            start = int(offset)
            flat = np.frombuffer(raw, dtype="<f4", count=count, offset=start)
            arrays[name] = flat.reshape(shape).astype(np.float32)
    return arrays


def write_float_map(path: str, array: np.ndarray):
    """Dump one float array as a self-describing little-endian f32 file."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = "f32map " + str(arr.ndim) + " " + " ".join(str(d) for d in arr.shape) + "\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(arr.tobytes())


def read_float_map(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        header = bytearray()
        while not header.endswith(b"\n"):
            byte = f.read(1)
            if not byte:
                raise UsageError(f"{path}: truncated float map header")
            header += byte
        fields = header.decode("ascii").split()
        if not fields or fields[0] != "f32map":
            raise UsageError(f"{path}: not a float map file")
        rank = int(fields[1])
        shape = tuple(int(d) for d in fields[2:2 + rank])
        payload = f.read()
    flat = np.frombuffer(payload, dtype="<f4", count=int(np.prod(shape)))
    return flat.reshape(shape).astype(np.float32)


def same_files(path_a: str, path_b: str) -> bool:
    """Byte equality of two files (checkpoint determinism checks)."""
    if os.path.getsize(path_a) != os.path.getsize(path_b):
        return False
    with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
        return fa.read() == fb.read()
