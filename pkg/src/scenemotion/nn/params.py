"""Named parameter tensors with gradient slots, init, and persistence.

Weights persist to a single versioned container: a JSON manifest (names,
shapes, seed, arbitrary metadata) followed by little-endian float64 blobs
in manifest order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import NumericError

MAGIC = b"SMWT"
CONTAINER_VERSION = 1


class Param:
    """A trainable array plus its gradient slot."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Param({self.name}, shape={self.value.shape})"


def uniform_init(rng, shape, fan_in):
    """Uniform fan-in scaled initialization, U(-1/sqrt(fan_in), +)."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Tiny base: modules expose their params and submodules by attribute."""

    def params(self):
        out = []
        for key in sorted(vars(self)):
            val = getattr(self, key)
            if isinstance(val, Param):
                out.append(val)
            elif isinstance(val, Module):
                out.extend(val.params())
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        out.extend(item.params())
                    elif isinstance(item, Param):
                        out.append(item)
        return out

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def named_arrays(self, prefix=""):
        out = {}
        for key in sorted(vars(self)):
            val = getattr(self, key)
            name = f"{prefix}{key}"
            if isinstance(val, Param):
                out[name] = val.value
            elif isinstance(val, Module):
                out.update(val.named_arrays(prefix=name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_arrays(prefix=f"{name}.{i}."))
                    elif isinstance(item, Param):
                        out[f"{name}.{i}"] = item.value
        return out

    def named_params(self, prefix=""):
        arrays = {}

        def walk(mod, pre):
            for key in sorted(vars(mod)):
                val = getattr(mod, key)
                name = f"{pre}{key}"
                if isinstance(val, Param):
                    arrays[name] = val
                elif isinstance(val, Module):
                    walk(val, name + ".")
                elif isinstance(val, (list, tuple)):
                    for i, item in enumerate(val):
                        if isinstance(item, Module):
                            walk(item, f"{name}.{i}.")
                        elif isinstance(item, Param):
                            arrays[f"{name}.{i}"] = item

        walk(self, prefix)
        return arrays

    def load_arrays(self, arrays):
        params = self.named_params()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise ValueError(f"weight mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, param in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != param.value.shape:
                raise ValueError(f"{name}: stored shape {arr.shape} != model shape {param.value.shape}")
            param.value[...] = arr

    def checksum(self):
        """Order-stable fingerprint of all parameter values."""
        import hashlib
        hasher = hashlib.sha256()
        for name, arr in sorted(self.named_arrays().items()):
            hasher.update(name.encode())
            hasher.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return hasher.hexdigest()


def check_finite_grads(params):
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")


def save_weights(path, arrays, meta=None):
    """Write the versioned weight container."""
    order = sorted(arrays)
    manifest = {
        "version": CONTAINER_VERSION,
        "dtype": "<f8",
        "tensors": [{"name": n, "shape": list(np.asarray(arrays[n]).shape)} for n in order],
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", CONTAINER_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in order:
            f.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def load_weights(path):
    """Read the container; returns (arrays dict, meta dict)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a weight container")
        version, = struct.unpack("<I", f.read(4))
        if version != CONTAINER_VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        hlen, = struct.unpack("<I", f.read(4))
        manifest = json.loads(f.read(hlen).decode())
        arrays = {}
        for rec in manifest["tensors"]:
            count = int(np.prod(rec["shape"])) if rec["shape"] else 1
            data = np.frombuffer(f.read(count * 8), dtype="<f8")
            arrays[rec["name"]] = data.reshape(rec["shape"]).astype(np.float64)
    return arrays, manifest.get("meta", {})
