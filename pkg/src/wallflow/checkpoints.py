"""Model checkpoints: length-prefixed named arrays with a JSON header.

Layout (little-endian):

    magic   4 bytes  b"WFCP"
    u64     header length
    header  JSON utf-8 (model config, optimizer step counts, metadata)
    records, each:
        u32      name length, then name utf-8
        u8       dtype code (0 = float64, 1 = complex128)
        u32      ndim, then ndim u64 dims
        payload  raw little-endian bytes

Round trips are bit-exact; record order follows insertion order of the
parameter stores, which is deterministic.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"WFCP"
_DTYPES = {0: "<f8", 1: "<c16"}
_CODES = {np.dtype(np.float64): 0, np.dtype(np.complex128): 1}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], header: dict):
    hdr = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hdr)))
        fh.write(hdr)
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            if arr.dtype not in _CODES:
                arr = arr.astype(np.complex128 if np.iscomplexobj(arr) else np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BI", _CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr).astype(
                _DTYPES[_CODES[arr.dtype]]).tobytes())


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}; not a checkpoint file")
    (hlen,) = struct.unpack_from("<Q", raw, 4)
    off = 12
    header = json.loads(raw[off:off + hlen].decode("utf-8"))
    off += hlen
    arrays = {}
    while off < len(raw):
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        code, ndim = struct.unpack_from("<BI", raw, off)
        off += 5
        shape = struct.unpack_from(f"<{ndim}Q", raw, off)
        off += 8 * ndim
        if code not in _DTYPES:
            raise CheckpointError(f"unknown dtype code {code} for {name!r}")
        dt = np.dtype(_DTYPES[code])
        count = int(np.prod(shape)) if ndim else 1
        nbytes = count * dt.itemsize
        if off + nbytes > len(raw):
            raise CheckpointError("checkpoint truncated")
        arrays[name] = np.frombuffer(raw[off:off + nbytes], dtype=dt).reshape(shape).copy()
        off += nbytes
    return header, arrays


def save_models(path: str, policy, observer, extra: dict | None = None):
    """Write both parameter stores plus the model configuration."""
    header = {
        "model_config": policy.config.to_dict(),
        "policy_step_count": policy.store.step_count,
        "observer_step_count": observer.store.step_count,
    }
    if extra:
        header.update(extra)
    arrays = {}
    for tag, store in (("policy", policy.store), ("observer", observer.store)):
        for name, arr in store.state_arrays().items():
            arrays[f"{tag}/{name}"] = arr
    save_checkpoint(path, arrays, header)


def load_models(path: str, seed: int = 0):
    """Rebuild a policy/observer pair from a checkpoint."""
    from .models import ModelConfig, build_models

    header, arrays = load_checkpoint(path)
    cfg = ModelConfig.from_dict(header["model_config"])
    policy, observer = build_models(cfg, seed)
    for tag, model, key in (("policy", policy, "policy_step_count"),
                            ("observer", observer, "observer_step_count")):
        sub = {name[len(tag) + 1:]: arr for name, arr in arrays.items()
               if name.startswith(tag + "/")}
        model.store.load_state_arrays(sub, header.get(key, 0))
    return policy, observer, header
