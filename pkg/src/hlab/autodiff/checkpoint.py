"""Parameter checkpoints: flat binary blob + JSON manifest.

The blob is the little-endian float64 concatenation of all parameters in
manifest order; the manifest records (name, shape, byte offset) so files
are stable across runs for resume/replay.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor import Tensor

__all__ = ["save_checkpoint", "load_checkpoint", "apply_checkpoint"]


def save_checkpoint(path: str | Path, named_params: dict[str, Tensor]) -> None:
    path = Path(path)
    manifest = []
    chunks = []
    offset = 0
    for name in sorted(named_params):
        arr = np.ascontiguousarray(named_params[name].data, dtype="<f8")
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps({"params": manifest, "total_bytes": offset}, indent=2))
    path.write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    manifest = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    blob = path.read_bytes()
    out = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(blob, dtype="<f8", count=n, offset=entry["offset"])
        out[entry["name"]] = flat.reshape(shape).astype(np.float64)
    return out


def apply_checkpoint(path: str | Path, named_params: dict[str, Tensor]) -> None:
    values = load_checkpoint(path)
    missing = set(named_params) - set(values)
    if missing:
        raise KeyError(f"checkpoint missing parameters: {sorted(missing)}")
    for name, tensor in named_params.items():
        arr = values[name]
        if arr.shape != tensor.shape:
            raise ValueError(f"{name}: checkpoint shape {arr.shape} != {tensor.shape}")
        tensor.data = arr.copy()
