"""Single-file checkpoint container with named parameter blobs.

Layout: magic, 8-byte little-endian header length, a canonical JSON header
(format version, kind, step, config, blob index), then the raw array bytes
in index order. Writing is fully deterministic, so save -> load -> save
round-trips byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"FACEINPAINT-CKPT"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Corrupt or unreadable checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an incompatible format version."""


class CheckpointKindError(CheckpointError):
    """Checkpoint holds a different model kind than the caller expects."""


def config_fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Checkpoint:
    """Named parameter blobs plus optimizer state and bookkeeping.

    `arrays` maps hierarchical keys ("params/generator/enc1.0.weight",
    "opt/generator/3/exp_avg") to numpy arrays; `meta` holds any
    JSON-serializable extras (optimizer hyperparameters, counters).
    """

    kind: str
    step: int
    config: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def namespace(self, prefix: str) -> dict[str, np.ndarray]:
        """All arrays under `prefix/`, with the prefix stripped."""
        start = prefix + "/"
        return {
            key[len(start):]: value
            for key, value in self.arrays.items()
            if key.startswith(start)
        }

    def require_kind(self, kind: str) -> "Checkpoint":
        if self.kind != kind:
            raise CheckpointKindError(
                f"expected a {kind!r} checkpoint, got {self.kind!r}"
            )
        return self


def save_checkpoint(state: Checkpoint, path: str | Path) -> None:
    keys = sorted(state.arrays)
    blobs = []
    index = []
    offset = 0
    for key in keys:
        arr = np.ascontiguousarray(state.arrays[key])
        raw = arr.tobytes()
        index.append(
            {
                "key": key,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "version": FORMAT_VERSION,
        "kind": state.kind,
        "step": state.step,
        "config": state.config,
        "meta": state.meta,
        "blobs": index,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    head_len = int.from_bytes(data[len(MAGIC) : len(MAGIC) + 8], "little")
    head_start = len(MAGIC) + 8
    if len(data) < head_start + head_len:
        raise CheckpointError(f"{path} is truncated (header incomplete)")
    try:
        header = json.loads(data[head_start : head_start + head_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path} uses format version {header.get('version')}, "
            f"expected {FORMAT_VERSION}"
        )
    body = data[head_start + head_len :]
    arrays = {}
    for entry in header["blobs"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(body):
            raise CheckpointError(
                f"{path} is truncated (blob {entry['key']!r} incomplete)"
            )
        arrays[entry["key"]] = np.frombuffer(
            body[start : start + nbytes], dtype=np.dtype(entry["dtype"])
        ).reshape(entry["shape"]).copy()
    return Checkpoint(
        kind=header["kind"],
        step=header["step"],
        config=header["config"],
        arrays=arrays,
        meta=header["meta"],
    )


# ---------------------------------------------------------------------------
# torch <-> blob helpers
# ---------------------------------------------------------------------------


def pack_module(arrays: dict, prefix: str, module) -> None:
    """Store a module state dict (parameters and buffers) under `prefix/`."""
    for name, tensor in module.state_dict().items():
        arrays[f"{prefix}/{name}"] = tensor.detach().cpu().numpy().copy()


def unpack_module(ckpt: Checkpoint, prefix: str, module) -> None:
    import torch

    blobs = ckpt.namespace(prefix)
    state = module.state_dict()
    missing = set(state) - set(blobs)
    if missing:
        raise CheckpointError(
            f"checkpoint is missing {prefix} entries: {sorted(missing)[:3]}..."
        )
    module.load_state_dict({k: torch.from_numpy(blobs[k].copy()) for k in state})


def pack_optimizer(arrays: dict, meta: dict, prefix: str, optimizer) -> None:
    """Store Adam state tensors as blobs and hyperparameters in meta."""
    sd = optimizer.state_dict()
    meta[f"{prefix}/param_groups"] = [
        {k: v for k, v in group.items()} for group in sd["param_groups"]
    ]
    for idx, state in sd["state"].items():
        for key, value in state.items():
            import torch

            if isinstance(value, torch.Tensor):
                arrays[f"{prefix}/{idx}/{key}"] = value.detach().cpu().numpy().copy()
            else:
                meta[f"{prefix}/{idx}/{key}"] = value


def unpack_optimizer(ckpt: Checkpoint, prefix: str, optimizer) -> None:
    import torch

    groups = ckpt.meta.get(f"{prefix}/param_groups")
    if groups is None:
        return  # optimizer never stepped before the save
    state: dict[int, dict] = {}
    for key, arr in ckpt.namespace(prefix).items():
        idx_str, field_name = key.split("/", 1)
        entry = state.setdefault(int(idx_str), {})
        tensor = torch.from_numpy(arr.copy())
        entry[field_name] = tensor
    for key, value in ckpt.meta.items():
        if key.startswith(prefix + "/") and not key.endswith("param_groups"):
            _, idx_str, field_name = key.split("/", 2)
            state.setdefault(int(idx_str), {})[field_name] = value
    optimizer.load_state_dict({"state": state, "param_groups": groups})
