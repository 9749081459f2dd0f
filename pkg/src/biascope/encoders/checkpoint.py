"""CKPT1 files: one JSON header line, then little-endian float32 tensors."""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch

FORMAT = "CKPT1"


def write_checkpoint(path, header: dict, tensors: dict[str, torch.Tensor]) -> Path:
    """Atomically write ``tensors`` (serialized in sorted-name order) under ``header``."""
    path = Path(path)
    names = sorted(tensors)
    head = dict(header)
    head["format"] = FORMAT
    head["tensors"] = [[n, list(tensors[n].shape)] for n in names]
    blob = b"".join(
        tensors[n].detach().to(torch.float32).contiguous().numpy().astype("<f4").tobytes() for n in names
    )
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)
    os.replace(tmp, path)
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, torch.Tensor]]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} checkpoint")
    offset = nl + 1
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        tensors[name] = torch.from_numpy(arr.astype(np.float32))
        offset += 4 * count
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after tensor blob")
    return header, tensors


def split_prefix(tensors: dict, prefix: str) -> dict:
    n = len(prefix)
    return {k[n:]: v for k, v in tensors.items() if k.startswith(prefix)}
