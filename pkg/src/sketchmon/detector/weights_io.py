"""Model weight archive: JSON header plus flat little-endian float32 data.

Layout: 4-byte little-endian header length, UTF-8 JSON header
{"format_version": 1, "layers": [{"name", "shape"}, ...]}, then each
layer's values as raw '<f4' in header order. Language-neutral on purpose.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

FORMAT_VERSION = 1


def save_weights(net: torch.nn.Module, path: str | Path) -> None:
    state = net.state_dict()
    layers = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    header = json.dumps({"format_version": FORMAT_VERSION, "layers": layers}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for v in state.values():
            fh.write(v.detach().cpu().numpy().astype("<f4").tobytes())


def load_weights(net: torch.nn.Module, path: str | Path) -> None:
    with open(path, "rb") as fh:
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported weight format: {header.get('format_version')}")
        state = net.state_dict()
        expected = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
        if header["layers"] != expected:
            raise ValueError("weight archive does not match the network's layer shapes")
        new_state = {}
        for layer in header["layers"]:
            count = int(np.prod(layer["shape"])) if layer["shape"] else 1
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise ValueError("truncated weight archive")
            arr = np.frombuffer(raw, dtype="<f4").reshape(layer["shape"]).copy()
            new_state[layer["name"]] = torch.from_numpy(arr).to(state[layer["name"]].dtype)
    net.load_state_dict(new_state)
