"""Raw int8 tensor files with JSON shape headers.

A tensor ``x`` lives in ``x.bin`` (little-endian int8, C order over
[channel][x][y]) next to ``x.bin.json`` holding ``{"shape": [d, w, h]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def save_tensor(path, array):
    arr = np.asarray(array)
    if arr.min(initial=0) < -128 or arr.max(initial=0) > 127:
        raise ValueError("tensor values outside int8")
    path = Path(path)
    path.write_bytes(arr.astype("<i1").tobytes())
    header = {"shape": list(arr.shape), "dtype": "int8", "order": "cxy"}
    Path(str(path) + ".json").write_text(json.dumps(header) + "\n")
    return path


def load_tensor(path):
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<i1")
    return data.reshape(header["shape"]).astype(np.int64)
