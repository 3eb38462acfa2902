"""
Parameter checkpoints: one blob of little-endian float32 arrays plus a JSON
manifest mapping each name to its shape, byte offset and byte length.
"""

import json
import os
from collections import OrderedDict
from typing import Dict, Tuple

import numpy as np
import torch

from ..errors import DataError

SCHEMA_VERSION = 1


def manifest_path(path: str) -> str:
    return path + ".json"


def save_checkpoint(path: str, arrays: Dict[str, object], extra: dict = None):
    """
    Write named arrays to `path` and the manifest to `path`.json.

    Args:
        path: Blob file path
        arrays: Name -> tensor or array, written in insertion order
        extra: JSON-serialisable metadata stored in the manifest
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    entries = OrderedDict()
    offset = 0
    with open(path, "wb") as blob:
        for name, value in arrays.items():
            if torch.is_tensor(value):
                value = value.detach().cpu().numpy()
            data = np.ascontiguousarray(value, dtype="<f4")
            payload = data.tobytes()
            blob.write(payload)
            entries[name] = {"shape": list(data.shape), "offset": offset, "length": len(payload)}
            offset += len(payload)

    manifest = {"schema_version": SCHEMA_VERSION, "parameters": entries, "extra": extra or {}}
    with open(manifest_path(path), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=False)


def load_checkpoint(path: str) -> Tuple["OrderedDict[str, np.ndarray]", dict]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        (name -> float32 array, extra metadata)

    Raises:
        FileNotFoundError: If the blob or manifest is missing
        DataError: If the manifest does not match the blob
    """
    for required in (path, manifest_path(path)):
        if not os.path.exists(required):
            raise FileNotFoundError(f"checkpoint file not found: {required}")

    with open(manifest_path(path), "r") as f:
        manifest = json.load(f)
    with open(path, "rb") as f:
        blob = f.read()

    arrays = OrderedDict()
    for name, entry in manifest["parameters"].items():
        start, length = entry["offset"], entry["length"]
        if start + length > len(blob):
            raise DataError(f"{path}: parameter '{name}' runs past the end of the blob")
        data = np.frombuffer(blob[start:start + length], dtype="<f4")
        arrays[name] = data.reshape(entry["shape"]).astype(np.float32)
    return arrays, manifest.get("extra", {})
