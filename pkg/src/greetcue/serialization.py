"""Versioned model container shared by the forecaster and the classifiers.

Models are stored as an .npz archive: a JSON metadata entry carrying the kind,
format version, hyperparameters, declared tensor dimensions and training log,
plus one array entry per weight tensor (row-major). Loading validates every
tensor against its declared dimensions and rejects mismatches.
"""

from __future__ import annotations

import json
import os
from typing import Mapping

import numpy as np

from .errors import DimensionMismatch, GreetcueError

FORMAT_VERSION = 1
_META_KEY = "__meta__"


def save_container(path: str | os.PathLike, kind: str,
                   hyperparameters: Mapping[str, object],
                   tensors: Mapping[str, np.ndarray],
                   training_log: list | None = None) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "hyperparameters": dict(hyperparameters),
        "tensor_dims": {name: list(arr.shape) for name, arr in tensors.items()},
        "training_log": training_log or [],
    }
    payload = {name: np.ascontiguousarray(arr) for name, arr in tensors.items()}
    payload[_META_KEY] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **payload)


def load_container(path: str | os.PathLike, expect_kind: str | None = None,
                   ) -> tuple[dict, dict[str, np.ndarray]]:
    """Returns (metadata, tensors). Raises on version/kind/shape mismatches."""
    with np.load(os.fspath(path)) as data:
        if _META_KEY not in data:
            raise GreetcueError(f"{path}: not a model container (missing metadata)")
        meta = json.loads(bytes(data[_META_KEY]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise GreetcueError(
                f"{path}: unsupported container version {meta.get('format_version')}")
        if expect_kind is not None and meta.get("kind") != expect_kind:
            raise GreetcueError(
                f"{path}: expected a {expect_kind!r} container, "
                f"got {meta.get('kind')!r}")
        tensors: dict[str, np.ndarray] = {}
        dims = meta.get("tensor_dims", {})
        for name in data.files:
            if name == _META_KEY:
                continue
            arr = data[name]
            declared = dims.get(name)
            if declared is None or tuple(declared) != arr.shape:
                raise DimensionMismatch(
                    f"{path}: tensor {name!r} has shape {arr.shape}, "
                    f"declared {declared}")
            tensors[name] = arr
        missing = set(dims) - set(tensors)
        if missing:
            raise DimensionMismatch(f"{path}: missing tensors {sorted(missing)}")
    return meta, tensors


def sniff_kind(path: str | os.PathLike) -> str:
    meta, _ = load_container(path)
    return meta["kind"]
