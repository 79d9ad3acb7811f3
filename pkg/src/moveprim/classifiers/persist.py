"""Field-for-field JSON save/load of fitted classifiers."""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..errors import IoError, ValidationError
from .svm import BinaryMachine, BinarySVM

FORMAT_VERSION = 1


def _registry() -> dict[str, type]:
    from . import ALGORITHMS

    classes = {cls.__name__: cls for cls in ALGORITHMS.values()}
    classes[BinarySVM.__name__] = BinarySVM
    return classes


def _encode(obj):
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind not in "biuf":
            raise ValidationError(f"cannot serialize array of dtype {obj.dtype}")
        return {"__ndarray__": obj.ravel().tolist(), "dtype": obj.dtype.str, "shape": list(obj.shape)}
    if isinstance(obj, BinaryMachine):
        return {"__machine__": {f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
        if "__machine__" in obj:
            return BinaryMachine(**{k: _decode(v) for k, v in obj["__machine__"].items()})
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_dict(model) -> dict:
    """Constructor parameters plus every public fitted attribute (trailing ``_``)."""
    fitted = {k: v for k, v in vars(model).items() if k.endswith("_") and not k.startswith("_")}
    if not fitted:
        raise ValidationError(f"{type(model).__name__} is not fitted")
    return {"format": FORMAT_VERSION, "class": type(model).__name__,
            "params": _encode(model.get_params()), "fitted": _encode(fitted)}


def model_from_dict(doc: dict):
    try:
        cls = _registry()[doc["class"]]
    except KeyError:
        raise ValidationError(f"unknown model class {doc.get('class')!r}") from None
    if doc.get("format") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format {doc.get('format')!r}")
    model = cls(**_decode(doc["params"]))
    for k, v in _decode(doc["fitted"]).items():
        setattr(model, k, v)
    return model


def save_model(model, path) -> None:
    try:
        Path(path).write_text(json.dumps(model_to_dict(model), allow_nan=False) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path):
    try:
        return model_from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
