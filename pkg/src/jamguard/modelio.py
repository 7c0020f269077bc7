"""Versioned JSON persistence for trained models."""

from __future__ import annotations

import json
import math

from .errors import DataError
from .forest import Forest
from .neuralnet import NeuralNet
from .svm import SvmModel

_FAMILIES = {"forest": Forest, "svm": SvmModel, "nn": NeuralNet}


def _canonical(value):
    """Round floats to 12 significant digits so dumps are byte-stable."""
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DataError(f"non-finite value {value} in model document")
        return float(format(value, ".12g"))
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def dumps_canonical(doc: dict) -> str:
    return json.dumps(_canonical(doc), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model, path) -> None:
    with open(path, "w") as f:
        f.write(dumps_canonical(model.to_dict()))


def load_model(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from None
    family = doc.get("family")
    if family not in _FAMILIES:
        raise DataError(f"{path}: unknown model family {family!r}")
    if doc.get("schema_version") != 1:
        raise DataError(f"{path}: unsupported schema_version {doc.get('schema_version')}")
    return _FAMILIES[family].from_dict(doc)
