"""Versioned model files.

Layout, one UTF-8 text file::

    LENDSCORE-MODEL <format version> <sha256 hex of the payload bytes>\\n
    <payload: canonical JSON, sort_keys, no trailing newline>

The payload always has a ``kind`` ("widedeep" or "cart"). Wide-and-deep
payloads carry the task tag, the feature schema and every parameter array.
Arrays are stored as ``{"shape": [...], "b64": ...}`` with little-endian
float64 bytes, so a load returns bit-identical values. Trees use the nested
dict form of ``baselines.tree_to_dict``.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from .baselines import tree_from_dict, tree_to_dict
from .errors import ChecksumMismatch, IoError, VersionMismatch
from .features import FeatureSchema
from .widedeep import ModelParams, Task

MAGIC = "LENDSCORE-MODEL"
FORMAT_VERSION = 1


def encode_array(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "b64": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d):
    raw = base64.b64decode(d["b64"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])


def params_to_dict(params):
    return {
        "task": params.task.value,
        "use_wide": params.use_wide,
        "use_deep": params.use_deep,
        "embedded": list(params.embedded),
        "wide": encode_array(params.wide),
        "embeddings": {k: encode_array(v) for k, v in params.embeddings.items()},
        "weights": [encode_array(W) for W in params.weights],
        "biases": [encode_array(b) for b in params.biases],
        "w_deep": encode_array(params.w_deep),
        "bias": encode_array(params.bias),
    }


def params_from_dict(d):
    return ModelParams(
        task=Task(d["task"]),
        wide=decode_array(d["wide"]),
        embeddings={k: decode_array(v) for k, v in d["embeddings"].items()},
        weights=[decode_array(W) for W in d["weights"]],
        biases=[decode_array(b) for b in d["biases"]],
        w_deep=decode_array(d["w_deep"]),
        bias=decode_array(d["bias"]),
        use_wide=bool(d["use_wide"]),
        use_deep=bool(d["use_deep"]),
        embedded=tuple(d["embedded"]),
    )


def dumps(payload):
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{MAGIC} {FORMAT_VERSION} {digest}\n{body}"


def loads(text):
    header, sep, body = text.partition("\n")
    parts = header.split(" ")
    if len(parts) != 3 or parts[0] != MAGIC:
        raise ChecksumMismatch("not a model file (bad header)")
    try:
        version = int(parts[1])
    except ValueError:
        raise VersionMismatch(f"unreadable format version {parts[1]!r}") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model file format version {version}, this build reads {FORMAT_VERSION}")
    if not sep or hashlib.sha256(body.encode("utf-8")).hexdigest() != parts[2]:
        raise ChecksumMismatch("payload checksum does not match header (truncated or edited file)")
    return json.loads(body)


def _write(path, payload):
    try:
        Path(path).write_text(dumps(payload), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read(path, kind):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    payload = loads(text)
    if payload.get("kind") != kind:
        raise IoError(f"{path} holds a {payload.get('kind')!r} model, expected {kind!r}")
    return payload


def save_model(params, schema, path, extra=None):
    """Write a wide-and-deep model with its feature schema.

    ``extra`` is a small JSON-able dict stored alongside (e.g. gamma).
    """
    payload = {"kind": "widedeep", "params": params_to_dict(params), "schema": schema.to_dict()}
    if extra:
        payload["extra"] = extra
    _write(path, payload)


def load_model(path):
    """Returns (params, schema, extra)."""
    payload = _read(path, "widedeep")
    return (
        params_from_dict(payload["params"]),
        FeatureSchema.from_dict(payload["schema"]),
        payload.get("extra", {}),
    )


def save_tree(tree, path):
    _write(path, {"kind": "cart", "tree": tree_to_dict(tree)})


def load_tree(path):
    return tree_from_dict(_read(path, "cart")["tree"])
