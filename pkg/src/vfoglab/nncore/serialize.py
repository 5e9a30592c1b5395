"""Exact array encoding for model bundles: base64 of little-endian float64."""

import base64

import numpy as np


def encode_array(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(doc):
    raw = base64.b64decode(doc["data"].encode("ascii"), validate=True)
    shape = tuple(int(s) for s in doc["shape"])
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise ValueError(f"array payload has {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def encode_params(model):
    return {name: encode_array(arr) for name, arr in model.params().items()}


def load_params(model, doc):
    params = model.params()
    if set(params) != set(doc):
        raise ValueError("parameter names in bundle do not match the network spec")
    for name, arr in params.items():
        vals = decode_array(doc[name])
        if vals.shape != arr.shape:
            raise ValueError(f"parameter {name}: shape {vals.shape} != {arr.shape}")
        arr[...] = vals
