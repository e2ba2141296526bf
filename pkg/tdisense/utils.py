"""
Helpers shared by the experiment engine, the CLI and the API
"""
import hashlib
import json
import math
import os
from datetime import datetime, timezone

import numpy as np


def stream_seed(seed, *keys):
    """Stable 128-bit stream key for (seed, point, repetition, ...)"""
    material = ':'.join(str(int(k)) for k in (seed,) + keys).encode('utf-8')
    return int.from_bytes(hashlib.sha256(material).digest()[:16], 'big')


def derive_rng(seed, *keys):
    """Counter-based generator keyed by (seed, *keys); independent of scheduling order"""
    return np.random.Generator(np.random.Philox(key=stream_seed(seed, *keys)))


def _default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(data, indent=None):
    """Deterministic JSON encoding (sorted keys, numpy scalars unwrapped)"""
    return json.dumps(data, sort_keys=True, indent=indent, default=_default, allow_nan=True)


def content_hash(payload):
    if isinstance(payload, str):
        payload = payload.encode('utf-8')
    return hashlib.sha256(payload).hexdigest()


def utc_timestamp():
    return datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')


def ensure_directory(path):
    os.makedirs(path, exist_ok=True)
    return path


def format_float(value):
    """Round-trip repr for CSV cells; empty for missing values"""
    if value is None:
        return ''
    value = float(value)
    if math.isnan(value):
        return 'nan'
    return repr(value)


def log_grid(start, stop, num):
    """Strictly increasing log-spaced grid between start and stop"""
    return [float(x) for x in np.geomspace(start, stop, int(num))]
