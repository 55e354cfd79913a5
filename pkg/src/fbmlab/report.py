"""Report serialization: atomic file writes, JSON schemas and tidy CSV."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import jsonschema
import numpy as np

__all__ = ["atomic_write", "to_json", "load_schema", "validate", "emit", "csv_text"]

SCHEMAS = ("quad_result", "scalar_result", "curve", "experiment_report", "bound_report",
           "acceptance_report", "path")


def _plain(obj):
    """Turn numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: str, data: str | bytes) -> None:
    """Write to a temporary file in the target directory, then rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise KeyError(f"unknown schema {name!r}")
    text = resources.files("fbmlab").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def validate(obj, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``obj`` (after JSON round trip) fits ``name``."""
    jsonschema.validate(json.loads(to_json(obj)), load_schema(name))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def emit(text: str | bytes, output: str | None, stream=None) -> None:
    """Write ``text`` atomically to ``output``, or to ``stream`` (stdout) when no path is given."""
    if output:
        atomic_write(output, text)
        return
    import sys
    stream = stream or sys.stdout
    if isinstance(text, bytes):
        stream.buffer.write(text)
    else:
        stream.write(text)
