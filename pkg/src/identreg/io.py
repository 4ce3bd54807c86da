"""CSV input, canonical JSON output and provenance headers."""
from __future__ import annotations

import csv
import io as _io
import json
import math
from importlib import resources

import numpy as np

from . import __version__
from .errors import EmptyData, ValidationError
from .sample import Dataset


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_table(path) -> tuple:
    """Numeric CSV table; a first row with any non-numeric cell is a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyData(f"{path} is empty")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyData(f"{path} has a header but no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or (header is not None and len(header) != width):
        raise ValidationError(f"{path} has ragged rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    return header, data


def read_dataset(path, response: str | None = None) -> Dataset:
    """Dataset from CSV; the response is the named column or the last one."""
    header, data = read_table(path)
    if data.shape[1] < 2:
        raise ValidationError("a dataset needs at least one feature column and a response column")
    idx = data.shape[1] - 1
    if response is not None:
        if header is None or response not in header:
            raise ValidationError(f"response column {response!r} not found")
        idx = header.index(response)
    x = np.delete(data, idx, axis=1)
    return Dataset(x, data[:, idx])


def read_matrix(path) -> np.ndarray:
    return read_table(path)[1]


def read_vector(path) -> np.ndarray:
    data = read_table(path)[1]
    if 1 not in data.shape:
        raise ValidationError(f"{path} does not hold a vector")
    return data.reshape(-1)


def jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def provenance(command: str, seed, tol, threads: int | None = None) -> dict:
    # threads is deliberately left out: output must not depend on it
    return {"tool": "identreg", "version": __version__, "command": command, "seed": seed,
            "tolerances": tol.to_dict()}


def rows_to_csv(rows: list, columns: list, header_comment: dict | None = None) -> str:
    buf = _io.StringIO()
    if header_comment is not None:
        buf.write("# " + json.dumps(jsonable(header_comment), sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def load_schema(name: str) -> dict:
    text = resources.files("identreg").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
