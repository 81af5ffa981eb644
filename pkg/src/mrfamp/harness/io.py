"""Grid, CSV and JSON persistence with atomic writes.

Grid format (text, diffable)::

    # mrfamp grid v1
    dim 2
    N 4
    params 0.4 0.5 0.01 0.4
    seed 7
    # config {"name": ...}
    0 1 1 0
    ...

After the header come ``N`` rows of ``N`` whitespace-separated values for a
2-D field (a single row for 1-D), row-major.  Integers are written as
integers; floats with ``repr`` precision so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ShapeError

__all__ = ["GridFile", "write_grid", "read_grid", "write_csv", "read_csv", "write_json", "atomic_write_text",
           "config_json"]

GRID_MAGIC = "# mrfamp grid v1"


def config_json(config: dict | None) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def atomic_write_text(path, text: str) -> Path:
    """Write via a temp file in the target directory and rename over the destination."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


@dataclass
class GridFile:
    values: np.ndarray
    params: tuple | None = None
    seed: int | None = None
    config: dict | None = None


def _fmt(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)


def format_grid(values, params=None, seed=None, config=None) -> str:
    values = np.asarray(values)
    if values.ndim not in (1, 2) or (values.ndim == 2 and values.shape[0] != values.shape[1]):
        raise ShapeError(f"grids must be 1-D or square 2-D, got shape {values.shape}")
    lines = [GRID_MAGIC, f"dim {values.ndim}", f"N {values.shape[0]}"]
    lines.append("params " + (" ".join(repr(float(p)) for p in params) if params is not None else "none"))
    lines.append(f"seed {seed if seed is not None else 'none'}")
    if config is not None:
        lines.append("# config " + config_json(config))
    rows = values.reshape(1, -1) if values.ndim == 1 else values
    integral = np.issubdtype(values.dtype, np.integer) or np.issubdtype(values.dtype, np.bool_)
    for row in rows:
        lines.append(" ".join(str(int(v)) if integral else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_grid(path, values, params=None, seed=None, config=None) -> Path:
    return atomic_write_text(path, format_grid(values, params, seed, config))


def read_grid(path) -> GridFile:
    header = {}
    config = None
    data = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# config "):
                    config = json.loads(line[len("# config "):])
                continue
            key = line.split(None, 1)[0]
            if key in ("dim", "N", "params", "seed") and not data:
                header[key] = line.split()[1:]
                continue
            data.append(line.split())
    try:
        dim = int(header["dim"][0])
        side = int(header["N"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise ShapeError(f"{path}: missing or malformed dim/N header") from exc
    tokens = [t for row in data for t in row]
    if len(tokens) != side**dim:
        raise ShapeError(f"{path}: expected {side**dim} values, found {len(tokens)}")
    if all(t.lstrip("-").isdigit() for t in tokens):
        values = np.array([int(t) for t in tokens], dtype=np.int64)
    else:
        values = np.array([float(t) for t in tokens])
    values = values.reshape((side,) * dim)
    params = header.get("params")
    params = None if not params or params == ["none"] else tuple(float(p) for p in params)
    seed = header.get("seed")
    seed = None if not seed or seed == ["none"] else int(seed[0])
    return GridFile(values=values, params=params, seed=seed, config=config)


def _csv_cell(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(header, rows, config=None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("# config " + config_json(config) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ShapeError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, config=None) -> Path:
    return atomic_write_text(path, format_csv(header, rows, config))


def read_csv(path):
    """Return ``(header, rows, config)``; rows are lists of strings."""
    config = None
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# config "):
                config = json.loads(line[len("# config "):])
            elif not line.startswith("#"):
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader], config


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)
