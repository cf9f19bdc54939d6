"""CSV/JSON file formats shared by the library and the CLI.

Matrices are CSV with a header row of column ids and one row per sample,
written with %.17g so float64 values round-trip exactly. All writes go
through a temp-file-then-rename so failed commands leave no partial files.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np


def atomic_write_text(path, text: str) -> None:
    """Write text to ``path`` via a temp file in the same directory + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_csv_text(M: np.ndarray, header: list[str]) -> str:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"matrix must be 2-d, got shape {M.shape}")
    if len(header) != M.shape[1]:
        raise ValueError(f"header has {len(header)} names for {M.shape[1]} columns")
    lines = [",".join(header)]
    for row in M:
        lines.append(",".join(format(v, ".17g") for v in row))
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, M: np.ndarray, header: list[str]) -> None:
    atomic_write_text(path, matrix_csv_text(M, header))


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    """Parse a matrix CSV; malformed cells are reported with row and column."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    width = len(header)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise ValueError(f"{path}: line {i} has {len(cells)} cells, expected {width}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            for j, c in enumerate(cells, start=1):
                try:
                    float(c)
                except ValueError:
                    raise ValueError(f"{path}: non-numeric cell at row {i}, column {j}: {c!r}") from None
            raise
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=float), header


def default_headers(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(count)]


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, json_text(obj))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
