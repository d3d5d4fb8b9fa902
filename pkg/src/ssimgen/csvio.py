"""CSV emission and parsing for matrices, spectra and report tables.

Floats are written with ``repr`` so every value parses back bit-exactly.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IoFailure, MalformedHeader


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def matrix_to_csv(m: np.ndarray) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in m)


def write_matrix_csv(path, m: np.ndarray) -> None:
    atomic_write(path, matrix_to_csv(m).encode())


def read_matrix_csv(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    try:
        m = np.array([[float(v) for v in row.split(",")] for row in rows], dtype=float)
    except ValueError as exc:
        raise MalformedHeader(f"{path}: not a numeric CSV matrix") from exc
    if m.ndim != 2:
        raise MalformedHeader(f"{path}: ragged CSV matrix")
    return m


def spectrum_to_csv(eigenvalues: Sequence[float], clipped_mass: float) -> str:
    body = "".join(fmt(float(v)) + "\n" for v in eigenvalues)
    return body + f"# clipped_mass={fmt(float(clipped_mass))}\n"


def read_spectrum_csv(path) -> tuple[np.ndarray, float]:
    text = Path(path).read_text()
    values, mass = [], None
    for line in text.splitlines():
        if line.startswith("# clipped_mass="):
            mass = float(line.split("=", 1)[1])
        elif line:
            values.append(float(line))
    if mass is None:
        raise MalformedHeader(f"{path}: missing clipped_mass footer")
    return np.array(values), mass


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence], include_header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if include_header:
        w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def records_to_csv(records: Sequence[Mapping]) -> str:
    """Table from dict records; columns are the union of keys in first-seen order."""
    header: list[str] = []
    for rec in records:
        for k in rec:
            if k not in header:
                header.append(k)
    return table_to_csv(header, ([rec.get(k, "") for k in header] for rec in records))


def read_table_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
