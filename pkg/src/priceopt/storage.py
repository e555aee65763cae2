"""Instance and report serialization.

Instance files are a single UTF-8 text document with named fields::

    # priceopt instance v1
    n 3
    k 1
    a 5.0 0.25 1.5
    c 1.0 1.0 1.0
    p0 0.0 0.0 0.0
    delta 0.5 0.5 0.5
    l ...            (optional; l and u appear together or not at all)
    u ...
    D 4
    0 0 1.0
    0 2 -0.125
    1 1 1.0
    2 2 2.0

Matrix entries are 0-based ``row col value`` triples, one per line, with the
count on the ``D`` header line; duplicates and explicit zeros are rejected.
Numbers use shortest round-trip decimal (at most 17 significant digits), so
write/read is lossless.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import ContractError, ParseError
from .instance import Instance
from .solver import SolveReport

__all__ = [
    "read_instance",
    "write_instance",
    "write_report",
    "adjusted_gap",
    "read_vector",
    "write_vector",
    "atomic_write_text",
]

_MAGIC = "# priceopt instance v1"

REPORT_COLUMNS = [
    "instance_id",
    "n",
    "k",
    "delta_mode",
    "bounds_mode",
    "start_id",
    "final_profit",
    "improvement_pct_vs_base",
    "iterations",
    "wall_time_s",
    "stationary",
    "bound_ii",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    """Write a file all-or-nothing: no partial output remains on failure."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-priceopt-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_instance(instance: Instance, path: str) -> None:
    """Serialize an instance to the text format above (atomic)."""
    parts = [_MAGIC, f"n {instance.n}", f"k {instance.k}"]
    for name in ("a", "c", "p0", "delta"):
        vec = getattr(instance, name)
        parts.append(f"{name} " + " ".join(_fmt(v) for v in vec))
    if instance.bounds is not None:
        parts.append("l " + " ".join(_fmt(v) for v in instance.lower))
        parts.append("u " + " ".join(_fmt(v) for v in instance.upper))
    coo = sparse.coo_array(instance.D)
    parts.append(f"D {coo.nnz}")
    order = np.lexsort((coo.col, coo.row))
    rows, cols, data = coo.row[order], coo.col[order], coo.data[order]
    parts.extend(f"{r} {c} {_fmt(v)}" for r, c, v in zip(rows, cols, data))
    atomic_write_text(path, "\n".join(parts) + "\n")


def _parse_float(token: str, line_no: int, field: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line=line_no, field=field) from None


def read_instance(path: str) -> Instance:
    """Parse an instance file; raises ParseError with line/field context."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()

    n = None
    k = None
    vectors: dict[str, np.ndarray] = {}
    triples: list[tuple[int, int, float]] = []
    nnz_declared = None

    i = 0
    total = len(raw)
    while i < total:
        line_no = i + 1
        line = raw[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        name, _, rest = line.partition(" ")
        if name == "n":
            n = int(_parse_float(rest.strip(), line_no, "n"))
        elif name == "k":
            k = int(_parse_float(rest.strip(), line_no, "k"))
        elif name in ("a", "c", "p0", "delta", "l", "u"):
            tokens = rest.split()
            vectors[name] = np.array([_parse_float(t, line_no, name) for t in tokens])
        elif name == "D":
            nnz_declared = int(_parse_float(rest.strip(), line_no, "D"))
            for _ in range(nnz_declared):
                if i >= total:
                    raise ParseError("file ends inside the D entry list", line=i, field="D")
                entry_no = i + 1
                entry = raw[i].strip()
                i += 1
                toks = entry.split()
                if len(toks) != 3:
                    raise ParseError(f"expected 'row col value', got {entry!r}", line=entry_no, field="D")
                r = int(_parse_float(toks[0], entry_no, "D"))
                c = int(_parse_float(toks[1], entry_no, "D"))
                v = _parse_float(toks[2], entry_no, "D")
                triples.append((r, c, v))
        else:
            raise ParseError(f"unknown field {name!r}", line=line_no, field=name)

    if n is None:
        raise ParseError("missing required field", field="n")
    if k is None:
        raise ParseError("missing required field", field="k")
    for name in ("a", "c", "p0", "delta"):
        if name not in vectors:
            raise ParseError("missing required field", field=name)
        if vectors[name].shape != (n,):
            raise ParseError(f"expected {n} values, got {vectors[name].size}", field=name)
    if ("l" in vectors) != ("u" in vectors):
        raise ParseError("bounds require both fields", field="l" if "u" in vectors else "u")
    if nnz_declared is None:
        raise ParseError("missing required field", field="D")

    seen = set()
    for r, c, v in triples:
        if not (0 <= r < n and 0 <= c < n):
            raise ParseError(f"entry ({r}, {c}) outside 0..{n - 1}", field="D")
        if v == 0.0:
            raise ParseError(f"explicit zero stored at ({r}, {c})", field="D")
        if (r, c) in seen:
            raise ParseError(f"duplicate entry at ({r}, {c})", field="D")
        seen.add((r, c))

    rows = np.array([t[0] for t in triples], dtype=np.int64)
    cols = np.array([t[1] for t in triples], dtype=np.int64)
    vals = np.array([t[2] for t in triples], dtype=np.float64)
    D = sparse.csr_array(sparse.coo_array((vals, (rows, cols)), shape=(n, n)))

    bounds = (vectors["l"], vectors["u"]) if "l" in vectors else None
    return Instance(
        n=n,
        k=k,
        a=vectors["a"],
        D=D,
        c=vectors["c"],
        p0=vectors["p0"],
        delta=vectors["delta"],
        bounds=bounds,
    )


def read_vector(path: str, n: int | None = None) -> np.ndarray:
    """Whitespace-separated floats (comments allowed); optional length check."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = [t for line in fh if not line.lstrip().startswith("#") for t in line.split()]
    vec = np.array([_parse_float(t, 0, "vector") for t in tokens])
    if n is not None and vec.size != n:
        raise ParseError(f"expected {n} values, got {vec.size}", field="vector")
    return vec


def write_vector(vec: np.ndarray, path: str) -> None:
    atomic_write_text(path, " ".join(_fmt(v) for v in np.asarray(vec)) + "\n")


def _report_row(r: SolveReport, include_wall_time: bool) -> list[str]:
    return [
        r.instance_id,
        str(r.n),
        str(r.k),
        r.delta_mode,
        r.bounds_mode,
        "" if r.start_id is None else str(r.start_id),
        _fmt(r.final_profit),
        _fmt(r.improvement_pct),
        str(r.iterations),
        _fmt(r.wall_time) if include_wall_time else "",
        "1" if r.stationary else "0",
        "" if r.bound_ii is None else _fmt(r.bound_ii),
    ]


def write_report(
    reports: Sequence[SolveReport],
    path: str,
    format: str = "csv",
    include_wall_time: bool = True,
) -> None:
    """Write solver reports as CSV rows or a readable line format.

    ``include_wall_time=False`` blanks the timing column so identical runs
    produce byte-identical files.
    """
    if format not in ("csv", "lines"):
        raise ContractError(f"format must be 'csv' or 'lines', got {format!r}")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow(_report_row(r, include_wall_time))
        atomic_write_text(path, buf.getvalue())
    else:
        chunks = []
        for r in reports:
            row = _report_row(r, include_wall_time)
            chunks.append("\n".join(f"{k}: {v}" for k, v in zip(REPORT_COLUMNS, row)) + "\n")
        atomic_write_text(path, "\n".join(chunks))


def adjusted_gap(z_base: float, z_gurobi: float, z_gpa: float) -> float:
    """Percentage gap 100 (z_gpa - z_gurobi) / |z_base| between two solutions.

    Positive means the candidate beat the reference solver; antisymmetric in
    the last two arguments.  Undefined at z_base = 0.
    """
    if z_base == 0.0:
        raise ContractError("adjusted gap is undefined when the baseline profit is zero")
    return 100.0 * (z_gpa - z_gurobi) / abs(z_base)
