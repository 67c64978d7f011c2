"""Matrix Market reader and writer for real coordinate and array files.

Written by hand rather than through ``scipy.io.mmread`` so that parse
errors carry line numbers and the output is byte-for-byte deterministic
(17 significant digits, entries sorted by row then column).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, UnsupportedField

_FIELDS = ("real", "integer", "double")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _parse_header(line, lineno):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", lineno)
    obj, fmt, field, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise UnsupportedField(f"object {obj!r} is not supported (only 'matrix')")
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown format {fmt!r}", lineno)
    if field in ("complex", "pattern"):
        raise UnsupportedField(f"field {field!r} is not supported; only real matrices are accepted")
    if field not in _FIELDS:
        raise ParseError(f"unknown field {field!r}", lineno)
    if sym == "hermitian":
        raise UnsupportedField("hermitian symmetry requires a complex field")
    if sym not in _SYMMETRIES:
        raise ParseError(f"unknown symmetry {sym!r}", lineno)
    return fmt, sym


def _data_lines(lines, start):
    for lineno, line in enumerate(lines[start:], start=start + 1):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        yield lineno, s


def _ints(tokens, count, lineno, what):
    if len(tokens) != count:
        raise ParseError(f"expected {count} integers for {what}, got {len(tokens)}", lineno)
    try:
        vals = [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"non-integer {what}: {exc}", lineno) from None
    if any(v < 0 for v in vals):
        raise ParseError(f"negative {what}", lineno)
    return vals


def _float(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"cannot parse value {token!r}", lineno) from None


def parse_matrix_market(text: str):
    """Parse Matrix Market text; sparse CSR for coordinate, ``ndarray`` for array."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    fmt, sym = _parse_header(lines[0], 1)
    data = _data_lines(lines, 1)
    try:
        lineno, size_line = next(data)
    except StopIteration:
        raise ParseError("missing size line", len(lines)) from None
    tokens = size_line.split()

    if fmt == "coordinate":
        m, n, nnz = _ints(tokens, 3, lineno, "size line")
        rows, cols, vals = [], [], []
        for lineno, s in data:
            if len(rows) == nnz:
                raise ParseError(f"more than the declared {nnz} entries", lineno)
            t = s.split()
            if len(t) != 3:
                raise ParseError(f"expected 'row col value', got {len(t)} tokens", lineno)
            i, j = _ints(t[:2], 2, lineno, "indices")
            if not (1 <= i <= m and 1 <= j <= n):
                raise ParseError(f"index ({i}, {j}) outside {m} x {n}", lineno)
            if sym != "general" and j > i:
                raise ParseError(f"{sym} storage expects the lower triangle, got ({i}, {j})", lineno)
            if sym == "skew-symmetric" and i == j:
                raise ParseError("skew-symmetric storage has no diagonal entries", lineno)
            v = _float(t[2], lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
        if len(rows) != nnz:
            raise ParseError(f"declared {nnz} entries, found {len(rows)}", len(lines))
        r, c, v = np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals, dtype=float)
        if sym != "general":
            off = r != c
            sign = 1.0 if sym == "symmetric" else -1.0
            r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, sign * v[off]])
        return sp.csr_matrix((v, (r, c)), shape=(m, n))

    m, n = _ints(tokens, 2, lineno, "size line")
    if sym != "general" and m != n:
        raise ParseError(f"{sym} array must be square", lineno)
    out = np.zeros((m, n))
    if sym == "general":
        positions = [(i, j) for j in range(n) for i in range(m)]
    elif sym == "symmetric":
        positions = [(i, j) for j in range(n) for i in range(j, m)]
    else:
        positions = [(i, j) for j in range(n) for i in range(j + 1, m)]
    k = 0
    for lineno, s in data:
        for tok in s.split():
            if k >= len(positions):
                raise ParseError(f"more than the expected {len(positions)} values", lineno)
            i, j = positions[k]
            out[i, j] = _float(tok, lineno)
            if sym == "symmetric":
                out[j, i] = out[i, j]
            elif sym == "skew-symmetric":
                out[j, i] = -out[i, j]
            k += 1
    if k != len(positions):
        raise ParseError(f"expected {len(positions)} values, found {k}", len(lines))
    return out


def read_matrix_market(path):
    with open(path, "r") as fh:
        return parse_matrix_market(fh.read())


def _fmt(x):
    return "%.17g" % x


def format_matrix_market(matrix, comment: str | None = None) -> str:
    """Sparse input becomes ``coordinate real general``, dense ``array real general``."""
    lines = []
    if sp.issparse(matrix):
        A = sp.coo_matrix(matrix)
        A.sum_duplicates()
        order = np.lexsort((A.col, A.row))
        lines.append("%%MatrixMarket matrix coordinate real general")
        if comment:
            lines.extend("% " + c for c in comment.splitlines())
        lines.append(f"{A.shape[0]} {A.shape[1]} {A.nnz}")
        for k in order:
            lines.append(f"{A.row[k] + 1} {A.col[k] + 1} {_fmt(A.data[k])}")
    else:
        A = np.asarray(matrix, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.ndim != 2:
            raise ValueError("only 2-D matrices can be written")
        lines.append("%%MatrixMarket matrix array real general")
        if comment:
            lines.extend("% " + c for c in comment.splitlines())
        lines.append(f"{A.shape[0]} {A.shape[1]}")
        lines.extend(_fmt(x) for x in A.ravel(order="F"))
    return "\n".join(lines) + "\n"


def write_matrix_market(path, matrix, comment: str | None = None):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_matrix_market(matrix, comment))
