"""Columnar plain-text tables.

Layout::

    # key: value          (zero or more metadata lines)
    col_a<TAB>col_b ...   (header)
    1.0<TAB>2.0 ...       (rows, numbers written with %.17g)

Non-numeric cells are written verbatim, so labels and status strings may
share a table with numbers.
"""

import numbers

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, numbers.Real):
        return "%.17g" % float(v)
    return str(v)


def write_table(path, columns, rows, meta=None):
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append("\t".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        lines.append("\t".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse(cell):
    try:
        return float(cell)
    except ValueError:
        return cell


def read_table(path):
    """Return (meta dict, column names, list of row tuples)."""
    meta = {}
    columns = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif columns is None:
                columns = line.split("\t")
            else:
                rows.append(tuple(_parse(c) for c in line.split("\t")))
    if columns is None:
        raise ValueError(f"{path}: no header line")
    return meta, columns, rows


def read_numeric(path):
    """Like read_table but returns the body as a float array (n_rows, n_cols)."""
    meta, columns, rows = read_table(path)
    return meta, columns, np.array(rows, dtype=float).reshape(len(rows), len(columns))
