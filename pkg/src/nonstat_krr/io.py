"""Atomic CSV/JSON writers with round-trip float formatting."""
import json
import os
import tempfile


def fmt(x):
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows, preamble=()):
    lines = [f"# {p}" for p in preamble]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, preamble=()):
    atomic_write(path, csv_text(header, rows, preamble))


def read_csv(path):
    """Parse a file written by :func:`write_csv` into ``(header, rows)``; rows hold floats."""
    header, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([_num(v) for v in line.split(",")])
    return header, rows


def _num(v):
    try:
        return float(v)
    except ValueError:
        return v


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def grid_function_to_csv(f, path, name="value"):
    write_csv(path, ["node", name], zip(f.grid.nodes, f.values))
