"""CSV output with full round-trip precision and a single timestamped header line."""
from __future__ import annotations

import datetime
import os


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, columns, rows, kind: str) -> None:
    """Rows of mixed scalars; floats at full precision.  The first line is a
    timestamped comment (the only run-to-run varying content)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    with open(path, "w") as f:
        f.write(f"# cavlink {kind} generated={stamp}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def read_csv(path):
    """(columns, rows-as-strings) ignoring comment lines."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    columns = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return columns, rows
