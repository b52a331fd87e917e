"""CSV and run-manifest persistence.

CSV files carry a header row and full double precision (17 significant
digits) so that deterministic pipelines are bit-stable and round-trips are
exact.  Every CLI run writes one JSON manifest describing the resolved
configuration, the seed, produced files, and diagnostics.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns: dict) -> Path:
    """Write parallel columns ({name: 1-d array}) as header + rows."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n_rows = len(cols[0])
    if any(len(c) != n_rows for c in cols):
        raise ValueError("all columns must have equal length")
    lines = [",".join(names)]
    for i in range(n_rows):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path) -> dict:
    """Inverse of write_csv; numeric columns come back as float arrays."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    names = lines[0].split(",")
    data = {n: [] for n in names}
    for line in lines[1:]:
        for n, tok in zip(names, line.split(",")):
            data[n].append(float(tok))
    return {n: np.array(v) for n, v in data.items()}


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    code_version: str = ""
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    created: str = ""

    def add_output(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)

    def write(self, path) -> Path:
        path = Path(path)
        self.created = time.strftime("%Y-%m-%dT%H:%M:%S")
        path.write_text(json.dumps(asdict(self), indent=2, default=_json_default) + "\n",
                        encoding="utf-8")
        return path


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def check_manifest(path) -> list[str]:
    """Return the listed output files that are missing on disk."""
    man = load_manifest(path)
    missing = []
    base = Path(path).parent
    for out in man.get("outputs", []):
        p = Path(out)
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            missing.append(str(out))
    return missing
