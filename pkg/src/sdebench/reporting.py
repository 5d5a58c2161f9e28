"""CSV and run-summary emission.

Floats are serialised with ``repr`` (shortest round-trip form), so
re-running an experiment with the same manifest produces byte-identical
files, and a parsed CSV reproduces the in-memory values exactly.
"""

from __future__ import annotations

import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

__all__ = ["format_value", "write_csv", "write_summary", "read_config"]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write rows (iterables of cells) under a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(format_value(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_summary(out_dir, experiment: str, config: dict, seed: int,
                  workers: int, wall_time: float, outputs: list) -> Path:
    """Emit the machine-readable run summary.

    The summary's ``config`` block is a complete manifest: feeding the
    summary file back through ``--config`` reproduces the run.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "experiment": experiment,
        "seed": seed,
        "workers": workers,
        "config": config,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": wall_time,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "platform": platform.platform(),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path = out_dir / "run_summary.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_config(path) -> dict:
    """Load a manifest: JSON (possibly a previous run summary) or
    ``key = value`` lines.  Returns a flat dict of string keys."""
    path = Path(path)
    text = path.read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return {str(k): v for k, v in data.items()}
    config = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', "
                             f"got {raw!r}")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config
