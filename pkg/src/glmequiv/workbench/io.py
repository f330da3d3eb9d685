"""Deterministic result files.

Rows go to CSV (or JSON lines) and the summary to a JSON document. Floats are
written with ``repr`` (shortest round-trip form), keys are sorted and no
timestamps or host details are recorded, so a fixed seed gives identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from enum import Enum
from pathlib import Path

import numpy as np

from .. import SCHEMA_VERSION, __version__
from .config import RunConfig

__all__ = ["to_plain", "rows_to_csv", "write_result", "output_stem"]


def to_plain(obj):
    """Convert numpy scalars/arrays, enums and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell(v) -> str:
    v = to_plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def rows_to_csv(rows, stamp: dict) -> str:
    """CSV text with a header row; ``stamp`` columns are appended to every row."""
    keys = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    keys += [k for k in stamp if k not in keys]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for row in rows:
        merged = {**row, **stamp}
        w.writerow([_cell(merged.get(k)) for k in keys])
    return buf.getvalue()


def output_stem(cfg: RunConfig) -> str:
    fam = (cfg.family or "all").lower().replace(" ", "")
    return f"{cfg.command}_{fam}_seed{cfg.seed}"


def write_result(result, cfg: RunConfig) -> dict:
    """Write rows and summary under ``cfg.out_dir``; return the paths written."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.config_hash(), "seed": cfg.seed}
    stem = output_stem(cfg)
    paths = {}
    if cfg.format == "csv":
        p = out / f"{stem}.csv"
        p.write_text(rows_to_csv(result.rows, stamp))
    else:
        p = out / f"{stem}.rows.json"
        rows = [{**to_plain(r), **stamp} for r in result.rows]
        p.write_text(json.dumps(rows, sort_keys=True, indent=1) + "\n")
    paths["rows"] = str(p)
    summary = {
        **stamp,
        "command": cfg.command,
        "config": to_plain(cfg.identity()),
        "package_version": __version__,
        "passed": bool(result.passed),
        "summary": to_plain(result.summary),
    }
    p = out / f"{stem}.json"
    p.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    paths["summary"] = str(p)
    return paths
