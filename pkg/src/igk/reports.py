"""Run reports: a JSON envelope shared by every CLI command."""

from __future__ import annotations

import json
import os
from importlib import resources

import numpy as np

SCHEMA_VERSION = "1.0"
MAX_RECORDED_VIOLATIONS = 1000


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_report(command: str, config: dict, seed, dataset: dict | None, results: dict,
                timings: dict | None = None) -> dict:
    return _plain({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "dataset": dataset,
        "timings": timings or {},
        "results": results,
    })


def violation_payload(report) -> dict:
    """Serialise a ViolationReport, truncating very long violation lists."""
    d = report.to_dict()
    d["violation_count"] = len(d["violations"])
    d["truncated"] = len(d["violations"]) > MAX_RECORDED_VIOLATIONS
    d["violations"] = d["violations"][:MAX_RECORDED_VIOLATIONS]
    return d


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def results_bytes(report: dict) -> bytes:
    """Canonical bytes of the results payload (timings excluded)."""
    return json.dumps(report["results"], sort_keys=True).encode()


def load_schema() -> dict:
    return json.loads(resources.files("igk").joinpath("data/report.schema.json").read_text())


def validate(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())


def write(report: dict, path: str | os.PathLike) -> None:
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps(report) + "\n")
