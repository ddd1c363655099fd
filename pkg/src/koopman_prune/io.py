"""File formats: snapshot CSV, matrix JSON, prune reports and trace CSVs.

All floats are written with 17 significant digits so files round-trip
exactly and repeated runs produce byte-identical output.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dictionary import Dictionary
from .errors import DimensionMismatch
from .pruning import PruneConfig, PruneReport, TraceEntry
from .systems import SnapshotSet

SCHEMA_VERSION = 1
FLOAT_FMT = "%.17g"


def fmt(v) -> str:
    return FLOAT_FMT % v


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.ravel().tolist()}


def matrix_from_json(doc: dict) -> np.ndarray:
    data = np.asarray(doc["data"], dtype=float)
    rows, cols = int(doc["rows"]), int(doc["cols"])
    if data.size != rows * cols:
        raise DimensionMismatch(f"matrix has {data.size} entries, header says {rows}x{cols}")
    return data.reshape(rows, cols)


def dump_json(doc, path):
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=True) + "\n")


# ---------------------------------------------------------------------------
# snapshots


def snapshot_header(n: int) -> list:
    return [f"x{i}" for i in range(n)] + [f"xp{i}" for i in range(n)]


def write_snapshots(path, snaps: SnapshotSet):
    n = snaps.state_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(snapshot_header(n))
        for row in np.hstack([snaps.x, snaps.x_plus]):
            w.writerow([fmt(v) for v in row])


def read_snapshots(path) -> SnapshotSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty snapshot file")
    header = [h.strip() for h in rows[0]]
    if len(header) % 2 or header != snapshot_header(len(header) // 2):
        raise ValueError(f"{path}: header must be x0..x{{n-1}},xp0..xp{{n-1}}")
    n = len(header) // 2
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise ValueError(f"{path}: no snapshot rows")
    return SnapshotSet(body[:, :n], body[:, n:])


# ---------------------------------------------------------------------------
# prune reports

TRACE_COLUMNS = ("generation", "dim", "delta", "gamma", "dropped_count", "stage", "path")


def write_trace_csv(path, trace):
    """Dimension-vs-invariance-proximity table, one row per trace entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for e in trace:
            w.writerow([e.generation, e.dim, "" if e.delta is None else fmt(e.delta),
                        "" if e.gamma is None else fmt(e.gamma), e.dropped_count, e.stage, e.path])


def _entry_json(e: TraceEntry, timings: bool) -> dict:
    d = e.to_json()
    if not timings:
        d.pop("wall_seconds")
    if e.basis_coeff is not None:
        d["basis_coeff"] = matrix_to_json(e.basis_coeff)
    return d


def report_to_json(report, dictionary: Optional[Dictionary] = None, data_path=None,
                   timings: bool = False) -> dict:
    """Serializable form of a :class:`PruneReport` (or :class:`SavedReport`).

    Wall-clock fields are included only when ``timings`` is set, keeping the
    default output byte-stable across runs.
    """
    final_basis = report.basis_for_dim(report.final_dim) if report.success else None
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "prune_report",
        "algorithm": report.algorithm,
        "mode": report.mode,
        "config": asdict(report.config),
        "success": report.success,
        "final_dim": report.final_dim,
        "final_delta": report.final_delta,
        "final_basis": None if final_basis is None else matrix_to_json(final_basis),
        "trace": [_entry_json(e, timings) for e in report.trace],
    }
    if timings:
        doc["total_wall_seconds"] = sum(e.wall_seconds for e in report.trace)
    if dictionary is not None:
        doc["dictionary"] = dictionary.to_json()
    if data_path is not None:
        doc["data"] = str(data_path)
    return doc


@dataclass
class SavedReport:
    """A prune report read back from JSON (no live lifted data attached)."""

    algorithm: str
    fast: bool
    config: PruneConfig
    trace: list
    success: bool
    final_dim: Optional[int]
    final_delta: Optional[float]
    final_basis: Optional[np.ndarray] = field(default=None, repr=False)
    dictionary: Optional[Dictionary] = None
    data_path: Optional[str] = None

    @property
    def mode(self) -> str:
        return f"{self.algorithm}_{'fast' if self.fast else 'naive'}"

    def entry_for_dim(self, dim: int):
        for e in self.trace:
            if e.dim == dim:
                return e
        return None

    def basis_for_dim(self, dim: int):
        if self.success and dim == self.final_dim and self.final_basis is not None:
            return self.final_basis
        e = self.entry_for_dim(dim)
        return None if e is None else e.basis_coeff


def report_from_json(doc: dict, base: Path = Path(".")) -> SavedReport:
    if doc.get("kind") != "prune_report":
        raise ValueError("not a prune report document")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema_version {doc.get('schema_version')!r}")
    trace = []
    for d in doc["trace"]:
        d = dict(d)
        basis = d.pop("basis_coeff", None)
        d.setdefault("wall_seconds", 0.0)
        trace.append(TraceEntry(**d, basis_coeff=None if basis is None else matrix_from_json(basis)))
    data_path = doc.get("data")
    if data_path is not None and not Path(data_path).is_absolute():
        data_path = str(base / data_path)
    fb = doc.get("final_basis")
    return SavedReport(
        algorithm=doc["algorithm"],
        fast=doc["mode"].endswith("_fast"),
        config=PruneConfig(**doc["config"]),
        trace=trace,
        success=bool(doc["success"]),
        final_dim=doc["final_dim"],
        final_delta=doc["final_delta"],
        final_basis=None if fb is None else matrix_from_json(fb),
        dictionary=Dictionary.from_json(doc["dictionary"]) if "dictionary" in doc else None,
        data_path=data_path,
    )


def write_report(path, report, dictionary=None, data_path=None, timings=False):
    dump_json(report_to_json(report, dictionary, data_path, timings), path)


def read_report(path) -> SavedReport:
    path = Path(path)
    return report_from_json(json.loads(path.read_text()), base=path.parent)
