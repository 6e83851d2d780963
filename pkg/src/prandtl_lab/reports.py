"""CSV and JSON emission, run archives and the run manifest."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crocco import CroccoGrid, CroccoState
from .numerics import PeriodicGridX
from .shear import bernoulli_pressure

FLOAT_FMT = "{:.16e}"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT.format(float(v))


def emit_csv(series: dict, path) -> Path:
    """Write named equal-length columns; floats keep 17 significant digits."""
    path = Path(path)
    names = list(series)
    cols = [np.asarray(series[n]).ravel() for n in names]
    lengths = {c.size for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"{path}: columns have unequal lengths {sorted(lengths)}")
    rows = [",".join(names)]
    for i in range(cols[0].size if cols else 0):
        rows.append(",".join(_cell(c[i]) for c in cols))
    try:
        path.write_text("\n".join(rows) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def read_csv(path) -> dict:
    lines = Path(path).read_text().splitlines()
    names = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _jsonable(obj, flagged: list, where: str = ""):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v, flagged, f"{where}.{k}" if where else str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v, flagged, f"{where}[{i}]") for i, v in enumerate(list(obj))]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            flagged.append(where)
            return str(v)
        return v
    return obj


def emit_json(payload: dict, path) -> Path:
    """Sorted-key JSON; non-finite numbers become strings listed under 'nonfinite'."""
    path = Path(path)
    flagged: list = []
    doc = _jsonable(payload, flagged)
    if flagged:
        doc["nonfinite"] = sorted(set(flagged) | set(doc.get("nonfinite", [])))
    try:
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


@dataclass
class RunManifest:
    scenario: str
    config: dict
    version: str
    started: float
    finished: float = 0.0
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and all(bool(v) for v in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "version": self.version,
            "wall_start": self.started,
            "wall_end": self.finished,
            "metrics": self.metrics,
            "checks": self.checks,
            "status": "PASS" if self.passed else "FAIL",
            "error": self.error,
            "files": sorted(self.files),
        }


def save_run(run, path, norms=None) -> Path:
    """Archive Crocco snapshots (plus optional per-step norm series) as .npz."""
    path = Path(path)
    first = run[0]
    g = first.grid
    outer = first.outer
    arrays = {
        "times": np.array([s.t for s in run]),
        "w": np.stack([s.w for s in run]),
        "n_x": np.array(g.xgrid.n_x),
        "n_eta": np.array(g.n_eta),
        "delta": np.array(g.delta),
        "outer_times": outer.times,
        "outer_U": outer.U,
    }
    if norms is not None:
        arrays["norm_times"] = np.asarray(norms[0])
        arrays["norms"] = np.asarray(norms[1])
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_run(path):
    with np.load(Path(path)) as data:
        xg = PeriodicGridX(int(data["n_x"]))
        grid = CroccoGrid(int(data["n_eta"]), xg, float(data["delta"]))
        outer = bernoulli_pressure(data["outer_U"], xg, data["outer_times"])
        return [CroccoState(float(t), grid, w, outer) for t, w in zip(data["times"], data["w"])]
