"""CSV/JSON export. Floats are written with full precision so identical runs give identical bytes."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CSV_HEADER = "# mmaf-lab csv v1"


def _fmt(v) -> str:
    v = float(v)
    return repr(v) if np.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))


def write_csv(path, columns: list[str], rows, comments: list[str] = ()) -> Path:
    path = Path(path)
    lines = [CSV_HEADER, *(f"# {c}" for c in comments), ",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Columns and float data of a file written by :func:`write_csv`."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(cols))
    return cols, data


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else _fmt(v)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_paths_csv(path, times, values, names: list[str]) -> Path:
    """``t`` column followed by one column per row of ``values``."""
    values = np.asarray(values)
    return write_csv(path, ["t", *names], np.column_stack([times, values.T]))


def write_flow_csv(path, y) -> Path:
    return write_paths_csv(path, y.grid.times, y.values, [f"block_{k + 1}" for k in range(y.n)])


def write_driving_csv(path, x) -> Path:
    return write_paths_csv(path, x.grid.times, x.values, [f"w_{k + 1}" for k in range(x.partition.n)])


def event_log(y) -> dict:
    tau = {}
    for j, ev in enumerate(y.events):
        tau[y.n - 1 - j] = ev.time
    return {
        "masses": list(y.partition.masses),
        "g": y.g.tolist(),
        "dt": y.grid.dt,
        "T": y.grid.T,
        "events": [ev.to_dict() for ev in y.events],
        "tau": {str(k): v for k, v in sorted(tau.items())},
    }


def write_events_json(path, y) -> Path:
    return write_json(path, event_log(y))


def write_remainder_csv(path, z) -> Path:
    """Long format ``k, t, xi_k(t)`` on the shifted clocks; the tau table goes in a comment line."""
    dt = z.grid.dt
    rows = []
    for k in z.ks:
        for i, v in enumerate(z.paths[k]):
            rows.append((float(k), i * dt, v))
    header = "tau " + json.dumps({str(k): z.tau[k] for k in z.ks}, sort_keys=True)
    return write_csv(path, ["k", "t", "xi"], rows, comments=[header])


def write_basis_json(path, basis) -> Path:
    return write_json(path, basis.to_dict())


def write_reports_json(path, reports) -> Path:
    return write_json(path, [r.to_dict() for r in reports])
