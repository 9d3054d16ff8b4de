import csv
import json
import logging
import os
import re
from typing import Any, Dict, Optional, Tuple
import numpy as np
from app.core.errors import ConfigError
from app.schemas.metrics import ErrorTrace
from app.schemas.mixture import MixtureModel

logger = logging.getLogger(__name__)

DUMP_HEADER = re.compile(r"#\s*d=(\S+)\s+k=(\S+)\s+sigma=(\S+)\s+seed=(\S+)")


def format_number(value: float) -> str:
    return format(float(value), ".17g")


def write_trace_csv(trace: ErrorTrace, path: str) -> str:
    """Header ``t,e2_0,...,e2_{k-1},vmax,it_flag,winner``; a symmetric-pair trace
    carries a leading ``# symmetric_pair`` comment line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    header = ["t"] + [f"e2_{i}" for i in range(trace.k)] + ["vmax", "it_flag", "winner"]
    with open(path, "w", newline="") as handle:
        if trace.symmetric_pair:
            handle.write("# symmetric_pair\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in range(len(trace)):
            writer.writerow(
                [str(int(trace.t[row]))]
                + [format_number(e) for e in trace.errors[row]]
                + [format_number(trace.vmax[row]), "1" if trace.it_flag[row] else "0", str(int(trace.winner[row]))]
            )
    logger.debug(f"Wrote {len(trace)} trace records to {path}")
    return path


def read_trace_csv(path: str) -> ErrorTrace:
    with open(path, newline="") as handle:
        lines = handle.read().splitlines()
    symmetric = bool(lines) and lines[0].startswith("#")
    rows = list(csv.reader(line for line in lines if not line.startswith("#")))
    if not rows or rows[0][0] != "t" or rows[0][-3:] != ["vmax", "it_flag", "winner"]:
        raise ConfigError(f"{path} is not a trace CSV")
    k = len(rows[0]) - 4
    body = rows[1:]
    errors = np.array([[float(v) for v in row[1:1 + k]] for row in body]).reshape(len(body), k)
    vmax = np.array([float(row[-3]) for row in body])
    return ErrorTrace(
        t=[int(row[0]) for row in body],
        errors=errors,
        vmax=vmax,
        it_flag=[row[-2] == "1" for row in body],
        winner=[int(row[-1]) for row in body],
        has_truth=k > 0,
        symmetric_pair=symmetric,
    )


def write_json(payload: Dict[str, Any], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def read_json(path: str) -> Dict[str, Any]:
    with open(path) as handle:
        return json.load(handle)


def write_stream_dump(path: str, points: np.ndarray, model: MixtureModel, seed: int,
                      labels: Optional[np.ndarray] = None) -> str:
    """One sample per line; ``labels`` adds a trailing label column."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as handle:
        handle.write(f"# d={model.d} k={model.k} sigma={format_number(model.sigma)} seed={seed}\n")
        for row, point in enumerate(points):
            fields = [format_number(v) for v in point]
            if labels is not None:
                fields.append(str(int(labels[row])))
            handle.write(",".join(fields) + "\n")
    return path


def read_stream_dump(path: str) -> Tuple[Dict[str, Any], np.ndarray, Optional[np.ndarray]]:
    with open(path) as handle:
        first = handle.readline()
        match = DUMP_HEADER.match(first)
        if not match:
            raise ConfigError(f"{path} lacks a stream dump header")
        header = {"d": int(match.group(1)), "k": int(match.group(2)),
                  "sigma": float(match.group(3)), "seed": int(match.group(4))}
        rows = [line.strip().split(",") for line in handle if line.strip()]
    d = header["d"]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.empty((0, d))
    if data.shape[1] not in (d, d + 1):
        raise ConfigError(f"{path} rows have {data.shape[1]} columns, expected {d} or {d + 1}")
    labels = data[:, d].astype(np.int64) if data.shape[1] == d + 1 else None
    return header, data[:, :d], labels
