"""Writing results: CSV/JSON data files with JSON metadata sidecars.

CSV layouts
-----------
spectrum    ``nu_ghz,intensity``
g2tau       ``tau_ns,g2``
tps, csmap  ``nu1_ghz,nu2_ghz,value``; rows run with nu1 outer, nu2 inner
validate    ``nu1_ghz,nu2_ghz,sensor_g2,oracle_g2,relative_difference``

Numbers carry 9 significant digits, lines end in ``\\n`` and masked map
points are written as ``nan``.  The data files depend only on the computed
values, so they are byte-identical between runs; timings live in the
``<stem>.meta.json`` sidecar.
"""

from __future__ import annotations

import json
import math
import sys
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .correlations import Spectrum
from .maps import SpectralMap2D
from .traces import CorrelationTrace

FLOAT_FORMAT = ".9g"


def tool_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def _fmt(x) -> str:
    return format(float(x), FLOAT_FORMAT)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def dump_json(obj, path: Path):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def table_of(result) -> tuple[list[str], list[np.ndarray]]:
    """Column names and columns for any result type."""
    if isinstance(result, Spectrum):
        return ["nu_ghz", "intensity"], [result.nu_ghz, result.intensity]
    if isinstance(result, CorrelationTrace):
        return ["tau_ns", "g2"], [result.tau_grid_ns, result.values]
    if isinstance(result, SpectralMap2D):
        n1, n2 = result.values.shape
        return ["nu1_ghz", "nu2_ghz", "value"], [
            np.repeat(result.nu1_grid_ghz, n2),
            np.tile(result.nu2_grid_ghz, n1),
            result.values.ravel(order="C"),
        ]
    if isinstance(result, dict) and "columns" in result:
        names = list(result["columns"])
        return names, [np.asarray(result["data"][k], dtype=float) for k in names]
    raise TypeError(f"cannot tabulate {type(result).__name__}")


def write_csv(path: Path, names: Sequence[str], columns: Sequence[np.ndarray]):
    lines = [",".join(names)]
    lines.extend(",".join(_fmt(c[i]) for c in columns) for i in range(len(columns[0])))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json_data(path: Path, names: Sequence[str], columns: Sequence[np.ndarray]):
    data = {n: [float(_fmt(x)) for x in c] for n, c in zip(names, columns)}
    dump_json({"columns": list(names), "data": data}, path)


def _result_metadata(result) -> dict:
    if isinstance(result, dict):
        meta = dict(result.get("metadata", {}))
    else:
        meta = dict(getattr(result, "metadata", {}))
    if isinstance(result, SpectralMap2D):
        meta["kind"] = result.kind
        meta["shape"] = list(result.values.shape)
        i, j = np.nonzero(result.mask)
        meta["masked_points"] = [[float(result.nu1_grid_ghz[a]), float(result.nu2_grid_ghz[b])] for a, b in zip(i, j)]
    return meta


def write_outputs(
    result: Any,
    out_dir: str | Path,
    stem: str,
    formats: Sequence[str] = ("csv",),
    provenance: dict | None = None,
) -> list[Path]:
    """Write ``result`` as ``<stem>.csv`` / ``<stem>.json`` plus ``<stem>.meta.json``.

    Returns the written paths (data files first, sidecar last).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names, columns = table_of(result)
    written = []
    if "csv" in formats:
        write_csv(out / f"{stem}.csv", names, columns)
        written.append(out / f"{stem}.csv")
    if "json" in formats:
        write_json_data(out / f"{stem}.json", names, columns)
        written.append(out / f"{stem}.json")
    sidecar = {
        "tool": "tpspec",
        "version": tool_version(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "data_files": [p.name for p in written],
        "columns": names,
        "result": _result_metadata(result),
    }
    sidecar.update(provenance or {})
    dump_json(sidecar, out / f"{stem}.meta.json")
    written.append(out / f"{stem}.meta.json")
    return written


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and float array of a file written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
