"""Serialisation of results: CSV with metadata comments, JSON, raw eigenvalue dumps."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__, qve

__all__ = [
    "TOLERANCES",
    "metadata",
    "write_csv",
    "read_csv",
    "write_json",
    "density_rows",
    "write_histogram",
    "write_eigenvalues",
    "read_eigenvalues",
]

TOLERANCES = {
    "qveResidual": qve.RESIDUAL_TOL,
    "newton": qve.NEWTON_TOL,
    "edge": qve.EDGE_TOL,
    "certificateBoundary": qve.BOUNDARY_TOL,
    "insideSupportIm": qve.INSIDE_IM_THRESHOLD,
}


def metadata(model_hash: str | None = None, seed: int | None = None, **extra: Any) -> dict[str, Any]:
    meta: dict[str, Any] = {"tool": "blockpca", "version": __version__, "tolerances": TOLERANCES}
    if model_hash is not None:
        meta["modelHash"] = model_hash
    if seed is not None:
        meta["seed"] = seed
    meta.update(extra)
    return meta


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path: str | Path, payload: Mapping[str, Any], meta: Mapping[str, Any]) -> Path:
    path = Path(path)
    body = {"metadata": dict(meta), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_plain) + "\n", encoding="utf-8")
    return path


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: Mapping[str, Any],
) -> Path:
    """CSV with ``# key: value`` metadata lines ahead of the header row."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {json.dumps(meta[key], sort_keys=True, default=_plain)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path: str | Path) -> tuple[dict[str, Any], list[str], list[list[str]]]:
    meta: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def density_rows(curve: qve.DensityCurve) -> tuple[list[str], list[list[float]]]:
    K = curve.component_densities.shape[0]
    header = ["x", "density"] + [f"density_{k + 1}" for k in range(K)]
    rows = [
        [float(x), float(d), *(float(c) for c in curve.component_densities[:, i])]
        for i, (x, d) in enumerate(zip(curve.grid, curve.density))
    ]
    return header, rows


def write_histogram(path: str | Path, edges: np.ndarray, counts: np.ndarray, meta: Mapping[str, Any]) -> Path:
    rows = [[float(a), float(b), int(c)] for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return write_csv(path, ["bin_left", "bin_right", "count"], rows, meta)


def write_eigenvalues(path: str | Path, values: np.ndarray) -> Path:
    """Little-endian uint64 count followed by that many float64 values."""
    path = Path(path)
    v = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", v.size))
        fh.write(v.tobytes())
    return path


def read_eigenvalues(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    (n,) = struct.unpack_from("<Q", data)
    if len(data) != 8 + 8 * n:
        raise ValueError(f"eigenvalue dump {path}: header says {n} values, file has {(len(data) - 8) / 8}")
    return np.frombuffer(data, dtype="<f8", offset=8).copy()
