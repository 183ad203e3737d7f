"""File formats: graph edge lists, measure/kernel/cloud/report JSON, CSV export.

JSON floats are written with 17 significant digits so that every value
round-trips exactly; output files are written atomically.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from sgraphon.errors import InvalidInput
from sgraphon.grid import Graph, GridMeasure
from sgraphon.kernels import FDKernel, FractionalPartition
from sgraphon.shapes import KShapeCloud, ShapeCloud


def format_number(x: float) -> str:
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInput(f"cannot serialise non-finite number {x!r}")
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 1, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, 17-digit floats, short lists of numbers on one line."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(format_number(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str | os.PathLike) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# -- graphs -----------------------------------------------------------------


def parse_graph(text: str, source: str = "<graph>") -> Graph:
    """Edge list: first line ``n m``, then ``m`` lines ``u v`` (1-based)."""
    lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InvalidInput(f"{source}: empty graph file")

    def ints(no: int, ln: str) -> tuple[int, int]:
        parts = ln.split()
        if len(parts) != 2:
            raise InvalidInput(f"{source}:{no}: expected two integers, got {ln!r}")
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise InvalidInput(f"{source}:{no}: expected two integers, got {ln!r}") from None

    n, m = ints(*lines[0])
    if n < 1 or m < 0:
        raise InvalidInput(f"{source}:{lines[0][0]}: need n >= 1 and m >= 0")
    body = lines[1:]
    if len(body) != m:
        raise InvalidInput(f"{source}: header announces {m} edges but {len(body)} edge lines follow")
    edges = set()
    for no, ln in body:
        u, v = ints(no, ln)
        if u == v:
            raise InvalidInput(f"{source}:{no}: self-loop at vertex {u}")
        if not (1 <= u <= n and 1 <= v <= n):
            raise InvalidInput(f"{source}:{no}: vertex out of range 1..{n}")
        edges.add((min(u, v), max(u, v)))
    return Graph(n, frozenset(edges))


def read_graph(path: str | os.PathLike) -> Graph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"{path}: {exc.strerror}") from exc
    return parse_graph(text, str(path))


def format_graph(g: Graph) -> str:
    edges = g.sorted_edges()
    return "\n".join([f"{g.n} {len(edges)}"] + [f"{u} {v}" for u, v in edges]) + "\n"


# -- measures, kernels, partitions ------------------------------------------


def measure_to_dict(m: GridMeasure) -> dict[str, Any]:
    return {"resolution": m.resolution, "masses": m.masses.ravel().tolist()}


def measure_from_dict(d: dict[str, Any]) -> GridMeasure:
    try:
        k = int(d["resolution"])
        flat = np.asarray(d["masses"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad measure record: {exc}") from exc
    if k < 1 or flat.size != k * k:
        raise InvalidInput(f"measure of resolution {k} needs {k * k} masses, got {flat.size}")
    return GridMeasure(flat.reshape(k, k))


def read_measure(path: str | os.PathLike) -> GridMeasure:
    return measure_from_dict(load_json(path))


def matrix_to_dict(w: np.ndarray) -> dict[str, Any]:
    return {"rows": int(w.shape[0]), "cols": int(w.shape[1]), "weights": w.ravel().tolist()}


def _matrix_from_dict(d: dict[str, Any]) -> np.ndarray:
    try:
        rows, cols = int(d["rows"]), int(d["cols"])
        flat = np.asarray(d["weights"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad matrix record: {exc}") from exc
    if flat.size != rows * cols:
        raise InvalidInput(f"{rows}x{cols} matrix needs {rows * cols} weights, got {flat.size}")
    return flat.reshape(rows, cols)


def kernel_from_dict(d: dict[str, Any]) -> FDKernel:
    return FDKernel(_matrix_from_dict(d))


def partition_from_dict(d: dict[str, Any]) -> FractionalPartition:
    return FractionalPartition(_matrix_from_dict(d))


# -- clouds ------------------------------------------------------------------


def kshape_to_dict(c: KShapeCloud) -> dict[str, Any]:
    return {
        "kind": "kshape",
        "k": c.k,
        "points": [q.ravel().tolist() for q in c.points],
        "provenance": list(c.provenance),
        "builder_params": dict(c.params),
    }


def shape_to_dict(c: ShapeCloud) -> dict[str, Any]:
    return {
        "kind": "shape",
        "k": c.params.get("kmax"),
        "points": [measure_to_dict(p) for p in c.points],
        "provenance": list(c.provenance),
        "builder_params": dict(c.params),
    }


def cloud_from_dict(d: dict[str, Any]) -> KShapeCloud | ShapeCloud:
    kind = d.get("kind")
    prov = tuple(d.get("provenance", ()))
    params = dict(d.get("builder_params", {}))
    if kind == "kshape":
        k = int(d["k"])
        pts = np.asarray(d["points"], dtype=np.float64).reshape(-1, k, k)
        return KShapeCloud(k, pts, prov, params)
    if kind == "shape":
        return ShapeCloud(tuple(measure_from_dict(p) for p in d["points"]), prov, params)
    raise InvalidInput(f"unknown cloud kind {kind!r}")


def read_cloud(path: str | os.PathLike) -> KShapeCloud | ShapeCloud:
    return cloud_from_dict(load_json(path))
