"""Reading and writing graphs, centroids, responses, matrices and models.

Matrices are dense CSV without header, one row per line, every entry printed
with 17 significant digits so that a save/load round trip is exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InconsistentDataset, ParseError
from .lattice import AdjacencyGraph
from .model import CarModel, Centroids, SarModel, as_diagonal

BUNDLED = ("columbus",)


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


# ---------------------------------------------------------------------------
# matrices


def save_matrix(m, path) -> None:
    a = np.atleast_2d(np.asarray(getattr(m, "sigma", getattr(m, "values", m)), dtype=float))
    with open(path, "w", newline="") as fh:
        for row in a:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ParseError(f"non-numeric entry in {path}: {exc}", line=lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(f"row has {len(rows[-1])} entries, expected {len(rows[0])}", line=lineno)
    if not rows:
        raise ParseError(f"{path} is empty")
    return np.array(rows)


def save_vector(v, path) -> None:
    with open(path, "w", newline="") as fh:
        for x in np.ravel(v):
            fh.write(_fmt(x) + "\n")


def load_diagonal(path) -> np.ndarray:
    """A diagonal matrix stored either as a column of values or as a full square matrix."""
    a = load_matrix(path)
    if a.shape[1] == 1:
        return np.diag(a[:, 0])
    if a.shape[0] == 1 and a.shape[1] > 1:
        return np.diag(a[0])
    return as_diagonal(a)


# ---------------------------------------------------------------------------
# graphs


def read_edge_list(path, n: int | None = None) -> AdjacencyGraph:
    """One ``i j`` pair per line, 1-based. Blank lines and ``#`` comments are skipped.

    A comment of the form ``# n=49`` fixes the node count; otherwise it is
    ``n`` if given, else the largest index seen.
    """
    pairs = []
    declared = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)
            if len(body) == 2 and body[1].strip().startswith("n="):
                try:
                    declared = int(body[1].strip()[2:])
                except ValueError:
                    raise ParseError("bad node-count comment", line=lineno) from None
            toks = body[0].split()
            if not toks:
                continue
            if len(toks) != 2:
                raise ParseError(f"expected 'i j', got {line.strip()!r}", line=lineno)
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError:
                raise ParseError(f"non-integer node index in {line.strip()!r}", line=lineno) from None
            if i < 1 or j < 1:
                raise ParseError("node indices are 1-based", line=lineno)
            pairs.append((i - 1, j - 1))
    size = n if n is not None else declared
    if size is None:
        size = max((max(p) for p in pairs), default=-1) + 1
    return AdjacencyGraph.from_pairs(size, pairs)


def read_gal(path) -> AdjacencyGraph:
    """GAL neighbor file: a header line (``n`` or ``0 n name key``), then
    for each node a line ``id k`` followed by a line of ``k`` neighbor ids.

    Ids must be the integers ``1..n``.
    """
    with open(path) as fh:
        lines = [(k, ln.split()) for k, ln in enumerate(fh, start=1)]
    lines = [(k, t) for k, t in lines if t]
    if not lines:
        raise ParseError(f"{path} is empty")
    k0, head = lines[0]
    try:
        n = int(head[1]) if len(head) >= 4 else int(head[0])
    except (ValueError, IndexError):
        raise ParseError("bad GAL header", line=k0) from None
    pairs = []
    pos = 1
    while pos < len(lines):
        lineno, toks = lines[pos]
        try:
            node, count = int(toks[0]), int(toks[1])
        except (ValueError, IndexError):
            raise ParseError("expected 'id neighbor_count'", line=lineno) from None
        nbrs = []
        if count > 0:
            if pos + 1 >= len(lines):
                raise ParseError("missing neighbor line", line=lineno)
            nlineno, ntoks = lines[pos + 1]
            try:
                nbrs = [int(t) for t in ntoks]
            except ValueError:
                raise ParseError("non-integer neighbor id", line=nlineno) from None
            if len(nbrs) != count:
                raise ParseError(f"expected {count} neighbors, got {len(nbrs)}", line=nlineno)
            pos += 2
        else:
            pos += 1
        pairs.extend((node - 1, j - 1) for j in nbrs)
    return AdjacencyGraph.from_pairs(n, pairs)


def read_neighbors(path, fmt: str | None = None, n: int | None = None) -> AdjacencyGraph:
    fmt = fmt or ("gal" if str(path).lower().endswith(".gal") else "edges")
    if fmt == "gal":
        return read_gal(path)
    if fmt == "edges":
        return read_edge_list(path, n=n)
    raise ValueError(f"unknown neighbor format {fmt!r}")


def write_edge_list(g: AdjacencyGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# n={g.n}\n")
        for i, j in sorted(g.edges):
            fh.write(f"{i + 1} {j + 1}\n")


# ---------------------------------------------------------------------------
# tables


def _read_table(path) -> tuple[list[str] | None, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [(k, r) for k, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path} is empty")
    header = None
    try:
        [float(c) for c in rows[0][1]]
    except ValueError:
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    out = []
    for k, r in rows:
        try:
            out.append([float(c) for c in r])
        except ValueError:
            raise ParseError(f"non-numeric entry in {path}", line=k) from None
        if len(out[-1]) != len(out[0]):
            raise ParseError("ragged row", line=k)
    return header, np.array(out)


def load_response(path, column: str | None = None) -> tuple[np.ndarray, str]:
    """Response vector from a CSV; with a header, ``column`` or else the last column."""
    header, table = _read_table(path)
    if header is None:
        return table[:, -1], "y"
    name = column or header[-1]
    if name not in header:
        raise ParseError(f"column {name!r} not in {header}")
    return table[:, header.index(name)], name


def load_centroids(path) -> Centroids:
    header, table = _read_table(path)
    if header is not None and "x" in header and "y" in header:
        return Centroids(table[:, [header.index("x"), header.index("y")]])
    return Centroids(table[:, -2:])


def load_design(path) -> np.ndarray:
    return _read_table(path)[1]


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    name: str
    adjacency: AdjacencyGraph
    centroids: Centroids | None
    response: np.ndarray
    label: str = "y"

    def __post_init__(self):
        n = self.adjacency.n
        if self.centroids is not None and self.centroids.n != n:
            raise InconsistentDataset(f"{self.centroids.n} centroids for {n} nodes")
        if len(self.response) != n:
            raise InconsistentDataset(f"{len(self.response)} responses for {n} nodes")

    @property
    def n(self) -> int:
        return self.adjacency.n


def _bundled_dir(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"no bundled dataset {name!r}; available: {BUNDLED}")
    return Path(str(resources.files("lattice_ar") / "data" / name))


def load_dataset(name: str | None = None, adjacency=None, centroids=None, response=None,
                 column: str | None = None) -> Dataset:
    """Bundled dataset by ``name``, or one assembled from file paths."""
    if name in BUNDLED and adjacency is None:
        d = _bundled_dir(name)
        adjacency, centroids, response = d / "neighbors.txt", d / "centroids.csv", d / "crime.csv"
    if adjacency is None or response is None:
        raise ValueError("need a bundled name or adjacency and response paths")
    y, label = load_response(response, column)
    graph = read_neighbors(adjacency, n=len(y))
    cent = load_centroids(centroids) if centroids is not None else None
    return Dataset(name or Path(adjacency).stem, graph, cent, y, label)


def save_dataset(ds: Dataset, directory) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"adjacency": d / "neighbors.txt", "response": d / "response.csv"}
    write_edge_list(ds.adjacency, paths["adjacency"])
    with open(paths["response"], "w", newline="") as fh:
        fh.write(f"id,{ds.label}\n")
        for i, v in enumerate(ds.response, start=1):
            fh.write(f"{i},{_fmt(v)}\n")
    if ds.centroids is not None:
        paths["centroids"] = d / "centroids.csv"
        with open(paths["centroids"], "w", newline="") as fh:
            fh.write("id,x,y\n")
            for i, (x, y) in enumerate(ds.centroids.points[:, :2], start=1):
                fh.write(f"{i},{_fmt(x)},{_fmt(y)}\n")
    return paths


# ---------------------------------------------------------------------------
# models and reports


def save_model(model, path, stem: str | None = None) -> Path:
    """Model JSON plus its matrix parts, written next to the JSON file."""
    path = Path(path)
    stem = stem or path.stem
    if isinstance(model, CarModel):
        parts = {"c": (model.c, f"{stem}_C.csv"), "m": (np.diag(model.m), f"{stem}_M.csv")}
        kind = "car"
    elif isinstance(model, SarModel):
        parts = {"b": (model.b, f"{stem}_B.csv"), "omega": (np.diag(model.omega), f"{stem}_Omega.csv")}
        kind = "sar"
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    doc = {"type": kind}
    for key, (arr, fname) in parts.items():
        (save_vector if arr.ndim == 1 else save_matrix)(arr, path.parent / fname)
        doc[key] = fname
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_model(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid model JSON: {exc.msg}", line=exc.lineno) from None
    base = path.parent
    kind = doc.get("type")
    if kind == "car":
        return CarModel(load_matrix(base / doc["c"]), load_diagonal(base / doc["m"]))
    if kind == "sar":
        return SarModel(load_matrix(base / doc["b"]), load_diagonal(base / doc["omega"]))
    raise ParseError(f"model type must be 'car' or 'sar', got {kind!r}")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")
