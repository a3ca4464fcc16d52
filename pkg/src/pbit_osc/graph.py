"""Graph instances, Ising couplings and the graph-derived scalars.

Weights map to couplings as ``J_ij = -w_ij`` so that low Ising energy means a
large cut. G-set files use the usual rudy layout: a ``N M`` header followed by
``M`` lines ``i j w`` with 1-based node indices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

# Above this size J is stored as CSR; below it a dense array is cheaper.
DENSE_MAX_NODES = 2048


class GraphError(ValueError):
    """Malformed or inconsistent graph input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateGraphError(ValueError):
    """The instance has no usable field scale (N < 2 or all couplings zero)."""


class WeightType(str, enum.Enum):
    PLUS_ONE = "plus_one"
    PM_ONE = "pm_one"
    MINUS_ONE = "minus_one"
    MIXED = "mixed"


def infer_weight_type(weights) -> WeightType:
    values = set(float(w) for w in weights)
    if values <= {1.0}:
        return WeightType.PLUS_ONE
    if values == {-1.0}:
        return WeightType.MINUS_ONE
    if values == {-1.0, 1.0}:
        return WeightType.PM_ONE
    return WeightType.MIXED


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]
    name: str = ""
    weight_type: WeightType = WeightType.MIXED

    def __post_init__(self):
        if self.n_nodes < 1:
            raise GraphError(f"n_nodes must be positive, got {self.n_nodes}")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        seen = set()
        for i, j, _ in edges:
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise GraphError(f"edge ({i}, {j}) out of range for {self.n_nodes} nodes")
            if i == j:
                raise GraphError(f"self-loop on node {i}")
            key = (i, j) if i < j else (j, i)
            if key in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weight_type", WeightType(self.weight_type))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0)
        arr = np.asarray(self.edges, dtype=float)
        return arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]

    def scaled(self, gamma: float) -> Graph:
        """Copy of the graph with every weight multiplied by ``gamma``."""
        edges = tuple((i, j, gamma * w) for i, j, w in self.edges)
        return Graph(self.n_nodes, edges, self.name, infer_weight_type(w for _, _, w in edges))


def _format_weight(w: float) -> str:
    if float(w).is_integer():
        return str(int(w))
    return repr(float(w))


def parse_gset(text: str, name: str = "") -> Graph:
    lines = text.splitlines()
    # Skip leading blank lines but keep 1-based line numbers for error messages.
    pos = 0
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos == len(lines):
        raise GraphError("empty input: missing 'N M' header", line=1)
    header = lines[pos].split()
    try:
        if len(header) != 2:
            raise ValueError
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise GraphError(f"malformed header {lines[pos]!r}, expected 'N M'", line=pos + 1) from None
    if n < 1 or m < 0:
        raise GraphError(f"header values out of range: N={n}, M={m}", line=pos + 1)

    edges = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(lines[pos + 1:], start=pos + 2):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise GraphError(f"expected 'i j w', got {raw!r}", line=lineno)
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphError(f"cannot parse edge {raw!r}", line=lineno) from None
        for v in (i, j):
            if not 1 <= v <= n:
                raise GraphError(f"node index {v} outside [1, {n}]", line=lineno)
        if i == j:
            raise GraphError(f"self-loop on node {i}", line=lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge ({i}, {j}), first seen on line {seen[key]}", line=lineno)
        seen[key] = lineno
        edges.append((i - 1, j - 1, w))

    if len(edges) != m:
        raise GraphError(f"header declares {m} edges but {len(edges)} were read", line=pos + 1)
    return Graph(n, tuple(edges), name, infer_weight_type(w for _, _, w in edges))


def load_gset(path: str | Path) -> Graph:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GraphError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return parse_gset(text, name=path.stem)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None


def serialize_gset(g: Graph) -> str:
    out = [f"{g.n_nodes} {g.n_edges}"]
    out.extend(f"{i + 1} {j + 1} {_format_weight(w)}" for i, j, w in g.edges)
    return "\n".join(out) + "\n"


# --- illustrative instances -------------------------------------------------


class ToyKind(str, enum.Enum):
    TOY1 = "toy1"
    TOY2 = "toy2"
    TOY3 = "toy3"
    TOY4 = "toy4"
    TOY5 = "toy5"
    TOY6 = "toy6"
    TOY7 = "toy7"

    @classmethod
    def parse(cls, value: str | ToyKind) -> ToyKind:
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise GraphError(f"unknown toy graph {value!r}; choose from "
                             + ", ".join(k.value for k in cls)) from None


# Edge counts listed for the ER instances; generated graphs must land within
# 15% of one of them.
ER_EDGE_TARGETS = {ToyKind.TOY6: (93, 107), ToyKind.TOY7: (200,)}
ER_MEAN_DEGREE = 6.0
ER_TOLERANCE = 0.15


def _ring(n: int, w: float) -> list[tuple[int, int, float]]:
    return [(i, (i + 1) % n, w) for i in range(n)]


def _grid(rows: int, cols: int, w: float) -> list[tuple[int, int, float]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, w))
            if r + 1 < rows:
                edges.append((i, i + cols, w))
    return edges


def _erdos_renyi(n: int, targets: tuple[int, ...], seed: int) -> list[tuple[int, int, float]]:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    prob = ER_MEAN_DEGREE / (n - 1)
    while True:
        keep = rng.random(iu.size) < prob
        signs = rng.choice(np.array([-1.0, 1.0]), size=int(keep.sum()))
        m = int(keep.sum())
        if any(abs(m - t) <= ER_TOLERANCE * t for t in targets):
            return [(int(i), int(j), float(w)) for i, j, w in zip(iu[keep], ju[keep], signs)]


def generate_toy(kind: str | ToyKind, seed: int = 0) -> Graph:
    """Build one of the illustrative instances (Toy1..Toy7).

    Toy1-5 are fixed graphs and ignore ``seed``; Toy6/Toy7 are Erdos-Renyi
    graphs with mean degree about 6 and +-1 weights, reproducible from ``seed``.
    """
    kind = ToyKind.parse(kind)
    name = kind.value
    if kind is ToyKind.TOY1:
        n, edges = 4, _ring(4, 1.0)
    elif kind is ToyKind.TOY2:
        n, edges = 4, [(i, j, -1.0) for i in range(4) for j in range(i + 1, 4)]
    elif kind is ToyKind.TOY3:
        # two triangles joined by the bridge (2, 3)
        n, edges = 6, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0),
                       (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0),
                       (2, 3, 1.0)]
    elif kind is ToyKind.TOY4:
        n, edges = 8, _ring(8, 1.0)
    elif kind is ToyKind.TOY5:
        n, edges = 16, _grid(4, 4, -1.0)
    else:
        n = 32 if kind is ToyKind.TOY6 else 64
        edges = _erdos_renyi(n, ER_EDGE_TARGETS[kind], seed)
        name = f"{name}-s{seed}"
    return Graph(n, tuple(edges), name, infer_weight_type(w for _, _, w in edges))


# --- couplings ---------------------------------------------------------------


def _row_stats(J) -> tuple[np.ndarray, np.ndarray]:
    """Per-row sum and sum of squares, for dense or sparse J."""
    if sp.issparse(J):
        s1 = np.asarray(J.sum(axis=1)).ravel()
        s2 = np.asarray(J.multiply(J).sum(axis=1)).ravel()
    else:
        J = np.asarray(J, dtype=float)
        s1 = J.sum(axis=1)
        s2 = np.einsum("ij,ij->i", J, J)
    return s1, s2


def field_scale(J) -> float:
    """Mean over rows of ``sqrt((N-1) * Var_j J_ij)``.

    The variance is the population variance over all N entries of the row,
    zero diagonal included.
    """
    n = J.shape[0]
    if n < 2:
        raise DegenerateGraphError(f"field scale needs at least 2 nodes, got {n}")
    s1, s2 = _row_stats(J)
    var = np.maximum(s2 / n - (s1 / n) ** 2, 0.0)
    return float(np.mean(np.sqrt((n - 1) * var)))


def local_field_variance(J) -> float:
    n = J.shape[0]
    _, s2 = _row_stats(J)
    return float(s2.sum() / n)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric zero-diagonal couplings with the scalars derived from them.

    ``J`` is a dense array for small instances and CSR above
    ``DENSE_MAX_NODES``; both support ``J @ x``.
    """

    J: np.ndarray | sp.csr_matrix
    s_J: float
    sigma_h_sq: float
    name: str = ""
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", self.J.shape[0])

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.J)

    @property
    def sigma_h(self) -> float:
        return math.sqrt(self.sigma_h_sq)

    def _require_scale(self):
        if not self.s_J > 0:
            raise DegenerateGraphError(
                f"{self.name or 'graph'}: field scale s_J = 0, inverse-temperature range undefined")

    @property
    def i0_min(self) -> float:
        self._require_scale()
        return 0.1 / self.s_J

    @property
    def i0_max(self) -> float:
        self._require_scale()
        return 10.0 / self.s_J

    def dense(self) -> np.ndarray:
        return self.J.toarray() if self.is_sparse else np.asarray(self.J)


def coupling_array(g: Graph, sparse: bool | None = None):
    """J with ``J_ij = J_ji = -w_ij`` on every edge."""
    if sparse is None:
        sparse = g.n_nodes > DENSE_MAX_NODES
    i, j, w = g.edge_arrays()
    if sparse:
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        vals = np.concatenate([-w, -w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(g.n_nodes, g.n_nodes))
    J = np.zeros((g.n_nodes, g.n_nodes))
    J[i, j] = -w
    J[j, i] = -w
    J.setflags(write=False)
    return J


def build_couplings(g: Graph, sparse: bool | None = None) -> CouplingMatrix:
    J = coupling_array(g, sparse)
    s_J = field_scale(J) if g.n_nodes >= 2 else 0.0
    return CouplingMatrix(J=J, s_J=s_J, sigma_h_sq=local_field_variance(J), name=g.name)


def couplings_from_array(J, name: str = "") -> CouplingMatrix:
    """Wrap an explicit coupling matrix, checking symmetry and zero diagonal."""
    if not sp.issparse(J):
        J = np.array(J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise GraphError(f"coupling matrix must be square, got shape {J.shape}")
        if not np.array_equal(J, J.T):
            raise GraphError("coupling matrix is not symmetric")
        if np.any(np.diag(J) != 0):
            raise GraphError("coupling matrix has a nonzero diagonal")
        J.setflags(write=False)
    n = J.shape[0]
    s_J = field_scale(J) if n >= 2 else 0.0
    return CouplingMatrix(J=J, s_J=s_J, sigma_h_sq=local_field_variance(J), name=name)
