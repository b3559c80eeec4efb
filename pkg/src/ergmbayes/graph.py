"""Graph data model: binary adjacency, node attributes, observation mask, file I/O.

Nodes are 0-based contiguous integers. External files may use arbitrary
string labels; these are mapped to indices on ingestion (attribute-table row
order wins when an attribute file is present).

Masked (unobserved) dyads keep a working adjacency value so that statistics
are always computable on the augmented network; estimators decide how to
treat them.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or dyad operation."""


def canon_dyad(i: int, j: int, directed: bool) -> tuple[int, int]:
    """Canonical form of a dyad: (i, j) as given if directed, sorted otherwise."""
    if i == j:
        raise GraphError(f"self-loop dyad ({i}, {i}) is not allowed")
    if not directed and i > j:
        return (j, i)
    return (i, j)


@dataclass
class Graph:
    """Binary network with node attributes and a dyad observation mask.

    adj[i, j] is 1 when the tie i->j (or {i, j} if undirected) is present.
    mask[i, j] is 1 when the dyad is observed, 0 when missing. Undirected
    graphs keep both matrices symmetric. No self-loops.
    """

    n: int
    directed: bool
    adj: np.ndarray
    mask: np.ndarray
    attributes: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        self.adj = np.ascontiguousarray(self.adj, dtype=np.uint8)
        self.mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
        if self.adj.shape != (self.n, self.n) or self.mask.shape != (self.n, self.n):
            raise GraphError("adj and mask must be n x n")
        if np.any(np.diag(self.adj) != 0):
            raise GraphError("self-loops are not allowed")
        if not self.directed:
            if not np.array_equal(self.adj, self.adj.T):
                raise GraphError("undirected adjacency must be symmetric")
            if not np.array_equal(self.mask, self.mask.T):
                raise GraphError("undirected mask must be symmetric")
        for name, vals in self.attributes.items():
            if len(vals) != self.n:
                raise GraphError(f"attribute {name!r} has {len(vals)} values, expected {self.n}")

    # -- basic views ---------------------------------------------------

    @classmethod
    def empty(cls, n: int, directed: bool = False) -> "Graph":
        return cls(n=n, directed=directed,
                   adj=np.zeros((n, n), dtype=np.uint8),
                   mask=np.ones((n, n), dtype=np.uint8))

    def copy(self) -> "Graph":
        return Graph(n=self.n, directed=self.directed,
                     adj=self.adj.copy(), mask=self.mask.copy(),
                     attributes=dict(self.attributes))

    def edge_count(self) -> int:
        total = int(self.adj.sum())
        return total if self.directed else total // 2

    def edge_list(self) -> list[tuple[int, int]]:
        """Canonical sorted edge list (i < j for undirected)."""
        if self.directed:
            pairs = np.argwhere(self.adj == 1)
        else:
            pairs = np.argwhere(np.triu(self.adj, k=1) == 1)
        return [tuple(map(int, p)) for p in pairs]

    def dyad_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All canonical dyads as parallel index arrays."""
        if self.directed:
            i, j = np.where(~np.eye(self.n, dtype=bool))
        else:
            i, j = np.triu_indices(self.n, k=1)
        return i.astype(np.int64), j.astype(np.int64)

    def masked_dyad_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Canonical dyads with mask == 0."""
        i, j = self.dyad_arrays()
        keep = self.mask[i, j] == 0
        return i[keep], j[keep]

    def observed_dyad_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        i, j = self.dyad_arrays()
        keep = self.mask[i, j] == 1
        return i[keep], j[keep]

    def n_missing(self) -> int:
        return int(self.masked_dyad_arrays()[0].shape[0])


# -- operations --------------------------------------------------------


def from_edge_list(edges, n: int, directed: bool = False) -> Graph:
    """Build a fully observed graph from (i, j) pairs.

    Duplicate edges are accepted idempotently with a warning; out-of-range
    indices and self-loops are errors.
    """
    g = Graph.empty(n, directed)
    dupes = 0
    for (i, j) in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise GraphError(f"self-loop ({i}, {i}) is not allowed")
        if g.adj[i, j]:
            dupes += 1
            continue
        g.adj[i, j] = 1
        if not directed:
            g.adj[j, i] = 1
    if dupes:
        warnings.warn(f"{dupes} duplicate edge(s) ignored", stacklevel=2)
    return g


def toggle(g: Graph, dyad: tuple[int, int]) -> Graph:
    """Return a copy of g with the dyad's adjacency value flipped."""
    i, j = canon_dyad(dyad[0], dyad[1], g.directed)
    out = g.copy()
    v = 0 if out.adj[i, j] else 1
    out.adj[i, j] = v
    if not g.directed:
        out.adj[j, i] = v
    return out


def density(g: Graph) -> float:
    """Observed-edge count over observed-dyad count (masked dyads excluded)."""
    if g.n < 2:
        raise GraphError("density needs at least 2 nodes")
    i, j = g.observed_dyad_arrays()
    if i.shape[0] == 0:
        raise GraphError("no observed dyads")
    return float(g.adj[i, j].sum()) / i.shape[0]


def apply_missing_mask(g: Graph, missing) -> Graph:
    """Return a copy of g with the listed dyads marked unobserved.

    Adjacency values at masked dyads are retained (they act as the current
    imputation for the augmented network).
    """
    out = g.copy()
    for (i, j) in missing:
        i, j = canon_dyad(int(i), int(j), g.directed)
        out.mask[i, j] = 0
        if not g.directed:
            out.mask[j, i] = 0
    return out


# -- file I/O ----------------------------------------------------------

_HEADER_WORDS = {"from", "to", "i", "j", "source", "target", "head", "tail",
                 "node1", "node2", "sender", "receiver"}


def _split_pair_line(line: str) -> list[str]:
    line = line.split("#", 1)[0].strip()
    if not line:
        return []
    if "," in line:
        return [tok.strip() for tok in line.split(",") if tok.strip()]
    return line.split()


def read_edge_pairs(path) -> list[tuple[str, str]]:
    """Read `i j` or `i,j` pairs, one per line; '#' comments and an optional
    header row (recognized by common column names) are skipped."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        first = True
        for lineno, raw in enumerate(fh, 1):
            toks = _split_pair_line(raw)
            if not toks:
                continue
            if first and all(t.lower() in _HEADER_WORDS for t in toks):
                first = False
                continue
            first = False
            if len(toks) != 2:
                raise GraphError(f"{path}:{lineno}: expected two fields, got {len(toks)}")
            pairs.append((toks[0], toks[1]))
    return pairs


def read_attribute_table(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Read a delimited node-attribute table.

    First column is the node label, remaining columns are attributes; a
    header row is required. A column becomes numeric (float64) when every
    entry parses as a number, categorical (strings) otherwise.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    delim = "," if "," in text.splitlines()[0] else None
    rows = []
    if delim == ",":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
    else:
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if len(rows) < 2:
        raise GraphError(f"{path}: attribute table needs a header row and at least one node")
    header = [h.strip() for h in rows[0]]
    body = [[f.strip() for f in r] for r in rows[1:]]
    if any(len(r) != len(header) for r in body):
        raise GraphError(f"{path}: ragged attribute table")
    labels = [r[0] for r in body]
    if len(set(labels)) != len(labels):
        raise GraphError(f"{path}: duplicate node labels")
    columns: dict[str, np.ndarray] = {}
    for k, name in enumerate(header[1:], start=1):
        raw = [r[k] for r in body]
        try:
            columns[name] = np.array([float(v) for v in raw], dtype=np.float64)
        except ValueError:
            columns[name] = np.array(raw, dtype=object)
    return labels, columns


def load_graph(edge_path, directed: bool, attr_path=None, n=None,
               missing_path=None, index_base: int = 0) -> Graph:
    """Assemble a Graph from an edge-list file plus optional attribute and
    missing-dyad files.

    With an attribute file, node identity and count come from its row order
    and edge labels must match. Without one, labels must be integers and
    `n` must be given (indices are `index_base`-based).
    """
    pairs = read_edge_pairs(edge_path)
    if attr_path is not None:
        labels, columns = read_attribute_table(attr_path)
        index = {lab: k for k, lab in enumerate(labels)}
        if n is not None and n != len(labels):
            raise GraphError(f"--n {n} disagrees with attribute table ({len(labels)} nodes)")
        n = len(labels)

        def to_idx(tok: str) -> int:
            if tok not in index:
                raise GraphError(f"node label {tok!r} not in attribute table")
            return index[tok]
    else:
        if n is None:
            raise GraphError("node count required when no attribute file is given")
        columns = {}

        def to_idx(tok: str) -> int:
            try:
                v = int(tok) - index_base
            except ValueError:
                raise GraphError(f"non-integer node label {tok!r} needs an attribute file") from None
            return v

    g = from_edge_list([(to_idx(a), to_idx(b)) for a, b in pairs], n=n, directed=directed)
    g.attributes.update(columns)
    if missing_path is not None:
        miss = [(to_idx(a), to_idx(b)) for a, b in read_edge_pairs(missing_path)]
        g = apply_missing_mask(g, miss)
    return g


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in g.edge_list():
            fh.write(f"{i} {j}\n")
