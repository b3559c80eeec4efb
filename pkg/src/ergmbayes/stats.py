"""Network sufficient statistics, change statistics and GOF distributions.

Two computation paths exist on purpose: `suff_stats` evaluates whole-graph
statistics with vectorized numpy, while `change_stats` uses the compiled
per-dyad kernel. The test suite checks them against each other and against
literal recount oracles.

Directed shared-partner convention (gwesp and the esp distribution): the
partners of an edge i->j are nodes k with i->k and k->j (outgoing two-path).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import _kernels as K
from .graph import Graph, canon_dyad
from .model import ModelSpec, SpecError

_CODE = {"edges": K.EDGES, "mutual": K.MUTUAL, "absdiff": K.ABSDIFF,
         "gwesp": K.GWESP, "idegree": K.IDEGREE, "odegree": K.ODEGREE,
         "degree": K.DEGREE}


@dataclass
class CompiledModel:
    """Array-only encoding of a validated spec, bound to one graph's
    attribute arrays. Reusable across graphs that share those attributes."""

    spec: ModelSpec
    directed: bool
    n: int
    codes: np.ndarray
    aidx: np.ndarray
    lvl: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    kdeg: np.ndarray
    lvlptr: np.ndarray
    lvldat: np.ndarray
    cat: np.ndarray
    num: np.ndarray
    cat_levels: dict[str, list]

    @property
    def d(self) -> int:
        return self.spec.d

    def kernel_args(self) -> tuple:
        return (self.codes, self.aidx, self.lvl, self.f1, self.f2, self.kdeg,
                self.lvlptr, self.lvldat, self.cat, self.num)


def _sorted_levels(vals: np.ndarray) -> list:
    if vals.dtype == np.float64:
        return sorted(set(float(v) for v in vals))
    return sorted(set(str(v) for v in vals))


def compile_model(spec: ModelSpec, g: Graph) -> CompiledModel:
    if not spec.validated:
        raise SpecError("compile_model needs a validated spec")
    d = spec.d
    codes = np.zeros(d, dtype=np.int64)
    aidx = np.zeros(d, dtype=np.int64)
    lvl = np.full(d, -1, dtype=np.int64)
    f1 = np.zeros(d, dtype=np.float64)
    f2 = np.zeros(d, dtype=np.float64)
    kdeg = np.zeros(d, dtype=np.int64)
    lvlptr = np.zeros(d + 1, dtype=np.int64)
    lvldat_list: list[int] = []

    cat_rows: dict[str, int] = {}
    num_rows: dict[str, int] = {}
    cat_levels: dict[str, list] = {}
    cat_cols: list[np.ndarray] = []
    num_cols: list[np.ndarray] = []

    def cat_row(attr: str) -> int:
        if attr not in cat_rows:
            vals = g.attributes[attr]
            levels = _sorted_levels(vals)
            index = {v: k for k, v in enumerate(levels)}
            if vals.dtype == np.float64:
                codes_col = np.array([index[float(v)] for v in vals], dtype=np.int64)
            else:
                codes_col = np.array([index[str(v)] for v in vals], dtype=np.int64)
            cat_rows[attr] = len(cat_cols)
            cat_levels[attr] = levels
            cat_cols.append(codes_col)
        return cat_rows[attr]

    def num_row(attr: str) -> int:
        if attr not in num_rows:
            num_rows[attr] = len(num_cols)
            num_cols.append(np.asarray(g.attributes[attr], dtype=np.float64))
        return num_rows[attr]

    for c_idx, c in enumerate(spec.coords):
        lvlptr[c_idx] = len(lvldat_list)
        if c.kind == "edges":
            codes[c_idx] = K.EDGES
        elif c.kind == "mutual":
            codes[c_idx] = K.MUTUAL
        elif c.kind == "nodematch":
            a = cat_row(c.attr)
            aidx[c_idx] = a
            if c.level is not None:
                codes[c_idx] = K.NODEMATCH_LVL
                lvl[c_idx] = cat_levels[c.attr].index(c.level)
            else:
                codes[c_idx] = K.NODEMATCH
                if c.level_set is not None:
                    for v in c.level_set:
                        lvldat_list.append(cat_levels[c.attr].index(v))
        elif c.kind == "nodefactor":
            codes[c_idx] = K.NODEFACTOR_LVL
            aidx[c_idx] = cat_row(c.attr)
            lvl[c_idx] = cat_levels[c.attr].index(c.level)
        elif c.kind == "absdiff":
            codes[c_idx] = K.ABSDIFF
            aidx[c_idx] = num_row(c.attr)
        elif c.kind == "gwesp":
            codes[c_idx] = K.GWESP
            f1[c_idx] = math.exp(c.decay)
            f2[c_idx] = 1.0 - math.exp(-c.decay)
        else:
            codes[c_idx] = _CODE[c.kind]
            kdeg[c_idx] = c.degree
    lvlptr[d] = len(lvldat_list)

    n = g.n
    cat = np.zeros((max(len(cat_cols), 1), n), dtype=np.int64)
    for r, col in enumerate(cat_cols):
        cat[r] = col
    num = np.zeros((max(len(num_cols), 1), n), dtype=np.float64)
    for r, col in enumerate(num_cols):
        num[r] = col
    return CompiledModel(spec=spec, directed=g.directed, n=n, codes=codes,
                         aidx=aidx, lvl=lvl, f1=f1, f2=f2, kdeg=kdeg,
                         lvlptr=lvlptr, lvldat=np.array(lvldat_list, dtype=np.int64),
                         cat=cat, num=num, cat_levels=cat_levels)


# -- whole-graph statistics (numpy path) --------------------------------

def _edge_endpoints(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    if g.directed:
        ei, ej = np.where(g.adj == 1)
    else:
        ei, ej = np.where(np.triu(g.adj, k=1) == 1)
    return ei, ej


def gwesp_from_esp_counts(esp_values: np.ndarray, decay: float) -> float:
    if esp_values.size == 0:
        return 0.0
    u = 1.0 - math.exp(-decay)
    return float(math.exp(decay) * np.sum(1.0 - u ** esp_values))


def suff_stats(g: Graph, spec: ModelSpec, compiled: CompiledModel | None = None) -> np.ndarray:
    """Exact statistic vector s(y), evaluated on the stored adjacency
    (masked dyads contribute their current working values)."""
    cm = compiled if compiled is not None else compile_model(spec, g)
    A = g.adj.astype(np.int64)
    ei, ej = _edge_endpoints(g)
    out = np.zeros(cm.d, dtype=np.float64)
    common = None
    for c_idx, c in enumerate(spec.coords):
        kind = c.kind
        if kind == "edges":
            out[c_idx] = ei.shape[0]
        elif kind == "mutual":
            out[c_idx] = np.sum(A * A.T) / 2.0
        elif kind == "nodematch":
            x = cm.cat[cm.aidx[c_idx]]
            same = x[ei] == x[ej]
            if c.level is not None:
                code = cm.cat_levels[c.attr].index(c.level)
                same = same & (x[ei] == code)
            elif c.level_set is not None:
                allowed = np.array([cm.cat_levels[c.attr].index(v) for v in c.level_set])
                same = same & np.isin(x[ei], allowed)
            out[c_idx] = np.sum(same)
        elif kind == "nodefactor":
            x = cm.cat[cm.aidx[c_idx]]
            code = cm.cat_levels[c.attr].index(c.level)
            out[c_idx] = np.sum(x[ei] == code) + np.sum(x[ej] == code)
        elif kind == "absdiff":
            x = cm.num[cm.aidx[c_idx]]
            out[c_idx] = np.sum(np.abs(x[ei] - x[ej]))
        elif kind == "gwesp":
            if common is None:
                common = A @ A
            out[c_idx] = gwesp_from_esp_counts(common[ei, ej], c.decay)
        elif kind == "idegree":
            out[c_idx] = np.sum(A.sum(axis=0) == c.degree)
        elif kind == "odegree":
            out[c_idx] = np.sum(A.sum(axis=1) == c.degree)
        else:  # degree
            out[c_idx] = np.sum(A.sum(axis=1) == c.degree)
    return out


def change_stats(g: Graph, spec: ModelSpec, dyad: tuple[int, int],
                 compiled: CompiledModel | None = None) -> np.ndarray:
    """delta_s(y)_ij = s(y with dyad set to 1) - s(y with dyad set to 0),
    computed incrementally from the dyad's neighborhood."""
    cm = compiled if compiled is not None else compile_model(spec, g)
    i, j = canon_dyad(dyad[0], dyad[1], g.directed)
    out = np.empty(cm.d, dtype=np.float64)
    K.delta_stats(g.adj, g.directed, i, j, *cm.kernel_args(), out)
    return out


def dyad_design(g: Graph, spec: ModelSpec, compiled: CompiledModel | None = None,
                observed_only: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Change-statistic design over dyads: (X, y, di, dj)."""
    cm = compiled if compiled is not None else compile_model(spec, g)
    di, dj = g.observed_dyad_arrays() if observed_only else g.dyad_arrays()
    X = np.empty((di.shape[0], cm.d), dtype=np.float64)
    K.fill_design(g.adj, g.directed, di, dj, *cm.kernel_args(), X)
    y = g.adj[di, dj].astype(np.float64)
    return X, y, di, dj


# -- GOF distributions ---------------------------------------------------

@dataclass
class GofDistributions:
    """Histograms used by the posterior-predictive fit diagnostics."""

    directed: bool
    degree: dict[int, int] | None = None
    in_degree: dict[int, int] | None = None
    out_degree: dict[int, int] | None = None
    esp: dict[int, int] | None = None
    geodesic: dict | None = None  # int keys plus "unreachable"

    def families(self) -> dict[str, dict]:
        fams = {}
        if self.directed:
            fams["in_degree"] = self.in_degree
            fams["out_degree"] = self.out_degree
        else:
            fams["degree"] = self.degree
        fams["esp"] = self.esp
        fams["geodesic"] = self.geodesic
        return fams


def _hist(values: np.ndarray) -> dict[int, int]:
    out: dict[int, int] = {}
    for v in values:
        v = int(v)
        out[v] = out.get(v, 0) + 1
    return out


def gof_stats(g: Graph) -> GofDistributions:
    """Degree, edgewise-shared-partner and geodesic-distance distributions."""
    if g.n < 2:
        raise ValueError("GOF statistics need at least 2 nodes")
    A = g.adj.astype(np.int64)
    ei, ej = _edge_endpoints(g)
    common = A @ A
    esp = _hist(common[ei, ej]) if ei.size else {}

    dist = shortest_path(csr_matrix(A), method="D", directed=g.directed,
                         unweighted=True)
    if g.directed:
        iu, ju = np.where(~np.eye(g.n, dtype=bool))
    else:
        iu, ju = np.triu_indices(g.n, k=1)
    dvals = dist[iu, ju]
    finite = np.isfinite(dvals)
    geodesic: dict = _hist(dvals[finite])
    geodesic["unreachable"] = int(np.sum(~finite))

    if g.directed:
        return GofDistributions(directed=True,
                                in_degree=_hist(A.sum(axis=0)),
                                out_degree=_hist(A.sum(axis=1)),
                                esp=esp, geodesic=geodesic)
    return GofDistributions(directed=False, degree=_hist(A.sum(axis=1)),
                            esp=esp, geodesic=geodesic)
