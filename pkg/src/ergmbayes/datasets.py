"""Bundled and user-supplied datasets.

Shipped with the package:
  example36 -- a synthetic 36-node undirected network with Office/Practice
  attributes, simulated from this library's own model. It exists so demos
  and tests run out of the box; it is NOT real data.

User-supplied (place the files under the package data directory or a
directory named by the ERGMBAYES_DATA environment variable):

  lazega/ -- the law-firm partner collaboration network (36 partners,
  undirected, 115 edges) with node attributes. Build it from the original
  study's distribution files (71 lawyers: a 71x71 cowork adjacency matrix
  plus an attribute table with columns seniority, status, gender, office,
  years, age, practice, law school) via `build_lazega_from_source`, which
  keeps the partners (status == 1), symmetrizes by mutual nomination and
  writes lazega.edges + lazega_attrs.csv.

  dixon/ -- the simulated directed high-school friendship network
  (248 nodes; attributes grade, race, sex). Export it from the reference
  data distribution, e.g. in R:

      library(ergm); data(faux.dixon.high)
      m <- as.matrix(faux.dixon.high, matrix.type = "edgelist")
      write.table(m, "dixon.edges", row.names = FALSE, col.names = FALSE)
      a <- data.frame(node = seq_len(248),
                      grade = faux.dixon.high %v% "grade",
                      race  = faux.dixon.high %v% "race",
                      sex   = faux.dixon.high %v% "sex")
      write.csv(a, "dixon_attrs.csv", row.names = FALSE)

  then load with node labels 1-based (index_base=1).
"""
from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

import numpy as np

from .graph import Graph, apply_missing_mask, from_edge_list, load_graph


def package_data_dir() -> Path:
    return Path(resources.files("ergmbayes")) / "data"


def _dataset_dir(name: str) -> Path | None:
    env = os.environ.get("ERGMBAYES_DATA")
    candidates = []
    if env:
        candidates.append(Path(env) / name)
    candidates.append(package_data_dir() / name)
    for c in candidates:
        if c.is_dir():
            return c
    return None


def load_example36() -> Graph:
    """The bundled synthetic demo network (undirected, 36 nodes)."""
    d = package_data_dir() / "example36"
    return load_graph(d / "example36.edges", directed=False,
                      attr_path=d / "example36_attrs.csv")


def dataset_paths(name: str, edges: str, attrs: str) -> tuple[Path, Path] | None:
    d = _dataset_dir(name)
    if d is None:
        return None
    e, a = d / edges, d / attrs
    if e.is_file() and a.is_file():
        return e, a
    return None


def load_lazega() -> Graph:
    """The real law-firm partner collaboration network, if supplied."""
    paths = dataset_paths("lazega", "lazega.edges", "lazega_attrs.csv")
    if paths is None:
        raise FileNotFoundError(
            "lazega dataset not found: place lazega.edges and lazega_attrs.csv "
            "under <package>/data/lazega or $ERGMBAYES_DATA/lazega "
            "(see ergmbayes.datasets.build_lazega_from_source)")
    return load_graph(paths[0], directed=False, attr_path=paths[1])


def load_dixon() -> Graph:
    """The simulated directed high-school friendship network, if supplied."""
    paths = dataset_paths("dixon", "dixon.edges", "dixon_attrs.csv")
    if paths is None:
        raise FileNotFoundError(
            "dixon dataset not found: place dixon.edges and dixon_attrs.csv "
            "under <package>/data/dixon or $ERGMBAYES_DATA/dixon "
            "(see the ergmbayes.datasets module docstring for the R export)")
    return load_graph(paths[0], directed=True, attr_path=paths[1], index_base=1)


_ATTR_NAMES = ("Seniority", "Status", "Gender", "Office", "Years", "Age",
               "Practice", "School")


def build_lazega_from_source(cowork_path, attr_path, out_dir,
                             rule: str = "min") -> tuple[Path, Path]:
    """Construct the 36-partner collaboration network from the original
    distribution files (71x71 cowork matrix, 71-row attribute table).

    rule='min' keeps a tie when both partners named each other (the usual
    construction, 115 edges); rule='max' keeps any nomination.
    """
    cowork = np.loadtxt(cowork_path)
    attrs = np.loadtxt(attr_path)
    if cowork.shape[0] != attrs.shape[0]:
        raise ValueError("cowork matrix and attribute table disagree on size")
    if attrs.shape[1] != len(_ATTR_NAMES):
        raise ValueError(f"attribute table should have {len(_ATTR_NAMES)} columns: "
                         f"{', '.join(n.lower() for n in _ATTR_NAMES)}")
    partners = attrs[:, 1] == 1
    w = cowork[np.ix_(partners, partners)]
    sym = np.minimum(w, w.T) if rule == "min" else np.maximum(w, w.T)
    np.fill_diagonal(sym, 0)
    n = sym.shape[0]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if sym[i, j] > 0]
    if n != 36 or len(edges) != 115:
        import warnings
        warnings.warn(f"expected 36 partners / 115 edges, got {n} / {len(edges)}; "
                      "check the source files", stacklevel=2)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    e_path, a_path = out / "lazega.edges", out / "lazega_attrs.csv"
    with open(e_path, "w", encoding="utf-8") as fh:
        for i, j in edges:
            fh.write(f"{i} {j}\n")
    sub = attrs[partners]
    with open(a_path, "w", encoding="utf-8") as fh:
        fh.write("node," + ",".join(_ATTR_NAMES) + "\n")
        for k in range(n):
            fh.write(f"{k}," + ",".join(str(int(v)) for v in sub[k]) + "\n")
    return e_path, a_path


def mask_node_ties(g: Graph, nodes, rng: np.random.Generator | None = None) -> Graph:
    """Mark every dyad incident to the given nodes as unobserved (the
    all-ties-of-a-node missingness pattern)."""
    nodes = list(nodes)
    missing = []
    for v in nodes:
        for u in range(g.n):
            if u != v:
                missing.append((v, u))
                if g.directed:
                    missing.append((u, v))
    return apply_missing_mask(g, missing)
