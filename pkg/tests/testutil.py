"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from ergmbayes.graph import Graph
from ergmbayes.model import parse_formula, validate

UNDIRECTED_ALL_TERMS = ('edges + nodematch("color") + nodematch("color", diff=TRUE) '
                        '+ nodefactor("color") + absdiff("score") + degree(0:2) '
                        '+ gwesp(0.4, fixed=TRUE)')
DIRECTED_ALL_TERMS = ('edges + mutual + nodematch("color") '
                      '+ nodematch("color", diff=TRUE) + nodefactor("color") '
                      '+ absdiff("score") + idegree(0:1) + odegree(0:1) '
                      '+ gwesp(0.4, fixed=TRUE)')


def random_attrs(rng: np.random.Generator, n: int) -> dict:
    return {
        "color": np.array(rng.choice(["r", "g", "b"], size=n), dtype=object),
        "score": rng.integers(0, 5, size=n).astype(np.float64),
    }


def random_graph(rng: np.random.Generator, n: int, directed: bool,
                 p: float = 0.3, with_attrs: bool = True) -> Graph:
    adj = (rng.random((n, n)) < p).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    if not directed:
        adj = np.triu(adj, 1)
        adj = adj + adj.T
    g = Graph(n=n, directed=directed, adj=adj,
              mask=np.ones((n, n), dtype=np.uint8))
    if with_attrs:
        g.attributes.update(random_attrs(rng, n))
    return g


def all_terms_spec(g: Graph):
    text = DIRECTED_ALL_TERMS if g.directed else UNDIRECTED_ALL_TERMS
    return validate(parse_formula(text), g)


def spec_on(formula: str, g: Graph, offset_coef=None):
    return validate(parse_formula(formula), g, offset_coef=offset_coef)
