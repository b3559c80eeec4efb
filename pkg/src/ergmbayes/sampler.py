"""Network simulation from the model by tie-toggle Metropolis, a constrained
variant restricted to unobserved dyads, and exact enumeration for desk-scale
instances.

Reproducibility: every kernel invocation is seeded from a numpy SeedSequence
stream, so runs are bit-identical for a given seed regardless of how calls
are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .graph import Graph
from .model import ModelSpec, SpecError
from .stats import CompiledModel, compile_model, suff_stats


class EnumerationTooLarge(ValueError):
    """Instance exceeds the exact-enumeration bound (24 dyads)."""


@dataclass
class SamplerSettings:
    """aux_iters: toggle proposals per draw; seed feeds a SeedSequence."""

    aux_iters: int = 1000
    seed: int | None = None

    def __post_init__(self):
        if self.aux_iters < 0:
            raise ValueError("aux_iters must be nonnegative")


def _check_theta(theta: np.ndarray, d: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != d:
        raise SpecError(f"theta has length {theta.shape[0]}, expected {d}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def kernel_seed(rng: np.random.Generator) -> int:
    """Fresh 32-bit seed for one compiled MCMC run."""
    return int(rng.integers(0, 2**32 - 1))


def run_toggles(cm: CompiledModel, adj: np.ndarray, theta_full: np.ndarray,
                stats: np.ndarray, steps: int, di: np.ndarray, dj: np.ndarray,
                seed: int) -> int:
    """Thin wrapper over the compiled Metropolis loop. Mutates adj/stats."""
    if steps == 0:
        return 0
    return K.mh_run(adj, cm.directed, theta_full, stats, steps, di, dj,
                    *cm.kernel_args(), seed)


def simulate(spec: ModelSpec, theta: np.ndarray, g0: Graph,
             settings: SamplerSettings, compiled: CompiledModel | None = None,
             rng: np.random.Generator | None = None) -> Graph:
    """Draw a network from the model at full coefficient vector `theta`
    (length spec.d, offset coordinates already holding their fixed values)
    by running aux_iters uniform single-dyad toggle proposals from g0."""
    cm = compiled if compiled is not None else compile_model(spec, g0)
    theta = _check_theta(theta, spec.d)
    rng = rng if rng is not None else np.random.default_rng(settings.seed)
    out = g0.copy()
    di, dj = out.dyad_arrays()
    stats = suff_stats(out, spec, compiled=cm)
    run_toggles(cm, out.adj, theta, stats, settings.aux_iters, di, dj,
                kernel_seed(rng))
    return out


def simulate_constrained(spec: ModelSpec, theta: np.ndarray, g_star: Graph,
                         settings: SamplerSettings, updates: int,
                         compiled: CompiledModel | None = None,
                         rng: np.random.Generator | None = None) -> Graph:
    """Resample only the unobserved dyads of the augmented network g_star,
    holding every observed dyad fixed: `updates` toggle proposals drawn
    uniformly from the masked dyads."""
    if updates < 1:
        raise ValueError("updates must be >= 1")
    cm = compiled if compiled is not None else compile_model(spec, g_star)
    theta = _check_theta(theta, spec.d)
    rng = rng if rng is not None else np.random.default_rng(settings.seed)
    di, dj = g_star.masked_dyad_arrays()
    if di.shape[0] == 0:
        raise ValueError("graph has no masked dyads")
    out = g_star.copy()
    stats = suff_stats(out, spec, compiled=cm)
    run_toggles(cm, out.adj, theta, stats, updates, di, dj, kernel_seed(rng))
    return out


def sample_graph_indices(spec: ModelSpec, theta: np.ndarray, g0: Graph,
                         draws: int, thin: int, seed: int | None = None,
                         compiled: CompiledModel | None = None) -> np.ndarray:
    """Long thinned run returning one ExactTable-compatible graph index per
    draw (dyad-bitmask encoding; instance must have at most 24 dyads).

    Note: at theta = 0 every proposal is accepted, so the toggle chain
    alternates edge-count parity deterministically; use an odd `thin` there.
    """
    cm = compiled if compiled is not None else compile_model(spec, g0)
    theta = _check_theta(theta, spec.d)
    work = g0.copy()
    di, dj = work.dyad_arrays()
    if di.shape[0] > 24:
        raise EnumerationTooLarge("graph-index sampling needs <= 24 dyads")
    stats = suff_stats(work, spec, compiled=cm)
    out = np.empty(draws, dtype=np.int64)
    rng = np.random.default_rng(seed)
    K.mh_run_indexed(work.adj, cm.directed, theta, stats, draws, thin, di, dj,
                     *cm.kernel_args(), kernel_seed(rng), out)
    return out


# -- exact enumeration ---------------------------------------------------

@dataclass
class ExactTable:
    """All graphs on the template's node set with their statistic vectors.

    Graph g is encoded by a dyad bitmask: bit k set iff dyad (di[k], dj[k])
    is an edge.
    """

    spec: ModelSpec
    n: int
    directed: bool
    di: np.ndarray
    dj: np.ndarray
    stats: np.ndarray  # (2**m, d)

    @property
    def n_graphs(self) -> int:
        return self.stats.shape[0]

    def log_weights(self, theta_full: np.ndarray) -> np.ndarray:
        return self.stats @ np.asarray(theta_full, dtype=np.float64)

    def log_z(self, theta_full: np.ndarray) -> float:
        w = self.log_weights(theta_full)
        m = w.max()
        return float(m + np.log(np.exp(w - m).sum()))

    def probs(self, theta_full: np.ndarray) -> np.ndarray:
        w = self.log_weights(theta_full)
        w = np.exp(w - w.max())
        return w / w.sum()

    def log_prob(self, theta_full: np.ndarray, index: int) -> float:
        return float(self.log_weights(theta_full)[index] - self.log_z(theta_full))

    def mean_stats(self, theta_full: np.ndarray) -> np.ndarray:
        return self.probs(theta_full) @ self.stats

    def cov_stats(self, theta_full: np.ndarray) -> np.ndarray:
        p = self.probs(theta_full)
        m = p @ self.stats
        centered = self.stats - m
        return (centered * p[:, None]).T @ centered

    def index_of(self, g: Graph) -> int:
        bits = g.adj[self.di, self.dj].astype(np.int64)
        return int(np.sum(bits << np.arange(bits.shape[0])))

    def adjacency(self, index: int) -> np.ndarray:
        m = self.di.shape[0]
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        for k in range(m):
            if (index >> k) & 1:
                adj[self.di[k], self.dj[k]] = 1
                if not self.directed:
                    adj[self.dj[k], self.di[k]] = 1
        return adj


def enumerate_exact(spec: ModelSpec, template: Graph) -> ExactTable:
    """Enumerate every graph on the template's nodes (attributes and
    directedness taken from it; its adjacency is ignored). Bounded at 24
    dyads, i.e. undirected n <= 7 or directed n <= 5."""
    cm = compile_model(spec, template)
    work = template.copy()
    di, dj = work.dyad_arrays()
    m = di.shape[0]
    if m > 24:
        raise EnumerationTooLarge(f"{m} dyads exceeds the 24-dyad enumeration bound")
    stats = np.empty((2**m, spec.d), dtype=np.float64)
    for mask in range(2**m):
        adj = np.zeros((work.n, work.n), dtype=np.uint8)
        for k in range(m):
            if (mask >> k) & 1:
                adj[di[k], dj[k]] = 1
                if not work.directed:
                    adj[dj[k], di[k]] = 1
        work.adj = adj
        stats[mask] = suff_stats(work, spec, compiled=cm)
    return ExactTable(spec=spec, n=template.n, directed=template.directed,
                      di=di, dj=dj, stats=stats)
