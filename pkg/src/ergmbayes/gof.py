"""Posterior-predictive goodness of fit: networks simulated from randomly
drawn posterior parameters are compared with the observed network on
degree, edgewise-shared-partner and geodesic-distance distributions.

The report is plain data (per-bin observed value and simulated quantile
band) meant for any plotting tool; no figures are produced here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exchange import PosteriorSample
from .graph import Graph
from .model import ModelSpec
from .sampler import kernel_seed, run_toggles
from .stats import GofDistributions, compile_model, gof_stats, suff_stats

_QUANTS = (2.5, 25.0, 50.0, 75.0, 97.5)


@dataclass
class GofFamily:
    bins: list            # int bins, geodesic additionally ends with "unreachable"
    observed: np.ndarray
    quantiles: np.ndarray  # (5, nbins)
    mean: np.ndarray


@dataclass
class GofReport:
    families: dict[str, GofFamily]
    sample_size: int
    aux_iters: int
    quantile_levels: tuple = _QUANTS

    def rows(self) -> list[dict]:
        out = []
        for fam, data in self.families.items():
            for b, bin_label in enumerate(data.bins):
                row = {"family": fam, "bin": bin_label,
                       "observed": data.observed[b], "mean": data.mean[b]}
                for lvl, q in zip(self.quantile_levels, data.quantiles[:, b]):
                    row[f"q{lvl:g}"] = q
                out.append(row)
        return out


def _family_bins(fam: str, cap: int | None, observed: dict, sims: list[dict]):
    """Bin list for one family; degree/esp start at 0, geodesic at 1 and
    carries a trailing unreachable bin."""
    if cap is None:
        top = 0
        for h in [observed] + sims:
            ints = [k for k in h if isinstance(k, int)]
            if ints:
                top = max(top, max(ints))
        cap = top + 1 if fam != "geodesic" else top + 2
    if fam == "geodesic":
        return list(range(1, cap)) + ["unreachable"]
    return list(range(cap))


def _counts(hist: dict, bins: list) -> np.ndarray:
    return np.array([hist.get(b, 0) for b in bins], dtype=np.float64)


def bgof(sample: PosteriorSample, spec: ModelSpec, g: Graph,
         sample_size: int = 100, aux_iters: int = 5000,
         n_deg: int | None = None, n_ideg: int | None = None,
         n_odeg: int | None = None, n_dist: int | None = None,
         n_esp: int | None = None, seed: int | None = None,
         start_empty: bool = False) -> GofReport:
    """Draw sample_size parameter vectors uniformly (with replacement) from
    the pooled posterior, simulate one network per draw with aux_iters
    toggle proposals from the observed network (or an empty one), and
    aggregate per-bin quantiles of the GOF distributions.

    Bin-count caps: degree and esp families report bins 0..cap-1; the
    geodesic family reports distances 1..cap-1 plus the unreachable bin,
    so each family has exactly `cap` rows when capped.
    """
    if sample.n_draws == 0:
        raise ValueError("empty posterior sample")
    if sample_size < 2:
        raise ValueError("sample_size must be >= 2")
    cm = compile_model(spec, g)
    rng = np.random.default_rng(seed)
    di, dj = g.dyad_arrays()

    observed = gof_stats(g).families()
    sims: list[dict[str, dict]] = []
    picks = rng.integers(0, sample.n_draws, size=sample_size)
    for r in range(sample_size):
        theta_full = spec.full_theta(sample.draws[picks[r]])
        work = g.copy()
        if start_empty:
            work.adj[:] = 0
        stats = suff_stats(work, spec, compiled=cm)
        run_toggles(cm, work.adj, theta_full, stats, aux_iters, di, dj,
                    kernel_seed(rng))
        sims.append(gof_stats(work).families())

    caps = {"degree": n_deg, "in_degree": n_ideg, "out_degree": n_odeg,
            "esp": n_esp, "geodesic": n_dist}
    families = {}
    for fam in observed:
        bins = _family_bins(fam, caps[fam], observed[fam], [s[fam] for s in sims])
        obs = _counts(observed[fam], bins)
        mat = np.stack([_counts(s[fam], bins) for s in sims])
        families[fam] = GofFamily(bins=bins, observed=obs,
                                  quantiles=np.percentile(mat, _QUANTS, axis=0),
                                  mean=mat.mean(axis=0))
    return GofReport(families=families, sample_size=sample_size,
                     aux_iters=aux_iters)
