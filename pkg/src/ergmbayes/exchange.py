"""Approximate exchange algorithm with parallel adaptive direction sampling,
plus its missing-data variant and posterior summaries.

Schedule: chains synchronize at iteration boundaries. Within an iteration
every chain proposes from the iteration-start population, simulates its
auxiliary network (workers may run these concurrently), and accept/reject
is applied in chain order. In the missing-data variant the shared augmented
network is refreshed at most once per iteration, after the chain sweep,
using the last accepted proposal. Given a seed, results are bit-identical
for any thread count.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .graph import Graph, density
from .model import ModelSpec, SpecError
from .sampler import run_toggles
from .stats import CompiledModel, compile_model, suff_stats


@dataclass
class GaussianPrior:
    """Multivariate normal prior over the full coordinate vector (offset
    coordinates included; their entries are ignored during estimation)."""

    mean: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        d = self.mean.shape[0]
        if self.sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}")
        if not np.allclose(self.sigma, self.sigma.T):
            raise ValueError("sigma must be symmetric")
        try:
            np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError:
            raise ValueError("sigma must be positive definite") from None

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    def restrict(self, idx: np.ndarray) -> "GaussianPrior":
        return GaussianPrior(self.mean[idx], self.sigma[np.ix_(idx, idx)])

    def log_density(self) -> "GaussianLogDensity":
        return GaussianLogDensity(self.mean, self.sigma)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.sigma, size=size,
                                       method="cholesky")


class GaussianLogDensity:
    """Precomputed-Cholesky Gaussian log pdf."""

    def __init__(self, mean, sigma):
        self.mean = np.asarray(mean, dtype=np.float64)
        self._cho = cho_factor(np.asarray(sigma, dtype=np.float64), lower=True)
        d = self.mean.shape[0]
        self._norm = -0.5 * d * np.log(2 * np.pi) - np.sum(np.log(np.diag(self._cho[0])))

    def __call__(self, x: np.ndarray) -> float:
        diff = x - self.mean
        return float(self._norm - 0.5 * diff @ cho_solve(self._cho, diff))


@dataclass
class ExchangeSettings:
    """Knobs of the exchange run. nchains defaults to twice the model
    dimension and must exceed 3; V_proposal defaults to 0.0025 * I."""

    burn_in: int = 100
    main_iters: int = 1000
    aux_iters: int = 1000
    nchains: int | None = None
    gamma: float = 0.5
    v_proposal: np.ndarray | float | None = None
    n_imp: int = 0
    missing_update: int | None = None
    threads: int = 1

    def resolve_nchains(self, d: int) -> int:
        nch = self.nchains if self.nchains is not None else 2 * d
        if nch <= 3:
            raise ValueError("number of chains must be greater than 3")
        return nch

    def resolve_v(self, n_free: int) -> np.ndarray:
        v = self.v_proposal
        if v is None:
            return 0.0025 * np.eye(n_free)
        if np.isscalar(v):
            return float(v) * np.eye(n_free)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (n_free, n_free):
            raise ValueError(f"V_proposal must be {n_free}x{n_free}")
        return v


@dataclass
class PosteriorSample:
    """Pooled multi-chain draws over the free coordinates, chain-major."""

    draws: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    acceptance_rate: float
    coord_names: list[str]
    imputed_networks: list[Graph] | None = None

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def d(self) -> int:
        return self.draws.shape[1]


def ads_propose(thetas: np.ndarray, h: int, gamma: float,
                v_proposal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Parallel ADS move for chain h: current state plus gamma times the
    difference of two other distinct chains, plus Gaussian noise."""
    if thetas.shape[0] <= 3:
        raise ValueError("parallel ADS needs more than 3 chains")
    v_proposal = np.asarray(v_proposal, dtype=np.float64)
    if not v_proposal.any():
        chol = np.zeros_like(v_proposal)
    else:
        chol = np.linalg.cholesky(v_proposal)
    return _ads_propose_chol(thetas, h, gamma, chol, rng)


def _ads_propose_chol(thetas, h, gamma, chol_v, rng) -> np.ndarray:
    nch = thetas.shape[0]
    h1 = int(rng.integers(nch - 1))
    if h1 >= h:
        h1 += 1
    h2 = int(rng.integers(nch - 2))
    for blocked in sorted((h, h1)):
        if h2 >= blocked:
            h2 += 1
    eps = chol_v @ rng.standard_normal(thetas.shape[1])
    return thetas[h] + gamma * (thetas[h1] - thetas[h2]) + eps


def _aux_stats(cm: CompiledModel, spec: ModelSpec, start_adj: np.ndarray,
               s_start: np.ndarray, theta_full: np.ndarray, steps: int,
               di: np.ndarray, dj: np.ndarray, seed: int) -> np.ndarray:
    """Statistics of one auxiliary network drawn from f(.|theta)."""
    adj = start_adj.copy()
    stats = s_start.copy()
    run_toggles(cm, adj, theta_full, stats, steps, di, dj, seed)
    return stats


def _prepare(spec: ModelSpec, g: Graph, prior: GaussianPrior,
             settings: ExchangeSettings):
    if not spec.validated:
        raise SpecError("spec must be validated against the graph")
    if spec.d < 2:
        raise SpecError("estimation needs model dimension >= 2")
    if prior.d != spec.d:
        raise SpecError(f"prior has dimension {prior.d}, model has {spec.d}")
    cm = compile_model(spec, g)
    free = spec.free_index
    prior_free = prior.restrict(free)
    logp = prior_free.log_density()
    return cm, free, prior_free, logp


def _run_exchange(spec, g, prior, settings, seed, missing: bool):
    cm, free, prior_free, logp = _prepare(spec, g, prior, settings)
    nch = settings.resolve_nchains(spec.d)
    n_free = len(free)
    chol_v = np.linalg.cholesky(settings.resolve_v(n_free))
    rng = np.random.default_rng(seed)

    work = g.copy()
    if missing:
        mi, mj = work.masked_dyad_arrays()
        if mi.shape[0] == 0:
            raise ValueError("no masked dyads; use exchange_fit for fully observed networks")
        # naive imputation: i.i.d. Bernoulli at the observed density
        p0 = density(work)
        fill = (rng.random(mi.shape[0]) < p0).astype(np.uint8)
        work.adj[mi, mj] = fill
        if not work.directed:
            work.adj[mj, mi] = fill
        n_update = settings.missing_update if settings.missing_update is not None else mi.shape[0]
    di, dj = work.dyad_arrays()
    s_ref = suff_stats(work, spec, compiled=cm)

    thetas = np.tile(prior_free.mean, (nch, 1))
    thetas += 0.05 * rng.standard_normal(thetas.shape)

    total = settings.burn_in + settings.main_iters
    draws = np.empty((nch, settings.main_iters, n_free))
    accepted = 0
    logp_cur = np.array([logp(thetas[h]) for h in range(nch)])

    imp_iters: set[int] = set()
    if missing and settings.n_imp > 0:
        if settings.n_imp == 1:
            imp_iters = {settings.main_iters - 1}
        else:
            imp_iters = set(np.round(np.linspace(0, settings.main_iters - 1,
                                                 settings.n_imp)).astype(int))
    imputed: list[Graph] = []

    pool = (concurrent.futures.ThreadPoolExecutor(settings.threads)
            if settings.threads > 1 else None)
    try:
        for it in range(total):
            snapshot = thetas.copy()
            proposals = np.empty_like(snapshot)
            for h in range(nch):
                proposals[h] = _ads_propose_chol(snapshot, h, settings.gamma,
                                                 chol_v, rng)
            seeds = [int(rng.integers(0, 2**32 - 1)) for _ in range(nch)]
            fulls = [spec.full_theta(proposals[h]) for h in range(nch)]
            start_adj = work.adj  # auxiliary chains start at y (or current y*)

            def one(h):
                return _aux_stats(cm, spec, start_adj, s_ref, fulls[h],
                                  settings.aux_iters, di, dj, seeds[h])

            if pool is not None:
                aux = list(pool.map(one, range(nch)))
            else:
                aux = [one(h) for h in range(nch)]

            last_accepted_full = None
            for h in range(nch):
                logp_prop = logp(proposals[h])
                diff = (thetas[h] - proposals[h]) @ (aux[h][free] - s_ref[free])
                log_alpha = min(0.0, diff + logp_prop - logp_cur[h])
                if np.log(rng.random()) < log_alpha:
                    thetas[h] = proposals[h]
                    logp_cur[h] = logp_prop
                    last_accepted_full = fulls[h]
                    if it >= settings.burn_in:
                        accepted += 1
            if missing and last_accepted_full is not None:
                run_toggles(cm, work.adj, last_accepted_full, s_ref, n_update,
                            mi, mj, int(rng.integers(0, 2**32 - 1)))
            if it >= settings.burn_in:
                k = it - settings.burn_in
                draws[:, k, :] = thetas
                if missing and k in imp_iters:
                    imputed.append(work.copy())
    finally:
        if pool is not None:
            pool.shutdown()

    chain_col = np.repeat(np.arange(nch), settings.main_iters)
    iter_col = np.tile(np.arange(settings.main_iters), nch)
    names = [spec.coord_names[k] for k in free]
    return PosteriorSample(
        draws=draws.reshape(nch * settings.main_iters, n_free),
        chain=chain_col, iteration=iter_col,
        acceptance_rate=accepted / (nch * settings.main_iters),
        coord_names=names,
        imputed_networks=imputed if missing and settings.n_imp > 0 else None)


def exchange_fit(spec: ModelSpec, g: Graph, prior: GaussianPrior,
                 settings: ExchangeSettings, seed: int | None = None) -> PosteriorSample:
    """Posterior sampling for a fully observed network.

    Acceptance uses log alpha = min(0, (theta - theta') . (s(y') - s(y))
    + log p(theta')/p(theta)); the reported rate counts post-burn-in swaps.
    """
    if g.n_missing() > 0:
        raise ValueError("network has masked dyads; use exchange_fit_missing")
    return _run_exchange(spec, g, prior, settings, seed, missing=False)


def exchange_fit_missing(spec: ModelSpec, g: Graph, prior: GaussianPrior,
                         settings: ExchangeSettings, seed: int | None = None) -> PosteriorSample:
    """Missing-data variant: the acceptance ratio compares s(y') with
    s(y*) of the current augmented network, and accepted iterations refresh
    the unobserved dyads from their full conditional."""
    return _run_exchange(spec, g, prior, settings, seed, missing=True)


# -- posterior summaries -------------------------------------------------

_QUANTS = (2.5, 25.0, 50.0, 75.0, 97.5)


@dataclass
class PosteriorSummary:
    coord_names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    naive_se: np.ndarray
    ts_se: np.ndarray
    quantiles: np.ndarray  # (5, d), rows in _QUANTS order
    acceptance_rate: float
    n_draws: int
    quantile_levels: tuple = _QUANTS

    def rows(self) -> list[dict]:
        out = []
        for k, name in enumerate(self.coord_names):
            row = {"coord": name, "mean": self.mean[k], "sd": self.sd[k],
                   "naive_se": self.naive_se[k], "ts_se": self.ts_se[k]}
            for q, lvl in zip(self.quantiles[:, k], self.quantile_levels):
                row[f"q{lvl:g}"] = q
            out.append(row)
        return out

    def __str__(self) -> str:
        hdr = f"{'':<24}{'Mean':>12}{'SD':>12}{'Naive SE':>12}{'TS SE':>12}" \
              f"{'2.5%':>10}{'50%':>10}{'97.5%':>10}"
        lines = [hdr]
        for k, name in enumerate(self.coord_names):
            lines.append(f"{name:<24}{self.mean[k]:>12.4f}{self.sd[k]:>12.4f}"
                         f"{self.naive_se[k]:>12.6f}{self.ts_se[k]:>12.6f}"
                         f"{self.quantiles[0, k]:>10.4f}{self.quantiles[2, k]:>10.4f}"
                         f"{self.quantiles[4, k]:>10.4f}")
        lines.append(f"Acceptance rate: {self.acceptance_rate:.3g}")
        return "\n".join(lines)


def _batch_means_se(series_per_chain: list[np.ndarray]) -> float:
    """Time-series SE of the pooled mean by batch means, sqrt(N)-sized
    batches within each chain."""
    bmeans = []
    total = 0
    for x in series_per_chain:
        t = x.shape[0]
        total += t
        b = max(1, int(np.sqrt(t)))
        nb = t // b
        if nb >= 1:
            bmeans.append(x[:nb * b].reshape(nb, b).mean(axis=1))
    bm = np.concatenate(bmeans)
    if bm.shape[0] < 2:
        return float("nan")
    b = max(1, int(np.sqrt(series_per_chain[0].shape[0])))
    return float(np.sqrt(b * np.var(bm, ddof=1) / total))


def summarize(sample: PosteriorSample) -> PosteriorSummary:
    """Per-coordinate posterior mean, SD, naive and time-series standard
    errors, and {2.5, 25, 50, 75, 97.5}% quantiles."""
    if sample.n_draws == 0:
        raise ValueError("empty posterior sample")
    X = sample.draws
    n, d = X.shape
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    naive = sd / np.sqrt(n)
    chains = np.unique(sample.chain)
    ts = np.empty(d)
    for k in range(d):
        per_chain = [X[sample.chain == c, k] for c in chains]
        ts[k] = _batch_means_se(per_chain) if n > 1 else 0.0
    quants = np.percentile(X, _QUANTS, axis=0)
    return PosteriorSummary(coord_names=list(sample.coord_names), mean=mean,
                            sd=sd, naive_se=naive, ts_se=ts, quantiles=quants,
                            acceptance_rate=sample.acceptance_rate, n_draws=n)
