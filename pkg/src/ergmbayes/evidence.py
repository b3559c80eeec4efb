"""Log-evidence estimation on the adjusted pseudo-posterior, and model
comparison via Bayes factors and posterior model probabilities.

Two estimators share the same target log_apl(theta) + log p(theta):

* Chib-Jeliazkov: one random-walk Metropolis chain; the posterior ordinate
  at the retained-sample mean is estimated from the ratio of average
  move-to-theta* terms over the chain to average acceptance of proposals
  launched from theta*.
* Power posterior: tempered targets along t_i = (i/m)^5 with serial warm
  starts; variance-corrected trapezoid integration of E_t[log_apl].
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .adjust import AdjustedPseudoLikelihood, log_apl
from .exchange import GaussianPrior, PosteriorSample
from .model import SpecError


@dataclass
class EvidenceSettings:
    """v_proposal scales a curvature-based proposal covariance heuristic:
    prop_cov = v_proposal * inv(-H_L + prior precision)."""

    v_proposal: float = 1.5
    burn_in: int = 5000
    main_iters: int = 30000
    num_samples: int = 25000
    rungs: int = 20
    rung_iters: int = 2000
    ladder_exponent: float = 5.0
    seed: int | None = None

    def __post_init__(self):
        if self.num_samples > self.main_iters:
            raise ValueError("num_samples cannot exceed main_iters")
        if self.rungs < 1:
            raise ValueError("rungs must be >= 1")


@dataclass
class EvidenceEstimate:
    log_evidence: float
    method: str
    posterior_sample: PosteriorSample | None
    settings: dict
    wall_time: float
    details: dict = field(default_factory=dict)


def _free_prior(apl: AdjustedPseudoLikelihood, prior: GaussianPrior) -> GaussianPrior:
    spec = apl.spec
    if prior.d != spec.d:
        raise SpecError(f"prior has dimension {prior.d}, model has {spec.d}")
    return prior.restrict(spec.free_index)


def _proposal_cov(apl: AdjustedPseudoLikelihood, prior_free: GaussianPrior,
                  scale: float) -> np.ndarray:
    h_post = -apl.hessian_loglik() + np.linalg.inv(prior_free.sigma)
    return scale * np.linalg.inv(h_post)


def _rw_chain(logpost, theta0, chol_prop, iters, rng):
    """Random-walk Metropolis; returns draws, their log-posteriors and the
    acceptance count."""
    d = theta0.shape[0]
    draws = np.empty((iters, d))
    lps = np.empty(iters)
    cur = theta0.copy()
    lp_cur = logpost(cur)
    acc = 0
    for t in range(iters):
        prop = cur + chol_prop @ rng.standard_normal(d)
        lp_prop = logpost(prop)
        if np.log(rng.random()) < lp_prop - lp_cur:
            cur, lp_cur = prop, lp_prop
            acc += 1
        draws[t] = cur
        lps[t] = lp_cur
    return draws, lps, acc


def _logsumexp(v: np.ndarray) -> float:
    m = np.max(v)
    if np.isneginf(m):
        return float("-inf")
    return float(m + np.log(np.exp(v - m).sum()))


def evidence_cj(apl: AdjustedPseudoLikelihood, prior: GaussianPrior,
                settings: EvidenceSettings | None = None) -> EvidenceEstimate:
    """Chib-Jeliazkov log evidence of the adjusted posterior."""
    settings = settings if settings is not None else EvidenceSettings()
    t_start = time.perf_counter()
    prior_free = _free_prior(apl, prior)
    logprior = prior_free.log_density()
    rng = np.random.default_rng(settings.seed)

    def logpost(th):
        return log_apl(apl, th) + logprior(th)

    cov = _proposal_cov(apl, prior_free, settings.v_proposal)
    chol = np.linalg.cholesky(cov)
    cho = cho_factor(cov, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(cho[0])))
    d = apl.n_free

    draws, lps, acc = _rw_chain(logpost, apl.theta_mle, chol,
                                settings.burn_in + settings.main_iters, rng)
    draws = draws[settings.burn_in:][-settings.num_samples:]
    lps = lps[settings.burn_in:][-settings.num_samples:]

    theta_star = draws.mean(axis=0)
    lp_star = logpost(theta_star)

    # numerator: E_posterior[ alpha(theta -> theta*) q(theta* | theta) ]
    diffs = draws - theta_star
    maha = np.einsum("nd,nd->n", diffs, cho_solve(cho, diffs.T).T)
    log_q = -0.5 * (d * np.log(2 * np.pi) + log_det + maha)
    log_alpha_to = np.minimum(0.0, lp_star - lps)
    log_num = _logsumexp(log_alpha_to + log_q) - np.log(draws.shape[0])

    # denominator: E_{q(.|theta*)}[ alpha(theta* -> theta_j) ]
    J = draws.shape[0]
    props = theta_star + rng.standard_normal((J, d)) @ chol.T
    lp_props = np.array([logpost(p) for p in props])
    log_alpha_from = np.minimum(0.0, lp_props - lp_star)
    log_den = _logsumexp(log_alpha_from) - np.log(J)
    if np.isneginf(log_den):
        raise RuntimeError("no proposals from theta* were acceptable; "
                           "retune v_proposal")

    log_ordinate = log_num - log_den
    log_ev = lp_star - log_ordinate

    sample = PosteriorSample(
        draws=draws, chain=np.zeros(draws.shape[0], dtype=np.int64),
        iteration=np.arange(draws.shape[0]),
        acceptance_rate=acc / (settings.burn_in + settings.main_iters),
        coord_names=[apl.spec.coord_names[k] for k in apl.spec.free_index])
    return EvidenceEstimate(
        log_evidence=float(log_ev), method="CJ", posterior_sample=sample,
        settings={"v_proposal": settings.v_proposal, "burn_in": settings.burn_in,
                  "main_iters": settings.main_iters,
                  "num_samples": settings.num_samples, "seed": settings.seed},
        wall_time=time.perf_counter() - t_start,
        details={"log_ordinate": float(log_ordinate),
                 "theta_star": theta_star.tolist(),
                 "acceptance_rate": acc / (settings.burn_in + settings.main_iters)})


def evidence_pp(apl: AdjustedPseudoLikelihood, prior: GaussianPrior,
                settings: EvidenceSettings | None = None) -> EvidenceEstimate:
    """Power-posterior log evidence of the adjusted posterior."""
    settings = settings if settings is not None else EvidenceSettings()
    t_start = time.perf_counter()
    prior_free = _free_prior(apl, prior)
    logprior = prior_free.log_density()
    rng = np.random.default_rng(settings.seed)

    m = settings.rungs
    ts = (np.arange(m + 1) / m) ** settings.ladder_exponent
    cov = _proposal_cov(apl, prior_free, settings.v_proposal)
    chol = np.linalg.cholesky(cov)

    e_mean = np.empty(m + 1)
    e_var = np.empty(m + 1)
    # t = 0 is the prior itself: sample it exactly
    prior_draws = prior_free.sample(rng, settings.rung_iters)
    vals0 = np.array([log_apl(apl, th) for th in prior_draws])
    e_mean[0], e_var[0] = vals0.mean(), vals0.var(ddof=1)

    state = prior_draws[-1]
    burn = max(1, settings.rung_iters // 5)
    for r in range(1, m + 1):
        t = ts[r]

        def logpost(th, _t=t):
            return _t * log_apl(apl, th) + logprior(th)

        draws, _, acc = _rw_chain(logpost, state, chol,
                                  burn + settings.rung_iters, rng)
        if acc == 0:
            raise RuntimeError(f"degenerate rung t={t:.4g}: no accepted moves; "
                               "retune v_proposal")
        draws = draws[burn:]
        state = draws[-1]
        vals = np.array([log_apl(apl, th) for th in draws])
        e_mean[r], e_var[r] = vals.mean(), vals.var(ddof=1)

    dt = np.diff(ts)
    log_ev = float(np.sum(dt * (e_mean[1:] + e_mean[:-1]) / 2.0)
                   - np.sum(dt ** 2 * (e_var[1:] - e_var[:-1]) / 12.0))
    return EvidenceEstimate(
        log_evidence=log_ev, method="PP", posterior_sample=None,
        settings={"v_proposal": settings.v_proposal, "rungs": settings.rungs,
                  "rung_iters": settings.rung_iters,
                  "ladder_exponent": settings.ladder_exponent,
                  "seed": settings.seed},
        wall_time=time.perf_counter() - t_start,
        details={"temperatures": ts.tolist(), "e_mean": e_mean.tolist(),
                 "e_var": e_var.tolist()})


# -- model comparison -----------------------------------------------------

@dataclass
class ModelComparison:
    log_evidence: np.ndarray
    log_bayes_factors: np.ndarray   # [m, m'] = logZ_m - logZ_m'
    bayes_factors: np.ndarray
    posterior_model_probs: np.ndarray


def compare(log_evidence, prior_model_probs=None) -> ModelComparison:
    """Pairwise Bayes factors and posterior model probabilities, computed in
    log space so huge evidence gaps survive."""
    logz = np.asarray(log_evidence, dtype=np.float64).reshape(-1)
    m = logz.shape[0]
    if prior_model_probs is None:
        probs = np.full(m, 1.0 / m)
    else:
        probs = np.asarray(prior_model_probs, dtype=np.float64).reshape(-1)
        if probs.shape[0] != m:
            raise ValueError("one prior probability per model is required")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("prior model probabilities must be positive and sum to 1")
    log_bf = logz[:, None] - logz[None, :]
    log_w = logz + np.log(probs)
    log_w -= np.max(log_w)
    w = np.exp(log_w)
    return ModelComparison(log_evidence=logz, log_bayes_factors=log_bf,
                           bayes_factors=np.exp(log_bf),
                           posterior_model_probs=w / w.sum())
