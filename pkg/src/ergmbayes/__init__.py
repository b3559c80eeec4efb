"""Bayesian inference for exponential random graph models.

The probability of a network y is modelled as exp(theta . s(y)) / z(theta)
for a vector of network statistics s. This package provides:

* posterior sampling by the approximate exchange algorithm with parallel
  adaptive direction proposals (`exchange_fit`), including a missing-data
  variant that alternates parameter updates with imputation of unobserved
  ties (`exchange_fit_missing`);
* maximum pseudo-likelihood estimation (`mple`) and the fully adjusted
  pseudo-likelihood (`build_apl`) whose mode, curvature and magnitude match
  the true likelihood;
* log-evidence estimation on the adjusted posterior by the Chib-Jeliazkov
  and power-posterior methods (`evidence_cj`, `evidence_pp`) and model
  comparison via Bayes factors (`compare`);
* posterior-predictive goodness of fit (`bgof`);
* network simulation, exact enumeration for desk-scale instances, and a
  reproducible CLI (`ergmbayes`).
"""

__version__ = "0.1.0"

from .adjust import (AdjustedPseudoLikelihood, AplSettings, build_apl,
                     curvature_matrix, estimate_mle, log_apl,
                     magnitude_constant)
from .evidence import (EvidenceEstimate, EvidenceSettings, ModelComparison,
                       compare, evidence_cj, evidence_pp)
from .exchange import (ExchangeSettings, GaussianPrior, PosteriorSample,
                       PosteriorSummary, ads_propose, exchange_fit,
                       exchange_fit_missing, summarize)
from .gof import GofReport, bgof
from .graph import (Graph, GraphError, apply_missing_mask, density,
                    from_edge_list, load_graph, toggle, write_edge_list)
from .model import (FormulaError, ModelSpec, SpecError, Term, build_model,
                    format_formula, parse_formula, validate)
from .pseudo import (CollinearityError, PseudoFit, SeparationError, log_pl,
                     mple)
from .sampler import (EnumerationTooLarge, ExactTable, SamplerSettings,
                      enumerate_exact, simulate, simulate_constrained)
from .stats import GofDistributions, change_stats, gof_stats, suff_stats

__all__ = [
    "AdjustedPseudoLikelihood", "AplSettings", "build_apl", "curvature_matrix",
    "estimate_mle", "log_apl", "magnitude_constant",
    "EvidenceEstimate", "EvidenceSettings", "ModelComparison", "compare",
    "evidence_cj", "evidence_pp",
    "ExchangeSettings", "GaussianPrior", "PosteriorSample", "PosteriorSummary",
    "ads_propose", "exchange_fit", "exchange_fit_missing", "summarize",
    "GofReport", "bgof",
    "Graph", "GraphError", "apply_missing_mask", "density", "from_edge_list",
    "load_graph", "toggle", "write_edge_list",
    "FormulaError", "ModelSpec", "SpecError", "Term", "build_model",
    "format_formula", "parse_formula", "validate",
    "CollinearityError", "PseudoFit", "SeparationError", "log_pl", "mple",
    "EnumerationTooLarge", "ExactTable", "SamplerSettings", "enumerate_exact",
    "simulate", "simulate_constrained",
    "GofDistributions", "change_stats", "gof_stats", "suff_stats",
    "__version__",
]
