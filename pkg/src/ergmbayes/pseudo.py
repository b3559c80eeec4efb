"""Log pseudo-likelihood and maximum pseudo-likelihood estimation.

The pseudo-likelihood is the product over observed dyads of the full
conditionals p(y_ij | y_-ij, theta); fitting it is logistic regression of
the dyad states on their change statistics. Offset coordinates contribute a
fixed shift to every linear predictor and are not free parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from .graph import Graph
from .model import ModelSpec
from .stats import CompiledModel, compile_model, dyad_design


class SeparationError(RuntimeError):
    """Perfectly separated logistic design: the optimum is at infinity."""


class CollinearityError(RuntimeError):
    """Rank-deficient change-statistic design."""


@dataclass
class PseudoDesign:
    """Cached change-statistic design for one (graph, spec) pair.

    The graph's adjacency is frozen into X at build time; log_pl evaluations
    are then a single matrix-vector product, which is what the evidence
    samplers hammer on.
    """

    spec: ModelSpec
    X: np.ndarray            # (n_dyads_observed, d) full-coordinate change stats
    y: np.ndarray            # observed dyad states
    X_free: np.ndarray = field(init=False)
    offset_shift: np.ndarray = field(init=False)

    def __post_init__(self):
        self.X_free = self.X[:, self.spec.free_index]
        off = self.spec.offset_index
        if len(off):
            self.offset_shift = self.X[:, off] @ self.spec.offset_values
        else:
            self.offset_shift = np.zeros(self.X.shape[0])

    @property
    def n_free(self) -> int:
        return self.X_free.shape[1]

    def eta(self, theta_free: np.ndarray) -> np.ndarray:
        return self.X_free @ theta_free + self.offset_shift

    def log_pl(self, theta_free: np.ndarray) -> float:
        eta = self.eta(theta_free)
        return float(self.y @ eta - np.logaddexp(0.0, eta).sum())

    def grad(self, theta_free: np.ndarray) -> np.ndarray:
        mu = _sigmoid(self.eta(theta_free))
        return self.X_free.T @ (self.y - mu)

    def hessian(self, theta_free: np.ndarray) -> np.ndarray:
        mu = _sigmoid(self.eta(theta_free))
        w = mu * (1.0 - mu)
        return -(self.X_free * w[:, None]).T @ self.X_free


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def build_design(spec: ModelSpec, g: Graph,
                 compiled: CompiledModel | None = None) -> PseudoDesign:
    cm = compiled if compiled is not None else compile_model(spec, g)
    X, y, _, _ = dyad_design(g, spec, compiled=cm)
    return PseudoDesign(spec=spec, X=X, y=y)


def log_pl(spec: ModelSpec, g: Graph, theta_free: np.ndarray,
           design: PseudoDesign | None = None) -> float:
    """Sum over observed dyads of y*eta - log(1 + exp(eta)) with
    eta = theta . delta_ij at the current graph state. Masked dyads are
    excluded entirely."""
    theta_free = np.asarray(theta_free, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(theta_free)):
        raise ValueError("theta must be finite")
    des = design if design is not None else build_design(spec, g)
    return des.log_pl(theta_free)


@dataclass
class PseudoFit:
    """theta_mple with the log-PL Hessian (negative definite) at the mode."""

    theta_mple: np.ndarray
    hessian: np.ndarray
    log_pl_at_mode: float
    coord_names: list[str]
    design: PseudoDesign

    def standard_errors(self) -> np.ndarray:
        """Naive SEs from the inverse negative Hessian; pseudo-likelihood
        understates dependence, so treat these as optimistic."""
        return np.sqrt(np.diag(np.linalg.inv(-self.hessian)))


_MAX_ITER = 100
_GRAD_TOL = 1e-8
_SEP_NORM = 30.0
# a vanishing gradient this far out means a boundary statistic, not a fit
_SEP_NORM_CONVERGED = 15.0


def _check_rank(X: np.ndarray, names: list[str]):
    if X.shape[1] == 0:
        raise CollinearityError("model has no free coordinates")
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        _, _, piv = qr(X, mode="economic", pivoting=True)
        bad = sorted(names[k] for k in piv[rank:])
        raise CollinearityError(
            f"change-statistic design is rank deficient; collinear coordinates: {', '.join(bad)}")


def mple(spec: ModelSpec, g: Graph, compiled: CompiledModel | None = None) -> PseudoFit:
    """Newton-Raphson with step halving on the dyad logistic log-likelihood.

    Raises SeparationError when the optimum runs away to infinity (e.g. an
    empty graph under an edges term) and CollinearityError for redundant
    coordinate sets.
    """
    des = build_design(spec, g, compiled=compiled)
    free_names = [spec.coord_names[k] for k in spec.free_index]
    _check_rank(des.X_free, free_names)

    theta = np.zeros(des.n_free)
    ll = des.log_pl(theta)
    for _ in range(_MAX_ITER):
        grad = des.grad(theta)
        if np.max(np.abs(grad)) < _GRAD_TOL:
            if np.max(np.abs(theta)) > _SEP_NORM_CONVERGED:
                raise SeparationError(_separation_message(theta, grad, free_names))
            return PseudoFit(theta_mple=theta, hessian=des.hessian(theta),
                             log_pl_at_mode=ll, coord_names=free_names, design=des)
        H = des.hessian(theta)
        try:
            step = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            raise SeparationError(_separation_message(theta, grad, free_names)) from None
        # step halving keeps iterations stable near separation
        scale = 1.0
        for _ in range(40):
            cand = theta + scale * step
            ll_new = des.log_pl(cand)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        theta = theta + scale * step
        ll = des.log_pl(theta)
        if np.max(np.abs(theta)) > _SEP_NORM:
            raise SeparationError(_separation_message(theta, des.grad(theta), free_names))
    raise SeparationError(_separation_message(theta, des.grad(theta), free_names))


def _separation_message(theta, grad, names) -> str:
    k = int(np.argmax(np.abs(theta)))
    return (f"complete or quasi-complete separation: coordinate {names[k]!r} is "
            f"unbounded (|theta| reached {np.abs(theta[k]):.1f}, gradient {grad[k]:.2e})")
