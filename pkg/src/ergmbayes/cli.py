"""Command-line front end.

Every run writes a manifest.json echoing the fully resolved configuration
(including defaults and the seed) into the output directory; re-running
`ergmbayes` with the manifest's argv reproduces the outputs byte for byte.
Errors exit nonzero with a one-line machine-parsable category on stderr:
`error:<category>: message`.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .adjust import AplSettings, build_apl
from .evidence import EvidenceSettings, compare, evidence_cj, evidence_pp
from .exchange import (ExchangeSettings, GaussianPrior, PosteriorSample,
                       exchange_fit, exchange_fit_missing, summarize)
from .gof import bgof
from .graph import (Graph, GraphError, load_graph, read_attribute_table,
                    write_edge_list)
from .model import FormulaError, ModelSpec, SpecError, build_model
from .pseudo import CollinearityError, SeparationError, log_pl, mple
from .sampler import SamplerSettings, run_toggles
from .stats import compile_model, suff_stats

_FLOAT_FMT = ".17g"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), _FLOAT_FMT)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o)}")


# -- argument plumbing ---------------------------------------------------

def _add_graph_args(p: argparse.ArgumentParser, network_required=True):
    p.add_argument("--network", required=network_required,
                   help="edge-list file (one 'i j' or 'i,j' pair per line)")
    p.add_argument("--attrs", help="node-attribute table (header row required)")
    p.add_argument("--n", type=int, help="node count (needed without --attrs)")
    p.add_argument("--directed", action="store_true",
                   help="treat the network as directed (default undirected)")
    p.add_argument("--index-base", type=int, choices=(0, 1), default=0,
                   help="base of integer node labels in files")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True, help='model formula, e.g. "edges + nodematch(\\"Office\\")"')
    p.add_argument("--offset-coef", help="comma-separated fixed coefficients for offset() terms")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1)


def _add_prior(p: argparse.ArgumentParser):
    p.add_argument("--prior-mean", help="comma-separated prior mean (default zeros)")
    p.add_argument("--prior-sigma",
                   help="'diag:v' for v*I, a comma list of diagonal entries, "
                        "or a CSV matrix file (default diag:100)")


def _parse_vector(text, d, what) -> np.ndarray:
    vals = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    if vals.shape[0] != d:
        raise SpecError(f"{what} has {vals.shape[0]} entries, model dimension is {d}")
    return vals


def _parse_prior(args, d) -> tuple[GaussianPrior, dict]:
    mean = (np.zeros(d) if args.prior_mean is None
            else _parse_vector(args.prior_mean, d, "--prior-mean"))
    spec_txt = args.prior_sigma if args.prior_sigma is not None else "diag:100"
    if spec_txt.startswith("diag:"):
        sigma = float(spec_txt.split(":", 1)[1]) * np.eye(d)
    elif "," in spec_txt and not Path(spec_txt).exists():
        sigma = np.diag(_parse_vector(spec_txt, d, "--prior-sigma"))
    else:
        sigma = np.loadtxt(spec_txt, delimiter=",")
        if sigma.shape != (d, d):
            raise SpecError(f"prior sigma file must be {d}x{d}")
    resolved = {"prior_mean": mean.tolist(), "prior_sigma": spec_txt}
    return GaussianPrior(mean, sigma), resolved


def _load_graph_from_args(args, missing_path=None) -> Graph:
    return load_graph(args.network, directed=args.directed,
                      attr_path=args.attrs, n=args.n,
                      missing_path=missing_path, index_base=args.index_base)


def _build_spec(args, g) -> ModelSpec:
    offset = None
    if args.offset_coef:
        offset = [float(v) for v in args.offset_coef.split(",")]
    return build_model(args.model, g, offset_coef=offset)


def _manifest(args, out: Path, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    if extra:
        cfg.update(extra)
    argv = [args.subcommand]
    for k, v in sorted(vars(args).items()):
        if k in ("func", "subcommand") or v in (None, False):
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            argv.append(flag)
        elif isinstance(v, (list, tuple)):
            argv.append(flag)
            argv.extend(str(x) for x in v)
        else:
            argv.extend([flag, str(v)])
    _write_json(out / "manifest.json", {"config": cfg, "argv": argv})


def _write_summary(out: Path, fmt: str, summary, acceptance=None):
    rows = summary.rows()
    header = list(rows[0].keys())
    if fmt == "csv":
        _write_csv(out / "summary.csv", header, [[r[h] for h in header] for r in rows])
    else:
        payload = {"rows": rows, "acceptance_rate": summary.acceptance_rate,
                   "n_draws": summary.n_draws}
        _write_json(out / "summary.json", payload)


def _write_draws(out: Path, sample: PosteriorSample):
    header = ["chain", "iter"] + sample.coord_names
    rows = ([int(sample.chain[r]), int(sample.iteration[r])] + list(sample.draws[r])
            for r in range(sample.n_draws))
    _write_csv(out / "draws.csv", header, rows)


# -- subcommands -----------------------------------------------------------

def _cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_graph_from_args(args)
    spec = _build_spec(args, g)
    prior, resolved = _parse_prior(args, spec.d)
    settings = ExchangeSettings(burn_in=args.burn_in, main_iters=args.main_iters,
                                aux_iters=args.aux_iters, nchains=args.nchains,
                                gamma=args.gamma, v_proposal=args.v_proposal,
                                threads=args.threads)
    sample = exchange_fit(spec, g, prior, settings, seed=args.seed)
    summary = summarize(sample)
    _manifest(args, out, {"resolved_prior": resolved, "d": spec.d,
                          "coords": spec.coord_names,
                          "nchains": settings.resolve_nchains(spec.d)})
    _write_summary(out, args.format, summary)
    _write_draws(out, sample)
    print(summary)
    return 0


def _cmd_fit_missing(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_graph_from_args(args, missing_path=args.missing_file)
    spec = _build_spec(args, g)
    prior, resolved = _parse_prior(args, spec.d)
    settings = ExchangeSettings(burn_in=args.burn_in, main_iters=args.main_iters,
                                aux_iters=args.aux_iters, nchains=args.nchains,
                                gamma=args.gamma, v_proposal=args.v_proposal,
                                n_imp=args.n_imp, missing_update=args.missing_update,
                                threads=args.threads)
    sample = exchange_fit_missing(spec, g, prior, settings, seed=args.seed)
    summary = summarize(sample)
    _manifest(args, out, {"resolved_prior": resolved, "d": spec.d,
                          "coords": spec.coord_names,
                          "n_missing_dyads": g.n_missing()})
    _write_summary(out, args.format, summary)
    _write_draws(out, sample)
    for k, gi in enumerate(sample.imputed_networks or []):
        write_edge_list(gi, out / f"imputed_{k:03d}.edges")
    print(summary)
    return 0


def _cmd_mple(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_graph_from_args(args)
    spec = _build_spec(args, g)
    fit = mple(spec, g)
    se = fit.standard_errors()
    _manifest(args, out, {"d": spec.d, "coords": spec.coord_names})
    payload = {"coords": fit.coord_names,
               "theta_mple": fit.theta_mple.tolist(),
               "standard_errors_naive": se.tolist(),
               "log_pl_at_mode": fit.log_pl_at_mode,
               "note": "SEs come from the inverse negative log-PL Hessian and "
                       "ignore dyad dependence; they are typically optimistic"}
    _write_json(out / "mple.json", payload)
    for name, th, s in zip(fit.coord_names, fit.theta_mple, se):
        print(f"{name:<24}{th:>12.4f}  (naive SE {s:.4f})")
    return 0


def _cmd_evidence(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_graph_from_args(args)
    spec = _build_spec(args, g)
    prior, resolved = _parse_prior(args, spec.d)
    apl_settings = AplSettings(aux_iters=args.aux_iters,
                               n_aux_draws=args.n_aux_draws,
                               aux_thin=args.aux_thin, ladder=args.ladder,
                               estimate=args.estimate, cd_draws=args.cd_draws,
                               curvature_draws=args.curvature_draws)
    t0 = time.perf_counter()
    apl = build_apl(spec, g, apl_settings, seed=args.seed)
    ev_settings = EvidenceSettings(v_proposal=args.v_proposal,
                                   burn_in=args.burn_in,
                                   main_iters=args.main_iters,
                                   num_samples=args.num_samples,
                                   rungs=args.rungs, rung_iters=args.rung_iters,
                                   seed=args.seed)
    est = (evidence_cj if args.method == "cj" else evidence_pp)(apl, prior, ev_settings)
    wall = time.perf_counter() - t0
    _manifest(args, out, {"resolved_prior": resolved, "d": spec.d,
                          "coords": spec.coord_names})
    _write_json(out / "evidence.json", {
        "log_evidence": est.log_evidence, "method": est.method,
        "settings": est.settings, "apl": apl.diagnostics,
        "theta_mple": apl.theta_mple.tolist(), "theta_mle": apl.theta_mle.tolist(),
        "log_C": apl.log_C, "wall_time_seconds": wall})
    if est.posterior_sample is not None:
        summary = summarize(est.posterior_sample)
        _write_summary(out, args.format, summary)
        print(summary)
    print(f"log evidence ({est.method}): {est.log_evidence:.4f}   "
          f"[{wall:.1f}s]")
    return 0


def _cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logz, labels = [], []
    for path in args.evidence_files:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        logz.append(float(payload["log_evidence"]))
        labels.append(path)
    probs = None
    if args.prior_model_probs:
        probs = [float(v) for v in args.prior_model_probs.split(",")]
    result = compare(np.array(logz), probs)
    rows = []
    for k, lab in enumerate(labels):
        rows.append([f"m{k + 1}", lab, logz[k],
                     result.posterior_model_probs[k],
                     result.log_bayes_factors[0, k],
                     result.bayes_factors[0, k]])
    header = ["model", "file", "log_evidence", "posterior_prob",
              "log_bf_m1_vs_this", "bf_m1_vs_this"]
    _manifest(args, out)
    if args.format == "csv":
        _write_csv(out / "compare.csv", header, rows)
    else:
        _write_json(out / "compare.json", {
            "models": [dict(zip(header, r)) for r in rows],
            "log_bayes_factors": result.log_bayes_factors.tolist()})
    for r in rows:
        print(f"{r[0]}: log evidence {r[2]:.2f}  posterior prob {r[3]:.3g}  "
              f"BF(m1 vs this) {r[5]:.3g}")
    return 0


def _cmd_gof(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_graph_from_args(args)
    spec = _build_spec(args, g)
    draws, names = _read_draws(args.fit)
    free_names = [spec.coord_names[k] for k in spec.free_index]
    if names != free_names:
        raise SpecError(f"draws file coordinates {names} do not match the model "
                        f"({free_names})")
    sample = PosteriorSample(draws=draws, chain=np.zeros(len(draws), dtype=np.int64),
                             iteration=np.arange(len(draws)),
                             acceptance_rate=float("nan"), coord_names=names)
    report = bgof(sample, spec, g, sample_size=args.sample_size,
                  aux_iters=args.aux_iters, n_deg=args.n_deg, n_ideg=args.n_ideg,
                  n_odeg=args.n_odeg, n_dist=args.n_dist, n_esp=args.n_esp,
                  seed=args.seed, start_empty=args.start_empty)
    rows = report.rows()
    header = list(rows[0].keys())
    _manifest(args, out)
    _write_csv(out / "gof.csv", header, [[r[h] for h in header] for r in rows])
    print(f"gof.csv written: {len(rows)} bins over {len(report.families)} families")
    return 0


def _read_draws(path) -> tuple[np.ndarray, list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    names = header[2:]
    draws = np.array([[float(v) for v in row[2:]] for row in rows])
    return draws, names


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.network:
        g = _load_graph_from_args(args)
    elif args.attrs:
        labels, columns = read_attribute_table(args.attrs)
        if args.n is not None and args.n != len(labels):
            raise GraphError(f"--n {args.n} disagrees with attribute table "
                             f"({len(labels)} nodes)")
        g = Graph.empty(len(labels), directed=args.directed)
        g.attributes.update(columns)
    elif args.n is not None:
        g = Graph.empty(args.n, directed=args.directed)
    else:
        raise GraphError("simulate needs --network, --attrs or --n")
    spec = _build_spec(args, g)
    theta_free = _parse_vector(args.theta, spec.n_free, "--theta")
    theta_full = spec.full_theta(theta_free)
    cm = compile_model(spec, g)
    rng = np.random.default_rng(args.seed)
    work = g.copy()
    di, dj = work.dyad_arrays()
    stats = suff_stats(work, spec, compiled=cm)
    trace = []
    for k in range(args.draws):
        run_toggles(cm, work.adj, theta_full, stats, args.aux_iters, di, dj,
                    int(rng.integers(0, 2**32 - 1)))
        write_edge_list(work, out / f"sim_{k:03d}.edges")
        trace.append([k] + list(stats))
    _manifest(args, out, {"d": spec.d, "coords": spec.coord_names})
    _write_csv(out / "stats_trace.csv", ["draw"] + spec.coord_names, trace)
    print(f"{args.draws} networks written to {out}")
    return 0


# -- parser / dispatch -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ergmbayes",
                                description="Bayesian inference for exponential "
                                            "random graph models")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    fit = sub.add_parser("fit", help="posterior sampling by the exchange algorithm")
    _add_graph_args(fit)
    _add_common(fit)
    _add_prior(fit)
    fit.add_argument("--burn-in", type=int, default=100)
    fit.add_argument("--main-iters", type=int, default=1000)
    fit.add_argument("--aux-iters", type=int, default=1000)
    fit.add_argument("--nchains", type=int)
    fit.add_argument("--gamma", type=float, default=0.5)
    fit.add_argument("--v-proposal", type=float)
    fit.set_defaults(func=_cmd_fit)

    fm = sub.add_parser("fit-missing", help="exchange algorithm with missing-data "
                                            "augmentation")
    _add_graph_args(fm)
    _add_common(fm)
    _add_prior(fm)
    fm.add_argument("--missing-file", required=True,
                    help="dyad pairs to treat as unobserved")
    fm.add_argument("--burn-in", type=int, default=100)
    fm.add_argument("--main-iters", type=int, default=1000)
    fm.add_argument("--aux-iters", type=int, default=1000)
    fm.add_argument("--nchains", type=int)
    fm.add_argument("--gamma", type=float, default=0.5)
    fm.add_argument("--v-proposal", type=float)
    fm.add_argument("--n-imp", type=int, default=0,
                    help="number of imputed networks to retain")
    fm.add_argument("--missing-update", type=int,
                    help="toggle proposals per imputation refresh "
                         "(default: number of masked dyads)")
    fm.set_defaults(func=_cmd_fit_missing)

    mp = sub.add_parser("mple", help="maximum pseudo-likelihood estimate")
    _add_graph_args(mp)
    _add_common(mp)
    mp.set_defaults(func=_cmd_mple)

    ev = sub.add_parser("evidence", help="log model evidence on the adjusted "
                                         "pseudo-posterior")
    _add_graph_args(ev)
    _add_common(ev)
    _add_prior(ev)
    ev.add_argument("--method", choices=("cj", "pp"), default="cj")
    ev.add_argument("--aux-iters", type=int, default=2500)
    ev.add_argument("--n-aux-draws", type=int, default=50)
    ev.add_argument("--aux-thin", type=int, default=50)
    ev.add_argument("--ladder", type=int, default=200)
    ev.add_argument("--estimate", choices=("CD", "MLE"), default="CD")
    ev.add_argument("--cd-draws", type=int, default=512)
    ev.add_argument("--curvature-draws", type=int, default=2000)
    ev.add_argument("--v-proposal", type=float, default=1.5)
    ev.add_argument("--burn-in", type=int, default=5000)
    ev.add_argument("--main-iters", type=int, default=30000)
    ev.add_argument("--num-samples", type=int, default=25000)
    ev.add_argument("--rungs", type=int, default=20)
    ev.add_argument("--rung-iters", type=int, default=2000)
    ev.set_defaults(func=_cmd_evidence)

    cp = sub.add_parser("compare", help="Bayes factors from evidence JSON files")
    cp.add_argument("--evidence-files", nargs="+", required=True)
    cp.add_argument("--prior-model-probs")
    cp.add_argument("--out", default=".")
    cp.add_argument("--format", choices=("csv", "json"), default="csv")
    cp.set_defaults(func=_cmd_compare)

    gf = sub.add_parser("gof", help="posterior-predictive goodness of fit")
    _add_graph_args(gf)
    _add_common(gf)
    gf.add_argument("--fit", required=True, help="draws.csv from a fit run")
    gf.add_argument("--sample-size", type=int, default=100)
    gf.add_argument("--aux-iters", type=int, default=5000)
    gf.add_argument("--n-deg", type=int)
    gf.add_argument("--n-ideg", type=int)
    gf.add_argument("--n-odeg", type=int)
    gf.add_argument("--n-dist", type=int)
    gf.add_argument("--n-esp", type=int)
    gf.add_argument("--start-empty", action="store_true")
    gf.set_defaults(func=_cmd_gof)

    sim = sub.add_parser("simulate", help="draw networks from the model")
    _add_graph_args(sim, network_required=False)
    _add_common(sim)
    sim.add_argument("--theta", required=True,
                     help="comma-separated free coefficients in coordinate order")
    sim.add_argument("--aux-iters", type=int, default=1000)
    sim.add_argument("--draws", type=int, default=1)
    sim.set_defaults(func=_cmd_simulate)
    return p


_ERROR_CATEGORIES = [
    (FileNotFoundError, "file-not-found"),
    (FormulaError, "formula-error"),
    (SpecError, "spec-error"),
    (GraphError, "graph-error"),
    (SeparationError, "separation"),
    (CollinearityError, "collinear-design"),
    (NotImplementedError, "unsupported"),
    (ValueError, "invalid-argument"),
]


# values of these flags may start with '-' (e.g. "-4,0.5,0.5,1"), which
# argparse would otherwise read as an option; fold them into --flag=value
_VECTOR_FLAGS = {"--prior-mean", "--prior-sigma", "--theta", "--offset-coef",
                 "--prior-model-probs"}


def _fold_vector_flags(argv: list[str]) -> list[str]:
    out = []
    k = 0
    while k < len(argv):
        tok = argv[k]
        if tok in _VECTOR_FLAGS and k + 1 < len(argv):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    args = parser.parse_args(_fold_vector_flags(argv))
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        for etype, cat in _ERROR_CATEGORIES:
            if isinstance(exc, etype):
                print(f"error:{cat}: {exc}", file=sys.stderr)
                return 2
        print(f"error:internal-error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())
