"""Batch command line: run a full analysis and emit a report plus CSVs.

    mixsens analyze --model ishigami --measures measures.yaml --prior \
        --out results/

loads the candidate measures, runs the requested sections (per-measure
variance decompositions, mixture split, robust ranking, dimension
distributions, trend checks, core detection), and writes one canonical JSON
report plus CSV plot data into the output directory.  Exit codes: 0 success,
2 configuration problem, 3 unreadable/malformed data, 4 numeric failure
(e.g. zero-variance model).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .anova import ZeroVarianceError, subset_label
from .diagnostics import (dimension_bounds, dimension_distribution,
                          mixture_dimension_distribution, monotonicity_check,
                          robust_ranking)
from .estimators import (EstimationError, SampleFormatError,
                         brute_force_first_order, generate_sample,
                         given_data_indices, pick_freeze_indices, read_sample,
                         reweight, write_sample)
from .measures import ConfigError, SupportError, load_measure_set
from .mixture import (component_engines, mixture_annihilation_defect,
                      mixture_effect_curve, mixture_variance_decomposition)
from .models import core_partition, core_signature, resolve_model
from .report import (mc_qty, qty, quad_qty, write_effect_curve_csv,
                     write_indices_csv, write_mixture_curve_csv, write_report)

ALL_SECTIONS = ("measures", "mixture", "robust", "dimension", "trend", "cores")
ESTIMATORS = ("quad", "bruteforce", "pickfreeze", "givendata", "reweight")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mixsens",
        description="Variance-based sensitivity analysis under a set of "
                    "candidate input distributions.")
    sub = parser.add_subparsers(dest="command", required=True)
    an = sub.add_parser(
        "analyze",
        help="run an analysis and write report.json plus CSV plot data")
    an.add_argument("--model", required=True,
                    help="built-in model name (e.g. 'ishigami', "
                         "'ishigami:a=7,b=0.1'), a model config file, or an "
                         "evaluated-sample CSV (given-data/reweight only)")
    an.add_argument("--measures", required=True,
                    help="measure-set config file (YAML/JSON)")
    an.add_argument("--prior", action="store_true",
                    help="run the with-prior (mixture) path; the measures "
                         "file must carry a prior")
    an.add_argument("--estimator", choices=ESTIMATORS, default="quad",
                    help="index estimator for the per-measure section "
                         "(default: quad = tensor quadrature)")
    an.add_argument("--n", type=int, default=8192,
                    help="MC budget: sample size for givendata/reweight, "
                         "design rows for pickfreeze, ~sqrt budget per loop "
                         "for bruteforce (default 8192)")
    an.add_argument("--seed", type=int, default=0,
                    help="seed for every stochastic step (default 0)")
    an.add_argument("--out", default="out", help="output directory")
    an.add_argument("--sections", nargs="+", choices=ALL_SECTIONS,
                    metavar="SECTION",
                    help=f"sections to compute (subset of "
                         f"{', '.join(ALL_SECTIONS)}); default: all that "
                         "apply to the model/estimator")
    an.add_argument("--workers", type=int, default=1,
                    help="thread pool size for per-measure work (default 1; "
                         "results are identical for any value)")
    an.set_defaults(func=cmd_analyze)
    return parser


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _parallel_map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# section builders
# ---------------------------------------------------------------------------

def _quad_measures_section(vds):
    out = {}
    for vd in vds:
        entry = {
            "mean": quad_qty(vd.mean, vd.mode),
            "variance": quad_qty(vd.total, vd.mode),
            "residual": quad_qty(vd.residual, vd.mode),
            "terms": {subset_label(z): quad_qty(v, vd.mode)
                      for z, v in vd.terms.items()},
            "sobol": {subset_label(z): quad_qty(v, vd.mode)
                      for z, v in vd.sobol_indices().items()},
        }
        s, st = vd.first_order(), vd.total_order()
        entry["first_order"] = {f"x{i + 1}": quad_qty(s[i], vd.mode)
                                for i in range(vd.n)}
        entry["total_order"] = {f"x{i + 1}": quad_qty(st[i], vd.mode)
                                for i in range(vd.n)}
        out[vd.measure] = entry
    return out


def _estimate_entry(est, n_inputs):
    reweighted = est.method == "reweighted"
    entry = {"method": est.method, "n_evals": est.n_evals}
    cs = est.clamped_s
    entry["first_order"] = {}
    for i in range(n_inputs):
        se = None if est.s_se is None else est.s_se[i]
        cell = mc_qty(cs[i], se=se, reweighted=reweighted)
        cell["raw"] = float(est.s[i])
        if se is not None:
            cell["se"] = float(se)
        entry["first_order"][f"x{i + 1}"] = cell
    if est.st is not None:
        cst = est.clamped_st
        entry["total_order"] = {}
        for i in range(n_inputs):
            se = None if est.st_se is None else est.st_se[i]
            cell = mc_qty(cst[i], se=se, reweighted=reweighted)
            cell["raw"] = float(est.st[i])
            if se is not None:
                cell["se"] = float(se)
            entry["total_order"][f"x{i + 1}"] = cell
    return entry


def _indices_rows_from_vds(vds):
    rows = []
    for vd in vds:
        s, st = vd.first_order(), vd.total_order()
        mode = "MC" if vd.mode == "qmc" else "quadrature"
        for i in range(vd.n):
            rows.append((vd.measure, i + 1, "first", s[i], None, mode))
            rows.append((vd.measure, i + 1, "total", st[i], None, mode))
    return rows


def _indices_rows_from_estimates(names, estimates):
    rows = []
    for name, est in zip(names, estimates):
        mode = "reweighted" if est.method == "reweighted" else "MC"
        cs, cst = est.clamped_s, est.clamped_st
        for i in range(cs.size):
            se = None if est.s_se is None else est.s_se[i]
            rows.append((name, i + 1, "first", cs[i], se, mode))
        if cst is not None:
            for i in range(cst.size):
                se = None if est.st_se is None else est.st_se[i]
                rows.append((name, i + 1, "total", cst[i], se, mode))
    return rows


def _dimension_section(vds):
    per = {}
    for vd in vds:
        dd = dimension_distribution(vd)
        per[vd.measure] = {
            "d_s": quad_qty(dd.d_s, vd.mode),
            "d_t": quad_qty(dd.d_t, vd.mode),
            "mass": {subset_label(z): quad_qty(m, vd.mode)
                     for z, m in dd.masses.items()},
        }
    lo_s, hi_s, lo_t, hi_t = dimension_bounds(vds)
    mode = "qmc" if any(vd.mode == "qmc" for vd in vds) else "quadrature"
    return {
        "per_measure": per,
        "bounds": {"d_s": [quad_qty(lo_s, mode), quad_qty(hi_s, mode)],
                   "d_t": [quad_qty(lo_t, mode), quad_qty(hi_t, mode)]},
    }


def _mixture_section(engines, mset, vds, outdir, emit_files):
    prior = np.asarray(mset.prior)
    md = mixture_variance_decomposition(engines, prior)
    dd = mixture_dimension_distribution(prior, vds)
    mode = md.mode
    section = {
        "prior": [float(p) for p in prior],
        "mean": quad_qty(md.mixture_mean, mode),
        "component_means": {nm: quad_qty(m, mode)
                            for nm, m in zip(md.names, md.component_means)},
        "terms": {subset_label(z): quad_qty(v, mode)
                  for z, v in md.terms.items()},
        "residual": quad_qty(md.residual, mode),
        "structural": quad_qty(md.structural, mode),
        "between": quad_qty(md.between, mode),
        "total": quad_qty(md.total, mode),
        "structural_share": quad_qty(md.structural_share, mode),
        "defects": {},
        "dimension": {
            "d_s": quad_qty(dd.d_s, mode),
            "d_t": quad_qty(dd.d_t, mode),
            "mass": {subset_label(z): quad_qty(m, mode)
                     for z, m in dd.masses.items()},
        },
    }
    for i in range(1, mset.n + 1):
        defect = mixture_annihilation_defect(engines, prior, (i,))
        section["defects"][f"x{i}"] = quad_qty(defect, mode)
    files = []
    if emit_files:
        for i in range(1, mset.n + 1):
            curve = mixture_effect_curve(engines, prior, i)
            path = os.path.join(outdir, f"effect_mixture_x{i}.csv")
            files.append(write_mixture_curve_csv(curve, path))
    return section, files


def _robust_section(names, s_matrix, ses, dims):
    rr = robust_ranking(s_matrix, ses=ses, dims=dims)
    mode = "quadrature" if ses is None else "MC"
    tol = 1e-9 if ses is None else 0.05
    section = {
        "s_lo": {f"x{i + 1}": qty(rr.s_lo[i], mode, tol)
                 for i in range(rr.s_lo.size)},
        "s_hi": {f"x{i + 1}": qty(rr.s_hi[i], mode, tol)
                 for i in range(rr.s_hi.size)},
        "dominates": [[bool(v) for v in row] for row in rr.dominates],
        "blocks": [list(b) for b in rr.blocks],
        "most_important": rr.most_important,
        "least_important": rr.least_important,
        "estimated_mode": rr.estimated,
        "measures_considered": list(names),
    }
    if rr.d_s_bounds is not None:
        section["d_s_bounds"] = [qty(v, mode, tol) for v in rr.d_s_bounds]
        section["d_t_bounds"] = [qty(v, mode, tol) for v in rr.d_t_bounds]
    return section


def _trend_section(engines, mset, outdir, emit_files, prior_given):
    section = {"per_measure": {}}
    files = []
    curves = {}
    for eng in engines:
        per = {}
        for i in range(1, mset.n + 1):
            curve = eng.effect_curve((i,))
            curves[(eng.measure.name, i)] = curve
            verdict = monotonicity_check(curve)
            per[f"x{i}"] = {
                "verdict": verdict.verdict,
                "nondecreasing": verdict.nondecreasing,
                "nonincreasing": verdict.nonincreasing,
                "max_violation": qty(verdict.max_violation, "quadrature",
                                     verdict.tol),
            }
            if emit_files:
                path = os.path.join(
                    outdir, f"effect_{eng.measure.name}_{subset_label((i,))}.csv")
                files.append(write_effect_curve_csv(curve, path))
        section["per_measure"][eng.measure.name] = per
    if prior_given:
        prior = np.asarray(mset.prior)
        mix = {}
        for i in range(1, mset.n + 1):
            mcurve = mixture_effect_curve(engines, prior, i)
            verdict = monotonicity_check(mcurve.mixture_values)
            mix[f"x{i}"] = {
                "verdict": verdict.verdict,
                "nondecreasing": verdict.nondecreasing,
                "nonincreasing": verdict.nonincreasing,
                "max_violation": qty(verdict.max_violation, "quadrature",
                                     verdict.tol),
            }
        section["mixture"] = mix
    return section, files


def _cores_section(model, mset):
    groups = core_partition(model, mset)
    names = mset.names
    return {
        "groups": [[names[k] for k in grp] for grp in groups],
        "signatures": {names[k]: [quad_qty(v) for v in
                                  core_signature(model, mset.measures[k])]
                       for k in range(len(mset))},
    }


# ---------------------------------------------------------------------------
# the analyze command
# ---------------------------------------------------------------------------

def _resolve_source(arg):
    """Classify --model: ('model', callable) or ('sample', path)."""
    if arg == "ishigami" or arg.startswith("ishigami:"):
        return "model", resolve_model(arg)
    if arg.endswith(".csv"):
        return "sample", arg
    return "model", resolve_model(arg)


def _default_sections(kind, estimator, prior_given):
    if kind == "sample":
        sections = {"measures", "robust"}
    else:
        sections = {"measures", "robust", "trend", "cores"}
        if estimator == "quad":
            sections.add("dimension")
    if prior_given:
        sections.add("mixture")
    return sections


def _measure_estimates(model, mset, estimator, n, seed, outdir):
    """Per-measure MC estimates (and any sample files written)."""
    files = []
    if estimator == "bruteforce":
        loop = max(2, int(np.sqrt(n)))
        ests = _parallel_map(
            lambda m: brute_force_first_order(model, m, loop, loop, seed),
            list(mset.measures), 1)
        return list(mset.names), ests, files
    if estimator == "pickfreeze":
        ests = [pick_freeze_indices(model, m, n, seed) for m in mset.measures]
        return list(mset.names), ests, files
    if estimator == "givendata":
        names, ests = [], []
        for m, nm in zip(mset.measures, mset.names):
            sample = generate_sample(model, m, n, seed)
            files.append(write_sample(sample, os.path.join(outdir, f"sample_{nm}.csv")))
            ests.append(given_data_indices(sample))
            names.append(nm)
        return names, ests, files
    # reweight: one base sample under the first measure, density-ratio
    # weights for every other candidate
    base = mset.measures[0]
    sample = generate_sample(model, base, n, seed)
    files.append(write_sample(sample, os.path.join(outdir, f"sample_{mset.names[0]}.csv")))
    names, ests = [], []
    for m, nm in zip(mset.measures, mset.names):
        if m is base:
            ests.append(given_data_indices(sample))
        else:
            ests.append(given_data_indices(reweight(sample, m)))
        names.append(nm)
    return names, ests, files


def _sample_mode_estimates(path, mset, estimator):
    sample = read_sample(path)
    if sample.n != mset.n:
        raise SampleFormatError(f"{path}: sample has {sample.n} inputs, "
                                f"measures file declares {mset.n}")
    if estimator == "givendata":
        name = sample.measure_name or "sample"
        return [name], [given_data_indices(sample)], sample
    if estimator != "reweight":
        raise ConfigError(f"estimator {estimator!r} needs an executable "
                          "model, not a sample file")
    if not sample.measure_name:
        raise SampleFormatError(f"{path}: reweighting needs the sidecar's "
                                "measure tag to identify the base measure")
    try:
        base = mset.by_name(sample.measure_name)
    except KeyError:
        raise SampleFormatError(
            f"{path}: base measure {sample.measure_name!r} is not in the "
            "measures file") from None
    sample.measure = base
    names, ests = [], []
    for m, nm in zip(mset.measures, mset.names):
        if nm == sample.measure_name:
            ests.append(given_data_indices(sample))
        else:
            ests.append(given_data_indices(reweight(sample, m)))
        names.append(nm)
    return names, ests, sample


def cmd_analyze(args):
    kind, source = _resolve_source(args.model)
    mset = load_measure_set(args.measures)
    prior_given = args.prior
    explicit = args.sections is not None
    sections = set(args.sections) if explicit else \
        _default_sections(kind, args.estimator, prior_given)
    if prior_given:
        sections.add("mixture")
    if "mixture" in sections and mset.prior is None:
        raise ConfigError("prior required: the mixture section needs a "
                          "'prior' entry in the measures file")
    os.makedirs(args.out, exist_ok=True)

    report = {
        "schema_version": "1",
        "tool": {"name": "mixsens", "version": __version__},
        "config": {
            "model": args.model,
            "measures_file": os.path.basename(args.measures),
            "measure_names": list(mset.names),
            "estimator": args.estimator,
            "n": args.n,
            "seed": args.seed,
            "prior": list(mset.prior) if mset.prior is not None else None,
            "sections": sorted(sections),
        },
    }
    files = []

    engines = None
    vds = None
    if kind == "model":
        model = source
        needs_engines = bool({"mixture", "dimension", "trend"} & sections) \
            or args.estimator == "quad"
        if needs_engines:
            engines = component_engines(mset, model, seed=args.seed)
            vds = _parallel_map(lambda e: e.variance_decomposition(),
                                engines, args.workers)

    # -- measures ------------------------------------------------------------
    est_names = est_list = None
    if "measures" in sections:
        if args.estimator == "quad":
            if kind == "sample":
                raise ConfigError("estimator 'quad' needs an executable "
                                  "model, not a sample file")
            report["measures"] = _quad_measures_section(vds)
            rows = _indices_rows_from_vds(vds)
        elif kind == "model":
            est_names, est_list, sample_files = _measure_estimates(
                model, mset, args.estimator, args.n, args.seed, args.out)
            files += sample_files
            report["measures"] = {nm: _estimate_entry(est, mset.n)
                                  for nm, est in zip(est_names, est_list)}
            rows = _indices_rows_from_estimates(est_names, est_list)
        else:
            est_names, est_list, _ = _sample_mode_estimates(
                source, mset, args.estimator)
            report["measures"] = {nm: _estimate_entry(est, mset.n)
                                  for nm, est in zip(est_names, est_list)}
            rows = _indices_rows_from_estimates(est_names, est_list)
        files.append(write_indices_csv(
            rows, os.path.join(args.out, "indices_long.csv")))

    # -- dimension -----------------------------------------------------------
    if "dimension" in sections:
        if vds is None:
            _warn("dimension section needs full quadrature decompositions; "
                  "skipped")
        else:
            report["dimension"] = _dimension_section(vds)

    # -- mixture -------------------------------------------------------------
    if "mixture" in sections:
        if engines is None:
            _warn("mixture section needs an executable model; skipped")
        else:
            section, mix_files = _mixture_section(
                engines, mset, vds, args.out, emit_files=True)
            report["mixture"] = section
            files += mix_files

    # -- robust --------------------------------------------------------------
    if "robust" in sections:
        if args.estimator == "quad" and vds is not None:
            s_matrix = np.array([vd.first_order() for vd in vds])
            dims = dimension_bounds(vds)
            report["robust"] = _robust_section(
                [vd.measure for vd in vds], s_matrix, None, dims)
        elif est_list is not None:
            s_matrix = np.array([est.clamped_s for est in est_list])
            ses = None
            if all(est.s_se is not None for est in est_list):
                ses = np.array([est.s_se for est in est_list])
            report["robust"] = _robust_section(est_names, s_matrix, ses, None)
        else:
            _warn("robust section needs per-measure indices; skipped")

    # -- trend ---------------------------------------------------------------
    if "trend" in sections:
        if engines is None:
            _warn("trend section needs an executable model; skipped")
        else:
            section, trend_files = _trend_section(
                engines, mset, args.out, emit_files=True,
                prior_given="mixture" in sections and mset.prior is not None)
            report["trend"] = section
            files += trend_files

    # -- cores ---------------------------------------------------------------
    if "cores" in sections:
        if kind != "model":
            _warn("cores section needs an executable model; skipped")
        else:
            try:
                report["cores"] = _cores_section(model, mset)
            except TypeError as exc:
                _warn(f"cores section skipped: {exc}")

    report_path = write_report(report, os.path.join(args.out, "report.json"))
    files.append(report_path)
    print(f"report: {report_path} ({len(files)} files)")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SampleFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ZeroVarianceError, EstimationError, SupportError,
            ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
