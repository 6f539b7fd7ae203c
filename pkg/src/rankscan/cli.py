"""Command-line front end: read a sequence, scan it, print a report.

The report is a plain-text block of ``key: value`` lines followed by a
CSV trace of every scanned candidate.  Nothing in it depends on the
clock or the environment, so two runs with the same input and seed
produce byte-identical output.

Exit codes: 0 success, 1 malformed input, 2 invalid configuration
(argparse usage errors included), 3 numerical degeneracy.
"""

import argparse
import csv
import sys

import numpy as np
from scipy.spatial.distance import squareform

from .analytic import TailConfig, skewness_table, tail_probability
from .errors import (
    ConfigError,
    DegenerateVariance,
    InputError,
    NonFiniteInput,
    NumericalError,
    ParseError,
    RaggedRows,
    TooFewObservations,
)
from .permutation import PermPlan, permutation_pvalue
from .rank_graph import (
    build_graph_sequence,
    compute_distances,
    default_graph_size,
    graph_induced_ranks,
    weighted_graph_matrix,
)
from .scan import (
    condition_diagnostics,
    default_interval_window,
    default_single_window,
    scan_interval,
    scan_single,
)
from .simulate import derive_seed

#: below this many observations the default p-value method is permutation
ANALYTIC_MIN_N = 300

#: default Monte-Carlo draws behind the skewness correction
GAMMA_PERMS = 10000

#: shortest segment the recursion will even look at, regardless of
#: ``--min-segment`` (the null moments need a handful of points)
HARD_MIN_SEGMENT = 8


# ---------------------------------------------------------------------------
# ingestion

def _numeric_rows(path):
    """All non-blank CSV rows of ``path`` as float lists, with locations."""
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for colno, cell in enumerate(row, start=1):
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}, column {colno}: "
                        f"not a number: {cell.strip()!r}") from None
                if not np.isfinite(val):
                    raise NonFiniteInput(
                        f"{path}: line {lineno}, column {colno}: "
                        f"non-finite value")
                vals.append(val)
            rows.append((lineno, vals))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    for lineno, vals in rows:
        if len(vals) != width:
            raise RaggedRows(f"{path}: line {lineno}: expected {width} "
                             f"columns, got {len(vals)}")
    return np.array([vals for _, vals in rows], dtype=float)


def _read_tensor_stack(path):
    """Matrix-valued observations: ``n rows cols`` header, then ``n``
    blocks of ``rows`` lines with ``cols`` numbers each (comma- or
    whitespace-separated; blank lines between blocks are fine)."""
    header = None
    entries = []
    try:
        fh = open(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            cells = raw.replace(",", " ").split()
            if not cells:
                continue
            if header is None:
                try:
                    header = tuple(int(c) for c in cells)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: header must be three "
                        f"integers 'n rows cols'") from None
                if len(header) != 3 or min(header) < 1:
                    raise ParseError(
                        f"{path}: line {lineno}: header must be three "
                        f"positive integers 'n rows cols'")
                continue
            entries.append((lineno, cells))
    if header is None:
        raise ParseError(f"{path}: no data rows")
    n, rows, cols = header
    if len(entries) != n * rows:
        raise RaggedRows(f"{path}: header promises {n * rows} matrix rows, "
                         f"found {len(entries)}")
    out = np.empty((n * rows, cols))
    for i, (lineno, cells) in enumerate(entries):
        if len(cells) != cols:
            raise RaggedRows(f"{path}: line {lineno}: expected {cols} "
                             f"columns, got {len(cells)}")
        for j, cell in enumerate(cells):
            try:
                val = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {j + 1}: "
                    f"not a number: {cell!r}") from None
            if not np.isfinite(val):
                raise NonFiniteInput(f"{path}: line {lineno}, column "
                                     f"{j + 1}: non-finite value")
            out[i, j] = val
    return out.reshape(n, rows, cols)


def ingest(path, fmt="csv_vectors"):
    """Load an input file in one of the three accepted layouts.

    ``csv_vectors`` gives an ``(n, d)`` array, ``tensor_stack`` an
    ``(n, rows, cols)`` array, and ``distance_csv`` a validated
    ``(n, n)`` distance matrix.
    """
    if fmt == "csv_vectors":
        return _numeric_rows(path)
    if fmt == "tensor_stack":
        return _read_tensor_stack(path)
    if fmt == "distance_csv":
        return compute_distances(_numeric_rows(path), metric="precomputed")
    raise ConfigError(f"unknown input format {fmt!r}")


# ---------------------------------------------------------------------------
# option resolution

def build_parser():
    p = argparse.ArgumentParser(
        prog="rankscan",
        description="Nonparametric change-point detection for sequences "
                    "of multivariate or matrix-valued observations, "
                    "using rank-weighted similarity-graph scan statistics.")
    p.add_argument("--input", required=True, metavar="PATH",
                   help="input data file")
    p.add_argument("--format", default="csv_vectors",
                   choices=("csv_vectors", "tensor_stack", "distance_csv"),
                   help="input layout (default csv_vectors)")
    p.add_argument("--metric", default=None,
                   choices=("euclidean", "l1", "frobenius", "precomputed"),
                   help="dissimilarity between observations (default "
                        "euclidean; frobenius for tensor_stack)")
    p.add_argument("--graph", default="knn", choices=("knn", "mst"),
                   help="nested similarity-graph family (default knn)")
    p.add_argument("--k", type=int, default=None,
                   help="graph depth; default round(n**0.65)")
    p.add_argument("--weighting", default="rank",
                   choices=("rank", "kernel", "negdist"),
                   help="edge weights: graph-induced ranks, a Gaussian "
                        "kernel, or negated distances (default rank)")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="kernel bandwidth (kernel weighting only); "
                        "default median pairwise distance")
    p.add_argument("--stat", default="m", choices=("t", "m"),
                   help="scan statistic: t (quadratic form) or m "
                        "(max type, default)")
    p.add_argument("--alternative", default="single",
                   choices=("single", "interval", "segment"),
                   help="single change, changed interval, or recursive "
                        "segmentation (default single)")
    p.add_argument("--n0", type=int, default=None,
                   help="first candidate change point (single only)")
    p.add_argument("--n1", type=int, default=None,
                   help="last candidate change point (single only)")
    p.add_argument("--l0", type=int, default=None,
                   help="shortest candidate interval (interval only)")
    p.add_argument("--l1", type=int, default=None,
                   help="longest candidate interval (interval only)")
    p.add_argument("--pvalue", default=None,
                   choices=("analytic", "permutation", "both"),
                   help="p-value method; default analytic when n >= "
                        f"{ANALYTIC_MIN_N}, else permutation")
    p.add_argument("--perms", type=int, default=1000,
                   help="permutation draws for the permutation p-value "
                        "(default 1000)")
    p.add_argument("--skewness", default=None, choices=("on", "off"),
                   help="skewness correction for analytic M p-values "
                        "(default on for the m statistic)")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance level (default 0.05)")
    p.add_argument("--min-segment", dest="min_segment", type=int, default=40,
                   help="stop splitting below this length (segment only, "
                        "default 40)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed for permutation draws (default 0)")
    p.add_argument("--output", default=None, metavar="PATH",
                   help="write the report here instead of stdout")
    return p


def _resolve_metric(args):
    if args.format == "distance_csv":
        if args.metric not in (None, "precomputed"):
            raise ConfigError("--format distance_csv supplies distances "
                              "directly; --metric must be left unset")
        return "precomputed"
    if args.metric == "precomputed":
        raise ConfigError("--metric precomputed requires "
                          "--format distance_csv")
    if args.metric is None:
        return "frobenius" if args.format == "tensor_stack" else "euclidean"
    return args.metric


def _resolve_options(args):
    """Validate flag interplay and fill the data-independent defaults."""
    metric = _resolve_metric(args)
    stat = args.stat.upper()
    if args.skewness == "on" and stat == "T":
        raise ConfigError("the skewness correction applies to the M "
                          "statistic only")
    skewness = args.skewness or ("on" if stat == "M" else "off")
    if args.bandwidth is not None and args.weighting != "kernel":
        raise ConfigError("--bandwidth applies to --weighting kernel only")
    if args.alternative != "single" and (args.n0 is not None
                                         or args.n1 is not None):
        raise ConfigError("--n0/--n1 apply to --alternative single only")
    if args.alternative != "interval" and (args.l0 is not None
                                           or args.l1 is not None):
        raise ConfigError("--l0/--l1 apply to --alternative interval only")
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"--alpha must be in (0, 1), got {args.alpha!r}")
    if args.min_segment < 1:
        raise ConfigError("--min-segment must be at least 1")
    return metric, stat, skewness


def _resolve_pvalue(args, n):
    if args.pvalue is not None:
        return args.pvalue
    return "analytic" if n >= ANALYTIC_MIN_N else "permutation"


# ---------------------------------------------------------------------------
# pipeline pieces

def _rank_matrix(dists, args, metric):
    """Distances -> graph sequence -> weight matrix, echoing k/bandwidth."""
    n = dists.shape[0]
    if not np.any(dists):
        # all observations identical: the graphs would be pure
        # tie-breaking artifacts and the scan statistic meaningless
        raise DegenerateVariance("all observations are identical; "
                                 "the distances carry no information")
    k = args.k if args.k is not None else default_graph_size(n)
    g = build_graph_sequence(dists, k, kind=args.graph)
    bandwidth = None
    if args.weighting == "rank":
        r = graph_induced_ranks(g)
    elif args.weighting == "kernel":
        bandwidth = args.bandwidth
        if bandwidth is None:
            bandwidth = float(np.median(squareform(dists, checks=False)))
        r = weighted_graph_matrix(dists, g, "gaussian_kernel", bandwidth)
    else:
        weight = "neg_l1" if metric == "l1" else "neg_distance"
        r = weighted_graph_matrix(dists, g, weight)
    return r, k, bandwidth


def _analytic_pvalue(r, stat, alternative, window, skewness, seed):
    """Tail-probability p-value at the observed scan maximum."""
    skew = None
    if skewness == "on" and stat == "M":
        skew = skewness_table(r, window=window, n_perm=GAMMA_PERMS,
                              seed=seed)
    cfg = TailConfig(n=r.n, statistic=stat, alternative=alternative,
                     window=window, skewness=skew is not None)
    def tail(b):
        if b <= 0.0:
            return 1.0
        return tail_probability(cfg, b, skew)
    return tail


def _evaluate(r, stat, alternative, window, method, args, perm_seed,
              gamma_seed):
    """Scan plus p-values; returns ``(scan, {method: p})``."""
    scan = None
    pvals = {}
    if method in ("permutation", "both"):
        plan = PermPlan(n_perm=args.perms, seed=perm_seed)
        res = permutation_pvalue(r, stat, alternative, window, plan)
        scan = res.scan
        pvals["permutation"] = res.p_value
    if scan is None:
        if alternative == "single":
            scan = scan_single(r, stat, *window)
        else:
            scan = scan_interval(r, stat, *window)
    if method in ("analytic", "both"):
        tail = _analytic_pvalue(r, stat, alternative, window,
                                args.skewness_resolved, gamma_seed)
        pvals["analytic"] = tail(scan.max_value)
    return scan, pvals


def _decision_p(pvals):
    # the permutation p-value is exact under the permutation null, so it
    # drives the reject/retain decision whenever both were computed
    return pvals.get("permutation", pvals.get("analytic"))


# ---------------------------------------------------------------------------
# report formatting

def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _pval_lines(lines, prefix, pvals):
    for name in ("analytic", "permutation"):
        if name in pvals:
            lines.append(f"{prefix}.p_{name}: {_fmt(pvals[name])}")


def _result_lines(lines, prefix, scan):
    if scan.alternative == "single":
        lines.append(f"{prefix}.change_point: {scan.tau_hat}")
    else:
        t1, t2 = scan.tau_hat
        lines.append(f"{prefix}.interval: ({t1}, {t2}]")
    lines.append(f"{prefix}.statistic_value: {_fmt(scan.max_value)}")


def _diagnostics_lines(lines, r):
    for name, (value, flag) in condition_diagnostics(r).items():
        lines.append(f"diagnostics.{name}: {_fmt(value)} {flag}")


def _trace_lines(scan):
    out = []
    if scan.alternative == "single":
        out.append("trace.columns: t,statistic")
        rows = ((str(int(t)), _fmt(v))
                for t, v in zip(scan.candidates, scan.values))
    else:
        out.append("trace.columns: t1,t2,statistic")
        rows = ((str(int(a)), str(int(b)), _fmt(v))
                for (a, b), v in zip(scan.candidates, scan.values))
    rows = [",".join(cells) for cells in rows]
    out.append(f"trace.rows: {len(rows)}")
    out.append("trace:")
    out.extend(rows)
    return out


# ---------------------------------------------------------------------------
# the three run modes

def _input_lines(args, data, n):
    lines = [f"input.path: {args.input}",
             f"input.format: {args.format}",
             f"input.observations: {n}"]
    if args.format == "csv_vectors":
        lines.append(f"input.dimension: {data.shape[1]}")
    elif args.format == "tensor_stack":
        lines.append(f"input.block: {data.shape[1]}x{data.shape[2]}")
    return lines


def _config_lines(args, metric, stat, method, k, bandwidth, window,
                  window_keys):
    lines = [f"config.metric: {metric}",
             f"config.graph: {args.graph}",
             f"config.k: {k}",
             f"config.weighting: {args.weighting}"]
    if bandwidth is not None:
        lines.append(f"config.bandwidth: {_fmt(bandwidth)}")
    lines.append(f"config.statistic: {stat}")
    lines.append(f"config.alternative: {args.alternative}")
    if window is not None:
        lo_key, hi_key = window_keys
        lines.append(f"config.{lo_key}: {window[0]}")
        lines.append(f"config.{hi_key}: {window[1]}")
    lines.append(f"config.pvalue: {method}")
    if method in ("permutation", "both"):
        lines.append(f"config.permutations: {args.perms}")
    lines.append(f"config.skewness: {args.skewness_resolved}")
    lines.append(f"config.alpha: {_fmt(args.alpha)}")
    if args.alternative == "segment":
        lines.append(f"config.min_segment: {args.min_segment}")
    lines.append(f"config.seed: {args.seed}")
    return lines


def detect(args, data, dists, metric, stat, method):
    """Single-change or changed-interval detection report lines."""
    n = dists.shape[0]
    r, k, bandwidth = _rank_matrix(dists, args, metric)
    if args.alternative == "single":
        window = default_single_window(n)
        if args.n0 is not None:
            window = (args.n0, window[1])
        if args.n1 is not None:
            window = (window[0], args.n1)
        window_keys = ("n0", "n1")
    else:
        window = default_interval_window(n)
        if args.l0 is not None:
            window = (args.l0, window[1])
        if args.l1 is not None:
            window = (window[0], args.l1)
        window_keys = ("l0", "l1")

    scan, pvals = _evaluate(r, stat, args.alternative, window, method, args,
                            perm_seed=derive_seed(args.seed, 1),
                            gamma_seed=derive_seed(args.seed, 2))

    lines = _input_lines(args, data, n)
    lines += _config_lines(args, metric, stat, method, k, bandwidth,
                           window, window_keys)
    _result_lines(lines, "result", scan)
    _pval_lines(lines, "result", pvals)
    decision = "reject" if _decision_p(pvals) <= args.alpha else "retain"
    lines.append(f"result.decision: {decision}")
    _diagnostics_lines(lines, r)
    lines += _trace_lines(scan)
    return lines


def segment(args, data, dists, metric, stat, method):
    """Recursive binary segmentation report lines.

    Each significant single-change finding splits its segment in two and
    both halves are re-tested with windows derived from their own
    lengths.  Reported p-values are raw (no multiplicity adjustment);
    permutation seeds derive from ``--seed`` and the segment id, so the
    run is reproducible.
    """
    n = dists.shape[0]
    records = []
    changes = []
    root_scan = []

    def visit(start, end):
        rec = {"id": len(records) + 1, "start": start, "end": end}
        records.append(rec)
        length = end - start
        if length < max(args.min_segment, HARD_MIN_SEGMENT):
            rec["decision"] = "too_short"
            return
        sub = np.ascontiguousarray(dists[start:end, start:end])
        sub_args = args
        if args.k is not None and args.k > length - 1:
            # an explicit depth can exceed what a short child admits
            sub_args = argparse.Namespace(**vars(args))
            sub_args.k = length - 1
        try:
            r, k, _ = _rank_matrix(sub, sub_args, metric)
            window = default_single_window(length)
            scan, pvals = _evaluate(
                r, stat, "single", window, method, args,
                perm_seed=derive_seed(args.seed, 1, rec["id"]),
                gamma_seed=derive_seed(args.seed, 2, rec["id"]))
        except DegenerateVariance:
            if rec["id"] == 1:
                raise
            rec["decision"] = "degenerate"
            return
        rec["k"] = k
        rec["scan"] = scan
        rec["pvals"] = pvals
        if rec["id"] == 1:
            root_scan.append(scan)
        if _decision_p(pvals) <= args.alpha:
            rec["decision"] = "split"
            split_at = start + scan.tau_hat
            changes.append(split_at)
            rec["children"] = []
            rec["children"].append(len(records) + 1)
            visit(start, split_at)
            rec["children"].append(len(records) + 1)
            visit(split_at, end)
        else:
            rec["decision"] = "retain"

    visit(0, n)

    lines = _input_lines(args, data, n)
    root_k = records[0].get("k", args.k if args.k is not None
                            else default_graph_size(n))
    lines += _config_lines(args, metric, stat, method, root_k,
                           None, None, None)
    lines.append(f"segment.count: {len(records)}")
    if changes:
        listed = ",".join(str(c) for c in sorted(changes))
    else:
        listed = "none"
    lines.append(f"segment.changes: {listed}")
    for rec in records:
        pre = f"segment.{rec['id']}"
        lines.append(f"{pre}.range: [{rec['start']}, {rec['end']})")
        if "scan" in rec:
            lines.append(f"{pre}.k: {rec['k']}")
            scan = rec["scan"]
            lines.append(f"{pre}.change_point: {rec['start'] + scan.tau_hat}")
            lines.append(f"{pre}.statistic_value: {_fmt(scan.max_value)}")
            _pval_lines(lines, pre, rec["pvals"])
        lines.append(f"{pre}.decision: {rec['decision']}")
        if "children" in rec:
            kids = ",".join(str(c) for c in rec["children"])
            lines.append(f"{pre}.children: {kids}")
    if root_scan:
        lines += _trace_lines(root_scan[0])
    return lines


def run(args):
    """Everything between parsed flags and the report text."""
    metric, stat, skewness = _resolve_options(args)
    args.skewness_resolved = skewness
    data = ingest(args.input, args.format)
    if args.format == "distance_csv":
        dists = data
    else:
        dists = compute_distances(data, metric)
    n = dists.shape[0]
    if n < 4:
        raise TooFewObservations(f"need at least 4 observations, got {n}")
    method = _resolve_pvalue(args, n)
    if args.alternative == "segment":
        lines = segment(args, data, dists, metric, stat, method)
    else:
        lines = detect(args, data, dists, metric, stat, method)
    return "\n".join(["rankscan report"] + lines) + "\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = run(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if args.output is not None:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"report written to {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
