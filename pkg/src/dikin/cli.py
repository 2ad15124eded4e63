"""Command-line interface: ``dikin {sample,check,estimate-det,bench,replay}``.

Exit codes: 0 success, 1 a diagnostic check failed, 2 invalid input,
3 numerical failure.  Every command writes a JSON manifest holding its
resolved arguments and the SHA-256 of each deterministic output;
``dikin replay MANIFEST`` reruns the command in a scratch directory and
compares the hashes.
"""

import argparse
import contextlib
import csv
import hashlib
import io
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from .barriers import LOG, LS, MetricKind, evaluate_metric, hessian_directional_derivative
from .estimators import det_ratio_estimate
from .exceptions import (
    DikinError,
    DimensionMismatch,
    NotInterior,
    RankDeficient,
    UnknownReference,
)
from .polytope import analytic_center, load_polytope, random_polytope
from .walk import DET_PATHS, FILTERS, WalkConfig, make_rng, parse_radius, run_chain

MANIFEST_SCHEMA = "dikin-manifest/1"
SUITES = ("ssc", "sandwich", "symmetry", "convexity", "uniformity")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
USAGE_ERRORS = (ValueError, FileNotFoundError, json.JSONDecodeError,
                DimensionMismatch, RankDeficient, NotInterior, UnknownReference)


# --- helpers ------------------------------------------------------------------

def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _resolve_source(source):
    """Absolute path for file sources; generator specs pass through."""
    p = Path(source)
    return str(p.resolve()) if p.is_file() else source


def _load_point(source, n):
    """Read a point from a JSON array file, a text file or ``"a,b,c"``."""
    p = Path(source)
    if p.is_file():
        text = p.read_text().strip()
        try:
            x = np.asarray(json.loads(text), dtype=np.float64)
        except json.JSONDecodeError:
            x = np.loadtxt(io.StringIO(text), dtype=np.float64)
    elif "," in source or _is_number(source):
        x = np.asarray([float(t) for t in source.split(",")])
    else:
        raise FileNotFoundError(f"no such point file: {source}")
    x = np.ravel(x)
    if x.shape != (n,):
        raise DimensionMismatch(f"point in {source} has {x.size} entries, need {n}")
    return x


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _chain_path(out, k, chains):
    if chains == 1:
        return out
    return out.with_name(f"{out.stem}.chain{k}{out.suffix}")


def _trace_bytes(samples, fmt):
    buf = io.StringIO()
    if fmt == "jsonl":
        for row in samples:
            buf.write(json.dumps([float(v) for v in row]) + "\n")
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(samples.shape[1])])
        for row in samples:
            w.writerow([repr(float(v)) for v in row])
    return buf.getvalue().encode()


def _write_manifest(path, command, args, outputs, **extra):
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": __version__,
        "command": command,
        "polytope": getattr(args, "polytope", None),
        "seed": getattr(args, "seed", None),
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "outputs": outputs,
        **extra,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _emit(text, outputs, role="stdout"):
    sys.stdout.write(text)
    outputs[role] = {"path": None, "sha256": _sha256(text.encode())}


# --- commands -------------------------------------------------------------------

def cmd_sample(args):
    """Run one or more chains and write traces plus a manifest."""
    args.polytope = _resolve_source(args.polytope)
    P = load_polytope(args.polytope)
    config = WalkConfig(
        radius=parse_radius(args.radius), barrier=args.barrier,
        filter=args.filter, steps=args.steps, burn_in=args.burnin,
        thin=args.thin, seed=args.seed, membership_guard=not args.no_guard,
        lazy=args.lazy, det_path=args.det_path, n_draws=args.draws,
        record_filter=False)
    if args.start == "center":
        x0 = analytic_center(P)
    else:
        args.start = _resolve_source(args.start)
        x0 = _load_point(args.start, P.n)
    out = Path(args.out).resolve()
    args.out = str(out)
    outputs, stats = {}, []
    t0 = time.perf_counter()
    for k in range(args.chains):
        trace = run_chain(P, x0, config, chain=k)
        data = _trace_bytes(trace.samples, args.format)
        path = _chain_path(out, k, args.chains)
        path.write_bytes(data)
        outputs[f"trace{k}"] = {"path": str(path), "sha256": _sha256(data)}
        stats.append(trace.summary())
    elapsed = time.perf_counter() - t0
    total = args.chains * (config.burn_in + config.steps * config.thin)
    manifest_path = args.manifest or f"{out}.manifest.json"
    _write_manifest(
        manifest_path, "sample", args, outputs,
        config=config.to_dict(),
        q=MetricKind.for_polytope(config.barrier, P).q,
        m=P.m, n=P.n, stats=stats,
        seconds_per_step=elapsed / total if total else None)
    print(json.dumps({"traces": [o["path"] for o in outputs.values()],
                      "manifest": str(manifest_path), "stats": stats}))
    return EXIT_OK


def _scaled_derivative(scale):
    def derivative(ev, h):
        return scale * hessian_directional_derivative(ev, h)
    return derivative


def run_suite(P, suite, barrier, trials, rng, args):
    """One diagnostic suite as a report dictionary."""
    if suite == "ssc":
        deriv = hessian_directional_derivative
        if args.corrupt_dh != 1.0:
            deriv = _scaled_derivative(args.corrupt_dh)
        return diag.check_strong_self_concordance(
            P, barrier, trials, rng, derivative=deriv).as_dict()
    if suite == "sandwich":
        return diag.check_global_sandwich(P, barrier, trials, rng).as_dict()
    if suite == "symmetry":
        return diag.estimate_symmetry(P, barrier, trials, args.chord_samples,
                                      rng).as_dict()
    if suite == "convexity":
        return diag.check_logdet_convexity(P, barrier, trials, rng).as_dict()
    if suite == "uniformity":
        if P.reference is None:
            raise UnknownReference(f"no exact marginals known for {P.name}")
        config = WalkConfig(radius=parse_radius(args.radius), barrier=barrier,
                            steps=args.steps, thin=args.thin,
                            seed=args.seed, record_filter=False)
        trace = run_chain(P, analytic_center(P), config)
        report = diag.uniformity_tests(trace, P).as_dict()
        report["metric"] = barrier
        report["params"].update(radius=config.radius, steps=config.steps,
                                thin=config.thin, seed=config.seed)
        return report
    raise ValueError(f"unknown suite {suite!r}")


def cmd_check(args):
    """Run diagnostic suites and print a JSON report."""
    args.polytope = _resolve_source(args.polytope)
    P = load_polytope(args.polytope)
    suites = SUITES if args.suite == "all" else (args.suite,)
    if args.suite == "all" and P.reference is None:
        suites = tuple(s for s in suites if s != "uniformity")
    reports = []
    for suite in suites:
        rng = make_rng(args.seed, SUITES.index(suite))
        reports.append(run_suite(P, suite, args.barrier, args.trials, rng, args))
    passed = all(r["pass"] for r in reports)
    outputs = {}
    text = json.dumps({"polytope": P.name, "barrier": args.barrier,
                       "seed": args.seed, "pass": passed,
                       "reports": reports}, indent=2,
                      default=_json_default) + "\n"
    _emit(text, outputs)
    _write_manifest(args.manifest or "dikin-check.manifest.json", "check",
                    args, outputs, all_pass=passed)
    return EXIT_OK if passed else EXIT_CHECK


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def cmd_estimate_det(args):
    """Estimate ``sqrt(det H(x) / det H(y))`` for the log barrier."""
    args.polytope = _resolve_source(args.polytope)
    P = load_polytope(args.polytope)
    args.x = _resolve_source(args.x)
    args.y = _resolve_source(args.y)
    x = _load_point(args.x, P.n)
    y = _load_point(args.y, P.n)
    est = det_ratio_estimate(P, x, y, args.draws, make_rng(args.seed))
    exact = math.exp(0.5 * (evaluate_metric(P, x, LOG).logdet
                            - evaluate_metric(P, y, LOG).logdet))
    result = {
        "estimate": est.value,
        "stderr": est.stderr,
        "exact": exact,
        "relative_error": abs(est.value - exact) / exact,
        "draws": est.n_draws,
        "pilot_cv": est.pilot_cv,
        "high_variance": est.high_variance,
    }
    outputs = {}
    _emit(json.dumps(result) + "\n", outputs)
    _write_manifest(args.manifest or "dikin-estimate-det.manifest.json",
                    "estimate-det", args, outputs)
    if est.high_variance:
        print(f"warning: high variance (pilot CV {est.pilot_cv:.3g})",
              file=sys.stderr)
        if args.strict:
            return EXIT_NUMERIC
    return EXIT_OK


def _parse_sizes(text):
    sizes = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            m, n = (int(v) for v in item.split("x"))
        except ValueError:
            raise ValueError(f"bad size {item!r}; expected MxN, e.g. 20x5") from None
        sizes.append((m, n))
    return sizes


BENCH_COLUMNS = ["polytope", "m", "n", "barrier", "steps",
                 "mean_weight_iterations", "acceptance_rate",
                 "mean_step_seconds"]


def cmd_bench(args):
    """Mean per-step wall time and LS weight iterations, as CSV."""
    polys = [random_polytope(m, n, args.seed) for m, n in _parse_sizes(args.sizes)]
    polys += [load_polytope(_resolve_source(s)) for s in args.polytopes]
    rows = []
    if args.steps > 0:
        for P in polys:
            config = WalkConfig(radius=parse_radius(args.radius),
                                barrier=args.barrier, steps=args.steps,
                                seed=args.seed, record_filter=False)
            x0 = analytic_center(P)
            cold = evaluate_metric(P, x0, MetricKind.for_polytope(args.barrier, P))
            t0 = time.perf_counter()
            trace = run_chain(P, x0, config)
            dt = (time.perf_counter() - t0) / args.steps
            st = trace.stats
            warm = st.weight_iterations - cold.weight_iterations
            evaluated = st.proposals - st.rejected_outside
            rows.append([P.name, P.m, P.n, args.barrier, args.steps,
                         warm / evaluated if evaluated else 0.0,
                         st.acceptance_rate, dt])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    w.writerows(rows)
    text = buf.getvalue()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    # wall times are not reproducible; hash the remaining columns only
    det = io.StringIO()
    csv.writer(det, lineterminator="\n").writerows(
        [BENCH_COLUMNS[:-1]] + [r[:-1] for r in rows])
    outputs = {"table": {"path": args.out,
                         "sha256": _sha256(det.getvalue().encode())}}
    _write_manifest(args.manifest or "dikin-bench.manifest.json", "bench",
                    args, outputs)
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "check": cmd_check,
    "estimate-det": cmd_estimate_det,
    "bench": cmd_bench,
}


def _replay_outputs(manifest, workdir):
    """Rerun the command of ``manifest`` inside ``workdir``; return outputs."""
    command = manifest["command"]
    if command not in COMMANDS:
        raise ValueError(f"cannot replay command {command!r}")
    args = argparse.Namespace(**manifest["args"])
    args.manifest = str(workdir / "replay.manifest.json")
    if command == "sample":
        args.out = str(workdir / Path(args.out).name)
    elif command == "bench" and args.out:
        args.out = str(workdir / Path(args.out).name)
    with contextlib.redirect_stdout(io.StringIO()):
        code = COMMANDS[command](args)
    replayed = json.loads(Path(args.manifest).read_text())
    return code, replayed["outputs"]


def cmd_replay(args):
    """Rerun a manifest and compare output hashes."""
    manifest = json.loads(Path(args.manifest_file).read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {manifest.get('schema')!r}")
    with tempfile.TemporaryDirectory() as tmp:
        _, outputs = _replay_outputs(manifest, Path(tmp))
    mismatched = sorted(
        role for role in set(manifest["outputs"]) | set(outputs)
        if manifest["outputs"].get(role, {}).get("sha256")
        != outputs.get(role, {}).get("sha256"))
    print(json.dumps({"manifest": args.manifest_file,
                      "identical": not mismatched,
                      "mismatched": mismatched}))
    return EXIT_OK if not mismatched else EXIT_CHECK


# --- parser -----------------------------------------------------------------------

def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dikin", description="Uniform polytope sampling with the Dikin walk.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run Dikin walk chains")
    p.add_argument("polytope", help="generator spec like 'cube(3)' or JSON file")
    p.add_argument("--barrier", choices=(LOG, LS), default=LOG)
    p.add_argument("--radius", default="1/512")
    p.add_argument("--filter", choices=FILTERS, default="metropolis")
    p.add_argument("--steps", type=_nonneg_int, default=1000)
    p.add_argument("--burnin", type=_nonneg_int, default=0)
    p.add_argument("--thin", type=_pos_int, default=1)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--start", default="center",
                   help="'center' or a file holding the starting point")
    p.add_argument("--out", default="samples.jsonl")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--det-path", choices=DET_PATHS, default="exact")
    p.add_argument("--draws", type=_pos_int, default=64,
                   help="estimator draws per step with --det-path estimator")
    p.add_argument("--chains", type=_pos_int, default=1)
    p.add_argument("--lazy", action="store_true")
    p.add_argument("--no-guard", action="store_true",
                   help="skip the membership test before metric evaluation")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check", help="run diagnostic suites")
    p.add_argument("polytope", nargs="?", default="cube(3)")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--barrier", choices=(LOG, LS), default=LOG)
    p.add_argument("--trials", type=_pos_int, default=50)
    p.add_argument("--chord-samples", type=_pos_int, default=200)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--radius", default="0.8",
                   help="walk radius for the uniformity suite")
    p.add_argument("--steps", type=_pos_int, default=20000,
                   help="recorded samples for the uniformity suite")
    p.add_argument("--thin", type=_pos_int, default=10)
    p.add_argument("--corrupt-dh", type=float, default=1.0,
                   help=argparse.SUPPRESS)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("estimate-det", help="stochastic determinant ratio")
    p.add_argument("--polytope", required=True)
    p.add_argument("--x", required=True, help="point file or 'a,b,...'")
    p.add_argument("--y", required=True, help="point file or 'a,b,...'")
    p.add_argument("--draws", type=_pos_int, default=100000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when the pilot flags high variance")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_estimate_det)

    p = sub.add_parser("bench", help="per-step cost table (CSV)")
    p.add_argument("--barrier", choices=(LOG, LS), default=LOG)
    p.add_argument("--sizes", default="20x5,40x5,80x5",
                   help="comma-separated MxN random polytopes")
    p.add_argument("--polytopes", nargs="*", default=[],
                   help="extra generator specs or JSON files")
    p.add_argument("--steps", type=_nonneg_int, default=200)
    p.add_argument("--radius", default="1/512")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"dikin {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DikinError as exc:
        print(f"dikin {args.command}: numerical failure ({exc.check}): {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"dikin {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
