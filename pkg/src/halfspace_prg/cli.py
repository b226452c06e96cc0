"""Command-line front end.

Every report embeds the fully resolved run configuration under ``config``.
JSON output uses sorted keys so identical invocations give identical bytes.

Exit codes: 0 success, 1 bad parameters or usage, 2 enumeration cap refused,
3 input/output failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import diagnostics, eval_count, kwise, ltf, prggen, streams
from .errors import CapExceededError, HalfspacePrgError, UsageError

EXIT_OK = 0
EXIT_PARAMETER = 1
EXIT_CAP = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """Reports usage problems with exit code 1; code 2 is reserved for cap refusals."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAMETER, f"{self.prog}: error: {message}\n")


def _json_default(obj):
    if isinstance(obj, Fraction):
        return ltf.format_rational(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


# -- shared argument groups --------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format")
    p.add_argument("--workers", type=int, default=1, help="parallel workers for enumeration/sampling")
    p.add_argument("--verbose", "-v", action="store_true", help="log HEURISTIC warnings to stderr")


def _add_params(p: argparse.ArgumentParser, n_required: bool = False) -> None:
    g = p.add_argument_group("generator parameters")
    g.add_argument("--params", help="GenParams JSON file (overrides the flags below)")
    g.add_argument("--n", type=int, required=n_required, help="number of variables; taken from --input when omitted")
    g.add_argument("--ell", type=int, default=2, help="number of buckets, a power of two")
    g.add_argument("--r-hash", type=int, default=2, help="hash independence")
    g.add_argument("--r-bucket", type=int, default=2, help="bucket generator independence")
    g.add_argument("--delta-cnf", type=float, default=None, help="recorded CNF error target")


def _add_sampling(p: argparse.ArgumentParser, n_default: int = 100_000) -> None:
    g = p.add_argument_group("estimation")
    g.add_argument("--N", dest="N", type=int, default=n_default, help=f"Monte Carlo samples")
    g.add_argument("--stream-id", type=int, default=0, help="auxiliary RNG stream")
    g.add_argument("--alpha", type=float, default=eval_count.DEFAULT_ALPHA,
                   help=f"Hoeffding failure probability")
    g.add_argument("--cap", type=int, default=eval_count.DEFAULT_CAP,
                   help=f"enumeration cap in points/seeds")


def _resolve_params(args, n: Optional[int]) -> prggen.GenParams:
    if args.params:
        return prggen.GenParams.from_dict(ltf.load_json(args.params))
    n = args.n if args.n is not None else n
    if n is None:
        raise UsageError("need --n, --params or an --input problem")
    return prggen.make_params(n, args.ell, args.r_hash, args.r_bucket, args.delta_cnf)


def _load_function(path: str):
    """An intersection from a problem file, or a CNF from a ``{"clauses": ...}`` file."""
    data = ltf.load_json(path)
    if "clauses" in data:
        return ltf.CnfFormula.from_dict(data)
    return eval_count.problem_function(ltf.Problem.from_dict(data))


def _load_intersection(path: str) -> ltf.Intersection:
    F = _load_function(path)
    if not isinstance(F, ltf.Intersection):
        raise UsageError("this subcommand needs a problem file of halfspace constraints")
    return F


# -- subcommands ---------------------------------------------------------------

def cmd_plan(args) -> dict:
    overrides = {k: getattr(args, k) for k in ("ell", "r_hash", "r_bucket", "delta_cnf") if getattr(args, k) is not None}
    if args.weight is not None:
        if args.delta_target is None:
            raise UsageError("--weight needs --delta-target")
        report = prggen.plan_from_weight_report(args.n, args.k, args.weight, args.delta_target,
                                                c_br=args.c_br, **overrides)
        p, tau, s = report["params"], report["tau"], report["s"]
    else:
        if args.s is None or args.tau is None:
            raise UsageError("plan needs --s and --tau, or --weight and --delta-target")
        p = prggen.plan_params(args.n, args.k, args.s, args.tau, args.delta_target, c_br=args.c_br, **overrides)
        tau, s = args.tau, args.s
    return {
        "params": p.to_dict(),
        "tau": tau,
        "s": s,
        "error_bound": prggen.theoretical_error_bound(p, args.k, tau),
    }


def cmd_gen(args) -> dict:
    p = _resolve_params(args, None)
    if args.seed_hex is not None:
        seeds = [prggen.GenSeed.from_hex(p, args.seed_hex)]
    elif args.seed_int is not None:
        seeds = [prggen.GenSeed.from_int(p, args.seed_int)]
    else:
        per_sample = -(-p.seed_len_bits // 64)
        words = streams.CounterStream(args.stream_id, streams.SEEDS).words(args.start, args.count, per_sample)
        ints = [sum(int(w) << (64 * j) for j, w in enumerate(row)) & ((1 << p.seed_len_bits) - 1) for row in words]
        seeds = [prggen.GenSeed.from_int(p, v) for v in ints]
    rows = [{"seed_hex": s.to_hex(p), "point": prggen.generate(p, s)} for s in seeds]
    return {"params": p.to_dict(), "samples": rows, "rng_stream_id": args.stream_id}


def cmd_count(args) -> dict:
    F = _load_function(args.input)
    p = _resolve_params(args, F.n)
    report = eval_count.approx_count(F, p, args.mode, args.N, args.stream_id, args.alpha, args.cap,
                                     args.strategy, args.workers)
    out = report.to_dict()
    out["params"] = p.to_dict()
    return out


def cmd_fool(args) -> dict:
    F = _load_function(args.input)
    p = _resolve_params(args, F.n)
    return eval_count.fooling_error(F, p, args.mode, args.N, args.stream_id, args.alpha, args.cap,
                                    args.strategy, args.workers).to_dict()


def cmd_dichotomy(args) -> dict:
    F = _load_intersection(args.input)
    rows = []
    for i, f in enumerate(F.ltfs, start=1):
        t, sparsity = ltf.weight_and_sparsity(f)
        row = {"index": i, "weight": t, "sparsity": sparsity}
        if sparsity:
            c = ltf.classify_dichotomy(f, args.s)
            row["tau_min"] = ltf.regularity_param(f)
            if isinstance(c, ltf.Sparse):
                row["class"] = "Sparse"
            else:
                row["class"] = "Regular"
                row["tau_guaranteed"] = c.tau
        else:
            row["class"] = "Constant"
        rows.append(row)
    out = {"rows": rows, "s": args.s}
    if args.tau is not None:
        d = ltf.decompose(F, args.s, args.tau)
        out["decomposition"] = {
            "tau": args.tau,
            "regular": [f.source.to_dict() for f in d.regular_part],
            "cnf": d.cnf_part.to_dict(),
        }
    return out


def cmd_verify_kwise(args) -> dict:
    if args.kind == "hash":
        spec = kwise.make_hash_family(args.n, args.ell, args.r)
    else:
        spec = kwise.make_bitgen(args.n, args.r)
    max_r = args.r if args.max_r is None else args.max_r
    report = kwise.verify_independence(spec, max_r, args.cap)
    out = report.to_dict()
    out.update({"kind": args.kind, "n": args.n, "r": args.r, "m": spec.m, "seed_bits": spec.seed_bits})
    if args.kind == "hash":
        out["ell"] = args.ell
    return out


def _hash_seed(p: prggen.GenParams, text: Optional[str]) -> Optional[kwise.KWiseSeed]:
    if text is None:
        return None
    raw = int.from_bytes(bytes.fromhex(text), "little")
    return kwise.KWiseSeed.from_int(raw, p.r_hash, p.m_hash)


def cmd_hybrid_scan(args) -> dict:
    F = _load_function(args.input)
    p = _resolve_params(args, F.n)
    points = diagnostics.hybrid_scan(F, p, args.mode, args.N, args.stream_id, args.alpha, args.cap,
                                     _hash_seed(p, args.hash_seed_hex))
    rows = [pt.to_row(p) for pt in points]
    for pt, row in zip(points, rows):
        if isinstance(pt.estimate.value, Fraction):
            row["value_exact"] = ltf.format_rational(pt.estimate.value)
    return {"rows": rows, "params": p.to_dict()}


def cmd_bucket_stats(args) -> dict:
    F = _load_intersection(args.input)
    p = _resolve_params(args, F.n)
    W = F.weight_matrix()
    seed = _hash_seed(p, args.hash_seed_hex)
    if seed is None:
        out = diagnostics.expected_bucket_statistic(W, p, args.N, args.stream_id)
        out["params"] = p.to_dict()
        return out
    buckets = prggen.hash_buckets(p, np.array([seed.values], dtype=np.uint64))[0] + 1
    report = diagnostics.bucket_report(W, buckets, p.ell)
    return {
        "rows": report.to_rows(p),
        "total": report.total,
        "bound": report.bound,
        "label": "HEURISTIC",
        "params": p.to_dict(),
    }


def cmd_br_test(args) -> dict:
    G = _load_function(args.input)
    if not isinstance(G, ltf.CnfFormula):
        raise UsageError("br-test needs a CNF file with a 'clauses' list")
    return diagnostics.br_fooling_test(G, args.r, cap=args.cap, strategy=args.strategy)


def cmd_strip(args) -> dict:
    F = _load_intersection(args.input)
    return diagnostics.strip_probability_mc(F, lam=args.lam, N=args.N, stream_id=args.stream_id)


def cmd_invariance(args) -> dict:
    F = _load_intersection(args.input)
    return diagnostics.invariance_gap_mc(F, N=args.N, stream_id=args.stream_id, cap=args.cap, tau=args.tau)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="halfspace-prg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="derive generator parameters")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="number of halfspaces")
    p.add_argument("--s", type=int, help="sparsity threshold")
    p.add_argument("--tau", type=float, help="regularity level")
    p.add_argument("--weight", type=int, help="weight bound t (derives tau and s from --delta-target)")
    p.add_argument("--delta-target", type=float, help="target fooling error")
    p.add_argument("--delta-cnf", type=float)
    p.add_argument("--ell", type=int)
    p.add_argument("--r-hash", type=int)
    p.add_argument("--r-bucket", type=int)
    p.add_argument("--c-br", type=float, default=1.0, help="constant in the CNF independence requirement")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen", help="generate points from seeds")
    _add_common(p)
    _add_params(p)
    p.add_argument("--seed-hex", help="one seed, little-endian hex of the layout")
    p.add_argument("--seed-int", type=int, help="one seed as an integer")
    p.add_argument("--count", type=int, default=1, help="random seeds to draw when no seed is given")
    p.add_argument("--start", type=int, default=0, help="first sample index in the stream")
    p.add_argument("--stream-id", type=int, default=0, help="auxiliary RNG stream")
    p.set_defaults(func=cmd_gen)

    for name, func, modes, default, helptext in (
        ("count", cmd_count, eval_count.COUNT_MODES, "exact-seeds", "approximate satisfying-assignment count"),
        ("fool", cmd_fool, eval_count.FOOLING_MODES, "exact-both", "fooling error of the generator"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_params(p)
        _add_sampling(p)
        p.add_argument("--input", "-i", required=True, help="problem or CNF JSON")
        p.add_argument("--mode", choices=modes, default=default)
        p.add_argument("--strategy", choices=("auto", "enumerate", "linear"), default="auto",
                       help="exact seed-side method")
        p.set_defaults(func=func)

    p = sub.add_parser("dichotomy", help="classify constraints as sparse or regular")
    _add_common(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--tau", help="also decompose at this regularity level (rational allowed)")
    p.set_defaults(func=cmd_dichotomy)

    p = sub.add_parser("verify-kwise", help="exhaustive r-wise independence check")
    _add_common(p)
    p.add_argument("--kind", choices=("bit", "hash"), default="bit")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--ell", type=int, default=2, help="hash range size")
    p.add_argument("--max-r", type=int, help="largest subset size to check; r when omitted")
    p.add_argument("--cap", type=int, default=kwise.DEFAULT_SEED_CAP)
    p.set_defaults(func=cmd_verify_kwise)

    p = sub.add_parser("hybrid-scan", help="mean of F over every hybrid level")
    _add_common(p)
    _add_params(p)
    _add_sampling(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--hash-seed-hex", help="fix the hash instead of averaging over it")
    p.set_defaults(func=cmd_hybrid_scan)

    p = sub.add_parser("bucket-stats", help="bucket mass statistic of the constraint matrix")
    _add_common(p)
    _add_params(p)
    _add_sampling(p, n_default=1000)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--hash-seed-hex", help="report per-bucket values for this hash")
    p.set_defaults(func=cmd_bucket_stats)

    p = sub.add_parser("br-test", help="fooling error of r-wise independence on a CNF")
    _add_common(p)
    p.add_argument("--input", "-i", required=True, help="CNF JSON")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--cap", type=int, default=eval_count.DEFAULT_CAP)
    p.add_argument("--strategy", choices=("auto", "enumerate", "linear"), default="auto")
    p.set_defaults(func=cmd_br_test)

    p = sub.add_parser("strip", help="Gaussian strip probability")
    _add_common(p)
    _add_sampling(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.set_defaults(func=cmd_strip)

    p = sub.add_parser("invariance", help="uniform versus Gaussian polytope probability")
    _add_common(p)
    _add_sampling(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--tau", type=float, help="regularity level for the bound; measured when omitted")
    p.set_defaults(func=cmd_invariance)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def _scalar(v):
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, default=_json_default)
    if isinstance(v, Fraction):
        return ltf.format_rational(v)
    return v


def to_csv(result: dict, config: dict) -> str:
    rows = result.get("rows")
    if rows is None:
        rows = [{k: v for k, v in result.items()}]
    cfg = json.dumps(config, sort_keys=True, default=_json_default)
    fields = sorted({k for r in rows for k in r} | {"config"})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**{k: _scalar(v) for k, v in r.items()}, "config": cfg})
    return buf.getvalue()


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(message)s")
    config = _config(args)
    try:
        result = args.func(args)
        if args.format == "csv":
            text = to_csv(result, config)
        else:
            text = dumps({**result, "config": config})
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HalfspacePrgError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    return EXIT_OK


def main() -> None:
    sys.exit(run())
