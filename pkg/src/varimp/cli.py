"""Command-line interface.

Four subcommands cover the workflow end to end:

  score      importance scores for one dataset (vi.csv, vi.json),
  permtest   permutation bias audit of guide or cart scoring (permbias.csv),
  simbench   synthetic benchmark models E0..E5 (trials.csv, summary.csv),
  predvalue  cross-validated MPV/CPV per variable (predvalue.csv).

Every run writes manifest.json (command, flags, seed, version, input
digests, wall time, backend) so results can be reproduced bit for bit.
Exit codes: 0 success, 1 I/O failure, 2 validation failure.
"""

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .backend import backend_name
from .cart import CartConfig, grow_cart, rpart_importance
from .data import DEFAULT_NA_TOKENS, load_csv, permute_response
from .errors import ValidationError, VarimpError
from .importance import raw_scores, report_csv, report_json, score
from .parallel import STREAM_PERMUTE, derive, parallel_map, resolve_threads
from .predvalue import ForestConfig, mpv_cpv, predvalue_csv, score_consistency
from .simbench import BiasReport, run_bias_experiment, summary_csv, trials_csv
from .simbench import overlap_verdict
from .tree import TreeConfig, grow


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_text(path, text) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _na_tokens(raw) -> tuple:
    if raw is None:
        return DEFAULT_NA_TOKENS
    return tuple(raw.split(","))


def _parse_cv(raw) -> tuple:
    """"loo" or "kfold[:k]" -> (scheme, n_folds)."""
    if raw == "loo":
        return "loo", 0
    if raw == "kfold":
        return "kfold", 10
    if raw.startswith("kfold:"):
        tail = raw[len("kfold:"):]
        try:
            k = int(tail)
        except ValueError:
            raise ValidationError(f"bad fold count {tail!r} in --cv")
        return "kfold", k
    raise ValidationError(f"unknown cv scheme {raw!r} (use loo or kfold:K)")


def _read_vi_column(path, names) -> np.ndarray:
    """Pull the VI column out of a score report CSV, aligned to names."""
    import csv

    by_name = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "VI" not in reader.fieldnames:
            raise ValidationError(f"{path}: expected a 'VI' column")
        for row in reader:
            by_name[row["name"]] = float(row["VI"])
    out = np.empty(len(names), dtype=np.float64)
    for k, name in enumerate(names):
        if name not in by_name:
            raise ValidationError(f"{path}: no VI row for variable {name!r}")
        out[k] = by_name[name]
    return out


def _manifest(out_dir, command, flags, seed, inputs, started, threads) -> None:
    payload = {
        "command": command,
        "flags": flags,
        "seed": seed,
        "version": __version__,
        "backend": backend_name(),
        "threads": threads,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    _write_text(f"{out_dir}/manifest.json",
                json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _flags(args) -> dict:
    skip = {"func", "command"}
    out = {}
    for key, value in vars(args).items():
        if key not in skip:
            out[key] = value
    return out


def cmd_score(args) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    ds = load_csv(args.data, args.roles, _na_tokens(args.na))
    report = score(ds, TreeConfig(), B=args.b, alpha=args.alpha,
                   seed=args.seed, threads=threads)
    _write_text(f"{args.out_dir}/vi.csv", report_csv(report))
    _write_text(f"{args.out_dir}/vi.json", report_json(report))
    _manifest(args.out_dir, "score", _flags(args), args.seed,
              [args.data, args.roles], started, threads)
    if report.note:
        print(f"note: {report.note}")
    print(f"wrote {args.out_dir}/vi.csv ({report.m} of "
          f"{len(report.names)} variables flagged important)")
    return 0


def _perm_audit_job(job) -> np.ndarray:
    ds, method, seedseq = job
    rng = np.random.default_rng(seedseq)
    perm = permute_response(ds, rng)
    if method == "guide":
        return raw_scores(grow(perm, TreeConfig()), perm.n_predictors)
    return rpart_importance(grow_cart(perm, CartConfig()))


def cmd_permtest(args) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    if args.j < 2:
        raise ValidationError("--j must be at least 2")
    ds = load_csv(args.data, args.roles, _na_tokens(args.na))
    jobs = [(ds, args.method, derive(args.seed, STREAM_PERMUTE, i))
            for i in range(args.j)]
    rows = np.vstack(parallel_map(_perm_audit_job, jobs, threads))
    means = rows.mean(axis=0)
    ses = rows.std(axis=0, ddof=1) / np.sqrt(args.j)
    report = BiasReport(names=ds.names, method=args.method, model="data",
                        trials=args.j, scores=rows, means=means, ses=ses,
                        overlap=overlap_verdict(means, ses))
    _write_text(f"{args.out_dir}/permbias.csv", summary_csv(report))
    _manifest(args.out_dir, "permtest", _flags(args), args.seed,
              [args.data, args.roles], started, threads)
    print(f"wrote {args.out_dir}/permbias.csv "
          f"(overlap_verdict={'true' if report.overlap else 'false'})")
    return 0


def cmd_simbench(args) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    report = run_bias_experiment(args.method, args.model, args.trials,
                                 n=args.n, B=args.b, seed=args.seed,
                                 threads=threads)
    _write_text(f"{args.out_dir}/trials.csv", trials_csv(report))
    _write_text(f"{args.out_dir}/summary.csv", summary_csv(report))
    _manifest(args.out_dir, "simbench", _flags(args), args.seed, [],
              started, threads)
    print(f"wrote {args.out_dir}/summary.csv "
          f"(overlap_verdict={'true' if report.overlap else 'false'})")
    return 0


def cmd_predvalue(args) -> int:
    started = time.monotonic()
    threads = resolve_threads(args.threads)
    ds = load_csv(args.data, args.roles, _na_tokens(args.na))
    scheme, n_folds = _parse_cv(args.cv)
    config = ForestConfig(n_trees=args.trees, seed=args.seed)
    report = mpv_cpv(ds, config, cv=scheme, n_folds=n_folds)
    text = predvalue_csv(report)
    inputs = [args.data, args.roles]
    if args.vi is not None:
        vi = _read_vi_column(args.vi, ds.names)
        cor_mpv, cor_cpv = score_consistency(vi, report)
        text += (f"# cor_mpv={float(cor_mpv)!r}\n"
                 f"# cor_cpv={float(cor_cpv)!r}\n")
        inputs.append(args.vi)
        print(f"cor(VI, MPV) = {cor_mpv:.4f}, cor(VI, CPV) = {cor_cpv:.4f}")
    _write_text(f"{args.out_dir}/predvalue.csv", text)
    _manifest(args.out_dir, "predvalue", _flags(args), args.seed,
              inputs, started, threads)
    print(f"wrote {args.out_dir}/predvalue.csv")
    return 0


def _add_common(parser, with_data=True) -> None:
    if with_data:
        parser.add_argument("data", help="CSV data file with a header row")
        parser.add_argument("roles", help="roles file (name,role per line)")
        parser.add_argument("--na", default=None,
                            help="comma-separated missing tokens "
                                 "(default: NA and empty)")
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed for all randomness")
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: VIMP_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varimp",
        description="Unbiased variable importance for regression data.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one dataset and flag "
                                     "important variables")
    _add_common(p)
    p.add_argument("--b", type=int, default=300,
                   help="response permutations for bias adjustment")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance level for the threshold")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("permtest", help="null-permutation bias audit "
                                        "of a scoring method")
    _add_common(p)
    p.add_argument("--j", type=int, default=1000,
                   help="number of response permutations")
    p.add_argument("--method", choices=("guide", "cart"), default="guide")
    p.set_defaults(func=cmd_permtest)

    p = sub.add_parser("simbench", help="synthetic bias benchmark "
                                        "(models E0..E5)")
    _add_common(p, with_data=False)
    p.add_argument("--model", required=True,
                   choices=("E0", "E1", "E2", "E3", "E4", "E5"))
    p.add_argument("--trials", type=int, required=True,
                   help="number of simulated datasets")
    p.add_argument("--n", type=int, default=400, help="rows per dataset")
    p.add_argument("--method", choices=("guide", "cart"), default="guide")
    p.add_argument("--b", type=int, default=300,
                   help="permutations per trial (guide only)")
    p.set_defaults(func=cmd_simbench)

    p = sub.add_parser("predvalue", help="marginal/conditional predictive "
                                         "value per variable")
    _add_common(p)
    p.add_argument("--cv", default="kfold:10",
                   help="cross-validation scheme: loo or kfold:K")
    p.add_argument("--trees", type=int, default=100,
                   help="trees per forest")
    p.add_argument("--vi", default=None,
                   help="vi.csv from the score command; adds VI/MPV/CPV "
                        "correlations")
    p.set_defaults(func=cmd_predvalue)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> int:
    """Console entry point with the exit-code contract."""
    try:
        return main()
    except VarimpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(entry())
