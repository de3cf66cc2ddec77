"""Command-line driver: ``ggsim {verify,improvement,grow,sweep,export}``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from . import verify
from .config import ConfigError, build_config, parse_pairs
from .emission import adaptive_expected_success, naive_window_mass
from .engine import record_growth, run_experiment, write_stats_json, write_trials_csv
from .ledger import LedgerError, from_snapshot, to_dot

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2

# reference values quoted for the headline comparison
REFERENCE_NAIVE = 0.04
REFERENCE_ADAPTIVE = 0.24
REFERENCE_FACTOR = 6.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(args, require=()):
    values = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        values.update(parse_pairs(text))
    for item in getattr(args, "set", None) or []:
        values.update(parse_pairs(item))
    return build_config(values, require)


def _write_run(stats, out: Path, csv_out: bool = True) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_stats_json(stats, out / "stats.json")
    if csv_out:
        write_trials_csv(stats, out / "trials.csv")


def cmd_verify(args) -> int:
    results = verify.run_all(n_ledgers=args.ledgers, seed=args.seed)
    print(verify.format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_improvement(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    rates = {}
    for mode in ("naive", "adaptive"):
        c = dataclasses.replace(cfg, policy=dataclasses.replace(cfg.policy, mode=mode))
        stats = run_experiment(c, keep_records=not args.no_trials, workers=args.workers)
        _write_run(stats, out / mode, not args.no_trials)
        rates[mode] = stats
        lo, hi = stats.ci95
        print(f"{mode:9s} rate {stats.rate:.6f}  ci95 [{lo:.6f}, {hi:.6f}]  quadrature {stats.expected_rate:.6f}"
              f"  ({stats.metric}, {stats.trials} trials)")
    naive, adaptive = rates["naive"].rate, rates["adaptive"].rate
    ratio = adaptive / naive if naive > 0 else float("inf")
    print(f"adaptive/naive ratio {ratio:.3f}")
    print(f"reference: naive {REFERENCE_NAIVE:.2f}, adaptive {REFERENCE_ADAPTIVE:.2f}, factor {REFERENCE_FACTOR:.0f}")
    return EXIT_OK


def cmd_grow(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    stats = run_experiment(cfg, keep_records=not args.no_trials, workers=args.workers, backend="ledger")
    _write_run(stats, out, not args.no_trials)
    snaps = record_growth(cfg)
    for k, g in enumerate(snaps):
        (out / f"step_{k}.dot").write_text(to_dot(g, name=f"step_{k}"))
    lo, hi = stats.ci95
    print(f"{cfg.target}: rate {stats.rate:.6f}  ci95 [{lo:.6f}, {hi:.6f}]  ({stats.trials} trials)")
    print(f"wrote {len(snaps)} DOT snapshots of trial 0 to {out}")
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ratios, epsilons = _floats(args.ratios), _floats(args.epsilons)
    rows = []
    for r in ratios:
        model = dataclasses.replace(cfg.model, rate_ratio=r)
        for eps in epsilons:
            if args.method == "quadrature":
                naive = naive_window_mass(model, eps)[2]
                adaptive = adaptive_expected_success(model)
            else:
                pol = dataclasses.replace(cfg.policy, epsilon=eps)
                runs = {}
                for mode in ("naive", "adaptive"):
                    c = dataclasses.replace(cfg, model=model, policy=dataclasses.replace(pol, mode=mode))
                    runs[mode] = run_experiment(c, workers=args.workers).rate
                naive, adaptive = runs["naive"], runs["adaptive"]
            ratio = adaptive / naive if naive > 0 else float("inf")
            rows.append((r, eps, naive, adaptive, ratio))
            print(f"rate_ratio {r:g}  epsilon {eps:g}  naive {naive:.6f}  adaptive {adaptive:.6f}  ratio {ratio:.3f}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rate_ratio", "epsilon", "naive_rate", "adaptive_rate", "ratio"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        text = Path(args.snapshot).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read snapshot: {exc}") from None
    dot = to_dot(from_snapshot(text))
    if args.output:
        Path(args.output).write_text(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ggsim", description="Generalized graph-state growth under monitored errors.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(sp, out_default):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="worker processes for trial chunks")

    v = sub.add_parser("verify", help="oracle-equivalence and formula-grid checks")
    v.add_argument("--ledgers", type=int, default=500, help="random ledgers per strategy operation")
    v.add_argument("--seed", type=int, default=7)
    v.set_defaults(func=cmd_verify)

    im = sub.add_parser("improvement", help="naive versus adaptive success rates")
    experiment_args(im, "improvement")
    im.add_argument("--no-trials", action="store_true", help="skip trials.csv")
    im.set_defaults(func=cmd_improvement)

    g = sub.add_parser("grow", help="ghz/chain growth with DOT snapshots of the first trial")
    experiment_args(g, "grow")
    g.add_argument("--no-trials", action="store_true", help="skip trials.csv")
    g.set_defaults(func=cmd_grow)

    sw = sub.add_parser("sweep", help="grid over rate_ratio and epsilon")
    experiment_args(sw, "sweep")
    sw.add_argument("--ratios", default="1.0,1.05,1.1,1.2,1.21,1.5")
    sw.add_argument("--epsilons", default="1e-5")
    sw.add_argument("--method", choices=("mc", "quadrature"), default="mc")
    sw.set_defaults(func=cmd_sweep)

    ex = sub.add_parser("export", help="ledger snapshot to DOT")
    ex.add_argument("snapshot")
    ex.add_argument("-o", "--output")
    ex.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, LedgerError) as exc:
        print(f"ggsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
