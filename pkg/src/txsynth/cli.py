"""Command-line entry point: ``txsynth {generate,validate,fit,inspect}``.

Exit codes: 0 success, 1 validation failed, 2 bad configuration or usage,
3 bad or empty data, 4 file-system error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .defaults import default_distributions
from .distmodel import DistributionSet, cpd, load_distributions, save_distributions
from .entities import dump_cards, dump_stores
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    EmptyDataError,
    OrderError,
    ParseError,
    TxSynthError,
)
from .generator import BurstConfig, GenerationConfig, SwapConfig, build_populations, iter_batches
from .ingest import ParseOptions, TransactionParser, fit_distributions
from .records import HEADER, read_transactions, write_transactions
from .stats import Thresholds, compute_marginals, summarize, validate, write_histogram

log = logging.getLogger("txsynth")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4

CONFIG_DIR_ENV = "TXSYNTH_CONFIG_DIR"
DEFAULT_CONFIG_NAME = "distributions.json"


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def resolve_distributions(path: str | None) -> tuple[DistributionSet, str]:
    """Explicit path, then ``$TXSYNTH_CONFIG_DIR``, then the built-in tables.

    A bare file name that does not exist locally is also looked up in the
    config directory.
    """
    cfg_dir = os.environ.get(CONFIG_DIR_ENV)
    if path:
        p = Path(path)
        if not p.exists() and cfg_dir and not p.is_absolute():
            p = Path(cfg_dir) / path
        if not p.exists():
            raise CliError(EXIT_CONFIG, f"distribution config not found: {path}")
        return load_distributions(p), str(p)
    if cfg_dir and (Path(cfg_dir) / DEFAULT_CONFIG_NAME).exists():
        p = Path(cfg_dir) / DEFAULT_CONFIG_NAME
        return load_distributions(p), str(p)
    return default_distributions(), "<built-in>"


def config_from_args(args) -> GenerationConfig:
    if getattr(args, "manifest", None):
        try:
            manifest = json.loads(Path(args.manifest).read_text())
        except FileNotFoundError:
            raise CliError(EXIT_CONFIG, f"manifest not found: {args.manifest}") from None
        except json.JSONDecodeError as e:
            raise CliError(EXIT_CONFIG, f"manifest {args.manifest} is not valid JSON: {e}") from None
        if "config" not in manifest:
            raise CliError(EXIT_CONFIG, f"manifest {args.manifest} has no config section")
        return GenerationConfig.from_dict(manifest["config"])
    dists, _ = resolve_distributions(args.config)
    sigma = args.burst_sigma
    return GenerationConfig(
        n_cards=args.cards,
        n_stores=args.stores,
        n_days=args.days,
        seed=args.seed,
        distributions=dists,
        burst=BurstConfig(enabled=sigma > 0, overdispersion=sigma, debt_decay=args.burst_decay),
        swap=SwapConfig(p_swap=args.swap_prob, similarity_ratio=args.swap_ratio),
        start_day_of_week=args.start_dow,
        amount_jitter=args.amount_jitter,
    )


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, config: GenerationConfig, output, records: int) -> dict:
    manifest = {
        "tool": "txsynth",
        "version": __version__,
        "seed": int(config.seed),
        "config_hash": config.content_hash(),
        "record_count": records,
        "output": str(output),
        "output_sha256": _sha256(output),
        "config": config.to_dict(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


# -- commands -------------------------------------------------------------------

def run_generate(args) -> int:
    config = config_from_args(args)
    out = Path(args.output)
    n = write_transactions(iter_batches(config, workers=args.workers), out)
    manifest_path = Path(args.manifest_out or f"{out}.manifest.json")
    write_manifest(manifest_path, config, out, n)
    if args.dump_population:
        d = Path(args.dump_population)
        d.mkdir(parents=True, exist_ok=True)
        cards, stores = build_populations(config)
        dump_cards(cards, d / "cards.csv")
        dump_stores(stores, d / "stores.csv")
    print(f"records: {n}")
    print(f"output: {out}")
    print(f"manifest: {manifest_path}")
    print(f"config_hash: {config.content_hash()}")
    return EXIT_OK


def load_marginals(path, start_dow: int = 0):
    """Marginals of a transaction file.

    Files in the native format stream through the fast reader; anything else
    (or a native file that is not day-ordered) goes through the line parser
    and is sorted in memory.
    """
    path = Path(path)
    if not path.exists():
        raise CliError(EXIT_IO, f"input not found: {path}")
    with open(path, "rb") as fh:
        first = fh.readline().decode(errors="replace").strip()
    if not first:
        raise EmptyDataError(f"{path} is empty")
    if tuple(c.strip() for c in first.split(",")) == HEADER:
        try:
            return compute_marginals(read_transactions(path), start_dow)
        except OrderError:
            log.info("%s is not day-ordered; sorting in memory", path)
    parser = TransactionParser(ParseOptions())
    with open(path, newline="") as fh:
        records = list(parser.parse(fh))
    if not records:
        raise EmptyDataError(f"{path} holds no transactions")
    return compute_marginals(records, start_dow, sort=True)


def _write_panels(m, directory, n_days=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    panels = {
        "ops_per_card": m.ops_per_card_monthly(n_days),
        "amount": m.amount_bins,
        "day_of_week": m.day_of_week,
        "hour_of_day": m.hour_of_day,
        "inter_tx_gaps": m.inter_tx_gaps,
        "ops_per_store": m.ops_per_store(n_days),
    }
    for name, h in panels.items():
        write_histogram(d / f"{name}.tsv", h)
    return list(panels)


def run_validate(args) -> int:
    config = config_from_args(args)
    m = load_marginals(args.input, config.start_day_of_week)
    th = Thresholds(**{k: v for k, v in (("hour_of_day", args.tv_hour), ("day_of_week", args.tv_day),
                                          ("amount", args.tv_amount), ("ops_per_card", args.tv_ops_card),
                                          ("ops_per_store", args.tv_ops_store),
                                          ("inter_tx_gaps", args.tv_gaps)) if v is not None})
    report = validate(m, config, th)
    text = report.to_text()
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text)
    if args.histograms:
        report.write_histograms(args.histograms)
    if not report.passed:
        print("failing marginals: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _parse_columns(mapping: str | None):
    if not mapping:
        return None
    out = {}
    for part in mapping.split(","):
        if "=" not in part:
            raise CliError(EXIT_CONFIG, f"bad column mapping {part!r}; use field=index")
        k, v = (x.strip() for x in part.split("=", 1))
        out[k] = int(v) if v.isdigit() else v
    return out


def run_fit(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise CliError(EXIT_IO, f"input not found: {path}")
    header = {"auto": None, "yes": True, "no": False}[args.header]
    opts = ParseOptions(delimiter=args.delimiter, has_header=header,
                        column_map=_parse_columns(args.columns), max_errors=args.max_errors)
    parser = TransactionParser(opts, keep_raw_amounts=bool(args.amount_cpd))
    with open(path, newline="") as fh:
        records = list(parser.parse(fh))
    if not records:
        raise EmptyDataError(f"{path} holds no parseable transactions")
    window = args.window_days or (max(r.day for r in records) + 1)
    result = fit_distributions(records, window, args.start_dow)
    save_distributions(result.distributions, args.output)
    if args.amount_cpd:
        grid = [25.0 * i for i in range(51)]
        with open(args.amount_cpd, "w") as fh:
            fh.write("amount\tcpd\n")
            for v, p in cpd(parser.raw_amounts, grid):
                fh.write(f"{v:g}\t{p:.10g}\n")
    sys.stdout.write(result.summary.to_text())
    print(f"parse_errors: {len(parser.errors)}")
    print(f"amounts_clamped: {parser.clamped_amounts}")
    for e in parser.errors[:20]:
        print(f"  {e}", file=sys.stderr)
    print(f"output: {args.output}")
    return EXIT_OK


def run_inspect(args) -> int:
    m = load_marginals(args.input, args.start_dow)
    sys.stdout.write(summarize(m))
    if args.histograms:
        _write_panels(m, args.histograms)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------

def _model_args(p, with_manifest=True):
    p.add_argument("--config", help="distribution config (JSON); "
                   f"default ${CONFIG_DIR_ENV}/{DEFAULT_CONFIG_NAME} or built-in tables")
    if with_manifest:
        p.add_argument("--manifest", help="replay the exact configuration of a previous run")
    p.add_argument("--cards", type=int, default=2000)
    p.add_argument("--stores", type=int, default=1000)
    p.add_argument("--days", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burst-sigma", type=float, default=0.0,
                   help="log-normal spread of daily activity; > 0 enables bursts")
    p.add_argument("--burst-decay", type=float, default=0.1,
                   help="fraction of burst debt worked off per day")
    p.add_argument("--swap-prob", type=float, default=0.0)
    p.add_argument("--swap-ratio", type=float, default=2.0)
    p.add_argument("--start-dow", type=int, default=0, help="weekday of day 0, 0 = Monday")
    p.add_argument("--amount-jitter", action="store_true",
                   help="uniform amounts within each 25-unit bin instead of midpoints")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="txsynth", description="Synthetic card transaction generator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic transaction file and its manifest")
    _model_args(g)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--manifest-out", help="manifest path (default OUTPUT.manifest.json)")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--dump-population", metavar="DIR", help="also write cards.csv and stores.csv")
    g.set_defaults(func=run_generate)

    v = sub.add_parser("validate", help="compare a transaction file with a configuration")
    v.add_argument("input")
    _model_args(v)
    v.add_argument("--report", help="also write the report to this file")
    v.add_argument("--histograms", metavar="DIR", help="write per-marginal histogram data")
    for flag in ("hour", "day", "amount", "ops-card", "ops-store", "gaps"):
        v.add_argument(f"--tv-{flag}", type=float, default=None)
    v.set_defaults(func=run_validate)

    f = sub.add_parser("fit", help="fit a distribution config to a transaction log")
    f.add_argument("input")
    f.add_argument("-o", "--output", required=True)
    f.add_argument("--window-days", type=int, default=None,
                   help="observation window (default: last day + 1)")
    f.add_argument("--start-dow", type=int, default=0)
    f.add_argument("--delimiter", default=",")
    f.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    f.add_argument("--columns", help="e.g. day=0,card=1,hour=2,amount=3,store=4")
    f.add_argument("--max-errors", type=int, default=0)
    f.add_argument("--amount-cpd", metavar="FILE", help="write the pre-binning amount CPD")
    f.set_defaults(func=run_fit)

    i = sub.add_parser("inspect", help="summarise a transaction file")
    i.add_argument("input")
    i.add_argument("--start-dow", type=int, default=0)
    i.add_argument("--histograms", metavar="DIR")
    i.set_defaults(func=run_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (EmptyDataError, ParseError, OrderError, DataError) as e:
        print(f"data error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DomainError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TxSynthError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
