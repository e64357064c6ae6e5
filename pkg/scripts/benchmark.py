#!/usr/bin/env python3
"""Generation throughput: records per second, in memory and streamed to CSV."""

import argparse
import os
import resource
import tempfile
import time

from txsynth.generator import GenerationConfig, iter_batches
from txsynth.records import write_transactions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cards", type=int, default=2_140_000)
    ap.add_argument("--stores", type=int, default=100_000)
    ap.add_argument("--days", type=int, default=30)
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--no-write", action="store_true", help="skip the CSV pass")
    args = ap.parse_args()

    cfg = GenerationConfig(args.cards, args.stores, args.days, seed=0)
    for w in args.workers:
        t0 = time.perf_counter()
        n = sum(len(b) for b in iter_batches(cfg, workers=w))
        dt = time.perf_counter() - t0
        print(f"generate workers={w}: {n} records, {dt:.2f}s, {n / dt / 1e6:.2f} M/s")
    if not args.no_write:
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "tx.csv")
            t0 = time.perf_counter()
            n = write_transactions(iter_batches(cfg, workers=max(args.workers)), path)
            dt = time.perf_counter() - t0
            size = os.path.getsize(path) / 2**20
        print(f"generate+write: {n} records, {size:.0f} MiB, {dt:.2f}s, {n / dt / 1e6:.2f} M/s")
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    print(f"peak RSS: {rss:.0f} MiB")


if __name__ == "__main__":
    main()
