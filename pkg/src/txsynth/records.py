"""Transaction file format: ``day,card,hour,amount,store`` with one-decimal amounts."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd
import polars as pl

from .errors import ConfigError, DataError, EmptyDataError
from .generator import TransactionBatch

HEADER = ("day", "card", "hour", "amount", "store")
_DTYPES = {"day": "int64", "card": "int64", "hour": "int64",
           "amount": "float64", "store": "int64"}


def _frame(batch: TransactionBatch) -> pl.DataFrame:
    return pl.DataFrame({"day": batch.day, "card": batch.card, "hour": batch.hour,
                         "amount": batch.amount, "store": batch.store})


def write_transactions(batches: Iterable[TransactionBatch], path) -> int:
    """Stream batches to ``path``; returns the number of records written.

    A header line is always written, so an empty run still yields a valid file.
    """
    n = 0
    with open(path, "wb") as fh:
        fh.write((",".join(HEADER) + "\n").encode())
        for batch in batches:
            if len(batch) == 0:
                continue
            _frame(batch).write_csv(fh, include_header=False, float_precision=1)
            n += len(batch)
    return n


def check_batch(batch: TransactionBatch) -> None:
    """Vectorised record invariants; raises DataError on the first violation."""
    if batch.day.size == 0:
        return
    if batch.day.min() < 0:
        raise DataError("negative day in transaction data")
    if batch.hour.min() < 0 or batch.hour.max() > 23:
        raise DataError("hour outside 0..23 in transaction data")
    if batch.card.min() < 0 or batch.store.min() < 0:
        raise DataError("negative id in transaction data")
    if not np.all(np.isfinite(batch.amount)) or batch.amount.min() < 0:
        raise DataError("amounts must be finite and non-negative")


def read_transactions(path, batch_size: int = 1 << 20) -> Iterator[TransactionBatch]:
    """Read a file written by :func:`write_transactions` in column batches.

    This is the fast path for well-formed files; use
    :func:`txsynth.ingest.parse_transactions` for arbitrary logs.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline().decode(errors="replace").strip()
    if not first:
        raise EmptyDataError(f"{path} is empty")
    if tuple(c.strip() for c in first.split(",")) != HEADER:
        raise ConfigError(f"{path}: expected header {','.join(HEADER)}, got {first!r}")
    try:
        chunks = pd.read_csv(path, dtype=_DTYPES, chunksize=batch_size, engine="c")
        for df in chunks:
            if df.isna().to_numpy().any():
                raise DataError(f"{path}: missing fields")
            b = TransactionBatch(*(df[c].to_numpy() for c in HEADER))
            check_batch(b)
            yield b
    except (ValueError, pd.errors.ParserError) as e:
        if isinstance(e, DataError):
            raise
        raise DataError(f"{path}: malformed transaction file: {e}") from None
