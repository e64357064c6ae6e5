"""Reading external transaction logs and fitting the model's input tables to them."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .distmodel import (
    AMOUNT_BINS,
    AMOUNT_STEP,
    MAX_MONTHLY_OPS,
    STORE_BINS,
    DistributionSet,
    normalize,
)
from .errors import ConfigError, EmptyDataError, ParseError
from .generator import TransactionBatch, TransactionRecord
from .stats import MarginalSet, compute_marginals, monthly_ops_bins, store_size_bins

log = logging.getLogger(__name__)

FIELDS = ("day", "card", "hour", "amount", "store")
# accepted header spellings per field
ALIASES = {
    "day": ("day",),
    "card": ("card", "card_id", "user", "user_id"),
    "hour": ("hour",),
    "amount": ("amount", "quantity"),
    "store": ("store", "store_id"),
}


class ErrorBudgetExceeded(ParseError):
    pass


@dataclass
class ParseOptions:
    delimiter: str = ","
    # None: treat the first row as a header iff one of its fields is not numeric
    has_header: bool | None = None
    # field -> column index or header name; None maps by header names or position
    column_map: dict | None = None
    max_errors: int = 0

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")
        if self.column_map is not None:
            missing = [f for f in FIELDS if f not in self.column_map]
            if missing:
                raise ConfigError(f"column_map lacks {', '.join(missing)}")
            cols = [self.column_map[f] for f in FIELDS]
            if len(set(cols)) != len(cols):
                raise ConfigError("column_map indices must be distinct")
            for c in cols:
                if isinstance(c, int) and c < 0:
                    raise ConfigError("column indices must be >= 0")
        if self.max_errors < 0:
            raise ConfigError("max_errors must be >= 0")


def _resolve_columns(options: ParseOptions, header: list[str] | None) -> list[int]:
    names = [h.strip().lower() for h in header] if header is not None else None
    idx = []
    if options.column_map is None:
        if names is not None:
            for f in FIELDS:
                hit = [i for i, n in enumerate(names) if n in ALIASES[f]]
                if not hit:
                    idx = []
                    break
                idx.append(hit[0])
        idx = idx or list(range(len(FIELDS)))
    else:
        for f in FIELDS:
            c = options.column_map[f]
            if isinstance(c, str):
                if names is None or c.strip().lower() not in names:
                    raise ConfigError(f"column {c!r} for {f} not found in header")
                c = names.index(c.strip().lower())
            idx.append(int(c))
    if header is not None and max(idx) >= len(header):
        raise ConfigError(f"column index {max(idx)} beyond the {len(header)} header columns")
    return idx


def _as_int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise ValueError(f"{what} {text!r} is not an integer") from None
        return int(v)


def _numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _chain_first(first, rest):
    yield first
    yield from rest


class TransactionParser:
    """Line parser with an error budget.

    After (or during) iteration, ``errors`` holds the rejected lines,
    ``clamped_amounts`` the number of amounts beyond the top bin and
    ``raw_amounts`` (when ``keep_raw_amounts``) the amounts before snapping.
    """

    def __init__(self, options: ParseOptions | None = None, keep_raw_amounts: bool = False):
        self.options = options or ParseOptions()
        self.errors: list[ParseError] = []
        self.records = 0
        self.clamped_amounts = 0
        self.raw_amounts: list[float] | None = [] if keep_raw_amounts else None

    def _reject(self, line_no, msg, line):
        err = ParseError(line_no, msg, line)
        self.errors.append(err)
        if len(self.errors) > self.options.max_errors:
            raise ErrorBudgetExceeded(line_no, f"{msg} (error budget of "
                                      f"{self.options.max_errors} exhausted)", line)

    def parse(self, stream: TextIO) -> Iterator[TransactionRecord]:
        reader = csv.reader(stream, delimiter=self.options.delimiter)
        header = None
        first = None
        for row in reader:
            if row:
                first = row
                break
        if first is None:
            return
        has_header = self.options.has_header
        if has_header is None:
            has_header = not all(_numeric(c) for c in first)
        if has_header:
            header, rows = first, reader
        else:
            rows = _chain_first(first, reader)
        cols = _resolve_columns(self.options, header)
        need = max(cols) + 1
        for row in rows:
            line_no = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < need:
                self._reject(line_no, f"expected at least {need} fields, got {len(row)}",
                             self.options.delimiter.join(row))
                continue
            try:
                rec, clamped = self._record([row[i].strip() for i in cols])
            except ValueError as e:
                self._reject(line_no, str(e), self.options.delimiter.join(row))
                continue
            self.records += 1
            self.clamped_amounts += clamped
            yield rec

    def _record(self, f: list[str]):
        day = _as_int(f[0], "day")
        card = _as_int(f[1], "card")
        hour = _as_int(f[2], "hour")
        amount = float(f[3])
        store = _as_int(f[4], "store")
        if day < 0:
            raise ValueError(f"day {day} is negative")
        if not 0 <= hour < 24:
            raise ValueError(f"hour {hour} out of range 0..23")
        if card < 0 or store < 0:
            raise ValueError("ids must be non-negative")
        if not math.isfinite(amount) or amount < 0:
            raise ValueError(f"amount {f[3]!r} must be finite and non-negative")
        if self.raw_amounts is not None:
            self.raw_amounts.append(amount)
        b = int(amount // AMOUNT_STEP)
        clamped = b >= AMOUNT_BINS
        b = min(b, AMOUNT_BINS - 1)
        return TransactionRecord(day, card, hour, (b + 0.5) * AMOUNT_STEP, store), int(clamped)


def parse_transactions(stream: TextIO, options: ParseOptions | None = None,
                       errors: list | None = None) -> Iterator[TransactionRecord]:
    """Yield records from delimiter-separated text, amounts snapped to bin midpoints.

    Bad lines become :class:`ParseError` objects appended to ``errors``; once
    more than ``options.max_errors`` have been seen, the last one is raised.
    """
    parser = TransactionParser(options)
    try:
        yield from parser.parse(stream)
    finally:
        if errors is not None:
            errors.extend(parser.errors)


@dataclass
class FitSummary:
    records: int
    cards: int
    stores: int
    window_days: int
    ops_clamped_low: int = 0
    ops_clamped_high: int = 0
    store_clamped_high: int = 0
    weekdays_unobserved: list = field(default_factory=list)

    def to_text(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.__dict__.items())


@dataclass
class FitResult:
    distributions: DistributionSet
    summary: FitSummary


def fit_distributions(transactions, window_days: int, start_day_of_week: int = 0,
                      sort: bool = True) -> FitResult:
    """Estimate the five input tables from observed transactions.

    * hourly, quantity: normalised empirical counts;
    * daily: weekday counts divided by how often each weekday occurs in
      days ``0..window_days-1``, then normalised;
    * num_ops: per-card counts rescaled to 30 days, rounded, clamped to 1..100;
    * num_ops_stores: per-store counts rescaled to 30 days in 20-unit bins,
      clamped into the top bin.
    """
    if window_days <= 0:
        raise ConfigError("window_days must be positive")
    if isinstance(transactions, MarginalSet):
        m = transactions
    else:
        if isinstance(transactions, Iterable) and not isinstance(transactions, (list, tuple,
                                                                             TransactionBatch)):
            transactions = list(transactions)
        if isinstance(transactions, (list, tuple)) and not transactions:
            raise EmptyDataError("no transactions to fit")
        m = compute_marginals(transactions, start_day_of_week, sort=sort)

    if m.last_day >= window_days:
        raise ConfigError(f"data reaches day {m.last_day}, beyond a {window_days}-day window")
    dows = (start_day_of_week + np.arange(window_days)) % 7
    occ = np.bincount(dows, minlength=7).astype(float)
    per_day = np.divide(m.day_of_week, occ, out=np.zeros(7), where=occ > 0)

    cards = m.card_counts[m.card_counts > 0]
    ops_bins, low, high = monthly_ops_bins(cards, window_days)
    stores = m.store_counts[m.store_counts > 0]
    store_bins, store_high = store_size_bins(stores, window_days)
    if high:
        log.warning("%d card(s) above %d monthly operations clamped into the top bin",
                    high, MAX_MONTHLY_OPS)
    if store_high:
        log.warning("%d store(s) clamped into the top size bin", store_high)

    dists = DistributionSet(
        hourly=normalize(m.hour_of_day, "hour"),
        daily=normalize(per_day, "day"),
        quantity=normalize(m.amount_bins, "amount"),
        num_ops=normalize(np.bincount(ops_bins, minlength=MAX_MONTHLY_OPS), "num_ops"),
        num_ops_stores=normalize(np.bincount(store_bins, minlength=STORE_BINS), "store_size"),
    )
    summary = FitSummary(
        records=m.n_transactions, cards=int(cards.size), stores=int(stores.size),
        window_days=window_days, ops_clamped_low=low, ops_clamped_high=high,
        store_clamped_high=store_high,
        weekdays_unobserved=[int(i) for i in np.flatnonzero(occ == 0)],
    )
    return FitResult(dists, summary)
