"""Empirical marginals of a transaction stream and their comparison with references.

Six marginals are tracked: operations per card, amount bins, day of week,
hour of day, gaps between consecutive operations of the same card (hours),
and operations per store. Accumulation is one pass over day-ordered batches;
state is a handful of per-card / per-store arrays, so memory depends on the
population size only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import stats as sps

from .distmodel import (
    AMOUNT_BINS,
    MAX_MONTHLY_OPS,
    STORE_BINS,
    STORE_STEP,
    DistributionTable,
    amount_to_bin,
)
from .errors import DomainError, EmptyDataError, OrderError
from .generator import (
    MONTH_DAYS,
    GenerationConfig,
    TransactionBatch,
    build_populations,
    day_factors,
    expected_total,
    iter_batches,
)

MAX_ID = 1 << 28
REPLICA_SEED_XOR = 0x9E3779B97F4A7C15


def _grow(a: np.ndarray, size: int, fill=0) -> np.ndarray:
    if size <= a.size:
        return a
    if size > MAX_ID:
        raise DomainError(f"ids must be below {MAX_ID}; remap sparse ids first")
    out = np.full(max(size, 2 * a.size), fill, dtype=a.dtype)
    out[: a.size] = a
    return out


def _add_bincount(acc: np.ndarray, idx: np.ndarray, weights=None) -> np.ndarray:
    bc = np.bincount(idx, weights=weights)
    acc = _grow(acc, bc.size)
    acc[: bc.size] += bc
    return acc


def monthly_ops_bins(counts: np.ndarray, window_days: int):
    """Map per-card window counts to monthly-ops bins 0..99.

    Counts are rescaled to a 30-day month and rounded; values are clamped to
    1..100. Returns ``(bins, n_clamped_low, n_clamped_high)``.
    """
    if window_days <= 0:
        raise DomainError("window_days must be positive")
    monthly = np.floor(np.asarray(counts, float) * (MONTH_DAYS / window_days) + 0.5)
    low = int(np.count_nonzero(monthly < 1))
    high = int(np.count_nonzero(monthly > MAX_MONTHLY_OPS))
    return np.clip(monthly, 1, MAX_MONTHLY_OPS).astype(np.int64) - 1, low, high


def store_size_bins(counts: np.ndarray, window_days: int):
    """Per-store window counts -> 20-unit monthly bins 0..49 (top bin absorbs the rest)."""
    if window_days <= 0:
        raise DomainError("window_days must be positive")
    monthly = np.asarray(counts, float) * (MONTH_DAYS / window_days)
    bins = np.floor(monthly / STORE_STEP).astype(np.int64)
    high = int(np.count_nonzero(bins >= STORE_BINS))
    return np.minimum(bins, STORE_BINS - 1), high


@dataclass
class MarginalSet:
    n_transactions: int
    total_amount: float
    first_day: int
    last_day: int
    start_day_of_week: int
    card_counts: np.ndarray  # per card id, 0 for unseen ids
    store_counts: np.ndarray
    amount_bins: np.ndarray  # 50
    day_of_week: np.ndarray  # 7, Monday first
    day_of_week_amount: np.ndarray
    hour_of_day: np.ndarray  # 24
    hour_of_day_amount: np.ndarray
    inter_tx_gaps: np.ndarray  # index = gap in hours
    new_repeating: np.ndarray  # rows (day, new, repeating)

    @property
    def window_days(self) -> int:
        return self.last_day - self.first_day + 1

    @property
    def ops_per_card(self) -> np.ndarray:
        """Number of active cards with k operations, indexed by k."""
        c = self.card_counts[self.card_counts > 0]
        return np.bincount(c)

    def ops_per_card_monthly(self, window_days: int | None = None) -> np.ndarray:
        c = self.card_counts[self.card_counts > 0]
        bins, _, _ = monthly_ops_bins(c, window_days or self.window_days)
        return np.bincount(bins, minlength=MAX_MONTHLY_OPS)

    def ops_per_store(self, window_days: int | None = None) -> np.ndarray:
        c = self.store_counts[self.store_counts > 0]
        bins, _ = store_size_bins(c, window_days or self.window_days)
        return np.bincount(bins, minlength=STORE_BINS)

    def profile(self, name: str, weighting: str = "count") -> np.ndarray:
        """Normalised day-of-week or hour-of-day profile."""
        if name not in ("day_of_week", "hour_of_day"):
            raise DomainError(f"no weighted profile for {name}")
        attr = name if weighting == "count" else f"{name}_amount"
        h = getattr(self, attr)
        return h / h.sum()

    def new_fraction(self) -> np.ndarray:
        """Per-day share of active cards that were idle the day before (days with activity)."""
        nr = self.new_repeating
        act = nr[:, 1] + nr[:, 2]
        keep = act > 0
        return nr[keep, 1] / act[keep]


class MarginalAccumulator:
    """Streaming builder for :class:`MarginalSet`.

    Batches must arrive in non-decreasing day order; a day may span batches.
    """

    def __init__(self, start_day_of_week: int = 0):
        self.start_dow = start_day_of_week
        self.n = 0
        self.total_amount = 0.0
        self.card_counts = np.zeros(1024, np.int64)
        self.store_counts = np.zeros(1024, np.int64)
        self.last_ts = np.full(1024, -1, np.int64)
        self.last_day_active = np.full(1024, -2, np.int64)
        self.amount_bins = np.zeros(AMOUNT_BINS, np.int64)
        self.dow = np.zeros(7, np.int64)
        self.dow_amount = np.zeros(7)
        self.hour = np.zeros(24, np.int64)
        self.hour_amount = np.zeros(24)
        self.gaps = np.zeros(24, np.int64)
        self.nr_rows: list[tuple[int, int, int]] = []
        self.first_day: int | None = None
        self.current_day: int | None = None
        self._pending: list[TransactionBatch] = []

    def add(self, batch: TransactionBatch) -> None:
        if len(batch) == 0:
            return
        d = batch.day
        if np.any(d[1:] < d[:-1]) or (self.current_day is not None and d[0] < self.current_day):
            raise OrderError("transactions must be ordered by day")
        if self.first_day is None:
            self.first_day = int(d[0])
        last = int(d[-1])
        cut = int(np.searchsorted(d, last, side="left"))
        if cut > 0 or (self.current_day is not None and last > self.current_day):
            # every day before `last` is complete
            self._flush(self._pending + [batch.slice(0, cut)])
            self._pending = []
        self._pending.append(batch.slice(cut, None))
        self.current_day = last

    def _flush(self, batches: list[TransactionBatch]) -> None:
        b = TransactionBatch.concat(batches)
        if len(b) == 0:
            return
        # per-day processing keeps gap and new/repeating logic exact
        days = b.day
        bounds = np.flatnonzero(np.diff(days)) + 1
        for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, days.size]):
            self._day(int(days[lo]), b.card[lo:hi], b.hour[lo:hi], b.amount[lo:hi], b.store[lo:hi])

    def _day(self, day, card, hour, amount, store) -> None:
        n = card.size
        self.n += n
        self.total_amount += float(amount.sum())
        self.card_counts = _add_bincount(self.card_counts, card)
        self.store_counts = _add_bincount(self.store_counts, store)
        self.amount_bins += np.bincount(amount_to_bin(amount), minlength=AMOUNT_BINS)
        dow = (self.start_dow + day) % 7
        self.dow[dow] += n
        self.dow_amount[dow] += float(amount.sum())
        self.hour += np.bincount(hour, minlength=24)
        self.hour_amount += np.bincount(hour, weights=amount, minlength=24)

        # gaps between consecutive operations of the same card
        order = np.lexsort((hour, card))
        c = card[order]
        ts = day * 24 + hour[order]
        size = int(c[-1]) + 1
        self.last_ts = _grow(self.last_ts, size, -1)
        self.last_day_active = _grow(self.last_day_active, size, -2)
        starts = np.r_[True, c[1:] != c[:-1]]
        within = np.diff(ts)[~starts[1:]]
        first_idx = np.flatnonzero(starts)
        ends = np.r_[first_idx[1:] - 1, c.size - 1]
        uniq = c[first_idx]
        prev = self.last_ts[uniq]
        seen = prev >= 0
        across = ts[first_idx][seen] - prev[seen]
        g = np.concatenate([within, across])
        if g.size:
            self.gaps = _add_bincount(self.gaps, g)
        self.last_ts[uniq] = ts[ends]

        # new vs repeating; idle days in between are recorded as (0, 0)
        if self.nr_rows:
            for idle in range(self.nr_rows[-1][0] + 1, day):
                self.nr_rows.append((idle, 0, 0))
        repeating = int(np.count_nonzero(self.last_day_active[uniq] == day - 1))
        self.nr_rows.append((day, uniq.size - repeating, repeating))
        self.last_day_active[uniq] = day

    def finish(self) -> MarginalSet:
        if self._pending:
            self._flush(self._pending)
            self._pending = []
        if self.n == 0:
            raise EmptyDataError("no transactions to analyse")
        return MarginalSet(
            n_transactions=self.n,
            total_amount=self.total_amount,
            first_day=int(self.first_day),
            last_day=int(self.current_day),
            start_day_of_week=self.start_dow,
            card_counts=self.card_counts[: _used(self.card_counts)].copy(),
            store_counts=self.store_counts[: _used(self.store_counts)].copy(),
            amount_bins=self.amount_bins.copy(),
            day_of_week=self.dow.copy(),
            day_of_week_amount=self.dow_amount.copy(),
            hour_of_day=self.hour.copy(),
            hour_of_day_amount=self.hour_amount.copy(),
            inter_tx_gaps=self.gaps[: _used(self.gaps)].copy(),
            new_repeating=np.array(self.nr_rows, dtype=np.int64).reshape(-1, 3),
        )


def _used(a: np.ndarray) -> int:
    nz = np.flatnonzero(a)
    return int(nz[-1]) + 1 if nz.size else 0


def _as_batches(transactions, sort: bool) -> Iterable[TransactionBatch]:
    if isinstance(transactions, TransactionBatch):
        transactions = [transactions]
    elif isinstance(transactions, (list, tuple)) and transactions and \
            not isinstance(transactions[0], TransactionBatch):
        transactions = [TransactionBatch.from_records(transactions)]
    if not sort:
        return transactions
    b = TransactionBatch.concat(list(transactions))
    return [b.take(np.argsort(b.day, kind="stable"))]


def compute_marginals(transactions, start_day_of_week: int = 0, sort: bool = False) -> MarginalSet:
    """All six marginals plus new/repeating counts from a record stream.

    ``transactions`` is an iterable of :class:`TransactionBatch`, a list of
    records, or a single batch. Streams must be day-ordered unless ``sort`` is
    set, which materialises and sorts them first.
    """
    acc = MarginalAccumulator(start_day_of_week)
    for batch in _as_batches(transactions, sort):
        acc.add(batch)
    return acc.finish()


def new_vs_repeating(transactions, sort: bool = True) -> dict[int, tuple[int, int]]:
    """``{day: (new, repeating)}`` for every day from the first to the last active one."""
    if isinstance(transactions, (list, tuple)) and not transactions:
        return {}
    m = compute_marginals(transactions, sort=sort)
    return {int(d): (int(n), int(r)) for d, n, r in m.new_repeating}


def compare(empirical, reference) -> tuple[float, float]:
    """Total-variation and Kolmogorov-Smirnov distances between two binned laws.

    Both sides are normalised first; KS uses cumulative sums at bin edges.
    """
    p = np.asarray(empirical, dtype=np.float64).ravel()
    q = np.asarray(reference.weights if isinstance(reference, DistributionTable) else reference,
                   dtype=np.float64).ravel()
    if p.size != q.size:
        raise DomainError(f"bin mismatch: {p.size} vs {q.size}")
    if p.sum() <= 0 or q.sum() <= 0:
        raise EmptyDataError("cannot compare an empty histogram")
    p = p / p.sum()
    q = q / q.sum()
    tv = 0.5 * float(np.abs(p - q).sum())
    ks = float(np.max(np.abs(np.cumsum(p) - np.cumsum(q))))
    return min(tv, 1.0), min(ks, 1.0)


def has_daily_peaks(gaps: np.ndarray, centres=(24, 48), width: int = 4) -> dict[int, bool]:
    """Is gap bin ``c`` above every bin within ``width`` hours on either side?"""
    g = np.asarray(gaps)
    out = {}
    for c in centres:
        if c + width >= g.size:
            out[c] = False
            continue
        neigh = np.r_[g[c - width:c], g[c + 1:c + width + 1]]
        out[c] = bool(g[c] > neigh.max())
    return out


# -- references ---------------------------------------------------------------

def day_of_week_reference(config: GenerationConfig) -> np.ndarray:
    """Expected weekday shares over the configured window (weights x occurrences)."""
    dows = (config.start_day_of_week + np.arange(config.n_days)) % 7
    occ = np.bincount(dows, minlength=7)
    ref = config.distributions.daily.weights * occ
    return ref / ref.sum()


def ops_per_card_reference(expected_monthly_ops: np.ndarray, config: GenerationConfig) -> np.ndarray:
    """Monthly-ops bin law of active cards implied by the realised activities.

    Each card's window count is Poisson with mean ``E/30 * sum(day factors)``;
    zero counts are unobservable, and the rest are rescaled to 30 days exactly
    as :func:`monthly_ops_bins` does.
    """
    factors = day_factors(config.distributions.daily)
    dows = (config.start_day_of_week + np.arange(config.n_days)) % 7
    scale = float(factors[dows].sum()) / MONTH_DAYS
    values, mult = np.unique(expected_monthly_ops, return_counts=True)
    lam_max = float(values.max()) * scale
    kmax = int(lam_max + 12 * np.sqrt(lam_max) + 30)
    k = np.arange(1, kmax + 1)
    bins, _, _ = monthly_ops_bins(k, config.n_days)
    ref = np.zeros(MAX_MONTHLY_OPS)
    for e, w in zip(values, mult):
        if e <= 0:
            continue
        pmf = sps.poisson.pmf(k, e * scale)
        ref += w * np.bincount(bins, weights=pmf, minlength=MAX_MONTHLY_OPS)
    return ref / ref.sum()


# -- validation ---------------------------------------------------------------

MARGINALS = ("ops_per_card", "amount", "day_of_week", "hour_of_day", "inter_tx_gaps", "ops_per_store")


@dataclass(frozen=True)
class Thresholds:
    hour_of_day: float = 0.05
    day_of_week: float = 0.05
    amount: float = 0.05
    ops_per_card: float = 0.07
    ops_per_store: float = 0.10  # finite-size allowance
    inter_tx_gaps: float = 0.10


@dataclass
class MarginalCheck:
    name: str
    tv_distance: float
    ks_statistic: float
    sample_size: int
    reference_size: int
    threshold: float
    empirical: np.ndarray = field(repr=False)
    reference: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.tv_distance < self.threshold


@dataclass
class ValidationReport:
    checks: dict[str, MarginalCheck]
    n_transactions: int
    expected_transactions: float
    daily_peaks: dict[int, bool]
    mean_new_fraction: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list[str]:
        return [n for n, c in self.checks.items() if not c.passed]

    def to_text(self) -> str:
        lines = [
            f"transactions: {self.n_transactions}",
            f"expected_transactions: {self.expected_transactions:.1f}",
        ]
        for name, c in self.checks.items():
            lines += [
                f"{name}.tv_distance: {c.tv_distance:.6f}",
                f"{name}.ks_statistic: {c.ks_statistic:.6f}",
                f"{name}.sample_size: {c.sample_size}",
                f"{name}.threshold: {c.threshold}",
                f"{name}.passed: {str(c.passed).lower()}",
            ]
        for h, ok in self.daily_peaks.items():
            lines.append(f"inter_tx_gaps.peak_{h}h: {str(ok).lower()}")
        lines.append(f"new_cards.mean_daily_fraction: {self.mean_new_fraction:.4f}")
        lines.append(f"passed: {str(self.passed).lower()}")
        return "\n".join(lines) + "\n"

    def write_histograms(self, directory) -> list[Path]:
        """Two-column (bin, probability) files per marginal, empirical and reference."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []
        for name, c in self.checks.items():
            for suffix, h in (("", c.empirical), (".reference", c.reference)):
                p = d / f"{name}{suffix}.tsv"
                write_histogram(p, h)
                written.append(p)
        return written


def write_histogram(path, counts) -> None:
    h = np.asarray(counts, dtype=np.float64)
    total = h.sum()
    prob = h / total if total > 0 else h
    with open(path, "w") as fh:
        fh.write("bin\tprobability\n")
        for i, v in enumerate(prob.tolist()):
            fh.write(f"{i}\t{v:.10g}\n")


def _pad(a, n):
    out = np.zeros(n)
    out[: len(a)] = a
    return out


def validate(transactions, config: GenerationConfig, thresholds: Thresholds | None = None,
             sort: bool = False) -> ValidationReport:
    """Compare a dataset with what ``config`` should produce.

    Hour, weekday and amount marginals are checked against their input tables
    (the weekday one weighted by how often each weekday occurs in the window).
    Operations per card are checked against the Poisson-smeared law of the
    card population rebuilt from the config seed; operations per store as
    per-store shares against the rebuilt store weights; gaps against an
    independent replica run of the same config under another seed.
    """
    th = thresholds or Thresholds()
    m = transactions if isinstance(transactions, MarginalSet) else \
        compute_marginals(transactions, config.start_day_of_week, sort=sort)
    cards, stores = build_populations(config)
    d = config.distributions

    if m.store_counts.size > len(stores):
        raise DomainError("store ids exceed the configured store count")
    checks = {}

    def add(name, emp, ref, ref_n=0):
        e_mass, r_mass = float(np.sum(emp)), float(np.sum(ref))
        if e_mass > 0 and r_mass > 0:
            tv, ks = compare(emp, ref)
        else:
            # e.g. no card transacted twice: nothing to compare on one side
            tv = ks = 0.0 if e_mass == r_mass else 1.0
        checks[name] = MarginalCheck(name, tv, ks, int(np.sum(emp)), ref_n, getattr(th, name),
                                     np.asarray(emp, float), np.asarray(ref, float))

    n_days = config.n_days if config.n_days > 0 else m.window_days
    add("ops_per_card", m.ops_per_card_monthly(n_days),
        ops_per_card_reference(cards.expected, config), len(cards))
    add("amount", m.amount_bins, d.quantity.weights)
    add("day_of_week", m.day_of_week, day_of_week_reference(config))
    add("hour_of_day", m.hour_of_day, d.hourly.weights)

    replica_cfg = GenerationConfig(**{**config.__dict__, "seed": config.seed ^ REPLICA_SEED_XOR})
    replica = compute_marginals(iter_batches(replica_cfg), config.start_day_of_week)
    n_gap = max(m.inter_tx_gaps.size, replica.inter_tx_gaps.size)
    add("inter_tx_gaps", _pad(m.inter_tx_gaps, n_gap), _pad(replica.inter_tx_gaps, n_gap),
        int(replica.inter_tx_gaps.sum()))

    add("ops_per_store", _pad(m.store_counts, len(stores)), stores.weights, len(stores))

    nf = m.new_fraction()
    return ValidationReport(
        checks=checks,
        n_transactions=m.n_transactions,
        expected_transactions=expected_total(config, cards),
        daily_peaks=has_daily_peaks(m.inter_tx_gaps),
        mean_new_fraction=float(nf.mean()) if nf.size else float("nan"),
    )


def summarize(m: MarginalSet) -> str:
    """Plain ``key: value`` summary used by the inspect command."""
    opc = m.card_counts[m.card_counts > 0]
    ops = m.store_counts[m.store_counts > 0]
    gaps = m.inter_tx_gaps
    n_gaps = int(gaps.sum())
    mean_gap = float(np.dot(np.arange(gaps.size), gaps) / n_gaps) if n_gaps else float("nan")
    peaks = has_daily_peaks(gaps)
    nf = m.new_fraction()
    lines = [
        f"transactions: {m.n_transactions}",
        f"days: {m.first_day}..{m.last_day}",
        f"active_cards: {opc.size}",
        f"active_stores: {ops.size}",
        f"ops_per_card.mean: {opc.mean():.4f}",
        f"ops_per_card.max: {int(opc.max())}",
        f"ops_per_store.mean: {ops.mean():.4f}",
        f"amount.mean: {m.total_amount / m.n_transactions:.4f}",
        "day_of_week.profile: " + " ".join(f"{x:.4f}" for x in m.profile("day_of_week")),
        "hour_of_day.profile: " + " ".join(f"{x:.4f}" for x in m.profile("hour_of_day")),
        f"inter_tx_gaps.count: {n_gaps}",
        f"inter_tx_gaps.mean_hours: {mean_gap:.3f}",
        f"inter_tx_gaps.peak_24h: {str(peaks[24]).lower()}",
        f"inter_tx_gaps.peak_48h: {str(peaks[48]).lower()}",
        f"new_cards.mean_daily_fraction: {(nf.mean() if nf.size else float('nan')):.4f}",
    ]
    return "\n".join(lines) + "\n"

