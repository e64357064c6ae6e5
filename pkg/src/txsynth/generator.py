"""Sequential transaction synthesis over cards and days.

For every day, each card gets a transaction count drawn around its expected
daily rate; every transaction then receives an hour, an amount and a store,
all sampled independently of the card. Output is produced one day at a time
so arbitrarily long runs stream in constant memory.

Random stream layout (all derived from ``config.seed``):

==========================  ============================================
stream id                   used for
==========================  ============================================
``KIND_CARDS``              card population
``KIND_STORES``             store population
``KIND_COUNTS | day``       per-card counts of that day
``KIND_ATTRS | day | ch``   hour, amount (+ jitter), store of chunk ``ch``
``KIND_SWAP | day``         activity swaps before ``day``
==========================  ============================================

Attribute chunks have a fixed size, so the worker count never changes the
output.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .defaults import default_distributions
from .distmodel import (
    AMOUNT_STEP,
    DistributionSet,
    DistributionTable,
    RandomStream,
    amounts_from_bins,
    sample_from_cdf,
    weights_cdf,
)
from .entities import (
    CardPopulation,
    CardProfile,
    StorePopulation,
    init_cards,
    init_stores,
    swap_activities,
)
from .errors import ConfigError, DomainError

MONTH_DAYS = 30

KIND_CARDS = 1 << 56
KIND_STORES = 2 << 56
KIND_COUNTS = 3 << 56
KIND_ATTRS = 4 << 56
KIND_SWAP = 5 << 56
CHUNK = 1 << 18

_FIELDS = ("day", "card", "hour", "amount", "store")


class TransactionRecord(NamedTuple):
    day: int
    card_id: int
    hour: int
    amount: float
    store_id: int


@dataclass
class TransactionBatch:
    """Column arrays for a run of consecutive records."""

    day: np.ndarray
    card: np.ndarray
    hour: np.ndarray
    amount: np.ndarray
    store: np.ndarray

    def __len__(self):
        return self.card.size

    def records(self) -> Iterator[TransactionRecord]:
        for row in zip(self.day.tolist(), self.card.tolist(), self.hour.tolist(),
                       self.amount.tolist(), self.store.tolist()):
            yield TransactionRecord(*row)

    def slice(self, start, stop) -> "TransactionBatch":
        return TransactionBatch(*(getattr(self, f)[start:stop] for f in _FIELDS))

    def take(self, index) -> "TransactionBatch":
        return TransactionBatch(*(getattr(self, f)[index] for f in _FIELDS))

    @classmethod
    def from_records(cls, records) -> "TransactionBatch":
        records = list(records)
        if not records:
            return cls.empty()
        cols = list(zip(*records))
        return cls(np.array(cols[0], np.int64), np.array(cols[1], np.int64),
                   np.array(cols[2], np.int64), np.array(cols[3], np.float64),
                   np.array(cols[4], np.int64))

    @classmethod
    def empty(cls) -> "TransactionBatch":
        z = np.zeros(0, np.int64)
        return cls(z, z, z, np.zeros(0), z)

    @classmethod
    def concat(cls, batches) -> "TransactionBatch":
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in _FIELDS))


@dataclass(frozen=True)
class BurstConfig:
    """Overdispersed daily counts with inhibition.

    ``overdispersion`` is the log-normal shape of the unit-mean daily rate
    multiplier; ``debt_decay`` is the fraction of the outstanding debt worked
    off per day.
    """

    enabled: bool = False
    overdispersion: float = 0.0
    debt_decay: float = 0.1

    def __post_init__(self):
        if not self.overdispersion >= 0 or not math.isfinite(self.overdispersion):
            raise DomainError("burst overdispersion must be finite and >= 0")
        if not 0.0 <= self.debt_decay <= 1.0:
            raise DomainError("burst debt_decay must lie in [0, 1]")

    @property
    def active(self) -> bool:
        # sigma == 0 behaves exactly like the plain Poisson law
        return self.enabled and self.overdispersion > 0


@dataclass(frozen=True)
class SwapConfig:
    p_swap: float = 0.0
    similarity_ratio: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.p_swap <= 1.0:
            raise DomainError("p_swap must lie in [0, 1]")
        if not self.similarity_ratio >= 1.0:
            raise DomainError("similarity_ratio must be >= 1")

    @property
    def active(self) -> bool:
        return self.p_swap > 0


@dataclass(frozen=True)
class GenerationConfig:
    n_cards: int = 2000
    n_stores: int = 1000
    n_days: int = 100
    seed: int = 0
    distributions: DistributionSet = field(default_factory=default_distributions)
    burst: BurstConfig = field(default_factory=BurstConfig)
    swap: SwapConfig = field(default_factory=SwapConfig)
    start_day_of_week: int = 0
    amount_jitter: bool = False

    def __post_init__(self):
        for name in ("n_cards", "n_stores"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v <= 0:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.n_days, bool) or not isinstance(self.n_days, (int, np.integer)) \
                or self.n_days < 0:
            raise DomainError(f"n_days must be a non-negative integer, got {self.n_days!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.start_day_of_week not in range(7):
            raise DomainError("start_day_of_week must be in 0..6")
        if self.n_days >= 1 << 32:
            raise DomainError("n_days too large")

    def to_dict(self) -> dict:
        return {
            "n_cards": int(self.n_cards),
            "n_stores": int(self.n_stores),
            "n_days": int(self.n_days),
            "seed": int(self.seed),
            "start_day_of_week": int(self.start_day_of_week),
            "amount_jitter": bool(self.amount_jitter),
            "burst": asdict(self.burst),
            "swap": asdict(self.swap),
            "distributions": self.distributions.to_mapping(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        try:
            return cls(
                n_cards=int(d["n_cards"]),
                n_stores=int(d["n_stores"]),
                n_days=int(d["n_days"]),
                seed=int(d["seed"]),
                start_day_of_week=int(d.get("start_day_of_week", 0)),
                amount_jitter=bool(d.get("amount_jitter", False)),
                burst=BurstConfig(**d.get("burst", {})),
                swap=SwapConfig(**d.get("swap", {})),
                distributions=(DistributionSet.from_mapping(d["distributions"])
                               if "distributions" in d else default_distributions()),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"bad generation config: {e!r}") from None

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def day_of_week(self, day: int) -> int:
        return (self.start_day_of_week + day) % 7


def day_factors(daily_table: DistributionTable) -> np.ndarray:
    """Per-weekday rate multipliers; a uniform table gives all ones."""
    return 7.0 * daily_table.weights


def daily_expected_count(card, day_of_week: int, daily_table: DistributionTable) -> float:
    """Expected transactions of ``card`` on a given weekday.

    ``(E / 30) * 7 * weight[day_of_week]``; E = 15 on a uniform week gives 0.5.
    """
    if day_of_week not in range(7):
        raise DomainError("day_of_week must be in 0..6")
    e = card.expected_monthly_ops if isinstance(card, CardProfile) else float(card)
    return e / MONTH_DAYS * 7.0 * float(daily_table.weights[day_of_week])


def draw_counts(rates: np.ndarray, burst: BurstConfig, debt: np.ndarray,
                rng: RandomStream) -> np.ndarray:
    """Daily counts for a vector of cards; updates ``debt`` in place.

    Plain mode: ``Poisson(rate)``, one Poisson draw per card. Burst mode: one
    standard normal then one Poisson draw per card, with

        rate' = max(0, rate * m - debt_decay * debt),  m = exp(s*Z - s^2/2)
        debt  = debt + count - rate

    Debt is never forgotten, only worked off, so each card's long-run mean
    stays at its rate. Negative debt (credit) raises later rates, but never
    on a zero-rate day: a card with nothing expected stays idle and carries
    its debt forward.
    """
    if np.any(rates < 0):
        raise DomainError("daily rate must be >= 0")
    if not burst.active:
        return rng.gen.poisson(rates)
    s = burst.overdispersion
    m = np.exp(s * rng.gen.standard_normal(rates.size) - 0.5 * s * s)
    lam = np.where(rates > 0, np.maximum(0.0, rates * m - burst.debt_decay * debt), 0.0)
    counts = rng.gen.poisson(lam)
    debt += counts - rates
    return counts


def sample_daily_count(rate: float, burst: BurstConfig, card: CardProfile,
                       rng: RandomStream) -> tuple[int, CardProfile]:
    """Single-card form of :func:`draw_counts`."""
    if rate < 0:
        raise DomainError("daily rate must be >= 0")
    debt = np.array([card.inhibition_debt], dtype=np.float64)
    count = int(draw_counts(np.array([float(rate)]), burst, debt, rng)[0])
    return count, CardProfile(card.card_id, card.expected_monthly_ops, float(debt[0]))


def build_populations(config: GenerationConfig) -> tuple[CardPopulation, StorePopulation]:
    cards = init_cards(config.n_cards, config.distributions.num_ops,
                       RandomStream(config.seed, KIND_CARDS))
    stores = init_stores(config.n_stores, config.distributions.num_ops_stores,
                         RandomStream(config.seed, KIND_STORES))
    return cards, stores


class _AttributeSampler:
    def __init__(self, config: GenerationConfig, stores: StorePopulation):
        d = config.distributions
        self.seed = config.seed
        self.hour_cdf = d.hourly.cdf
        self.amount_cdf = d.quantity.cdf
        self.store_cdf = weights_cdf(stores.weights)
        self.jitter = config.amount_jitter

    def chunk(self, day: int, index: int, n: int):
        """Draw order: n hours, n amount bins, [n jitters], n stores."""
        rng = RandomStream(self.seed, KIND_ATTRS | (day << 24) | index)
        hours = sample_from_cdf(self.hour_cdf, rng, n)
        bins = sample_from_cdf(self.amount_cdf, rng, n)
        jitter = rng.uniforms(n) if self.jitter else None
        amounts = amounts_from_bins(bins, AMOUNT_STEP, jitter)
        stores = sample_from_cdf(self.store_cdf, rng, n)
        return hours, amounts, stores


def iter_batches(config: GenerationConfig, workers: int = 1,
                 populations=None) -> Iterator[TransactionBatch]:
    """Yield one :class:`TransactionBatch` per simulated day (empty days skipped).

    ``populations`` may supply pre-built ``(cards, stores)``; they are mutated
    (debt, swaps) as the run progresses.
    """
    if workers < 1:
        raise DomainError("workers must be >= 1")
    cards, stores = populations if populations is not None else build_populations(config)
    if len(cards) != config.n_cards or len(stores) != config.n_stores:
        raise DomainError("population sizes disagree with config")
    factors = day_factors(config.distributions.daily)
    sampler = _AttributeSampler(config, stores)
    card_ids = np.arange(config.n_cards, dtype=np.int64)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for day in range(config.n_days):
            if day > 0 and config.swap.active:
                swap_activities(cards, config.swap.p_swap, config.swap.similarity_ratio,
                                RandomStream(config.seed, KIND_SWAP | day))
            rates = cards.expected * (factors[config.day_of_week(day)] / MONTH_DAYS)
            counts = draw_counts(rates, config.burst, cards.debt,
                                 RandomStream(config.seed, KIND_COUNTS | day))
            total = int(counts.sum())
            if total == 0:
                continue
            who = np.repeat(card_ids, counts)
            sizes = [min(CHUNK, total - s) for s in range(0, total, CHUNK)]
            jobs = [(day, i, n) for i, n in enumerate(sizes)]
            if pool is None:
                parts = [sampler.chunk(*j) for j in jobs]
            else:
                parts = list(pool.map(lambda j: sampler.chunk(*j), jobs))
            hours, amounts, store_ids = (np.concatenate(col) for col in zip(*parts))
            yield TransactionBatch(np.full(total, day, np.int64), who, hours, amounts, store_ids)
    finally:
        if pool is not None:
            pool.shutdown()


def generate(config: GenerationConfig, workers: int = 1) -> list[TransactionRecord]:
    """Whole dataset as a list of records ordered by (day, card, draw order)."""
    out = []
    for batch in iter_batches(config, workers):
        out.extend(batch.records())
    return out


def expected_total(config: GenerationConfig, cards: CardPopulation | None = None) -> float:
    """Expected number of transactions of a run.

    With ``cards`` the realised activities are used; otherwise the
    monthly-ops table mean. Weekday modulation over the exact window is
    included (it vanishes for whole weeks).
    """
    if cards is None:
        mean_e = float(np.dot(config.distributions.num_ops.weights,
                              np.arange(1, config.distributions.num_ops.bin_count + 1)))
        total_e = mean_e * config.n_cards
    else:
        total_e = float(cards.expected.sum())
    factors = day_factors(config.distributions.daily)
    dows = (config.start_day_of_week + np.arange(config.n_days)) % 7
    return total_e / MONTH_DAYS * float(factors[dows].sum())
