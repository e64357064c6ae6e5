"""Synthetic card-transaction generator built on a two-layer (cards -> stores) model."""

__version__ = "0.1.0"

from .distmodel import (
    CpdCurve,
    DistributionSet,
    DistributionTable,
    RandomStream,
    amount_from_bin,
    cpd,
    load_distributions,
    normalize,
    sample_bin,
    save_distributions,
)
from .entities import init_cards, init_stores, swap_activities
from .generator import (
    BurstConfig,
    GenerationConfig,
    SwapConfig,
    TransactionRecord,
    daily_expected_count,
    generate,
    iter_batches,
    sample_daily_count,
)
from .ingest import ParseOptions, fit_distributions, parse_transactions
from .stats import compare, compute_marginals, new_vs_repeating, validate
