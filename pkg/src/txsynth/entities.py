"""Card and store populations.

Populations are stored column-wise (numpy arrays indexed by id) because the
generator touches every card every day; :class:`CardProfile` and
:class:`StoreProfile` are lightweight row views for callers that want them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distmodel import STORE_STEP, DistributionTable, RandomStream, sample_bins
from .errors import ConfigError, DomainError

# relative slack on the similarity bound so that e.g. 10 * 2.0 == 20 stays eligible
_RATIO_SLACK = 1e-12


@dataclass
class CardProfile:
    card_id: int
    expected_monthly_ops: float
    inhibition_debt: float = 0.0


@dataclass(frozen=True)
class StoreProfile:
    store_id: int
    size_weight: float


class CardPopulation:
    """Cards ``0..n-1`` with expected monthly activity and burst debt."""

    def __init__(self, expected_monthly_ops, inhibition_debt=None):
        e = np.array(expected_monthly_ops, dtype=np.float64).ravel()
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise DomainError("expected monthly ops must be finite and >= 0")
        self.expected = e
        self.debt = (np.zeros_like(e) if inhibition_debt is None
                     else np.array(inhibition_debt, dtype=np.float64).ravel())
        if self.debt.shape != e.shape:
            raise DomainError("debt and expected activity arrays differ in length")

    def __len__(self):
        return self.expected.size

    def __getitem__(self, card_id) -> CardProfile:
        return CardProfile(int(card_id), float(self.expected[card_id]), float(self.debt[card_id]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def copy(self) -> "CardPopulation":
        return CardPopulation(self.expected.copy(), self.debt.copy())

    @classmethod
    def from_profiles(cls, profiles) -> "CardPopulation":
        profiles = sorted(profiles, key=lambda p: p.card_id)
        if [p.card_id for p in profiles] != list(range(len(profiles))):
            raise DomainError("card ids must be exactly 0..n-1")
        return cls([p.expected_monthly_ops for p in profiles],
                   [p.inhibition_debt for p in profiles])


class StorePopulation:
    """Stores ``0..n-1`` with relative size weights."""

    def __init__(self, size_weights):
        w = np.array(size_weights, dtype=np.float64).ravel()
        if w.size == 0 or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("store size weights must be finite and > 0")
        self.weights = w

    def __len__(self):
        return self.weights.size

    def __getitem__(self, store_id) -> StoreProfile:
        return StoreProfile(int(store_id), float(self.weights[store_id]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def shares(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def _check_count(n, what):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n <= 0:
        raise DomainError(f"number of {what} must be a positive integer, got {n!r}")


def init_cards(n_cards: int, num_ops_table: DistributionTable, rng: RandomStream) -> CardPopulation:
    """Draw each card's expected monthly operations: sampled bin + 1."""
    _check_count(n_cards, "cards")
    if num_ops_table.semantics not in (None, "num_ops"):
        raise DomainError("init_cards needs a monthly-ops table")
    return CardPopulation(sample_bins(num_ops_table, rng, int(n_cards)) + 1.0)


def init_stores(n_stores: int, store_table: DistributionTable, rng: RandomStream) -> StorePopulation:
    """Each store weighs the midpoint of its sampled 20-unit size bin."""
    _check_count(n_stores, "stores")
    if store_table.semantics not in (None, "store_size"):
        raise DomainError("init_stores needs a store-size table")
    return StorePopulation((sample_bins(store_table, rng, int(n_stores)) + 0.5) * STORE_STEP)


def swap_activities(cards: CardPopulation, p_swap: float, similarity_ratio: float,
                    rng: RandomStream) -> CardPopulation:
    """Randomly exchange expected activity between similar cards, in place.

    Cards are visited in id order. A visited card triggers with probability
    ``p_swap`` and then picks a partner uniformly among the other cards whose
    activity is within a factor ``similarity_ratio`` of its own
    (``max(E) / min(E) <= ratio``). The two activities are exchanged; if no
    partner qualifies nothing happens.

    Draws: one uniform per card, plus one per triggered card that has at
    least one eligible partner.
    """
    if not 0.0 <= p_swap <= 1.0:
        raise DomainError(f"p_swap must be in [0, 1], got {p_swap}")
    if not similarity_ratio >= 1.0:
        raise DomainError(f"similarity_ratio must be >= 1, got {similarity_ratio}")
    n = len(cards)
    if n < 2 or p_swap == 0.0:
        return cards
    triggered = np.flatnonzero(rng.uniforms(n) < p_swap)
    if triggered.size == 0:
        return cards

    e = cards.expected
    # Swaps permute values, so the sorted value list never changes; only the
    # card sitting at each sorted position does.
    order = np.argsort(e, kind="stable")
    sorted_e = e[order]
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    lo_bound = 1.0 / similarity_ratio * (1 - _RATIO_SLACK)
    hi_bound = similarity_ratio * (1 + _RATIO_SLACK)

    for i in triggered:
        ei = e[i]
        lo = int(np.searchsorted(sorted_e, ei * lo_bound, side="left"))
        hi = int(np.searchsorted(sorted_e, ei * hi_bound, side="right"))
        n_eligible = hi - lo - 1  # minus the card itself
        if n_eligible <= 0:
            continue
        k = lo + int(rng.uniforms() * n_eligible)
        if k >= pos[i]:
            k += 1
        j = order[k]
        pi = pos[i]
        e[i], e[j] = e[j], e[i]
        order[pi], order[k] = j, i
        pos[i], pos[j] = k, pi
    return cards


def dump_cards(cards: CardPopulation, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["card_id", "expected_monthly_ops"])
        for i, e in enumerate(cards.expected.tolist()):
            w.writerow([i, repr(e)])


def dump_stores(stores: StorePopulation, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["store_id", "size_weight"])
        for i, s in enumerate(stores.weights.tolist()):
            w.writerow([i, repr(s)])


def _load_table(path, id_col, value_col):
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or id_col not in rows[0] or value_col not in rows[0]:
        raise ConfigError(f"{path}: expected columns {id_col},{value_col}")
    try:
        pairs = sorted((int(r[id_col]), float(r[value_col])) for r in rows)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
    if [p[0] for p in pairs] != list(range(len(pairs))):
        raise ConfigError(f"{path}: ids must be exactly 0..n-1")
    return [p[1] for p in pairs]


def load_cards(path) -> CardPopulation:
    return CardPopulation(_load_table(path, "card_id", "expected_monthly_ops"))


def load_stores(path) -> StorePopulation:
    return StorePopulation(_load_table(path, "store_id", "size_weight"))
