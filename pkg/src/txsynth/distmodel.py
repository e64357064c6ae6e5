"""Discrete distribution tables, seeded random streams and the CPD kernel.

Every input of the transaction model is a small categorical table over
integer bins. Tables are immutable once built; sampling goes through a
:class:`RandomStream`, which is a seeded, independently addressable
substream so that separate parts of a simulation never share generator
state.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateDistributionError, DomainError, EmptyDataError

AMOUNT_STEP = 25.0
AMOUNT_BINS = 50
STORE_STEP = 20.0
STORE_BINS = 50
MAX_MONTHLY_OPS = 100

# semantics -> number of bins
SEMANTICS = {
    "hour": 24,
    "day": 7,
    "amount": AMOUNT_BINS,
    "num_ops": MAX_MONTHLY_OPS,
    "store_size": STORE_BINS,
}

# config-file key -> semantics; key order is the on-disk order
CONFIG_KEYS = {
    "hourly": "hour",
    "daily": "day",
    "quantity": "amount",
    "num_ops": "num_ops",
    "num_ops_stores": "store_size",
}

_SUM_TOL = 1e-9
_IDEMPOTENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DistributionTable:
    """Normalised probability table over ``bin_count`` indexed bins."""

    weights: np.ndarray
    semantics: str | None = None
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise DomainError("distribution table needs at least one bin")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("distribution weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise DomainError(f"weights sum to {w.sum()!r}, expected 1; use normalize()")
        if self.semantics is not None:
            if self.semantics not in SEMANTICS:
                raise DomainError(f"unknown bin semantics {self.semantics!r}")
            if SEMANTICS[self.semantics] != w.size:
                raise DomainError(
                    f"{self.semantics} table needs {SEMANTICS[self.semantics]} bins, got {w.size}"
                )
        w.setflags(write=False)
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        cdf.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def bin_count(self) -> int:
        return int(self.weights.size)

    @property
    def cdf(self) -> np.ndarray:
        return self._cdf

    def mean_index(self) -> float:
        return float(np.dot(self.weights, np.arange(self.bin_count)))

    def __eq__(self, other):
        if not isinstance(other, DistributionTable):
            return NotImplemented
        return self.semantics == other.semantics and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.semantics, self.weights.tobytes()))


def normalize(raw_weights: Iterable[float], semantics: str | None = None) -> DistributionTable:
    """Divide non-negative weights by their sum, keeping their order.

    Weights already summing to 1 within ``1e-12`` are kept bit for bit, which
    makes the operation exactly idempotent and lets saved tables reload to
    the very same sampler.
    """
    w = np.array(list(raw_weights) if not isinstance(raw_weights, np.ndarray) else raw_weights,
                 dtype=np.float64).ravel()
    if w.size == 0:
        raise DomainError("cannot normalise an empty weight list")
    if not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite")
    if np.any(w < 0):
        raise DomainError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise DegenerateDistributionError("all weights are zero")
    if abs(total - 1.0) <= _IDEMPOTENT_TOL:
        return DistributionTable(w, semantics)
    return DistributionTable(w / total, semantics)


class RandomStream:
    """Seeded generator addressed by ``(seed, stream_id)``.

    Both values are 64-bit unsigned integers. The same pair always yields the
    same sequence (PCG64 seeded through a SeedSequence whose spawn key is the
    stream id), and distinct stream ids give statistically independent
    sequences.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        for name, v in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < 2**64:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniforms(self, size=None):
        """Uniform doubles in [0, 1); one generator draw per value."""
        return self.gen.random(size)


def sample_bin(dist: DistributionTable, rng: RandomStream) -> int:
    """Draw one bin index. Consumes exactly one uniform from ``rng``."""
    u = rng.uniforms()
    return int(np.searchsorted(dist.cdf, u, side="right"))


def sample_bins(dist: DistributionTable, rng: RandomStream, size: int) -> np.ndarray:
    """Vectorised :func:`sample_bin`; consumes exactly ``size`` uniforms."""
    return sample_from_cdf(dist.cdf, rng, size)


def sample_from_cdf(cdf: np.ndarray, rng: RandomStream, size: int) -> np.ndarray:
    # cdf[-1] == 1.0 exactly and u < 1, so the index never runs past the last
    # positive-weight bin; zero-weight bins are never returned.
    u = rng.uniforms(size)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def weights_cdf(weights: Sequence[float]) -> np.ndarray:
    """Cumulative table for unnormalised positive weights (e.g. store sizes)."""
    cdf = np.cumsum(np.asarray(weights, dtype=np.float64))
    if cdf.size == 0 or not cdf[-1] > 0:
        raise DegenerateDistributionError("weights have no mass")
    cdf /= cdf[-1]
    return cdf


@dataclass(frozen=True, eq=False)
class CpdCurve:
    grid: np.ndarray
    probabilities: np.ndarray

    def __iter__(self):
        return iter(zip(self.grid.tolist(), self.probabilities.tolist()))


def cpd(observations: Iterable[float], grid: Iterable[float]) -> CpdCurve:
    """Fraction of observations strictly greater than each grid value.

    Ties are excluded: with observations ``[5, 5, 5]`` the curve at 5 is 0.
    """
    obs = np.sort(np.asarray(list(observations) if not isinstance(observations, np.ndarray)
                             else observations, dtype=np.float64).ravel())
    if obs.size == 0:
        raise EmptyDataError("cpd needs at least one observation")
    g = np.asarray(list(grid) if not isinstance(grid, np.ndarray) else grid, dtype=np.float64).ravel()
    if g.size > 1 and np.any(np.diff(g) < 0):
        raise DomainError("cpd grid must be sorted ascending")
    above = obs.size - np.searchsorted(obs, g, side="right")
    return CpdCurve(g, above / obs.size)


def amount_from_bin(bin_index: int, step: float = AMOUNT_STEP) -> float:
    """Midpoint of a 25-unit amount bin: bin 3 -> 87.5."""
    if isinstance(bin_index, bool) or not isinstance(bin_index, (int, np.integer)):
        raise DomainError(f"amount bin must be an integer, got {bin_index!r}")
    if not 0 <= bin_index < AMOUNT_BINS:
        raise DomainError(f"amount bin {bin_index} outside [0, {AMOUNT_BINS})")
    return (int(bin_index) + 0.5) * step


def amounts_from_bins(bins: np.ndarray, step: float = AMOUNT_STEP, jitter: np.ndarray | None = None):
    """Array form of :func:`amount_from_bin`.

    ``jitter`` (uniforms in [0, 1)) switches to uniform-within-bin amounts.
    """
    bins = np.asarray(bins)
    if bins.size and (bins.min() < 0 or bins.max() >= AMOUNT_BINS):
        raise DomainError("amount bin out of range")
    offset = 0.5 if jitter is None else jitter
    return (bins + offset) * step


def amount_to_bin(amount, step: float = AMOUNT_STEP):
    """Bin holding ``amount``; values past the top bin land in the last one.

    For in-range amounts this is also the bin with the nearest midpoint.
    """
    a = np.asarray(amount, dtype=np.float64)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("amounts must be finite and non-negative")
    b = np.minimum(np.floor(a / step), AMOUNT_BINS - 1).astype(np.int64)
    return int(b) if b.ndim == 0 else b


@dataclass(frozen=True)
class DistributionSet:
    """The five input tables of the model."""

    hourly: DistributionTable
    daily: DistributionTable
    quantity: DistributionTable
    num_ops: DistributionTable
    num_ops_stores: DistributionTable

    def __post_init__(self):
        for key, sem in CONFIG_KEYS.items():
            table = getattr(self, key)
            if not isinstance(table, DistributionTable):
                raise ConfigError(f"{key} must be a DistributionTable")
            if table.semantics != sem:
                # accept generic tables of the right size
                try:
                    object.__setattr__(self, key, DistributionTable(table.weights, sem))
                except DomainError as e:
                    raise ConfigError(f"{key}: {e}") from None

    @classmethod
    def from_mapping(cls, data: dict) -> "DistributionSet":
        missing = [k for k in CONFIG_KEYS if k not in data]
        if missing:
            raise ConfigError(f"distribution config missing keys: {', '.join(missing)}")
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown distribution keys: {', '.join(unknown)}")
        tables = {}
        for key, sem in CONFIG_KEYS.items():
            raw = data[key]
            if not isinstance(raw, list) or len(raw) != SEMANTICS[sem]:
                n = len(raw) if isinstance(raw, list) else type(raw).__name__
                raise ConfigError(f"{key} must be a list of {SEMANTICS[sem]} numbers, got {n}")
            try:
                tables[key] = normalize([float(x) for x in raw], sem)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{key}: {e}") from None
        return cls(**tables)

    def to_mapping(self) -> dict:
        return {k: [float(x) for x in getattr(self, k).weights] for k in CONFIG_KEYS}

    def dumps(self) -> str:
        # byte-stable: fixed key order, repr floats
        return json.dumps(self.to_mapping(), indent=2) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def load_distributions(path) -> DistributionSet:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read distribution config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return DistributionSet.from_mapping(data)


def save_distributions(dists: DistributionSet, path) -> None:
    Path(path).write_text(dists.dumps())

