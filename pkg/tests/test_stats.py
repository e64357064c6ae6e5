from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from txsynth.distmodel import DistributionSet, normalize
from txsynth.defaults import default_distributions
from txsynth.errors import DomainError, EmptyDataError, OrderError
from txsynth.generator import (
    GenerationConfig,
    TransactionBatch,
    TransactionRecord,
    generate,
    iter_batches,
)
from txsynth.stats import (
    Thresholds,
    compare,
    compute_marginals,
    has_daily_peaks,
    monthly_ops_bins,
    new_vs_repeating,
    ops_per_card_reference,
    store_size_bins,
    summarize,
    validate,
)

records_st = st.lists(
    st.builds(TransactionRecord, st.integers(0, 12), st.integers(0, 25), st.integers(0, 23),
              st.integers(0, 49).map(lambda b: (b + 0.5) * 25), st.integers(0, 15)),
    min_size=1, max_size=300)

R = TransactionRecord


def pad(a, n):
    out = np.zeros(n, dtype=np.asarray(a).dtype)
    out[: len(a)] = a
    return out


# -- naive oracle -------------------------------------------------------------

def naive(records, start_dow=0):
    out = {}
    out["cards"] = Counter(r.card_id for r in records)
    out["stores"] = Counter(r.store_id for r in records)
    out["amount"] = Counter(int(r.amount // 25) for r in records)
    out["dow"] = Counter((start_dow + r.day) % 7 for r in records)
    out["hour"] = Counter(r.hour for r in records)
    ts = defaultdict(list)
    for r in records:
        ts[r.card_id].append(r.day * 24 + r.hour)
    gaps = Counter()
    for t in ts.values():
        t = sorted(t)
        for a, b in zip(t, t[1:]):
            gaps[b - a] += 1
    out["gaps"] = gaps
    active = defaultdict(set)
    for r in records:
        active[r.day].add(r.card_id)
    nr = {}
    for d in range(min(active), max(active) + 1):
        cur = active.get(d, set())
        rep = len(cur & active.get(d - 1, set()))
        nr[d] = (len(cur) - rep, rep)
    out["nr"] = nr
    return out


def as_hist(counter, n):
    h = np.zeros(n, dtype=np.int64)
    for k, v in counter.items():
        h[k] = v
    return h


@given(records_st, st.integers(0, 6))
def test_marginals_match_naive_recount(records, start_dow):
    m = compute_marginals(records, start_dow, sort=True)
    o = naive(records, start_dow)
    assert m.n_transactions == len(records)
    assert np.array_equal(pad(m.card_counts, 26), as_hist(o["cards"], 26))
    assert np.array_equal(pad(m.store_counts, 16), as_hist(o["stores"], 16))
    assert np.array_equal(m.amount_bins, as_hist(o["amount"], 50))
    assert np.array_equal(m.day_of_week, as_hist(o["dow"], 7))
    assert np.array_equal(m.hour_of_day, as_hist(o["hour"], 24))
    assert np.array_equal(pad(m.inter_tx_gaps, 13 * 24), as_hist(o["gaps"], 13 * 24))
    assert {int(d): (int(a), int(b)) for d, a, b in m.new_repeating} == o["nr"]
    assert m.day_of_week.sum() == m.hour_of_day.sum() == len(records)
    assert m.total_amount == pytest.approx(sum(r.amount for r in records))


@given(records_st, st.randoms())
def test_marginals_invariant_to_input_order(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    a = compute_marginals(records, sort=True)
    b = compute_marginals(shuffled, sort=True)
    for f in ("card_counts", "store_counts", "amount_bins", "day_of_week", "hour_of_day",
              "inter_tx_gaps", "new_repeating"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


@given(records_st, st.integers(1, 50))
def test_streaming_in_arbitrary_batches(records, size):
    recs = sorted(records, key=lambda r: r.day)
    whole = compute_marginals(recs)
    b = TransactionBatch.from_records(recs)
    parts = [b.slice(i, i + size) for i in range(0, len(b), size)]
    split = compute_marginals(parts)
    for f in ("card_counts", "inter_tx_gaps", "new_repeating", "hour_of_day"):
        assert np.array_equal(getattr(whole, f), getattr(split, f))


def test_single_sample_record():
    m = compute_marginals([R(0, 1, 17, 87.5, 78)])
    assert m.profile("hour_of_day").tolist() == [0.0] * 17 + [1.0] + [0.0] * 6
    assert np.flatnonzero(m.amount_bins).tolist() == [3]


def test_one_day_gap():
    m = compute_marginals([R(0, 1, 17, 87.5, 78), R(1, 1, 17, 37.5, 544)])
    assert np.flatnonzero(m.inter_tx_gaps).tolist() == [24]
    assert m.inter_tx_gaps[24] == 1


def test_same_hour_gap_is_zero():
    m = compute_marginals([R(0, 1, 5, 12.5, 0), R(0, 1, 5, 12.5, 1)])
    assert m.inter_tx_gaps.tolist() == [1]


def test_empty_stream():
    with pytest.raises(EmptyDataError):
        compute_marginals([])
    with pytest.raises(EmptyDataError):
        compute_marginals(iter([]))


def test_unordered_stream_rejected():
    with pytest.raises(OrderError):
        compute_marginals([R(1, 0, 0, 12.5, 0), R(0, 0, 0, 12.5, 0)])


def test_new_vs_repeating_examples():
    recs = [R(d, 7, 10, 12.5, 0) for d in (0, 1, 2)]
    nr = new_vs_repeating(recs)
    assert nr[0] == (1, 0) and nr[1] == (0, 1) and nr[2] == (0, 1)
    nr = new_vs_repeating([R(0, 7, 10, 12.5, 0), R(2, 7, 10, 12.5, 0)])
    assert nr[2] == (1, 0)
    assert nr[1] == (0, 0)
    assert new_vs_repeating([]) == {}


def test_degenerate_generation_gives_degenerate_marginals():
    d = default_distributions().to_mapping()
    d["hourly"] = [0] * 24
    d["hourly"][9] = 1
    d["quantity"] = [0] * 50
    d["quantity"][7] = 5
    cfg = GenerationConfig(n_cards=100, n_stores=10, n_days=7, seed=0,
                           distributions=DistributionSet.from_mapping(d))
    m = compute_marginals(iter_batches(cfg))
    assert np.flatnonzero(m.hour_of_day).tolist() == [9]
    assert np.flatnonzero(m.amount_bins).tolist() == [7]


def test_amount_weighted_profiles():
    recs = [R(0, 0, 1, 12.5, 0), R(1, 0, 2, 112.5, 0), R(1, 1, 2, 12.5, 0)]
    m = compute_marginals(recs)
    assert m.profile("day_of_week", "amount").sum() == pytest.approx(1)
    assert m.profile("day_of_week", "amount")[1] == pytest.approx(125 / 137.5)
    assert m.profile("day_of_week")[1] == pytest.approx(2 / 3)
    with pytest.raises(DomainError):
        m.profile("amount")


def test_amount_weighted_day_profile_matches_count_profile_on_synthetic_data():
    cfg = GenerationConfig(n_cards=5000, n_stores=100, n_days=28, seed=3)
    m = compute_marginals(iter_batches(cfg))
    tv, _ = compare(m.profile("day_of_week", "amount"), m.profile("day_of_week"))
    assert tv < 0.01


# -- compare ------------------------------------------------------------------

def test_compare_examples():
    assert compare([1, 2, 3], [1, 2, 3]) == (0.0, 0.0)
    assert compare([1, 0], [0, 1])[0] == 1.0
    tv, ks = compare([0.5, 0.5], [0.25, 0.75])
    assert tv == pytest.approx(0.25) and ks == pytest.approx(0.25)
    assert compare([3, 1], normalize([1, 3]))[0] == pytest.approx(0.5)


def test_compare_errors():
    with pytest.raises(DomainError):
        compare([1, 2], [1, 2, 3])
    with pytest.raises(EmptyDataError):
        compare([0, 0], [1, 1])


hist_pair = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0, 1e3), min_size=n, max_size=n).filter(lambda x: sum(x) > 0),
    st.lists(st.floats(0, 1e3), min_size=n, max_size=n).filter(lambda x: sum(x) > 0)))


@given(hist_pair)
def test_compare_properties(pair):
    p, q = pair
    tv, ks = compare(p, q)
    assert 0 <= tv <= 1 and 0 <= ks <= 1
    assert ks <= tv + 1e-12  # cumulative differences are bounded by TV
    assert compare(q, p) == pytest.approx((tv, ks), abs=1e-12)
    assert compare(p, p) == (0.0, 0.0)


# -- binning helpers ----------------------------------------------------------

def test_monthly_ops_bins_rescale_and_clamp():
    bins, low, high = monthly_ops_bins(np.array([1, 10, 500]), 100)
    # 1 op in 100 days -> 0.3/month -> clamped up to 1 (bin 0); 10 -> 3; 500 -> 150 -> bin 99
    assert bins.tolist() == [0, 2, 99]
    assert (low, high) == (1, 1)


def test_store_size_bins():
    bins, high = store_size_bins(np.array([5, 25, 10_000]), 30)
    assert bins.tolist() == [0, 1, 49]
    assert high == 1


def test_ops_reference_is_poisson_mixture():
    cfg = GenerationConfig(n_cards=10, n_stores=1, n_days=30,
                           distributions=DistributionSet.from_mapping(
                               {**default_distributions().to_mapping(), "daily": [1] * 7}))
    ref = ops_per_card_reference(np.array([3.0]), cfg)
    from scipy.stats import poisson
    k = np.arange(1, 101)
    p = poisson.pmf(k, 3.0) / (1 - poisson.pmf(0, 3.0))
    np.testing.assert_allclose(ref[:60], p[:60], atol=1e-12)


def test_daily_peaks_detector():
    g = np.ones(60)
    assert has_daily_peaks(g) == {24: False, 48: False}
    g[24] = g[48] = 2
    assert has_daily_peaks(g) == {24: True, 48: True}
    assert has_daily_peaks(np.ones(30))[48] is False


# -- validate -----------------------------------------------------------------

def test_validate_self_consistency(small_config):
    cfg = GenerationConfig(n_cards=2000, n_stores=300, n_days=60, seed=4)
    rep = validate(iter_batches(cfg), cfg)
    for name in ("hour_of_day", "day_of_week", "amount"):
        assert rep.checks[name].tv_distance < 0.05, name
    assert set(rep.checks) == {"ops_per_card", "amount", "day_of_week", "hour_of_day",
                               "inter_tx_gaps", "ops_per_store"}
    text = rep.to_text()
    assert "amount.tv_distance:" in text and text.endswith("\n")
    for c in rep.checks.values():
        assert 0 <= c.tv_distance <= 1 and 0 <= c.ks_statistic <= 1


def test_validate_detects_amount_corruption():
    cfg = GenerationConfig(n_cards=1000, n_stores=100, n_days=30, seed=2)
    b = TransactionBatch.concat(list(iter_batches(cfg)))
    # amounts reassigned uniformly over all bins: no longer the configured law
    b.amount = (np.random.default_rng(0).integers(0, 50, len(b)) + 0.5) * 25
    rep = validate([b], cfg)
    assert not rep.checks["amount"].passed
    assert "amount" in rep.failures() and not rep.passed


def test_validate_empty():
    with pytest.raises(EmptyDataError):
        validate([], GenerationConfig())


def test_validate_rejects_unknown_stores():
    cfg = GenerationConfig(n_cards=5, n_stores=3, n_days=2)
    with pytest.raises(DomainError):
        validate([R(0, 0, 0, 12.5, 10)], cfg)


def test_histogram_files(tmp_path):
    cfg = GenerationConfig(n_cards=300, n_stores=50, n_days=20, seed=1)
    rep = validate(iter_batches(cfg), cfg, Thresholds())
    files = rep.write_histograms(tmp_path)
    assert len(files) == 12
    lines = (tmp_path / "hour_of_day.tsv").read_text().splitlines()
    assert lines[0] == "bin\tprobability" and len(lines) == 25
    assert sum(float(l.split("\t")[1]) for l in lines[1:]) == pytest.approx(1)


def test_summary_text():
    m = compute_marginals(generate(GenerationConfig(n_cards=100, n_stores=10, n_days=10)))
    s = summarize(m)
    assert s.startswith("transactions: ") and "inter_tx_gaps.peak_24h:" in s


def test_validate_single_transaction_has_no_gaps():
    cfg = GenerationConfig(n_cards=500, n_stores=100, n_days=10)
    rep = validate([R(0, 1, 17, 87.5, 78)], cfg)
    assert rep.checks["inter_tx_gaps"].tv_distance == 1.0
    assert not rep.passed
