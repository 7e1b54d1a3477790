import pytest
from hypothesis import given, settings, strategies as st

from ardata.corpus import Document
from ardata.mixture import (
    SourceStats,
    StreamExhaustedError,
    plan_mixture,
    sample_stream,
    sampling_percentages,
    suggested_upweight,
    token_shares,
)


# --- sampling percentages -----------------------------------------------------


def test_arabic_english_upweight_ratio():
    fractions = sampling_percentages({"arabic": 4.6, "english": 1.0})
    assert fractions["arabic"] == pytest.approx(0.821, abs=5e-4)
    assert fractions["english"] == pytest.approx(0.179, abs=5e-4)
    # matches the published (82, 18) within half a percentage point
    assert abs(fractions["arabic"] * 100 - 82) <= 0.5
    assert abs(fractions["english"] * 100 - 18) <= 0.5


def test_equal_upweights_split_evenly():
    assert sampling_percentages({"a": 1, "b": 1}) == {"a": 0.5, "b": 0.5}


def test_three_groups():
    fractions = sampling_percentages({"a": 2, "b": 1, "c": 1})
    assert fractions == {"a": 0.5, "b": 0.25, "c": 0.25}


def test_empty_groups_error():
    with pytest.raises(ValueError):
        sampling_percentages({})
    with pytest.raises(ValueError):
        sampling_percentages({"a": 0.0})


@given(
    st.dictionaries(st.sampled_from("abcde"), st.floats(0.1, 50), min_size=1),
    st.floats(0.01, 100),
)
@settings(max_examples=100)
def test_percentages_sum_to_one_and_scale_invariant(weights, k):
    fractions = sampling_percentages(weights)
    assert sum(fractions.values()) == pytest.approx(1.0, abs=1e-9)
    scaled = sampling_percentages({n: w * k for n, w in weights.items()})
    for name in weights:
        assert scaled[name] == pytest.approx(fractions[name], rel=1e-9)


# --- token shares ----------------------------------------------------------------


def test_token_shares_match_published_table():
    shares = token_shares(
        [SourceStats("en-mix", 619_000_000_000, "english"), SourceStats("ar-mix", 115_000_000_000, "arabic")]
    )
    assert shares["english"] == pytest.approx(0.843, abs=5e-4)
    assert shares["arabic"] == pytest.approx(0.157, abs=5e-4)
    assert abs(shares["english"] * 100 - 84) <= 0.5
    assert abs(shares["arabic"] * 100 - 16) <= 0.5


def test_single_source_full_share():
    assert token_shares([SourceStats("only", 10)]) == {"other": 1.0}


def test_five_to_one_ratio():
    shares = token_shares([SourceStats("en", 500, "english"), SourceStats("ar", 100, "arabic")])
    assert shares["english"] == pytest.approx(5 / 6)
    assert shares["arabic"] == pytest.approx(1 / 6)


def test_source_stats_validation():
    with pytest.raises(ValueError):
        SourceStats("bad", 0)


# --- mixture planning ---------------------------------------------------------------


def test_plan_epochs_example():
    sources = [SourceStats("arabic", 114_500_000_000, "arabic"), SourceStats("english", 619_000_000_000, "english")]
    plan = plan_mixture(sources, {"arabic": 0.821, "english": 0.179}, 197_000_000_000)
    ar = plan.entry("arabic")
    assert ar.token_quota == pytest.approx(161.7e9, rel=1e-3)
    assert ar.epochs == pytest.approx(1.41, abs=5e-3)


def test_plan_zero_total():
    plan = plan_mixture([SourceStats("a", 10), SourceStats("b", 10)], {"a": 0.5, "b": 0.5}, 0)
    assert all(e.token_quota == 0 for e in plan.entries)


def test_plan_single_source_one_epoch():
    plan = plan_mixture([SourceStats("a", 1000)], {"a": 1.0}, 1000)
    assert plan.entry("a").epochs == 1.0


def test_plan_unknown_source_error():
    with pytest.raises(ValueError, match="unknown"):
        plan_mixture([SourceStats("a", 10)], {"a": 0.5, "ghost": 0.5}, 100)


def test_plan_fractions_must_sum_to_one():
    with pytest.raises(ValueError, match="sum to 1"):
        plan_mixture([SourceStats("a", 10), SourceStats("b", 10)], {"a": 0.6, "b": 0.6}, 100)


@given(
    st.lists(st.integers(1, 1000), min_size=1, max_size=6),
    st.integers(0, 10_000),
)
@settings(max_examples=100)
def test_plan_quotas_sum_exactly_to_total(weights, total):
    names = [f"s{i}" for i in range(len(weights))]
    fractions = sampling_percentages(dict(zip(names, map(float, weights))))
    sources = [SourceStats(n, 50) for n in names]
    plan = plan_mixture(sources, fractions, total)
    assert sum(e.token_quota for e in plan.entries) == total


def test_suggested_upweight():
    assert suggested_upweight(4.6, 1.0) == 4.6
    assert suggested_upweight(3.0, 1.5) == 2.0
    with pytest.raises(ValueError):
        suggested_upweight(0, 1)


# --- stream sampling -----------------------------------------------------------------


def _docs(prefix, n, words=10):
    return [Document(id=f"{prefix}{i:04d}", text=" ".join(["كلمة"] * words)) for i in range(n)]


def test_single_source_passthrough_order():
    docs = _docs("a", 10)
    plan = plan_mixture([SourceStats("a", 100)], {"a": 1.0}, 100)
    out = list(sample_stream(plan, {"a": docs}))
    assert [d.id for d in out] == [d.id for d in docs]


def test_fifty_fifty_split_within_tolerance():
    docs_a, docs_b = _docs("a", 1000), _docs("b", 1000)
    sources = [SourceStats("a", 10_000), SourceStats("b", 10_000)]
    plan = plan_mixture(sources, {"a": 0.5, "b": 0.5}, 20_000, seed=42)
    out = list(sample_stream(plan, {"a": docs_a, "b": docs_b}))
    share_a = sum(1 for d in out if d.id.startswith("a")) / len(out)
    assert abs(share_a - 0.5) <= 0.02


def test_same_seed_identical_sequence():
    docs_a, docs_b = _docs("a", 50), _docs("b", 50)
    sources = [SourceStats("a", 500), SourceStats("b", 500)]
    plan = plan_mixture(sources, {"a": 0.5, "b": 0.5}, 600, seed=9)
    first = [d.id for d in sample_stream(plan, {"a": docs_a, "b": docs_b})]
    second = [d.id for d in sample_stream(plan, {"a": docs_a, "b": docs_b})]
    assert first == second


def test_epochs_repeat_restartable_stream():
    docs = _docs("a", 5)  # 50 tokens per pass
    plan = plan_mixture([SourceStats("a", 50)], {"a": 1.0}, 100)
    out = list(sample_stream(plan, {"a": docs}))
    assert [d.id for d in out] == [d.id for d in docs] * 2


def test_exhausted_generator_raises():
    gen = (d for d in _docs("a", 5))
    plan = plan_mixture([SourceStats("a", 50)], {"a": 1.0}, 100)
    with pytest.raises(StreamExhaustedError):
        list(sample_stream(plan, {"a": gen}))


def test_zero_token_stream_cannot_spin_forever():
    empty_docs = [Document(id=f"e{i}", text="   ") for i in range(3)]
    plan = plan_mixture([SourceStats("a", 30)], {"a": 1.0}, 30)
    with pytest.raises(StreamExhaustedError, match="no token progress"):
        list(sample_stream(plan, {"a": empty_docs}))


def test_missing_stream_errors():
    plan = plan_mixture([SourceStats("a", 10)], {"a": 1.0}, 10)
    with pytest.raises(ValueError, match="no stream"):
        list(sample_stream(plan, {}))
