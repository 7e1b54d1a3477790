import json

import pytest
from hypothesis import given, settings, strategies as st

from ardata.corpus import Document, Source
from ardata.filters import (
    CleaningReport,
    FilterConfig,
    GopherConfig,
    ReportSchemaError,
    Rule,
    SourceCounters,
    apply_filter,
    first_failure,
    merge_reports,
    run_pipeline,
)
from ardata.tokenization import WhitespaceTokenizer

from planted import (
    AD_PHRASES,
    UNSAFE_PHRASES,
    base_text,
    planted_config,
    planted_corpus,
)

TOK = WhitespaceTokenizer()


def culturax(text, url="https://example.org/x"):
    return Document(id="d", text=text, url=url, source=Source.CULTURAX)


@pytest.fixture
def cfg():
    return planted_config()


# --- boundary suite ---------------------------------------------------------


def test_safety_three_distinct_phrases_removes(cfg):
    doc = culturax(base_text() + "\n" + " ".join(UNSAFE_PHRASES[:3]))
    decision = apply_filter(doc, Rule.SAFETY, cfg)
    assert not decision.keep and decision.rule is Rule.SAFETY


def test_safety_two_phrases_keeps(cfg):
    doc = culturax(base_text() + "\n" + " ".join(UNSAFE_PHRASES[:2]))
    assert apply_filter(doc, Rule.SAFETY, cfg).keep


def test_safety_repeated_phrase_counts_once(cfg):
    doc = culturax(base_text() + "\n" + " ".join([UNSAFE_PHRASES[0]] * 5))
    assert apply_filter(doc, Rule.SAFETY, cfg).keep


def test_safety_missing_url_removes_culturax(cfg):
    decision = apply_filter(culturax(base_text(), url=None), Rule.SAFETY, cfg)
    assert not decision.keep and decision.rule is Rule.SAFETY


def test_safety_not_applied_to_other_sources(cfg):
    doc = Document(id="d", text=base_text() + "\n" + " ".join(UNSAFE_PHRASES), source=Source.SANAD)
    assert apply_filter(doc, Rule.SAFETY, cfg).keep


def test_ads_five_hits_keeps_six_removes(cfg):
    five = culturax(base_text() + "\n" + " ".join([AD_PHRASES[0]] * 5))
    six = culturax(base_text() + "\n" + " ".join([AD_PHRASES[0]] * 6))
    assert apply_filter(five, Rule.ADS, cfg).keep
    assert not apply_filter(six, Rule.ADS, cfg).keep


def test_lines_three_removes_four_keeps(cfg):
    three = culturax("\n".join(["كلمة أولى ثم ثانية وثالثة"] * 3))
    four = culturax("\n".join(["كلمة أولى ثم ثانية وثالثة"] * 4))
    assert not apply_filter(three, Rule.LINES, cfg).keep
    assert apply_filter(four, Rule.LINES, cfg).keep


def test_lines_short_line_majority_removes(cfg):
    long_line = "سطر يحتوي على كلمات كثيرة بما يكفي"
    doc = culturax("\n".join([long_line, long_line, "كلمتان فقط", "كلمتان فقط", "كلمتان فقط", "كلمتان فقط"]))
    decision = apply_filter(doc, Rule.LINES, cfg)
    assert not decision.keep
    doc_half = culturax("\n".join([long_line] * 3 + ["كلمتان فقط"] * 3))  # exactly 50%
    assert apply_filter(doc_half, Rule.LINES, cfg).keep


def test_chars_boundary_94_removes_95_keeps(cfg):
    remove = culturax("ا" * 94 + "€" * 6)
    keep = culturax("ا" * 95 + "€" * 5)
    assert not apply_filter(remove, Rule.CHARS, cfg).keep
    assert apply_filter(keep, Rule.CHARS, cfg).keep


def test_gopher_stop_word_floor(cfg):
    few_stops = culturax("\n".join(f"{'كلمات مفيدة طويلة غنية مركبة جيدة وافية' } في." if i == 0 else "كلمات مفيدة طويلة غنية مركبة جيدة وافية." for i in range(8)))
    decision = apply_filter(few_stops, Rule.GOPHER, cfg)
    assert not decision.keep and decision.rule is Rule.GOPHER
    assert "stop words" in decision.detail


def test_gopher_word_count_bounds():
    cfg = planted_config()
    tiny = culturax("\n".join(["كلمة في من هنا"] * 4))  # 16 words < 50
    assert not apply_filter(tiny, Rule.GOPHER, cfg).keep


def test_empty_document_removed_as_lines(cfg):
    decision = first_failure(culturax(""), cfg)
    assert not decision.keep and decision.rule is Rule.LINES


def test_first_failure_attribution_order(cfg):
    # Violates both safety (phrases) and gopher (no stop words): safety wins.
    rows = ["كلمات مفيدة طويلة غنية مركبة جيدة وافية." for _ in range(8)]
    doc = culturax("\n".join(rows) + "\n" + " ".join(UNSAFE_PHRASES[:3]))
    decision = first_failure(doc, cfg)
    assert decision.rule is Rule.SAFETY


# --- pipeline ----------------------------------------------------------------


def test_pipeline_empty_input(cfg):
    kept, report = run_pipeline([], cfg, TOK)
    assert kept == []
    assert report.sources == {}
    assert report.totals().docs_in == 0


def test_pipeline_planted_corpus_exact_counts(cfg):
    docs, expected = planted_corpus(n_clean=70, n_safety=5, n_url=5, n_ads=10, n_lines=10)
    kept, report = run_pipeline(docs, cfg, TOK)
    assert len(kept) == 70
    totals = report.totals()
    assert totals.docs_in == 100
    for rule, count in expected.items():
        assert totals.docs_removed.get(rule, 0) == count, rule
    assert totals.docs_kept == 70


def test_pipeline_applies_normalization_and_stripping(cfg):
    text = "عنوان\n2023-04-01\n" + base_text().replace("ا", "ﺍ", 1)  # presentation-form alef
    doc = culturax(text)
    kept, _ = run_pipeline([doc], cfg, TOK)
    assert len(kept) == 1
    assert "ﺍ" not in kept[0].text
    assert not kept[0].text.startswith("عنوان")


def test_pipeline_sharding_equivalence(cfg):
    docs, _ = planted_corpus(n_clean=40, n_safety=5, n_ads=5, n_lines=5, n_chars=5, n_gopher=5)
    kept_all, report_all = run_pipeline(docs, cfg, TOK)
    shards = [docs[i::4] for i in range(4)]
    merged = None
    kept_sharded = []
    for shard in shards:
        kept, report = run_pipeline(shard, cfg, TOK)
        kept_sharded.extend(kept)
        merged = report if merged is None else merge_reports(merged, report)
    assert merged.to_json() == report_all.to_json()
    assert sorted(d.id for d in kept_sharded) == sorted(d.id for d in kept_all)


def test_pipeline_deterministic_reports(cfg):
    docs, _ = planted_corpus(n_clean=20, n_ads=3, n_gopher=2)
    _, first = run_pipeline(docs, cfg, TOK)
    _, second = run_pipeline(docs, cfg, TOK)
    assert first.to_json() == second.to_json()


def test_report_invariant_in_equals_kept_plus_removed(cfg):
    docs, _ = planted_corpus(n_clean=15, n_safety=3, n_short=4, n_chars=2)
    _, report = run_pipeline(docs, cfg, TOK)
    for counters in report.sources.values():
        assert counters.docs_in == counters.docs_kept + counters.docs_removed_total
        assert counters.tokens_in == counters.tokens_kept + counters.tokens_removed_total


# --- report merging -----------------------------------------------------------


def _random_report(draw_counts):
    report = CleaningReport()
    for source, rule, docs, tokens in draw_counts:
        counters = report.sources.setdefault(source, SourceCounters())
        counters.docs_in += docs
        counters.tokens_in += tokens
        if rule != "none":
            counters.docs_removed[rule] = counters.docs_removed.get(rule, 0) + min(docs, 1)
            counters.tokens_removed[rule] = counters.tokens_removed.get(rule, 0) + min(tokens, 5)
    return report


_count_entry = st.tuples(
    st.sampled_from(["culturax", "sanad", "ebook"]),
    st.sampled_from(["safety", "ads", "lines", "chars", "gopher", "none"]),
    st.integers(min_value=1, max_value=50),
    st.integers(min_value=5, max_value=500),
)


@given(st.lists(_count_entry, max_size=8), st.lists(_count_entry, max_size=8))
@settings(max_examples=60)
def test_merge_commutative(entries_a, entries_b):
    a, b = _random_report(entries_a), _random_report(entries_b)
    assert merge_reports(a, b).to_json() == merge_reports(b, a).to_json()


def test_merge_identity():
    report = _random_report([("culturax", "ads", 3, 30)])
    zero = CleaningReport()
    assert merge_reports(report, zero).to_json() == report.to_json()


def test_merge_schema_mismatch_raises():
    a = CleaningReport()
    b = CleaningReport(rules=("safety", "ads"))
    with pytest.raises(ReportSchemaError):
        merge_reports(a, b)


def test_report_json_round_trip(cfg):
    docs, _ = planted_corpus(n_clean=5, n_ads=2)
    _, report = run_pipeline(docs, cfg, TOK)
    recovered = CleaningReport.from_dict(json.loads(report.to_json()))
    assert recovered.to_json() == report.to_json()


def test_report_csv_shape(cfg):
    docs, _ = planted_corpus(n_clean=5, n_ads=2)
    _, report = run_pipeline(docs, cfg, TOK)
    rows = report.csv_rows()
    assert rows[0][0] == "dataset"
    assert any(row[0] == "culturax" for row in rows[1:])


# --- config -----------------------------------------------------------------


def test_config_from_dict_round_trip():
    cfg = FilterConfig.from_dict(
        {
            "unsafe_phrases": ["a", "b"],
            "ad_max_hits": 7,
            "gopher": {"min_words": 10, "stop_words": ["في"], "min_stop_words": 1},
        }
    )
    assert cfg.unsafe_phrases == ("a", "b")
    assert cfg.ad_max_hits == 7
    assert cfg.gopher.min_words == 10


def test_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(short_line_frac_max=1.5)
    with pytest.raises(ValueError):
        FilterConfig(unsafe_phrases=("ok", ""))
    with pytest.raises(ValueError):
        GopherConfig(min_words=10, max_words=5)


def test_latin_phrase_matching_case_insensitive():
    cfg = FilterConfig(unsafe_phrases=("Bad Phrase One", "bad phrase two", "BAD PHRASE THREE"))
    doc = culturax(base_text() + "\nbad phrase one BAD PHRASE TWO Bad Phrase Three")
    assert not apply_filter(doc, Rule.SAFETY, cfg).keep


def test_counting_modes_are_configurable():
    # Ads count total occurrences by default; distinct mode counts each phrase once.
    distinct_cfg = FilterConfig(ad_phrases=AD_PHRASES, ads_count_mode="distinct")
    doc = culturax(base_text() + "\n" + " ".join([AD_PHRASES[0]] * 6))
    assert apply_filter(doc, Rule.ADS, distinct_cfg).keep
    # Safety counts distinct phrases by default; total mode counts repeats.
    total_cfg = FilterConfig(unsafe_phrases=UNSAFE_PHRASES, safety_count_mode="total")
    repeat = culturax(base_text() + "\n" + " ".join([UNSAFE_PHRASES[0]] * 3))
    assert not apply_filter(repeat, Rule.SAFETY, total_cfg).keep
