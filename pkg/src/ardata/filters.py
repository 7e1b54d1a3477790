"""Document-quality filtering pipeline with tabular before/after accounting.

Rules run in a fixed order (safety, ads, lines, chars, gopher) and the first
failing rule is the one a removal is attributed to, which keeps the report
arithmetic exact: docs_in == kept + sum of per-rule removals. All rules are
pure functions of (document, config), so shards can be filtered in parallel
and their reports merged in any order.

Boundary semantics, fixed by the config defaults:
  * safety: >= unsafe_min_hits distinct unsafe phrases removes; a CulturaX
    document without a URL is removed (safety applies only to CulturaX).
  * ads: more than ad_max_hits total ad-phrase occurrences removes.
  * lines: fewer than min_lines non-empty lines removes; so does a document
    where more than short_line_frac_max of lines have fewer than
    short_line_word_max words.
  * chars: less than permissible_char_min_frac permissible characters
    removes (equality keeps).
  * gopher: word-count / word-length / symbol / alphabetic-word /
    stop-word / punctuation heuristics.
"""
from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator

from .corpus import CharMap, DEFAULT_CHAR_MAP, DEFAULT_TITLE_DATE_PATTERNS, Document, Source, normalize_chars, strip_title_date
from .tokenization import TokenizerAdapter, segment_words


class Rule(str, Enum):
    SAFETY = "safety"
    ADS = "ads"
    LINES = "lines"
    CHARS = "chars"
    GOPHER = "gopher"
    NONE = "none"


RULE_ORDER: tuple[Rule, ...] = (Rule.SAFETY, Rule.ADS, Rule.LINES, Rule.CHARS, Rule.GOPHER)

# ~50 high-frequency Modern Standard Arabic function words.
ARABIC_STOP_WORDS: tuple[str, ...] = (
    "في", "من", "على", "إلى", "عن", "أن", "إن", "كان", "كانت", "هذا",
    "هذه", "ذلك", "تلك", "التي", "الذي", "الذين", "ما", "لا", "لم", "لن",
    "قد", "كل", "بعض", "غير", "بين", "عند", "حتى", "إذا", "لكن", "ثم",
    "أو", "و", "هو", "هي", "هم", "نحن", "أنا", "أنت", "مع", "بعد",
    "قبل", "حول", "دون", "عبر", "لدى", "منذ", "أي", "كما", "ليس", "هناك",
)

DEFAULT_PERMISSIBLE_PUNCTUATION = ".,;:!?()[]{}\"'`%&@#*+-=/\\<>|~^$_،؛؟«»…—–"

# Gopher-style "symbols" counted against the word count.
DEFAULT_SYMBOLS: tuple[str, ...] = ("#", "…", "...")


@dataclass(frozen=True)
class GopherConfig:
    min_words: int = 50
    max_words: int = 100_000
    min_mean_word_len: float = 2.0
    max_mean_word_len: float = 10.0
    max_symbol_to_word_ratio: float = 0.1
    min_alpha_word_frac: float = 0.8
    stop_words: tuple[str, ...] = ARABIC_STOP_WORDS
    min_stop_words: int = 2
    max_punct_char_frac: float = 0.2
    symbols: tuple[str, ...] = DEFAULT_SYMBOLS

    def __post_init__(self):
        if self.min_words > self.max_words:
            raise ValueError("min_words must be <= max_words")
        if self.min_mean_word_len > self.max_mean_word_len:
            raise ValueError("min_mean_word_len must be <= max_mean_word_len")


@dataclass(frozen=True)
class FilterConfig:
    unsafe_phrases: tuple[str, ...] = ()
    unsafe_min_hits: int = 3
    require_url: bool = True
    ad_phrases: tuple[str, ...] = ()
    ad_max_hits: int = 5
    min_lines: int = 4
    short_line_word_max: int = 3
    short_line_frac_max: float = 0.5
    permissible_char_min_frac: float = 0.95
    permissible_punctuation: str = DEFAULT_PERMISSIBLE_PUNCTUATION
    gopher: GopherConfig = field(default_factory=GopherConfig)
    # Safety filtering (phrases + URL requirement) is scoped to these sources.
    safety_sources: tuple[Source, ...] = (Source.CULTURAX,)
    # "distinct" counts phrases with >=1 occurrence; "total" sums occurrences.
    safety_count_mode: str = "distinct"
    ads_count_mode: str = "total"

    def __post_init__(self):
        for name in ("short_line_frac_max", "permissible_char_min_frac"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        for name in ("unsafe_min_hits", "ad_max_hits", "min_lines", "short_line_word_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if any(not p for p in self.unsafe_phrases) or any(not p for p in self.ad_phrases):
            raise ValueError("phrase lists must not contain empty strings")
        if self.safety_count_mode not in ("distinct", "total"):
            raise ValueError("safety_count_mode must be 'distinct' or 'total'")
        if self.ads_count_mode not in ("distinct", "total"):
            raise ValueError("ads_count_mode must be 'distinct' or 'total'")

    @classmethod
    def from_dict(cls, data: dict) -> "FilterConfig":
        data = dict(data)
        gopher = data.pop("gopher", None)
        if gopher is not None:
            gopher = dict(gopher)
            if "stop_words" in gopher:
                gopher["stop_words"] = tuple(gopher["stop_words"])
            if "symbols" in gopher:
                gopher["symbols"] = tuple(gopher["symbols"])
            data["gopher"] = GopherConfig(**gopher)
        for key in ("unsafe_phrases", "ad_phrases"):
            if key in data:
                data[key] = tuple(data[key])
        if "safety_sources" in data:
            data["safety_sources"] = tuple(Source.coerce(s) for s in data["safety_sources"])
        return cls(**data)


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    rule: Rule
    detail: str = ""

    def __post_init__(self):
        if self.keep != (self.rule is Rule.NONE):
            raise ValueError("keep must be True exactly when rule is NONE")


KEEP = FilterDecision(keep=True, rule=Rule.NONE)


def _phrase_hits(text: str, phrases: Iterable[str], mode: str) -> int:
    # Case-insensitive for Latin, exact for Arabic: casefold touches only cased scripts.
    haystack = text.casefold()
    if mode == "distinct":
        return sum(1 for p in phrases if p.casefold() in haystack)
    return sum(haystack.count(p.casefold()) for p in phrases)


def _non_empty_lines(text: str) -> list[str]:
    return [line for line in (raw.strip() for raw in text.split("\n")) if line]


def _is_permissible(ch: str, punctuation: str) -> bool:
    if ch.isspace() or ch in punctuation:
        return True
    if ch.isascii():
        return ch.isalnum()
    cp = ord(ch)
    if 0x0600 <= cp <= 0x06FF or 0x0750 <= cp <= 0x077F:
        cat = unicodedata.category(ch)
        return cat.startswith("L") or cat == "Mn" or cat == "Nd"
    return False


def _word_has_letter(word: str) -> bool:
    """True when the word contains at least one Arabic or Latin letter."""
    for ch in word:
        if ch.isascii() and ch.isalpha():
            return True
        cp = ord(ch)
        if (0x0600 <= cp <= 0x06FF or 0x0750 <= cp <= 0x077F) and unicodedata.category(ch).startswith("L"):
            return True
    return False


def _check_safety(doc: Document, cfg: FilterConfig) -> str | None:
    if doc.source not in cfg.safety_sources:
        return None
    if cfg.require_url and not doc.url:
        return "missing url"
    if cfg.unsafe_phrases:
        hits = _phrase_hits(doc.text, cfg.unsafe_phrases, cfg.safety_count_mode)
        if hits >= cfg.unsafe_min_hits:
            return f"{hits} unsafe phrase hits (>= {cfg.unsafe_min_hits})"
    return None


def _check_ads(doc: Document, cfg: FilterConfig) -> str | None:
    if not cfg.ad_phrases:
        return None
    hits = _phrase_hits(doc.text, cfg.ad_phrases, cfg.ads_count_mode)
    if hits > cfg.ad_max_hits:
        return f"{hits} ad phrase hits (> {cfg.ad_max_hits})"
    return None


def _check_lines(doc: Document, cfg: FilterConfig) -> str | None:
    lines = _non_empty_lines(doc.text)
    if len(lines) < cfg.min_lines:
        return f"{len(lines)} lines (< {cfg.min_lines})"
    short = sum(1 for line in lines if len(segment_words(line)) < cfg.short_line_word_max)
    if short / len(lines) > cfg.short_line_frac_max:
        return f"{short}/{len(lines)} short lines (> {cfg.short_line_frac_max:.0%})"
    return None


def _check_chars(doc: Document, cfg: FilterConfig) -> str | None:
    total = len(doc.text)
    if total == 0:
        return None
    permissible = sum(1 for ch in doc.text if _is_permissible(ch, cfg.permissible_punctuation))
    if permissible / total < cfg.permissible_char_min_frac:
        return f"{permissible}/{total} permissible chars (< {cfg.permissible_char_min_frac:.0%})"
    return None


def _check_gopher(doc: Document, cfg: FilterConfig) -> str | None:
    g = cfg.gopher
    words = segment_words(doc.text)
    n = len(words)
    if n < g.min_words:
        return f"word count {n} < {g.min_words}"
    if n > g.max_words:
        return f"word count {n} > {g.max_words}"
    mean_len = sum(len(w) for w in words) / n
    if mean_len < g.min_mean_word_len:
        return f"mean word length {mean_len:.2f} < {g.min_mean_word_len}"
    if mean_len > g.max_mean_word_len:
        return f"mean word length {mean_len:.2f} > {g.max_mean_word_len}"
    symbols = sum(doc.text.count(s) for s in g.symbols)
    if symbols / n > g.max_symbol_to_word_ratio:
        return f"symbol-to-word ratio {symbols}/{n} > {g.max_symbol_to_word_ratio}"
    alpha = sum(1 for w in words if _word_has_letter(w))
    if alpha / n < g.min_alpha_word_frac:
        return f"alphabetic word fraction {alpha}/{n} < {g.min_alpha_word_frac}"
    stop_set = set(g.stop_words)
    distinct_stops = len({w for w in words if w in stop_set})
    if distinct_stops < g.min_stop_words:
        return f"{distinct_stops} distinct stop words < {g.min_stop_words}"
    if doc.text:
        punct = sum(1 for ch in doc.text if unicodedata.category(ch).startswith("P"))
        if punct / len(doc.text) > g.max_punct_char_frac:
            return f"punctuation fraction {punct}/{len(doc.text)} > {g.max_punct_char_frac}"
    return None


_CHECKS = {
    Rule.SAFETY: _check_safety,
    Rule.ADS: _check_ads,
    Rule.LINES: _check_lines,
    Rule.CHARS: _check_chars,
    Rule.GOPHER: _check_gopher,
}


def apply_filter(doc: Document, rule: Rule, cfg: FilterConfig) -> FilterDecision:
    """Verdict of a single rule on an already-normalized document."""
    detail = _CHECKS[rule](doc, cfg)
    if detail is None:
        return KEEP
    return FilterDecision(keep=False, rule=rule, detail=detail)


def first_failure(doc: Document, cfg: FilterConfig) -> FilterDecision:
    """Run rules in pipeline order; the first failing rule gets the attribution."""
    for rule in RULE_ORDER:
        decision = apply_filter(doc, rule, cfg)
        if not decision.keep:
            return decision
    return KEEP


# --- Reporting ---------------------------------------------------------------


@dataclass
class SourceCounters:
    docs_in: int = 0
    tokens_in: int = 0
    docs_removed: dict[str, int] = field(default_factory=dict)
    tokens_removed: dict[str, int] = field(default_factory=dict)

    @property
    def docs_removed_total(self) -> int:
        return sum(self.docs_removed.values())

    @property
    def tokens_removed_total(self) -> int:
        return sum(self.tokens_removed.values())

    @property
    def docs_kept(self) -> int:
        return self.docs_in - self.docs_removed_total

    @property
    def tokens_kept(self) -> int:
        return self.tokens_in - self.tokens_removed_total


class ReportSchemaError(ValueError):
    pass


@dataclass
class CleaningReport:
    """Per-source, per-rule removal counters in the shape of a before/after table.

    merge() is counterwise addition (associative and commutative), so sharded
    pipeline runs aggregate to exactly the single-shard report.
    """

    rules: tuple[str, ...] = tuple(r.value for r in RULE_ORDER)
    sources: dict[str, SourceCounters] = field(default_factory=dict)

    def record(self, source: Source, tokens: int, decision: FilterDecision) -> None:
        counters = self.sources.setdefault(source.value, SourceCounters())
        counters.docs_in += 1
        counters.tokens_in += tokens
        if not decision.keep:
            rule = decision.rule.value
            counters.docs_removed[rule] = counters.docs_removed.get(rule, 0) + 1
            counters.tokens_removed[rule] = counters.tokens_removed.get(rule, 0) + tokens

    def totals(self) -> SourceCounters:
        total = SourceCounters()
        for counters in self.sources.values():
            total.docs_in += counters.docs_in
            total.tokens_in += counters.tokens_in
            for rule, count in counters.docs_removed.items():
                total.docs_removed[rule] = total.docs_removed.get(rule, 0) + count
            for rule, count in counters.tokens_removed.items():
                total.tokens_removed[rule] = total.tokens_removed.get(rule, 0) + count
        return total

    def to_dict(self) -> dict:
        out: dict = {"rules": list(self.rules), "sources": {}}
        for name, counters in self.sources.items():
            out["sources"][name] = {
                "docs_in": counters.docs_in,
                "tokens_in": counters.tokens_in,
                "docs_removed": dict(counters.docs_removed),
                "tokens_removed": dict(counters.tokens_removed),
                "docs_kept": counters.docs_kept,
                "tokens_kept": counters.tokens_kept,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CleaningReport":
        report = cls(rules=tuple(data["rules"]))
        for name, raw in data["sources"].items():
            report.sources[name] = SourceCounters(
                docs_in=raw["docs_in"],
                tokens_in=raw["tokens_in"],
                docs_removed=dict(raw["docs_removed"]),
                tokens_removed=dict(raw["tokens_removed"]),
            )
        return report

    def csv_rows(self) -> list[list]:
        """Tabular summary: tokens/docs before and after, kept percentages."""
        rows: list[list] = [[
            "dataset", "tokens_before", "docs_before",
            "tokens_after", "docs_after", "tokens_kept_pct", "docs_kept_pct",
        ]]
        entries = list(sorted(self.sources.items()))
        if len(entries) > 1:
            entries.append(("total", self.totals()))
        for name, c in entries:
            rows.append([
                name, c.tokens_in, c.docs_in, c.tokens_kept, c.docs_kept,
                _pct(c.tokens_kept, c.tokens_in), _pct(c.docs_kept, c.docs_in),
            ])
        return rows


def _pct(part: int, whole: int) -> str:
    if whole == 0:
        return ""
    return f"{100.0 * part / whole:.1f}"


def merge_reports(a: CleaningReport, b: CleaningReport) -> CleaningReport:
    if tuple(a.rules) != tuple(b.rules):
        raise ReportSchemaError(f"rule sets differ: {a.rules} vs {b.rules}")
    merged = CleaningReport(rules=tuple(a.rules))
    for report in (a, b):
        for name, counters in report.sources.items():
            target = merged.sources.setdefault(name, SourceCounters())
            target.docs_in += counters.docs_in
            target.tokens_in += counters.tokens_in
            for rule, count in counters.docs_removed.items():
                target.docs_removed[rule] = target.docs_removed.get(rule, 0) + count
            for rule, count in counters.tokens_removed.items():
                target.tokens_removed[rule] = target.tokens_removed.get(rule, 0) + count
    return merged


# --- Pipeline ----------------------------------------------------------------


def iter_pipeline(
    docs: Iterable[Document],
    cfg: FilterConfig,
    tok: TokenizerAdapter,
    report: CleaningReport,
    char_map: CharMap = DEFAULT_CHAR_MAP,
    title_patterns: Iterable[str] = DEFAULT_TITLE_DATE_PATTERNS,
) -> Iterator[Document]:
    """Streaming clean: normalize chars, strip title/date, filter, account.

    Kept documents are yielded with the cleanup applied; ``report`` is
    updated in place as documents flow through. Token counts use ``tok`` on
    the cleaned text, so sharded runs merge to identical numbers.
    """
    for doc in docs:
        cleaned = replace(doc, text=normalize_chars(doc.text, char_map))
        cleaned = strip_title_date(cleaned, title_patterns)
        decision = first_failure(cleaned, cfg)
        report.record(cleaned.source, tok.count_tokens(cleaned.text), decision)
        if decision.keep:
            yield cleaned


def run_pipeline(
    docs: Iterable[Document],
    cfg: FilterConfig,
    tok: TokenizerAdapter,
    char_map: CharMap = DEFAULT_CHAR_MAP,
    title_patterns: Iterable[str] = DEFAULT_TITLE_DATE_PATTERNS,
) -> tuple[list[Document], CleaningReport]:
    report = CleaningReport()
    kept = list(iter_pipeline(docs, cfg, tok, report, char_map, title_patterns))
    return kept, report
