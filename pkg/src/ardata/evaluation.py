"""Benchmark evaluation harness: cloze format (CF), multiple-choice format
(MCF), and few-shot True/False scoring over a pluggable log-likelihood scorer.

CF compares the log-likelihood of each full answer string appended to the
question context; no option letters appear in the prompt. Optionally each
score is normalized by the answer's UTF-8 byte length, which removes the
systematic bias toward short answers. MCF enumerates the options in the
prompt and scores only the option letters. Ties always resolve to the lowest
index, and tie counts are reported.

Reference scorers (constant, gold oracle, anti-oracle, and a character
n-gram model trained on a bundled mini-corpus) make every code path testable
without loading a neural model.
"""
from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .tokenization import TokenizerAdapter, WhitespaceTokenizer

DEFAULT_LETTERS: tuple[str, ...] = ("A", "B", "C", "D", "E")
DEFAULT_TF_LABELS: tuple[str, str] = ("صح", "خطأ")

UNCATEGORIZED = "uncategorized"


@dataclass
class BenchmarkItem:
    id: str
    question: str
    choices: list[str]
    gold_index: int
    category: str | None = None
    context: str | None = None

    def __post_init__(self):
        if not 2 <= len(self.choices) <= 5:
            raise ValueError(f"item {self.id!r}: need 2..5 choices, got {len(self.choices)}")
        if any(not c for c in self.choices):
            raise ValueError(f"item {self.id!r}: choices must be non-empty strings")
        if not 0 <= self.gold_index < len(self.choices):
            raise ValueError(f"item {self.id!r}: gold_index {self.gold_index} out of range")


def load_benchmark_items(path: str | Path) -> list[BenchmarkItem]:
    """Read a benchmark file: a JSON array of item objects."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("benchmark file must hold a JSON array of items")
    items = []
    for i, raw in enumerate(data):
        items.append(
            BenchmarkItem(
                id=str(raw.get("id", i)),
                question=raw["question"],
                choices=list(raw["choices"]),
                gold_index=int(raw["gold_index"]),
                category=raw.get("category"),
                context=raw.get("context"),
            )
        )
    return items


class Scorer(Protocol):
    """Log-likelihood oracle for a continuation given a context."""

    name: str

    def loglikelihood(self, context: str, continuation: str) -> float: ...


# --- Prompt templates --------------------------------------------------------


@dataclass(frozen=True)
class CfTemplate:
    question_label: str = "سؤال: "
    answer_label: str = "الإجابة:"

    def render(self, item: BenchmarkItem) -> str:
        parts = []
        if item.context:
            parts.append(item.context)
        parts.append(f"{self.question_label}{item.question}")
        parts.append(self.answer_label)
        return "\n".join(parts)


@dataclass(frozen=True)
class McfTemplate:
    question_label: str = "سؤال: "
    answer_label: str = "الإجابة: "

    def render(self, item: BenchmarkItem, letters: Sequence[str]) -> str:
        parts = []
        if item.context:
            parts.append(item.context)
        parts.append(f"{self.question_label}{item.question}")
        parts.extend(f"{letters[i]}. {choice}" for i, choice in enumerate(item.choices))
        parts.append(self.answer_label)
        return "\n".join(parts)


@dataclass(frozen=True)
class TfTemplate:
    answer_label: str = "الإجابة:"

    def render(self, item: BenchmarkItem, shots: Sequence[BenchmarkItem]) -> str:
        blocks = [
            f"{shot.question}\n{self.answer_label} {shot.choices[shot.gold_index]}"
            for shot in shots
        ]
        blocks.append(f"{item.question}\n{self.answer_label}")
        return "\n\n".join(blocks)


DEFAULT_CF_TEMPLATE = CfTemplate()
DEFAULT_MCF_TEMPLATE = McfTemplate()
DEFAULT_TF_TEMPLATE = TfTemplate()


def render_cf_context(item: BenchmarkItem, template: CfTemplate = DEFAULT_CF_TEMPLATE) -> str:
    return template.render(item)


def render_mcf_context(
    item: BenchmarkItem,
    letters: Sequence[str] = DEFAULT_LETTERS,
    template: McfTemplate = DEFAULT_MCF_TEMPLATE,
) -> str:
    return template.render(item, letters)


# --- Results -----------------------------------------------------------------


@dataclass
class EvalResult:
    metric: str
    format: str
    overall: float
    per_category: dict[str, float]
    per_category_n: dict[str, int]
    n: int
    errored: int = 0
    ties: int = 0
    predictions: list[int | None] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "format": self.format,
            "overall": self.overall,
            "per_category": dict(sorted(self.per_category.items())),
            "per_category_n": dict(sorted(self.per_category_n.items())),
            "n": self.n,
            "errored": self.errored,
            "ties": self.ties,
        }


def _argmax_lowest(scores: Sequence[float]) -> tuple[int, bool]:
    best_idx = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best_idx]:
            best_idx = i
    tied = sum(1 for s in scores if s == scores[best_idx]) > 1
    return best_idx, tied


def _accuracy_eval(
    items: Sequence[BenchmarkItem],
    scorer: Scorer,
    context_fn: Callable[[BenchmarkItem], str],
    continuations_fn: Callable[[BenchmarkItem], list[str]],
    divisor_fn: Callable[[BenchmarkItem, int], float] | None,
    metric: str,
    fmt: str,
) -> EvalResult:
    correct: Counter[str] = Counter()
    totals: Counter[str] = Counter()
    predictions: list[int | None] = []
    errored = 0
    ties = 0
    for item in items:
        context = context_fn(item)
        try:
            scores = [scorer.loglikelihood(context, c) for c in continuations_fn(item)]
        except Exception:
            errored += 1
            predictions.append(None)
            continue
        if divisor_fn is not None:
            scores = [s / divisor_fn(item, i) for i, s in enumerate(scores)]
        pred, tied = _argmax_lowest(scores)
        ties += tied
        predictions.append(pred)
        category = item.category or UNCATEGORIZED
        totals[category] += 1
        if pred == item.gold_index:
            correct[category] += 1
    n = sum(totals.values())
    overall = (sum(correct.values()) / n) if n else 0.0
    return EvalResult(
        metric=metric,
        format=fmt,
        overall=overall,
        per_category={cat: correct[cat] / totals[cat] for cat in totals},
        per_category_n=dict(totals),
        n=n,
        errored=errored,
        ties=ties,
        predictions=predictions,
    )


def evaluate_cf(
    items: Sequence[BenchmarkItem],
    scorer: Scorer,
    norm: str = "none",
    template: CfTemplate = DEFAULT_CF_TEMPLATE,
    tokenizer: TokenizerAdapter | None = None,
) -> EvalResult:
    """Cloze-format accuracy: argmax over log-likelihoods of the full answers.

    norm="by_bytes" divides each score by the answer's UTF-8 byte length
    (normalized accuracy); "by_tokens" divides by its token count under
    ``tokenizer`` (whitespace words by default); "none" uses raw scores.
    Items where the scorer raises are excluded and counted in ``errored``.
    """
    if norm == "none":
        divisor_fn = None
        metric = "accuracy"
    elif norm == "by_bytes":
        divisor_fn = lambda item, i: len(item.choices[i].encode("utf-8"))
        metric = "accuracy_norm"
    elif norm == "by_tokens":
        tok = tokenizer or WhitespaceTokenizer()
        divisor_fn = lambda item, i: max(tok.count_tokens(item.choices[i]), 1)
        metric = "accuracy_norm"
    else:
        raise ValueError(f"unknown norm {norm!r} (expected none, by_bytes, or by_tokens)")
    return _accuracy_eval(
        items,
        scorer,
        context_fn=lambda item: template.render(item),
        continuations_fn=lambda item: [" " + c for c in item.choices],
        divisor_fn=divisor_fn,
        metric=metric,
        fmt="cf",
    )


def evaluate_mcf(
    items: Sequence[BenchmarkItem],
    scorer: Scorer,
    letters: Sequence[str] = DEFAULT_LETTERS,
    template: McfTemplate = DEFAULT_MCF_TEMPLATE,
) -> EvalResult:
    """Multiple-choice-format accuracy: options in the prompt, letters scored."""
    max_choices = max((len(item.choices) for item in items), default=0)
    if len(letters) < max_choices:
        raise ValueError(f"need at least {max_choices} letters, got {len(letters)}")
    return _accuracy_eval(
        items,
        scorer,
        context_fn=lambda item: template.render(item, letters),
        continuations_fn=lambda item: [letters[i] for i in range(len(item.choices))],
        divisor_fn=None,
        metric="accuracy",
        fmt="mcf",
    )


def f1_macro(
    golds: Sequence[str],
    preds: Sequence[str],
    labels: Sequence[str],
    exclude_absent: bool = False,
) -> float:
    """Unweighted mean of per-label F1.

    A label absent from both golds and preds contributes F1 = 0 unless
    ``exclude_absent`` drops it from the mean.
    """
    if len(golds) != len(preds):
        raise ValueError(f"length mismatch: {len(golds)} golds vs {len(preds)} preds")
    scores = []
    for label in labels:
        tp = sum(1 for g, p in zip(golds, preds) if g == label and p == label)
        fp = sum(1 for g, p in zip(golds, preds) if g != label and p == label)
        fn = sum(1 for g, p in zip(golds, preds) if g == label and p != label)
        if tp == fp == fn == 0:
            if exclude_absent:
                continue
            scores.append(0.0)
            continue
        scores.append(2 * tp / (2 * tp + fp + fn))
    if not scores:
        raise ValueError("no labels to score")
    return sum(scores) / len(scores)


def evaluate_true_false(
    items: Sequence[BenchmarkItem],
    scorer: Scorer,
    exemplars: Sequence[BenchmarkItem],
    shots: int = 5,
    seed: int = 0,
    template: TfTemplate = DEFAULT_TF_TEMPLATE,
) -> EvalResult:
    """Few-shot True/False evaluation scored with macro F1.

    Every item must have exactly two choices (the label strings). ``shots``
    exemplars are drawn once from the held-out pool with the given seed and
    prefixed, with their gold labels, to every query.
    """
    for item in items:
        if len(item.choices) != 2:
            raise ValueError(f"item {item.id!r}: true/false items need exactly 2 choices")
    if shots > len(exemplars):
        raise ValueError(f"exemplar pool ({len(exemplars)}) smaller than shots ({shots})")
    item_ids = {item.id for item in items}
    overlap = [ex.id for ex in exemplars if ex.id in item_ids]
    if overlap:
        raise ValueError(f"exemplar pool overlaps evaluated items: {overlap[:5]}")

    rng = random.Random(seed)
    shot_items = rng.sample(list(exemplars), shots)

    golds: list[str] = []
    preds: list[str] = []
    per_category: dict[str, tuple[list[str], list[str]]] = {}
    predictions: list[int | None] = []
    errored = 0
    ties = 0
    for item in items:
        context = template.render(item, shot_items)
        try:
            scores = [scorer.loglikelihood(context, " " + c) for c in item.choices]
        except Exception:
            errored += 1
            predictions.append(None)
            continue
        pred, tied = _argmax_lowest(scores)
        ties += tied
        predictions.append(pred)
        golds.append(item.choices[item.gold_index])
        preds.append(item.choices[pred])
        bucket = per_category.setdefault(item.category or UNCATEGORIZED, ([], []))
        bucket[0].append(item.choices[item.gold_index])
        bucket[1].append(item.choices[pred])

    labels = sorted({label for item in items for label in item.choices})
    overall = f1_macro(golds, preds, labels) if golds else 0.0
    return EvalResult(
        metric="f1_macro",
        format="cf",
        overall=overall,
        per_category={cat: f1_macro(g, p, labels) for cat, (g, p) in per_category.items()},
        per_category_n={cat: len(g) for cat, (g, _) in per_category.items()},
        n=len(golds),
        errored=errored,
        ties=ties,
        predictions=predictions,
    )


# --- Reference scorers ---------------------------------------------------------


class ConstantScorer:
    """Same score for everything; predictions collapse to index 0 by tie-break."""

    def __init__(self, value: float = 0.0, name: str = "constant"):
        self.value = value
        self.name = name

    def loglikelihood(self, context: str, continuation: str) -> float:
        return self.value


_MISS = -1e9


class OracleScorer:
    """Scores the gold continuation of whichever item the context ends with.

    Built from (key, accepted continuations) pairs where the key is a
    substring unique to the item (its question); the pair whose key occurs
    last in the context identifies the item being scored.
    """

    def __init__(
        self,
        pairs: Iterable[tuple[str, tuple[str, ...]]],
        hit: float = 0.0,
        miss: float = _MISS,
        name: str = "oracle",
    ):
        self.pairs = list(pairs)
        self.hit = hit
        self.miss = miss
        self.name = name

    @classmethod
    def for_cf(cls, items: Sequence[BenchmarkItem], **kwargs) -> "OracleScorer":
        return cls([(it.question, (" " + it.choices[it.gold_index],)) for it in items], **kwargs)

    @classmethod
    def for_mcf(
        cls,
        items: Sequence[BenchmarkItem],
        letters: Sequence[str] = DEFAULT_LETTERS,
        **kwargs,
    ) -> "OracleScorer":
        return cls([(it.question, (letters[it.gold_index],)) for it in items], **kwargs)

    @classmethod
    def for_true_false(cls, items: Sequence[BenchmarkItem], **kwargs) -> "OracleScorer":
        return cls([(it.question, (" " + it.choices[it.gold_index],)) for it in items], **kwargs)

    @classmethod
    def anti(cls, pairs: Iterable[tuple[str, tuple[str, ...]]], name: str = "anti-oracle"):
        return cls(pairs, hit=_MISS, miss=0.0, name=name)

    def loglikelihood(self, context: str, continuation: str) -> float:
        best_pos = -1
        golds: tuple[str, ...] = ()
        for key, accepted in self.pairs:
            pos = context.rfind(key)
            if pos > best_pos:
                best_pos = pos
                golds = accepted
        if best_pos < 0:
            return self.miss
        return self.hit if continuation in golds else self.miss


# A bundled mini-corpus (Arabic with a little English) for the n-gram scorer,
# enough to give distinct, deterministic statistics to every test path.
MINI_CORPUS = (
    "اللغة العربية من أكثر اللغات انتشاراً في العالم. "
    "يتحدث بها ملايين الناس في بلدان كثيرة. "
    "تكتب العربية من اليمين إلى اليسار. "
    "القراءة تفتح أبواب المعرفة للجميع. "
    "الكتاب خير جليس في الزمان. "
    "تشرق الشمس صباحاً وتغرب مساءً. "
    "المطر ينزل من السماء فيسقي الأرض. "
    "العلم نور والجهل ظلام. "
    "المدينة قريبة من الساحل والجبل بعيد. "
    "في الصحراء رمال ذهبية ونجوم لامعة في الليل. "
    "Language models learn statistics from text. "
    "The quick brown fox jumps over the lazy dog. "
    "Reading opens the door to knowledge for everyone. "
    "Rain falls from the sky and waters the earth."
)


class CharNgramScorer:
    """Character n-gram language model with add-one smoothing.

    Trained once on a small bundled corpus; scores the continuation
    characters conditioned on the context tail. Deterministic and finite for
    any non-empty continuation.
    """

    def __init__(self, n: int = 3, corpus: str = MINI_CORPUS, name: str = "char-ngram"):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.name = name
        self._vocab = sorted(set(corpus)) + ["\x00"]
        self._vocab_size = len(self._vocab)
        self._known = set(corpus)
        self._ngram_counts: Counter[tuple[str, str]] = Counter()
        self._history_counts: Counter[str] = Counter()
        padded = "\x00" * (n - 1) + corpus
        for i in range(n - 1, len(padded)):
            history = padded[i - (n - 1) : i]
            self._ngram_counts[(history, padded[i])] += 1
            self._history_counts[history] += 1

    def _canon(self, ch: str) -> str:
        return ch if ch in self._known else "\x00"

    def loglikelihood(self, context: str, continuation: str) -> float:
        if not continuation:
            return 0.0
        sequence = "\x00" * (self.n - 1) + "".join(self._canon(c) for c in context + continuation)
        start = len(sequence) - len(continuation)
        total = 0.0
        for i in range(start, len(sequence)):
            history = sequence[i - (self.n - 1) : i] if self.n > 1 else ""
            count = self._ngram_counts[(history, sequence[i])]
            denom = self._history_counts[history] + self._vocab_size
            total += math.log((count + 1) / denom)
        return total


# --- CF vs MCF difference report -------------------------------------------------


@dataclass(frozen=True)
class DiffRow:
    model: str
    cf: float
    mcf: float

    @property
    def diff(self) -> float:
        return self.cf - self.mcf


def cf_mcf_diff(
    items: Sequence[BenchmarkItem],
    scorers: Mapping[str, Scorer],
    norm: str = "none",
    letters: Sequence[str] = DEFAULT_LETTERS,
) -> list[DiffRow]:
    """CF minus MCF accuracy per scorer, for difference charts."""
    rows = []
    for model_name in sorted(scorers):
        scorer = scorers[model_name]
        cf = evaluate_cf(items, scorer, norm=norm)
        mcf = evaluate_mcf(items, scorer, letters=letters)
        rows.append(DiffRow(model=model_name, cf=cf.overall, mcf=mcf.overall))
    return rows
