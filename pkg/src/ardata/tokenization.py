"""Pluggable tokenizers and corpus fertility scoring.

Fertility is the ratio of subword tokens to whitespace words over a whole
corpus: 1.0 means one token per word (the floor for any tokenizer that never
merges across whitespace); single-character tokenization is the ceiling.
Three reference tokenizers are shipped so fertility comparisons run without
any external model: whitespace (identity), character-level, and a greedy
longest-prefix subword tokenizer loaded from a plain-text vocab file.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

from .corpus import Document


class TokenizerAdapter(Protocol):
    """Anything that can count tokens for a piece of text.

    Implementations must be deterministic and return 0 for the empty string.
    """

    name: str

    def count_tokens(self, text: str) -> int: ...


def segment_words(text: str) -> list[str]:
    """Words are maximal runs of non-whitespace; punctuation stays attached."""
    return text.split()


class WhitespaceTokenizer:
    """Identity tokenizer: one token per whitespace word (fertility 1.0)."""

    name = "whitespace"

    def count_tokens(self, text: str) -> int:
        return len(segment_words(text))


class CharacterTokenizer:
    """One token per non-whitespace character (the overtokenization ceiling)."""

    name = "character"

    def count_tokens(self, text: str) -> int:
        return sum(len(word) for word in segment_words(text))


class VocabTokenizer:
    """Greedy longest-prefix subword tokenizer over a plain-text vocabulary.

    Each word is consumed left to right by the longest vocabulary entry that
    prefixes the remainder, falling back to a single character. Tokens never
    span whitespace, so fertility is always >= 1.
    """

    def __init__(self, vocab: Iterable[str], name: str = "vocab"):
        self.name = name
        self._vocab = {entry for entry in vocab if entry}
        self._max_len = max((len(v) for v in self._vocab), default=1)

    @classmethod
    def from_file(cls, path: str | Path, name: str | None = None) -> "VocabTokenizer":
        p = Path(path)
        entries = [line.rstrip("\n") for line in p.read_text(encoding="utf-8").splitlines()]
        return cls(entries, name=name or p.stem)

    def tokenize_word(self, word: str) -> list[str]:
        tokens: list[str] = []
        i = 0
        while i < len(word):
            piece = word[i : i + 1]
            for length in range(min(self._max_len, len(word) - i), 1, -1):
                candidate = word[i : i + length]
                if candidate in self._vocab:
                    piece = candidate
                    break
            tokens.append(piece)
            i += len(piece)
        return tokens

    def count_tokens(self, text: str) -> int:
        return sum(len(self.tokenize_word(w)) for w in segment_words(text))


@dataclass(frozen=True)
class FertilityReport:
    tokenizer_name: str
    total_words: int
    total_tokens: int
    fertility: float
    average: str = "micro"

    def to_dict(self) -> dict:
        return {
            "tokenizer": self.tokenizer_name,
            "total_words": self.total_words,
            "total_tokens": self.total_tokens,
            "fertility": self.fertility,
            "average": self.average,
        }


@dataclass
class FertilityAccumulator:
    """Mergeable partial sums, so sharded workers can aggregate in any order."""

    words: int = 0
    tokens: int = 0
    doc_ratios_sum: float = 0.0
    docs_with_words: int = 0

    def add(self, text: str, tok: TokenizerAdapter) -> None:
        w = len(segment_words(text))
        t = tok.count_tokens(text)
        self.words += w
        self.tokens += t
        if w > 0:
            self.doc_ratios_sum += t / w
            self.docs_with_words += 1

    def merge(self, other: "FertilityAccumulator") -> "FertilityAccumulator":
        return FertilityAccumulator(
            words=self.words + other.words,
            tokens=self.tokens + other.tokens,
            doc_ratios_sum=self.doc_ratios_sum + other.doc_ratios_sum,
            docs_with_words=self.docs_with_words + other.docs_with_words,
        )

    def report(self, tok_name: str, average: str = "micro") -> FertilityReport:
        if self.words == 0:
            raise ValueError("empty corpus: no words to score")
        if average == "micro":
            score = self.tokens / self.words
        elif average == "macro":
            score = self.doc_ratios_sum / self.docs_with_words
        else:
            raise ValueError(f"unknown average {average!r} (expected 'micro' or 'macro')")
        return FertilityReport(
            tokenizer_name=tok_name,
            total_words=self.words,
            total_tokens=self.tokens,
            fertility=score,
            average=average,
        )


def fertility(
    corpus: Iterable[Document | str],
    tok: TokenizerAdapter,
    average: str = "micro",
) -> FertilityReport:
    """Corpus fertility for one tokenizer.

    Micro average (the default): sum tokens over all documents, divide by the
    summed word count once. ``average="macro"`` instead takes the mean of
    per-document ratios. Raises ValueError on a corpus with no words.
    """
    acc = FertilityAccumulator()
    for doc in corpus:
        acc.add(doc.text if isinstance(doc, Document) else doc, tok)
    return acc.report(tok.name, average=average)
