"""Token accounting and deterministic pre-training mixture planning.

The planner turns raw per-source token counts into sampling fractions,
token quotas, and epoch counts. Upweighting one language relative to its
natural token share (e.g. oversampling Arabic 4.6x against English) is a
direct dial here; ``suggested_upweight`` derives the dial from measured
fertility for callers who want the bias-correction rationale made concrete.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .corpus import Document
from .tokenization import TokenizerAdapter, WhitespaceTokenizer


@dataclass(frozen=True)
class SourceStats:
    name: str
    tokens: int
    language: str = "other"

    def __post_init__(self):
        if self.tokens <= 0:
            raise ValueError(f"source {self.name!r} must have tokens > 0")


@dataclass(frozen=True)
class PlanEntry:
    name: str
    sampling_fraction: float
    token_quota: int
    epochs: float


@dataclass(frozen=True)
class MixturePlan:
    entries: tuple[PlanEntry, ...]
    total_tokens: int
    seed: int

    def entry(self, name: str) -> PlanEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "seed": self.seed,
            "entries": [
                {
                    "name": e.name,
                    "sampling_fraction": e.sampling_fraction,
                    "token_quota": e.token_quota,
                    "epochs": e.epochs,
                }
                for e in self.entries
            ],
        }


def sampling_percentages(upweights: Mapping[str, float]) -> dict[str, float]:
    """Normalize per-group upweights into sampling fractions.

    Fractions are proportional to the weights (scale invariant): a 4.6:1
    Arabic:English upweight gives 4.6/5.6 vs 1/5.6, i.e. roughly 82%/18%.
    """
    if not upweights:
        raise ValueError("no groups given")
    for name, w in upweights.items():
        if w <= 0:
            raise ValueError(f"upweight for {name!r} must be > 0, got {w}")
    total = sum(upweights.values())
    return {name: w / total for name, w in upweights.items()}


def token_shares(sources: Iterable[SourceStats]) -> dict[str, float]:
    """Share of raw tokens per language group."""
    sources = list(sources)
    if not sources:
        raise ValueError("no sources given")
    per_language: dict[str, int] = {}
    for s in sources:
        per_language[s.language] = per_language.get(s.language, 0) + s.tokens
    total = sum(per_language.values())
    return {lang: tokens / total for lang, tokens in per_language.items()}


def _largest_remainder(fractions: list[float], total: int) -> list[int]:
    raw = [f * total for f in fractions]
    quotas = [int(r) for r in raw]
    shortfall = total - sum(quotas)
    by_remainder = sorted(range(len(raw)), key=lambda i: (raw[i] - quotas[i], -i), reverse=True)
    for i in by_remainder[:shortfall]:
        quotas[i] += 1
    return quotas


def plan_mixture(
    sources: Iterable[SourceStats],
    fractions: Mapping[str, float],
    total_tokens: int,
    seed: int = 0,
) -> MixturePlan:
    """Assign token quotas and epoch counts from sampling fractions.

    Fractions are keyed by source name and must sum to 1; quotas use
    largest-remainder rounding so they sum to exactly ``total_tokens``.
    Epoch counts above 1 mean the source is repeated.
    """
    sources = list(sources)
    if total_tokens < 0:
        raise ValueError("total_tokens must be >= 0")
    names = [s.name for s in sources]
    unknown = set(fractions) - set(names)
    if unknown:
        raise ValueError(f"fractions reference unknown sources: {sorted(unknown)}")
    missing = set(names) - set(fractions)
    if missing:
        raise ValueError(f"missing fractions for sources: {sorted(missing)}")
    total_frac = sum(fractions.values())
    if abs(total_frac - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {total_frac}")
    quotas = _largest_remainder([fractions[n] for n in names], total_tokens)
    entries = tuple(
        PlanEntry(
            name=s.name,
            sampling_fraction=fractions[s.name],
            token_quota=q,
            epochs=q / s.tokens,
        )
        for s, q in zip(sources, quotas)
    )
    return MixturePlan(entries=entries, total_tokens=total_tokens, seed=seed)


def suggested_upweight(fertility_target: float, fertility_reference: float) -> float:
    """Upweight that compensates a fertility gap (target over reference)."""
    if fertility_target <= 0 or fertility_reference <= 0:
        raise ValueError("fertility scores must be > 0")
    return fertility_target / fertility_reference


class StreamExhaustedError(RuntimeError):
    pass


def sample_stream(
    plan: MixturePlan,
    streams: Mapping[str, Iterable[Document]],
    tok: TokenizerAdapter | None = None,
) -> Iterator[Document]:
    """Seeded interleaving of per-source streams, driven by remaining quota.

    Each draw picks a source with probability proportional to its unfilled
    token quota, so realized per-source token counts converge to the plan.
    Streams must be restartable (re-iterable) when a quota implies more than
    one epoch; a stream that yields nothing on restart raises
    StreamExhaustedError. The same plan seed reproduces the same sequence.
    """
    tok = tok or WhitespaceTokenizer()
    rng = random.Random(plan.seed)
    missing = [e.name for e in plan.entries if e.name not in streams]
    if missing:
        raise ValueError(f"no stream for planned sources: {missing}")

    remaining = {e.name: e.token_quota for e in plan.entries if e.token_quota > 0}
    iterators = {name: iter(streams[name]) for name in remaining}
    epoch_tokens = {name: 0 for name in remaining}  # progress since last restart

    while remaining:
        names = sorted(remaining)
        weights = [remaining[n] for n in names]
        choice = rng.choices(names, weights=weights, k=1)[0]
        doc = _next_doc(iterators, streams, epoch_tokens, choice)
        tokens = tok.count_tokens(doc.text)
        epoch_tokens[choice] += tokens
        remaining[choice] -= tokens
        if remaining[choice] <= 0:
            del remaining[choice]
        yield doc


def _next_doc(iterators, streams, epoch_tokens, name: str) -> Document:
    try:
        return next(iterators[name])
    except StopIteration:
        if epoch_tokens[name] == 0:
            raise StreamExhaustedError(
                f"stream for source {name!r} made no token progress over a full pass"
            ) from None
        epoch_tokens[name] = 0
        iterators[name] = iter(streams[name])  # next epoch
        try:
            return next(iterators[name])
        except StopIteration:
            raise StreamExhaustedError(
                f"stream for source {name!r} is empty or not restartable"
            ) from None
