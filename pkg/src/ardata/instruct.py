"""Synthetic instruction-dialogue factory.

Cleaned documents are chunked on sentence punctuation, wrapped into
rephrasing prompts (plain question/answer dialogues, or multiple-choice
questions seeded with a one-shot exemplar), sent to a pluggable generator,
and the responses are parsed and structurally validated before being
rendered as ChatML. A deterministic mock generator is shipped so the whole
factory runs and tests offline; swap in a real model client by implementing
``GeneratorAdapter``.
"""
from __future__ import annotations

import hashlib
import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol

from .corpus import Document
from .tokenization import segment_words

HUMAN = "human"
GPT = "gpt"

ORIGIN_REPHRASE_STANDARD = "rephrase_standard"
ORIGIN_REPHRASE_MCQ = "rephrase_mcq"
ORIGIN_INSTAR = "instar"
ORIGIN_AYA = "aya"


@dataclass
class Turn:
    role: str
    value: str


@dataclass
class Dialogue:
    """Alternating human/gpt conversation; ``origin`` is bookkeeping only."""

    turns: list[Turn]
    origin: str | None = field(default=None, compare=False)

    @property
    def question_turns(self) -> int:
        return sum(1 for t in self.turns if t.role == HUMAN)


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str = ""


class ParseRejection(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail

    def as_rejection(self) -> Rejection:
        return Rejection(reason=self.reason, detail=self.detail)


def validate_dialogue(d: Dialogue) -> str | None:
    """Reason the dialogue breaks the structural contract, or None if valid."""
    if not d.turns:
        return "empty"
    if len(d.turns) < 2:
        return "too_few_turns"
    if any(t.role not in (HUMAN, GPT) for t in d.turns):
        return "bad_role"
    if d.turns[0].role != HUMAN or d.turns[-1].role != GPT:
        return "role_order"
    for prev, cur in zip(d.turns, d.turns[1:]):
        if prev.role == cur.role:
            return "role_order"
    if any(not t.value.strip() for t in d.turns):
        return "empty_turn"
    return None


# --- MCQ items ----------------------------------------------------------------

ENUM_STYLES: dict[str, tuple[str, ...]] = {
    "latin_letters": ("A", "B", "C", "D", "E"),
    "arabic_letters": ("أ", "ب", "ج", "د", "ه"),
    "western_digits": ("1", "2", "3", "4", "5"),
    "arabic_indic_digits": ("١", "٢", "٣", "٤", "٥"),
}

_ANSWER_LABELS = ("الإجابة", "الاجابة", "الجواب", "Answer")
_ANSWER_RE = re.compile(
    r"^\s*(?:" + "|".join(_ANSWER_LABELS) + r")\s*[::]\s*(.+?)\s*$"
)
_OPTION_MARKERS = {m: (style, i) for style, markers in ENUM_STYLES.items() for i, m in enumerate(markers)}
_OPTION_RE = re.compile(
    r"^\s*(" + "|".join(re.escape(m) for m in _OPTION_MARKERS) + r")[.)]\s+(.+?)\s*$"
)


@dataclass
class MCQItem:
    question: str
    options: list[str]
    answer_index: int
    enum_style: str = "latin_letters"


def validate_mcq(item: MCQItem) -> str | None:
    if not item.question.strip():
        return "no_question"
    if len(item.options) < 2:
        return "too_few_options"
    if len(item.options) > 5:
        return "too_many_options"
    if any(not o.strip() for o in item.options):
        return "empty_option"
    if len(set(item.options)) != len(item.options):
        return "duplicate_options"
    if not 0 <= item.answer_index < len(item.options):
        return "answer_missing"
    if item.enum_style not in ENUM_STYLES:
        return "bad_style"
    return None


def render_mcq(item: MCQItem) -> str:
    """Question, enumerated options, and an answer line naming the marker."""
    reason = validate_mcq(item)
    if reason:
        raise ValueError(f"invalid MCQ item: {reason}")
    markers = ENUM_STYLES[item.enum_style]
    lines = [item.question]
    lines.extend(f"{markers[i]}. {opt}" for i, opt in enumerate(item.options))
    lines.append(f"الإجابة: {markers[item.answer_index]}")
    return "\n".join(lines)


def parse_mcq(text: str) -> MCQItem:
    """Inverse of render_mcq; raises ParseRejection with a structured reason."""
    if not text.strip():
        raise ParseRejection("empty")
    question_lines: list[str] = []
    options: list[str] = []
    style: str | None = None
    answer_raw: str | None = None
    for line in text.split("\n"):
        if not line.strip():
            continue
        m = _ANSWER_RE.match(line)
        if m and options:
            answer_raw = m.group(1)
            continue
        m = _OPTION_RE.match(line)
        if m:
            marker_style, index = _OPTION_MARKERS[m.group(1)]
            if style is None:
                style = marker_style
            elif style != marker_style:
                raise ParseRejection("mixed_enumeration", f"{style} vs {marker_style}")
            if index != len(options):
                raise ParseRejection("bad_marker_order", m.group(1))
            options.append(m.group(2))
            continue
        if not options:
            question_lines.append(line.strip())
        else:
            raise ParseRejection("unparseable", f"stray line after options: {line.strip()!r}")
    if not options or style is None:
        raise ParseRejection("too_few_options" if question_lines else "unparseable")
    if len(options) < 2:
        raise ParseRejection("too_few_options")
    if len(options) > 5:
        raise ParseRejection("too_many_options")
    if len(set(options)) != len(options):
        raise ParseRejection("duplicate_options")
    if not question_lines:
        raise ParseRejection("no_question")
    if answer_raw is None:
        raise ParseRejection("no_answer")
    markers = ENUM_STYLES[style]
    answer_index: int | None = None
    if answer_raw in markers:
        idx = markers.index(answer_raw)
        answer_index = idx if idx < len(options) else None
    elif answer_raw in options:
        answer_index = options.index(answer_raw)
    if answer_index is None:
        raise ParseRejection("answer_missing", answer_raw)
    return MCQItem(
        question="\n".join(question_lines),
        options=options,
        answer_index=answer_index,
        enum_style=style,
    )


def mcq_to_dialogue(item: MCQItem, origin: str | None = ORIGIN_REPHRASE_MCQ) -> Dialogue:
    """Wrap an MCQ as one question/answer pair: options shown, marker answered."""
    markers = ENUM_STYLES[item.enum_style]
    human = "\n".join(
        [item.question] + [f"{markers[i]}. {opt}" for i, opt in enumerate(item.options)]
    )
    gpt = f"{markers[item.answer_index]}. {item.options[item.answer_index]}"
    return Dialogue(turns=[Turn(HUMAN, human), Turn(GPT, gpt)], origin=origin)


# --- Chunking -----------------------------------------------------------------

_SENTENCE_RE = re.compile(r"[^.!?؟۔]+(?:[.!?؟۔]+)?")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_RE.findall(text) if s.strip()]


def chunk_document(doc: Document | str, max_chars: int) -> list[str]:
    """Greedy sentence packing into chunks of at most ``max_chars`` characters.

    Sentences end at Arabic or Latin sentence-final punctuation. A sentence
    is only ever split mid-way when it alone exceeds ``max_chars``.
    """
    if max_chars < 1:
        raise ValueError("max_chars must be >= 1")
    text = doc.text if isinstance(doc, Document) else doc
    if not text.strip():
        return []
    if len(text) <= max_chars:
        return [text]
    chunks: list[str] = []
    current = ""
    for sentence in split_sentences(text):
        if len(sentence) > max_chars:
            if current:
                chunks.append(current)
                current = ""
            chunks.extend(sentence[i : i + max_chars] for i in range(0, len(sentence), max_chars))
            continue
        candidate = f"{current} {sentence}" if current else sentence
        if len(candidate) <= max_chars:
            current = candidate
        else:
            chunks.append(current)
            current = sentence
    if current:
        chunks.append(current)
    return chunks


# --- Prompts and the generator interface ---------------------------------------

PROMPT_VERSION = "v1"

_CHUNK_OPEN = "النص: «"
_CHUNK_CLOSE = "»"

STANDARD_PROMPT_TEMPLATE = (
    "أنشئ حواراً من أسئلة وأجوبة اعتماداً على النص التالي فقط.\n"
    'اكتب كل سؤال في سطر يبدأ بـ"سؤال:" وكل جواب في سطر يبدأ بـ"جواب:".\n'
    "\n"
    f"{_CHUNK_OPEN}{{chunk}}{_CHUNK_CLOSE}"
)

MCQ_PROMPT_TEMPLATE = (
    "أنشئ سؤال اختيار من متعدد مع إجابته اعتماداً على النص التالي،"
    " بنفس تنسيق المثال المعطى.\n"
    "\n"
    "مثال:\n"
    "{exemplar}\n"
    "\n"
    f"{_CHUNK_OPEN}{{chunk}}{_CHUNK_CLOSE}"
)

# Alphabetic markers dominate real MCQ output; other styles appear occasionally.
_STYLE_NAMES = tuple(ENUM_STYLES)
_STYLE_WEIGHTS = (0.7, 0.1, 0.1, 0.1)

DEFAULT_EXEMPLAR = MCQItem(
    question="ما عاصمة المملكة العربية السعودية؟",
    options=["جدة", "الرياض", "مكة", "الدمام"],
    answer_index=1,
)


def build_prompt(
    chunk: str,
    template: str = "standard",
    exemplar: MCQItem | None = None,
    seed: int = 0,
    style: str | None = None,
) -> str:
    """Render a rephrasing prompt around a document chunk.

    The standard template asks for a labeled question/answer dialogue and
    contains the chunk verbatim exactly once. The MCQ template embeds the
    one-shot exemplar re-rendered in an enumeration style drawn from the
    seed (pass ``style`` to pin it). Deterministic in (chunk, seed, style).
    """
    if template == "standard":
        return STANDARD_PROMPT_TEMPLATE.format(chunk=chunk)
    if template == "mcq":
        if exemplar is None:
            raise ValueError("mcq template requires an exemplar MCQItem")
        if style is None:
            rng = random.Random(seed)
            style = rng.choices(_STYLE_NAMES, weights=_STYLE_WEIGHTS, k=1)[0]
        shot = MCQItem(
            question=exemplar.question,
            options=list(exemplar.options),
            answer_index=exemplar.answer_index,
            enum_style=style,
        )
        return MCQ_PROMPT_TEMPLATE.format(exemplar=render_mcq(shot), chunk=chunk)
    raise ValueError(f"unknown template {template!r}")


class GeneratorAdapter(Protocol):
    """Text generator behind the rephrasing prompts (an LLM in production)."""

    name: str

    def generate(self, prompt: str, seed: int) -> str: ...


def _stable_hash(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def _extract_chunk(prompt: str) -> str:
    start = prompt.rfind(_CHUNK_OPEN)
    if start < 0:
        return prompt
    start += len(_CHUNK_OPEN)
    end = prompt.rfind(_CHUNK_CLOSE)
    if end <= start:
        return prompt[start:]
    return prompt[start:end]


_ORDINALS = ("الأول", "الثاني", "الثالث", "الرابع", "الخامس")


@dataclass
class MockGenerator:
    """Offline stand-in for the rephrasing model.

    Deterministic in (prompt, seed). Emits labeled Q/A dialogues for
    standard prompts (mostly two pairs) and single multiple-choice questions
    for MCQ prompts (marker style mostly alphabetic). ``malformed_rate``
    plants structurally broken responses for exercising the filters.
    """

    malformed_rate: float = 0.0
    name: str = "mock"

    def generate(self, prompt: str, seed: int) -> str:
        rng = random.Random(_stable_hash(self.name, seed, prompt))
        words = segment_words(_extract_chunk(prompt))
        if not words:
            words = ["النص"]
        if "اختيار من متعدد" in prompt:
            return self._mcq(rng, words)
        return self._standard(rng, words)

    def _pick(self, rng: random.Random, words: list[str], k: int) -> list[str]:
        return [words[rng.randrange(len(words))] for _ in range(k)]

    def _standard(self, rng: random.Random, words: list[str]) -> str:
        if rng.random() < self.malformed_rate:
            mode = rng.randrange(3)
            if mode == 0:
                return " ".join(self._pick(rng, words, 6))  # no labels at all
            if mode == 1:
                return "جواب: " + " ".join(self._pick(rng, words, 4)) + "\nسؤال: لماذا؟"
            return "سؤال: ما المقصود؟\nجواب:"
        pairs = rng.choices((1, 2, 3), weights=(0.2, 0.65, 0.15), k=1)[0]
        lines = []
        for _ in range(pairs):
            q = self._pick(rng, words, 2)
            a = self._pick(rng, words, 5)
            lines.append(f"سؤال: ما الذي يذكره النص عن {q[0]} و{q[1]}؟")
            lines.append(f"جواب: يذكر النص أن {' '.join(a)}.")
        return "\n".join(lines)

    def _mcq(self, rng: random.Random, words: list[str]) -> str:
        style = rng.choices(_STYLE_NAMES, weights=_STYLE_WEIGHTS, k=1)[0]
        picks = self._pick(rng, words, 4)
        options = [f"{_ORDINALS[i]}: {w}" for i, w in enumerate(picks)]
        item = MCQItem(
            question=f"أي مما يلي ورد في النص عن {picks[0]}؟",
            options=options,
            answer_index=rng.randrange(4),
            enum_style=style,
        )
        if rng.random() < self.malformed_rate:
            mode = rng.randrange(3)
            markers = ENUM_STYLES[style]
            if mode == 0:  # answer marker beyond the option list
                body = render_mcq(item).rsplit("\n", 1)[0]
                return body + f"\nالإجابة: {markers[4]}"
            if mode == 1:  # single option
                return f"{item.question}\n{markers[0]}. {options[0]}\nالإجابة: {markers[0]}"
            return " ".join(picks)  # no structure
        return render_mcq(item)


# --- Dialogue response parsing --------------------------------------------------

_Q_LABELS = ("سؤال", "س", "Question", "Q")
_A_LABELS = ("الإجابة", "الاجابة", "الجواب", "جواب", "ج", "Answer", "A")
_LABEL_RE = re.compile(
    r"^\s*(?P<label>" + "|".join(_Q_LABELS + _A_LABELS) + r")\s*[::]\s*(?P<rest>.*)$"
)
_Q_SET = set(_Q_LABELS)


def parse_dialogue_response(text: str) -> Dialogue:
    """Extract alternating question/answer turns from labeled lines.

    Lines starting with a question label open a human turn, answer labels a
    gpt turn; unlabeled lines continue the current turn. Raises
    ParseRejection (reason: empty / unparseable / role_order / empty_turn)
    when the result cannot satisfy the dialogue contract.
    """
    if not text.strip():
        raise ParseRejection("empty")
    turns: list[Turn] = []
    current: Turn | None = None
    for line in text.split("\n"):
        m = _LABEL_RE.match(line)
        if m:
            if current is not None:
                turns.append(current)
            role = HUMAN if m.group("label") in _Q_SET else GPT
            current = Turn(role, m.group("rest").strip())
        elif current is not None and line.strip():
            current = Turn(current.role, f"{current.value}\n{line.strip()}".strip())
    if current is not None:
        turns.append(current)
    if not turns:
        raise ParseRejection("unparseable", "no labeled lines")
    dialogue = Dialogue(turns=turns, origin=ORIGIN_REPHRASE_STANDARD)
    reason = validate_dialogue(dialogue)
    if reason:
        raise ParseRejection(reason if reason != "too_few_turns" else "role_order")
    return dialogue


def try_parse_dialogue(text: str) -> Dialogue | Rejection:
    try:
        return parse_dialogue_response(text)
    except ParseRejection as exc:
        return exc.as_rejection()


def try_parse_mcq(text: str) -> Dialogue | Rejection:
    try:
        return mcq_to_dialogue(parse_mcq(text))
    except ParseRejection as exc:
        return exc.as_rejection()


def filter_dialogues(
    candidates: Iterable[Dialogue | Rejection],
) -> tuple[list[Dialogue], dict[str, int]]:
    """Keep structurally valid dialogues; tally rejects by reason."""
    kept: list[Dialogue] = []
    rejects: Counter[str] = Counter()
    for candidate in candidates:
        if isinstance(candidate, Rejection):
            rejects[candidate.reason] += 1
            continue
        reason = validate_dialogue(candidate)
        if reason:
            rejects[reason] += 1
        else:
            kept.append(candidate)
    return kept, dict(rejects)


# --- ChatML ---------------------------------------------------------------------

IM_START = "<|im_start|>"
IM_END = "<|im_end|>"
_ROLE_TO_CHATML = {HUMAN: "user", GPT: "assistant"}
_CHATML_TO_ROLE = {v: k for k, v in _ROLE_TO_CHATML.items()}
_CHATML_BLOCK_RE = re.compile(
    re.escape(IM_START) + r"(user|assistant)\n(.*?)" + re.escape(IM_END) + r"\n",
    re.DOTALL,
)


def render_chatml(d: Dialogue) -> str:
    """One ``<|im_start|>role ... <|im_end|>`` block per turn.

    Values containing the control markers are rejected outright (escaping
    them would silently corrupt training data downstream).
    """
    reason = validate_dialogue(d)
    if reason:
        raise ValueError(f"invalid dialogue: {reason}")
    parts = []
    for turn in d.turns:
        if IM_START in turn.value or IM_END in turn.value:
            raise ValueError("reserved_sequence: turn value contains a ChatML marker")
        parts.append(f"{IM_START}{_ROLE_TO_CHATML[turn.role]}\n{turn.value}{IM_END}\n")
    return "".join(parts)


def parse_chatml(text: str) -> Dialogue:
    """Exact inverse of render_chatml; raises ValueError on malformed input."""
    turns: list[Turn] = []
    pos = 0
    for m in _CHATML_BLOCK_RE.finditer(text):
        if m.start() != pos:
            raise ValueError(f"unbalanced ChatML markers near offset {pos}")
        turns.append(Turn(_CHATML_TO_ROLE[m.group(1)], m.group(2)))
        pos = m.end()
    if pos != len(text) or not turns:
        raise ValueError(f"unbalanced ChatML markers near offset {pos}")
    return Dialogue(turns=turns)


# --- Dataset assembly and statistics ---------------------------------------------


def build_dialogues(
    docs: Iterable[Document],
    generator: GeneratorAdapter,
    template: str = "standard",
    *,
    max_chars: int = 2000,
    seed: int = 0,
    exemplar: MCQItem | None = None,
    style: str | None = None,
) -> tuple[list[Dialogue], dict[str, int]]:
    """Chunk documents, prompt the generator, parse, and filter.

    Work is ordered by (document id, chunk index) so output is deterministic
    no matter how callers parallelize the generator calls. Returns the kept
    dialogues (origin tagged) and the per-reason reject counts.
    """
    if template == "mcq" and exemplar is None:
        exemplar = DEFAULT_EXEMPLAR
    origin = ORIGIN_REPHRASE_MCQ if template == "mcq" else ORIGIN_REPHRASE_STANDARD
    outcomes: list[Dialogue | Rejection] = []
    for doc in sorted(docs, key=lambda d: d.id):
        for idx, chunk in enumerate(chunk_document(doc, max_chars)):
            chunk_seed = _stable_hash(doc.id, idx, seed)
            prompt = build_prompt(chunk, template, exemplar=exemplar, seed=chunk_seed, style=style)
            response = generator.generate(prompt, chunk_seed)
            if template == "mcq":
                outcomes.append(try_parse_mcq(response))
            else:
                outcomes.append(try_parse_dialogue(response))
    kept, rejects = filter_dialogues(outcomes)
    for d in kept:
        d.origin = origin
    return kept, rejects


def _detect_enum_style(value: str) -> str | None:
    styles = set()
    for line in value.split("\n"):
        m = _OPTION_RE.match(line)
        if m:
            styles.add(_OPTION_MARKERS[m.group(1)][0])
    if len(styles) == 1:
        return styles.pop()
    return None


@dataclass
class DatasetStats:
    turn_histogram: dict[int, int]
    enum_style_histogram: dict[str, int]
    per_origin_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "turn_histogram": {str(k): v for k, v in sorted(self.turn_histogram.items())},
            "enum_style_histogram": dict(sorted(self.enum_style_histogram.items())),
            "per_origin_counts": dict(sorted(self.per_origin_counts.items())),
        }


def dataset_stats(dialogues: Iterable[Dialogue]) -> DatasetStats:
    """Histogram material: a "turn" is one question/answer pair (human turn)."""
    turn_hist: Counter[int] = Counter()
    style_hist: Counter[str] = Counter()
    origin_counts: Counter[str] = Counter()
    for d in dialogues:
        turn_hist[d.question_turns] += 1
        origin_counts[d.origin or "unknown"] += 1
        for turn in d.turns:
            if turn.role != HUMAN:
                continue
            style = _detect_enum_style(turn.value)
            if style:
                style_hist[style] += 1
    return DatasetStats(
        turn_histogram=dict(turn_hist),
        enum_style_histogram=dict(style_hist),
        per_origin_counts=dict(origin_counts),
    )


# --- External JSONL formats -------------------------------------------------------

_TURN_ROLE_ALIASES = {"human": HUMAN, "user": HUMAN, "gpt": GPT, "assistant": GPT}


def _turns_from_list(raw_turns) -> list[Turn]:
    turns = []
    for raw in raw_turns:
        role = _TURN_ROLE_ALIASES.get(str(raw.get("from", "")).lower())
        if role is None:
            raise ParseRejection("bad_role", str(raw.get("from")))
        turns.append(Turn(role, str(raw.get("value", ""))))
    return turns


def load_instruction_records(
    lines: Iterable[str],
    origin: str,
) -> Iterator[Dialogue | Rejection]:
    """Read instruction data as JSONL.

    Accepts three record shapes: a bare list of ``{"from", "value"}`` turns,
    an object with a ``conversations``/``turns`` key holding such a list, or
    a single ``{"instruction", "output"}`` pair, which is wrapped as a
    two-turn dialogue.
    """
    for line in lines:
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            yield Rejection("bad_record", "invalid json")
            continue
        try:
            if isinstance(record, list):
                turns = _turns_from_list(record)
            elif isinstance(record, dict) and ("conversations" in record or "turns" in record):
                turns = _turns_from_list(record.get("conversations") or record.get("turns"))
            elif isinstance(record, dict) and "instruction" in record:
                answer = record.get("output") or record.get("response") or record.get("answer") or ""
                turns = [Turn(HUMAN, str(record["instruction"])), Turn(GPT, str(answer))]
            else:
                yield Rejection("bad_record", "unrecognized record shape")
                continue
        except ParseRejection as exc:
            yield exc.as_rejection()
            continue
        yield Dialogue(turns=turns, origin=origin)


def load_instruction_file(path: str | Path, origin: str) -> Iterator[Dialogue | Rejection]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from load_instruction_records(fh, origin)
