"""Command-line entry point.

One binary, subcommand style: clean, fertility, mix-plan, lr-curve,
instruct build/stats, eval cf/mcf/acva/diff, report merge. Reports are
machine-readable first (JSON/CSV with sorted keys), so identical argv,
inputs, and seed produce byte-identical outputs. Exit codes: 0 success,
1 validation/runtime error (machine-readable JSON on stderr), 2 usage error.

Environment overrides: ARDATA_CONFIG supplies --config for ``clean`` when
the flag is omitted; ARDATA_PARALLELISM sets the default --parallelism.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import corpus, evaluation, filters, instruct, mixture, schedule, tokenization

DEFAULT_SEED = 0

CONFIG_ENV = "ARDATA_CONFIG"
PARALLELISM_ENV = "ARDATA_PARALLELISM"


def _default_parallelism() -> int:
    raw = os.environ.get(PARALLELISM_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument(
        "--parallelism", type=int, default=None,
        help="worker count; never changes results, only wall time",
    )


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_json(path: str | None, payload) -> None:
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(path: str | None, rows) -> None:
    out, close = _open_out(path)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerows(rows)
    finally:
        if close:
            out.close()


def make_tokenizer(spec: str) -> tokenization.TokenizerAdapter:
    if spec == "whitespace":
        return tokenization.WhitespaceTokenizer()
    if spec == "character":
        return tokenization.CharacterTokenizer()
    if spec.startswith("vocab:"):
        return tokenization.VocabTokenizer.from_file(spec.split(":", 1)[1])
    raise ValueError(f"unknown tokenizer {spec!r} (whitespace, character, or vocab:<path>)")


# --- clean ---------------------------------------------------------------------


def _load_filter_config(path: str | None) -> filters.FilterConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return filters.FilterConfig()
    return filters.FilterConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _shard_clean(docs, cfg, tok, parallelism: int):
    """Filter shards on a thread pool and stitch results back in input order."""
    shards = [[] for _ in range(parallelism)]
    for idx, doc in enumerate(docs):
        shards[idx % parallelism].append((idx, doc))

    def work(shard):
        report = filters.CleaningReport()
        kept = []
        for idx, doc in shard:
            for cleaned in filters.iter_pipeline([doc], cfg, tok, report):
                kept.append((idx, cleaned))
        return kept, report

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(work, shards))
    report = results[0][1]
    for _, shard_report in results[1:]:
        report = filters.merge_reports(report, shard_report)
    pairs = [pair for kept, _ in results for pair in kept]
    pairs.sort(key=lambda pair: pair[0])
    return [doc for _, doc in pairs], report


def cmd_clean(args) -> None:
    cfg = _load_filter_config(args.config)
    tok = make_tokenizer(args.tokenizer)
    parallelism = args.parallelism or _default_parallelism()

    rejects_out = open(args.rejects, "w", encoding="utf-8") if args.rejects else None

    def on_reject(reject: corpus.Reject) -> None:
        if rejects_out:
            rejects_out.write(reject.to_json() + "\n")

    try:
        with open(args.input, "rb") as stream:
            doc_iter = corpus.ingest_jsonl(stream, on_reject=on_reject)
            with open(args.output, "w", encoding="utf-8") as out:
                if parallelism > 1:
                    kept, report = _shard_clean(list(doc_iter), cfg, tok, parallelism)
                else:
                    report = filters.CleaningReport()
                    kept = filters.iter_pipeline(doc_iter, cfg, tok, report)
                for doc in kept:
                    out.write(json.dumps(corpus.document_to_record(doc), sort_keys=True, ensure_ascii=False) + "\n")
    finally:
        if rejects_out:
            rejects_out.close()

    _write_json(args.report, report.to_dict())
    if args.report_csv:
        _write_csv(args.report_csv, report.csv_rows())


# --- fertility -------------------------------------------------------------------


def cmd_fertility(args) -> None:
    rows = [["tokenizer", "dataset", "fertility"]]
    for tok_spec in args.tokenizer:
        tok = make_tokenizer(tok_spec)
        for path in args.input:
            with open(path, "rb") as stream:
                docs = corpus.ingest_jsonl(stream)
                report = tokenization.fertility(docs, tok, average=args.average)
            rows.append([tok.name, Path(path).stem, repr(report.fertility)])
    _write_csv(args.out, rows)


# --- mix-plan --------------------------------------------------------------------


def _parse_upweights(pairs: list[str]) -> dict[str, float]:
    upweights = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--upweight expects language=weight, got {pair!r}")
        name, raw = pair.split("=", 1)
        upweights[name.strip()] = float(raw)
    return upweights


def cmd_mix_plan(args) -> None:
    raw = json.loads(Path(args.sources).read_text(encoding="utf-8"))
    sources = [
        mixture.SourceStats(name=s["name"], tokens=int(s["tokens"]), language=s.get("language", "other"))
        for s in raw
    ]
    shares = mixture.token_shares(sources)
    upweights = _parse_upweights(args.upweight)
    weights = {lang: upweights.get(lang, 1.0) for lang in shares}
    lang_fractions = mixture.sampling_percentages(weights)

    lang_tokens: dict[str, int] = {}
    for s in sources:
        lang_tokens[s.language] = lang_tokens.get(s.language, 0) + s.tokens
    total_tokens_in = sum(lang_tokens.values())
    per_source = {
        s.name: lang_fractions[s.language] * s.tokens / lang_tokens[s.language]
        for s in sources
    }
    plan = mixture.plan_mixture(sources, per_source, args.total_tokens, seed=args.seed)

    rows = [["source", "language", "tokens", "token_pct", "sampling_pct", "token_quota", "epochs"]]
    for s, entry in zip(sources, plan.entries):
        rows.append([
            s.name,
            s.language,
            s.tokens,
            f"{100.0 * s.tokens / total_tokens_in:.1f}",
            f"{100.0 * entry.sampling_fraction:.1f}",
            entry.token_quota,
            f"{entry.epochs:.3f}",
        ])
    _write_csv(args.out, rows)


# --- lr-curve --------------------------------------------------------------------


def cmd_lr_curve(args) -> None:
    spec = schedule.early_cooldown() if args.variant == "early" else schedule.late_cooldown()
    overrides = {}
    for name in ("total_steps", "warmup_steps", "cooldown_start", "max_lr", "min_lr"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.composition:
        overrides["main_phase"] = args.composition
    if overrides:
        spec = replace(spec, **overrides)
    rows = [[step, repr(lr)] for step, lr in schedule.emit_curve(spec, args.stride)]
    _write_csv(args.out, rows)


# --- instruct --------------------------------------------------------------------


def _load_docs(path: str) -> list[corpus.Document]:
    with open(path, "rb") as stream:
        return list(corpus.ingest_jsonl(stream))


def cmd_instruct_build(args) -> None:
    docs = _load_docs(args.input)
    generator = instruct.MockGenerator(malformed_rate=args.malformed_rate)
    exemplar = None
    if args.exemplar:
        raw = json.loads(Path(args.exemplar).read_text(encoding="utf-8"))
        exemplar = instruct.MCQItem(
            question=raw["question"],
            options=list(raw["options"]),
            answer_index=int(raw["answer_index"]),
            enum_style=raw.get("enum_style", "latin_letters"),
        )

    templates = ["standard", "mcq"] if args.template == "both" else [args.template]
    dialogues: list[instruct.Dialogue] = []
    rejects: dict[str, int] = {}
    for template in templates:
        kept, template_rejects = instruct.build_dialogues(
            docs,
            generator,
            template,
            max_chars=args.max_chars,
            seed=args.seed,
            exemplar=exemplar,
        )
        dialogues.extend(kept)
        for reason, count in template_rejects.items():
            rejects[reason] = rejects.get(reason, 0) + count

    with open(args.output, "w", encoding="utf-8") as out:
        for d in dialogues:
            record = {"origin": d.origin, "text": instruct.render_chatml(d)}
            out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")

    stats = instruct.dataset_stats(dialogues)
    _write_json(args.stats, {
        "kept": len(dialogues),
        "rejected": sum(rejects.values()),
        "rejects_by_reason": dict(sorted(rejects.items())),
        "stats": stats.to_dict(),
    })


def _read_dialogue_jsonl(path: str, default_origin: str = "unknown"):
    """Yield dialogues (or Rejections) from ChatML records or turn-list records."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                yield instruct.Rejection("bad_record", "invalid json")
                continue
            if isinstance(record, dict) and "text" in record:
                try:
                    d = instruct.parse_chatml(record["text"])
                except ValueError as exc:
                    yield instruct.Rejection("bad_record", str(exc))
                    continue
                d.origin = record.get("origin", default_origin)
                yield d
            else:
                origin = record.get("origin", default_origin) if isinstance(record, dict) else default_origin
                yield from instruct.load_instruction_records([line], origin=origin)


def cmd_instruct_stats(args) -> None:
    dialogues = (d for d in _read_dialogue_jsonl(args.input) if isinstance(d, instruct.Dialogue))
    stats = instruct.dataset_stats(dialogues)
    _write_json(args.out, stats.to_dict())


def cmd_instruct_mix(args) -> None:
    """Merge dialogue datasets into one validated ChatML JSONL with stats."""
    outcomes = []
    for path in args.inputs:
        default_origin = Path(path).stem
        outcomes.extend(_read_dialogue_jsonl(path, default_origin=default_origin))
    kept, rejects = instruct.filter_dialogues(outcomes)
    with open(args.output, "w", encoding="utf-8") as out:
        for d in kept:
            record = {"origin": d.origin, "text": instruct.render_chatml(d)}
            out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    stats = instruct.dataset_stats(kept)
    _write_json(args.stats, {
        "kept": len(kept),
        "rejected": sum(rejects.values()),
        "rejects_by_reason": dict(sorted(rejects.items())),
        "stats": stats.to_dict(),
    })


# --- eval ------------------------------------------------------------------------


def _build_scorer(name: str, items, fmt: str, letters=evaluation.DEFAULT_LETTERS):
    if name == "constant":
        return evaluation.ConstantScorer()
    if name == "ngram":
        return evaluation.CharNgramScorer()
    if name in ("oracle", "anti-oracle"):
        if fmt == "mcf":
            base = evaluation.OracleScorer.for_mcf(items, letters=letters)
        elif fmt == "tf":
            base = evaluation.OracleScorer.for_true_false(items)
        else:
            base = evaluation.OracleScorer.for_cf(items)
        if name == "oracle":
            return base
        return evaluation.OracleScorer.anti(base.pairs)
    raise ValueError(f"unknown scorer {name!r} (constant, oracle, anti-oracle, or ngram)")


def cmd_eval_cf(args) -> None:
    items = evaluation.load_benchmark_items(args.items)
    scorer = _build_scorer(args.scorer, items, "cf")
    result = evaluation.evaluate_cf(items, scorer, norm=args.norm)
    _write_json(args.out, result.to_dict())


def cmd_eval_mcf(args) -> None:
    items = evaluation.load_benchmark_items(args.items)
    scorer = _build_scorer(args.scorer, items, "mcf")
    result = evaluation.evaluate_mcf(items, scorer)
    _write_json(args.out, result.to_dict())


def cmd_eval_acva(args) -> None:
    items = evaluation.load_benchmark_items(args.items)
    exemplars = evaluation.load_benchmark_items(args.exemplars)
    scorer = _build_scorer(args.scorer, items, "tf")
    result = evaluation.evaluate_true_false(
        items, scorer, exemplars, shots=args.shots, seed=args.seed
    )
    _write_json(args.out, result.to_dict())


def cmd_eval_diff(args) -> None:
    items = evaluation.load_benchmark_items(args.items)
    scorers = {}
    for name in args.scorers.split(","):
        name = name.strip()
        scorers[name] = _build_scorer(name, items, "cf")
    rows = [["model", "cf", "mcf", "diff"]]
    for row in evaluation.cf_mcf_diff(items, scorers, norm=args.norm):
        rows.append([row.model, repr(row.cf), repr(row.mcf), repr(row.diff)])
    _write_csv(args.out, rows)


# --- report merge -----------------------------------------------------------------


def cmd_report_merge(args) -> None:
    merged = None
    for path in args.reports:
        report = filters.CleaningReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        merged = report if merged is None else filters.merge_reports(merged, report)
    if merged is None:
        raise ValueError("no report files given")
    _write_json(args.out, merged.to_dict())


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ardata", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="filter a JSONL corpus and emit a cleaning report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--report-csv", default=None)
    p.add_argument("--rejects", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--tokenizer", default="whitespace")
    _add_common(p)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("fertility", help="fertility CSV per (tokenizer, dataset)")
    p.add_argument("--in", dest="input", action="append", required=True)
    p.add_argument("--tokenizer", action="append", required=True)
    p.add_argument("--average", choices=("micro", "macro"), default="micro")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fertility)

    p = sub.add_parser("mix-plan", help="token shares, sampling percentages, quotas, epochs")
    p.add_argument("--sources", required=True, help="JSON array of {name, tokens, language}")
    p.add_argument("--upweight", action="append", default=[], help="language=weight (repeatable)")
    p.add_argument("--total-tokens", type=int, required=True)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_mix_plan)

    p = sub.add_parser("lr-curve", help="CSV of (step, lr) samples")
    p.add_argument("--variant", choices=("early", "late"), default="early")
    p.add_argument("--stride", type=int, default=1000)
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--warmup-steps", type=int, default=None)
    p.add_argument("--cooldown-start", type=int, default=None)
    p.add_argument("--max-lr", type=float, default=None)
    p.add_argument("--min-lr", type=float, default=None)
    p.add_argument("--composition", choices=schedule.MAIN_PHASE_MODES, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_lr_curve)

    p_instruct = sub.add_parser("instruct", help="synthetic dialogue factory")
    instruct_sub = p_instruct.add_subparsers(dest="subcommand", required=True)

    p = instruct_sub.add_parser("build", help="chunk, prompt, parse, filter, render ChatML")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--template", choices=("standard", "mcq", "both"), default="standard")
    p.add_argument("--max-chars", type=int, default=2000)
    p.add_argument("--malformed-rate", type=float, default=0.0)
    p.add_argument("--exemplar", default=None, help="JSON file with an MCQ exemplar")
    _add_common(p)
    p.set_defaults(func=cmd_instruct_build)

    p = instruct_sub.add_parser("stats", help="turn/enumeration histograms for a dialogue JSONL")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_instruct_stats)

    p = instruct_sub.add_parser("mix", help="merge dialogue datasets into one ChatML JSONL")
    p.add_argument("--in", dest="inputs", action="append", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--stats", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_instruct_mix)

    p_eval = sub.add_parser("eval", help="benchmark evaluation")
    eval_sub = p_eval.add_subparsers(dest="subcommand", required=True)

    p = eval_sub.add_parser("cf", help="cloze-format accuracy")
    p.add_argument("--items", required=True)
    p.add_argument("--scorer", default="ngram")
    p.add_argument("--norm", choices=("none", "by_bytes", "by_tokens"), default="by_bytes")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_cf)

    p = eval_sub.add_parser("mcf", help="multiple-choice-format accuracy")
    p.add_argument("--items", required=True)
    p.add_argument("--scorer", default="ngram")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_mcf)

    p = eval_sub.add_parser("acva", help="few-shot True/False with macro F1")
    p.add_argument("--items", required=True)
    p.add_argument("--exemplars", required=True)
    p.add_argument("--shots", type=int, default=5)
    p.add_argument("--scorer", default="ngram")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_acva)

    p = eval_sub.add_parser("diff", help="CF minus MCF accuracy per scorer (CSV)")
    p.add_argument("--items", required=True)
    p.add_argument("--scorers", default="constant,oracle,anti-oracle,ngram")
    p.add_argument("--norm", choices=("none", "by_bytes", "by_tokens"), default="none")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval_diff)

    p = sub.add_parser("report", help="cleaning-report utilities")
    report_sub = p.add_subparsers(dest="subcommand", required=True)
    p = report_sub.add_parser("merge", help="merge sharded cleaning reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_report_merge)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "command": args.command}) + "\n")
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
