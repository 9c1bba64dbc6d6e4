"""Command-line interface: train, parse, eval, score, generate, refine."""

from __future__ import annotations

import argparse
import json
import logging
import math
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from . import corpus
from .corpus import ConllError, SentenceRecord, Token
from .decoder import BEST_LEFT_AND_RIGHT, BEST_ONE, DecodeSettings, generate, particle_parse
from .evaluation import PUNCT_TAGS, attachment_scores, sentence_log_prob
from .model import GenerativeModel, default_specs
from .serialize import ModelFormatError, load_model, save_model
from .trainer import (
    DETERMINISTIC,
    LATENT_SAMPLE,
    SAMPLED,
    VITERBI_SEMISUP,
    TrainSettings,
    UnsupSettings,
    train_supervised,
    train_unsupervised,
)

log = logging.getLogger("hpypdp")


class CliError(Exception):
    pass


# -- I/O helpers -------------------------------------------------------------


@contextmanager
def _open_in(path: str) -> Iterator:
    if path == "-":
        yield sys.stdin
        return
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    with fh:
        yield fh


@contextmanager
def _open_out(path: str | None) -> Iterator:
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    with fh:
        yield fh


def _read_conll(path: str) -> list[SentenceRecord]:
    with _open_in(path) as fh:
        try:
            return corpus.read_conll(fh, path)
        except ConllError as exc:
            raise CliError(str(exc)) from None


def _looks_like_conll(path: str) -> bool:
    if path == "-":
        return False
    with _open_in(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                return line.count("\t") == 9
    return False


def _read_input(path: str, fmt: str) -> tuple[list[list[str]], list[SentenceRecord] | None]:
    """Sentences as forms plus the CoNLL records when the input is CoNLL."""
    if fmt == "auto":
        fmt = "conll" if _looks_like_conll(path) else "text"
    if fmt == "conll":
        records = _read_conll(path)
        return [r.forms for r in records], records
    with _open_in(path) as fh:
        return corpus.read_text(fh), None


def _load(path: str) -> tuple[GenerativeModel, dict]:
    try:
        return load_model(path)
    except ModelFormatError as exc:
        raise CliError(str(exc)) from None


def _preprocess_forms(forms: list[str], meta: dict) -> list[str]:
    if meta.get("strip_punct"):
        forms = [f for f in forms if corpus.classify_unknown(f) != "<UNK-punct>"]
    if meta.get("normalize_numbers"):
        forms = [meta.get("number_symbol", "NUM") if any(ch.isdigit() for ch in f) else f for f in forms]
    return forms


def _json_line(out, record: dict) -> None:
    out.write(json.dumps(record, sort_keys=True) + "\n")


# -- parallel decoding --------------------------------------------------------

_WORKER: dict = {}


def _init_worker(model_path: str) -> None:
    _WORKER["model"], _WORKER["meta"] = load_model(model_path)


def _parse_job(job):
    words, tags, settings = job
    d = particle_parse(_WORKER["model"], words, tags, settings).derivation
    return d.tags, d.tree().heads, d.tree().labels


def _score_job(job):
    words, particles = job
    return sentence_log_prob(_WORKER["model"], words, particles)


def _run_jobs(fn, jobs: list, model_path: str, model, meta, threads: int) -> list:
    if threads <= 1 or len(jobs) < 2:
        _WORKER["model"], _WORKER["meta"] = model, meta
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(model_path,)) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


# -- commands -----------------------------------------------------------------


def cmd_train(args) -> None:
    records = _read_conll(args.treebank)
    if not records:
        raise CliError(f"{args.treebank}: no sentences")
    if args.strip_punct:
        records = [r for r in (corpus.strip_punctuation(r, set(args.punct_tags)) for r in records) if r]
    if args.normalize_numbers:
        records = [corpus.normalize_numbers(r) for r in records]
    records, skipped = corpus.filter_trainable(records)
    if not records:
        raise CliError(f"{args.treebank}: no projective single-rooted sentences")
    vocab = corpus.build_vocab(records, args.min_count, args.max_vocab)
    lexicalised = not (args.unlexicalised or args.unlex_context)
    specs = default_specs(lexicalised, args.context_elements)
    model = GenerativeModel(
        vocab,
        lexicalised=lexicalised,
        predict_labels=not args.no_labels,
        specs=specs,
        word_model=not args.unlexicalised,
    )
    sentences = [corpus.encode(r, vocab, labelled=not args.no_labels) for r in records]
    settings = TrainSettings(
        iterations=args.iterations,
        oracle_mode=SAMPLED if args.oracle == "sampled" else DETERMINISTIC,
        derivation_particles=args.particles,
        seed=args.seed,
    )
    with _open_out(args.progress) if args.progress else _stderr() as prog:
        result = train_supervised(model, sentences, settings, progress=lambda rec: _json_line(prog, rec))
    meta = {
        "command": "train",
        "sentences": len(sentences),
        "skipped": skipped,
        "iterations": args.iterations,
        "oracle": args.oracle,
        "seed": args.seed,
        "strip_punct": args.strip_punct,
        "normalize_numbers": args.normalize_numbers,
        "final_log_likelihood": result.history[-1]["log_likelihood"],
    }
    save_model(model, args.output, meta)


@contextmanager
def _stderr():
    yield sys.stderr


def _decode_settings(args, model: GenerativeModel, tags_provided: bool) -> DecodeSettings:
    return DecodeSettings(
        particles=args.particles,
        max_tag_candidates=args.tag_candidates,
        tags_provided=tags_provided,
        reduce_branching=args.reduce_branching,
    )


def cmd_parse(args) -> None:
    model, meta = _load(args.model)
    sentences, records = _read_input(args.input, args.input_format)
    given = args.tags == "given"
    jobs = []
    for k, forms in enumerate(sentences):
        if not forms:
            raise CliError(f"{args.input}: sentence {k + 1} is empty")
        tags = None
        if given:
            if records is None:
                raise CliError(f"{args.input}: --tags given needs tagged CoNLL input")
            try:
                tags = [model.vocab.tag_id(t) for t in records[k].tags]
            except KeyError as exc:
                raise CliError(f"{args.input}: sentence {k + 1}: {exc.args[0]}") from None
        jobs.append((model.vocab.word_ids(forms), tags, _decode_settings(args, model, given)))
    start = time.perf_counter()
    results = _run_jobs(_parse_job, jobs, args.model, model, meta, args.threads)
    elapsed = time.perf_counter() - start
    out_records = []
    for forms, (tags, heads, labels) in zip(sentences, results):
        tokens = [
            Token(form, model.vocab.tags[tags[i]], heads[i + 1], model.label_name(labels[i + 1]))
            for i, form in enumerate(forms)
        ]
        out_records.append(SentenceRecord(tokens, args.input))
    with _open_out(args.output) as out:
        corpus.write_conll(out_records, out)
    if sentences:
        log.info("parsed %d sentences in %.2fs", len(sentences), elapsed)


def cmd_eval(args) -> None:
    pred = _read_conll(args.pred)
    gold = _read_conll(args.gold)
    try:
        report = attachment_scores(pred, gold, set(args.punct_tags))
    except ValueError as exc:
        raise CliError(f"{args.pred} vs {args.gold}: {exc}") from None
    print(report.format())
    _json_line(sys.stdout, report.to_record())


def cmd_score(args) -> None:
    model, meta = _load(args.model)
    sentences, _ = _read_input(args.input, args.input_format)
    sentences = [_preprocess_forms(s, meta) for s in sentences]
    ids = [k for k, s in enumerate(sentences, 1) if s]
    jobs = [(model.vocab.word_ids(s), args.particles) for s in sentences if s]
    scores = _run_jobs(_score_job, jobs, args.model, model, meta, args.threads)
    total = events = 0
    with _open_out(args.output) as out:
        for k, (sid, lp) in enumerate(zip(ids, scores)):
            n = len(jobs[k][0])
            _json_line(out, {"id": sid, "log_prob": lp, "length": n})
            total += lp
            events += n + 1
        summary = {"sentences": len(jobs), "events": events, "log_prob": total}
        if events:
            summary["perplexity"] = math.exp(-total / events)
        _json_line(out, summary)


def cmd_generate(args) -> None:
    model, _ = _load(args.model)
    if args.max_length < 1:
        raise CliError("--max-length must be at least 1")
    rng = random.Random(args.seed)
    produced = attempts = 0
    limit = args.count * args.max_attempts
    with _open_out(args.output) as out:
        while produced < args.count:
            attempts += 1
            if attempts > limit:
                raise CliError(f"only {produced} of {args.count} samples met --min-length after {limit} draws")
            g = generate(model, rng, args.max_length)
            d = g.derivation
            if d.n < args.min_length:
                continue
            produced += 1
            tree = d.tree()
            record = {
                "id": produced,
                "words": [model.vocab.words[w] for w in d.words],
                "tags": [model.vocab.tags[t] for t in d.tags],
                "heads": tree.heads[1:],
                "log_prob": g.log_prob,
                "truncated": g.truncated,
            }
            _json_line(out, record)


def cmd_refine(args) -> None:
    model, meta = _load(args.model)
    sentences, _ = _read_input(args.input, args.input_format)
    encoded = [model.vocab.word_ids(_preprocess_forms(s, meta)) for s in sentences]
    encoded = [s for s in encoded if s]
    mode = LATENT_SAMPLE if args.mode == "sample" else VITERBI_SEMISUP
    settings = UnsupSettings(mode=mode, particles=args.particles, sweeps=args.sweeps, seed=args.seed)
    with _open_out(args.progress) if args.progress else _stderr() as prog:
        train_unsupervised(model, encoded, settings, progress=lambda rec: _json_line(prog, rec))
    meta = dict(meta)
    meta["refined"] = meta.get("refined", []) + [
        {"mode": mode, "sentences": len(encoded), "sweeps": settings.sweeps, "seed": args.seed}
    ]
    save_model(model, args.output, meta)


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpypdp", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def decoding(p, default_particles):
        p.add_argument("--particles", type=int, default=default_particles)
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--input-format", choices=["auto", "text", "conll"], default="auto")

    p = sub.add_parser("train", help="train a model on a CoNLL treebank")
    p.add_argument("treebank")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--oracle", choices=["greedy", "sampled"], default="greedy")
    p.add_argument("--particles", type=int, default=100, help="particles for sampled derivations")
    p.add_argument("--unlexicalised", action="store_true", help="no word model and no word contexts")
    p.add_argument("--unlex-context", action="store_true", help="generate words but keep them out of contexts")
    p.add_argument("--no-labels", action="store_true")
    p.add_argument("--context-elements", type=int, default=None, help="keep the first k context elements")
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--strip-punct", action="store_true")
    p.add_argument("--normalize-numbers", action="store_true")
    p.add_argument("--punct-tags", nargs="+", default=sorted(PUNCT_TAGS))
    p.add_argument("--progress", help="write per-iteration JSON records here (default stderr)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse text or CoNLL input")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    decoding(p, 1000)
    p.add_argument("--tags", choices=["joint", "given"], default="joint")
    p.add_argument("--tag-candidates", type=int, default=3)
    p.add_argument("--reduce-branching", choices=[BEST_ONE, BEST_LEFT_AND_RIGHT], default=BEST_ONE)
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; decoding is deterministic")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="attachment scores of predicted against gold CoNLL")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--punct-tags", nargs="+", default=sorted(PUNCT_TAGS))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="per-sentence log probabilities and perplexity")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    decoding(p, 1000)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("generate", help="sample sentences from a model")
    p.add_argument("model")
    p.add_argument("-n", "--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-length", type=int, default=100)
    p.add_argument("--min-length", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=1000, help="draws allowed per requested sample")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("refine", help="unsupervised or semi-supervised refinement on raw text")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=["sample", "semisup"], default="sample")
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=1)
    p.add_argument("--input-format", choices=["auto", "text", "conll"], default="auto")
    p.add_argument("--progress")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_refine)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    for name in ("particles", "threads", "iterations", "count", "sweeps", "tag_candidates"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            ap.error(f"--{name.replace('_', '-')} must be at least 1")
    try:
        args.func(args)
    except CliError as exc:
        print(f"hpypdp: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
