"""Command-line entry point: ``gecw <command> [<subcommand>] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import fields
from functools import partial
from typing import Callable, Iterable, Optional, Sequence

from . import __version__
from .config import Config, ConfigError
from .corpusio import (AnnotatedSentence, CorpusError, Edit, parse_conllu, parse_m2,
                       read_plain, serialize_m2, write_plain)
from .ngram_lm import ModelFormatError, NGramModel
from .scorer import M2Scorer
from .spellkit import ReplacementListError, SpellCorrector, load_replacement_list
from .synth import NoiseProfile, derive_noise_profile, synthesize, write_synth_m2
from .taxonomy import BaseLabel, ErrorLabel, LabelError, LabelScheme, load_label_map
from .wo_detect import PosContextDetector, evaluate_detector, load_allowlist

logger = logging.getLogger("gecw")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
_DEFAULTS = Config()
_SPELL_LABEL = ErrorLabel((BaseLabel.R_SPELL,))
DATA_ERRORS = (CorpusError, ModelFormatError, ReplacementListError, LabelError,
               ConfigError, ValueError, OSError, UnicodeDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _opt(p: argparse.ArgumentParser, flag: str, key: Optional[str] = None, help: str = "", **kw):
    """Add a flag whose default comes from the config (shown in --help)."""
    key = key or flag.lstrip("-").replace("-", "_")
    default = getattr(_DEFAULTS, key)
    if isinstance(default, bool):
        kw.setdefault("action", argparse.BooleanOptionalAction)
    p.add_argument(flag, dest=key, default=None, help=f"{help} (default: {default})", **kw)


def _common(p: argparse.ArgumentParser, out: bool = True):
    p.add_argument("--config", help="key=value config file (default: $GECW_CONFIG or none)")
    _opt(p, "--jobs", type=int, help="worker processes; output order never changes")
    _opt(p, "--seed", type=int, help="random seed")
    if out:
        p.add_argument("--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gecw", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gecw {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="MaxMatch scoring of hypotheses against M2 gold")
    _common(p)
    p.add_argument("--gold", required=True, help="gold M2 file")
    p.add_argument("--hyp", required=True, help="hypotheses, one tokenized sentence per line")
    _opt(p, "--beta", type=float, help="F-score beta")
    _opt(p, "--max-merge-span", type=int, help="largest source span of a merged edit")
    _opt(p, "--selection", choices=["running", "per-sentence"], help="annotator selection")
    _opt(p, "--case-half-cost", help="half-cost substitution for case-only differences")
    _opt(p, "--label-map", help="corpus-tag<TAB>code label mapping file")
    p.add_argument("--format", choices=["table", "kv", "both"], default="both",
                   help="report format (default: both)")
    p.set_defaults(func=cmd_score)

    for name, helptext in (("lm", "n-gram language models"), ("spell", "statistical spelling correction")):
        grp = sub.add_parser(name, help=helptext)
        gsub = grp.add_subparsers(dest="action", required=True, parser_class=_Parser)
        t = gsub.add_parser("train", help="train an n-gram model on tokenized text")
        _common(t)
        t.add_argument("--in", dest="input", required=True, help="training text, one sentence per line")
        _opt(t, "--order", type=int, help="n-gram order (1-5)")
        t.set_defaults(func=cmd_lm_train)
        if name == "lm":
            i = gsub.add_parser("inspect", help="print a model summary")
            _common(i)
            i.add_argument("--model", required=True, help="model file")
            i.set_defaults(func=cmd_lm_inspect)
        else:
            c = gsub.add_parser("correct", help="correct tokenized text")
            _common(c)
            _opt(c, "--model", key="lm_model", help="model file")
            _opt(c, "--list", key="replacement_list", help="replacement list applied first")
            c.add_argument("--in", dest="input", required=True, help="input text")
            c.add_argument("--edits-log", help="write applied changes as M2 to this file")
            _opt(c, "--max-edit-distance-oov", type=int, help="candidate distance for unknown words")
            _opt(c, "--max-edit-distance-vocab", type=int, help="candidate distance for known words")
            _opt(c, "--distance-penalty", type=float, help="log-prob penalty per edit")
            _opt(c, "--margin", type=float, help="log-prob margin to change a known word")
            _opt(c, "--protect", help="skip numbers, all-caps and inner capitalised words")
            c.set_defaults(func=cmd_spell_correct)

    p = sub.add_parser("replist", help="replacement lists")
    rsub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    a = rsub.add_parser("apply", help="apply a replacement list")
    _common(a)
    _opt(a, "--list", key="replacement_list", help="replacement list (TSV)")
    a.add_argument("--in", dest="input", required=True, help="input text")
    a.set_defaults(func=cmd_replist_apply)

    p = sub.add_parser("synth", help="synthetic error generation")
    ssub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    pr = ssub.add_parser("profile", help="derive a noise profile from M2 gold")
    _common(pr)
    pr.add_argument("--gold", required=True, help="gold M2 file")
    pr.set_defaults(func=cmd_synth_profile)
    g = ssub.add_parser("generate", help="noise clean text into M2")
    _common(g)
    _opt(g, "--profile", key="synth_profile", help="noise profile file")
    g.add_argument("--in", dest="input", required=True, help="clean text")
    _opt(g, "--intensity", type=float, help="multiplier for every rate")
    g.set_defaults(func=cmd_synth_generate)

    p = sub.add_parser("wo", help="POS-context word-order detector")
    wsub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    t = wsub.add_parser("train", help="count POS trigram contexts")
    _common(t)
    t.add_argument("--conllu", required=True, help="tagged training corpus")
    _opt(t, "--min-support", key="wo_min_support", type=int, help="trigram support below which spans are unseen")
    t.set_defaults(func=cmd_wo_train)
    d = wsub.add_parser("detect", help="flag improbable contexts (TSV output)")
    _common(d)
    d.add_argument("--model", required=True, help="POS model file")
    d.add_argument("--conllu", required=True, help="tagged input")
    _opt(d, "--threshold", key="wo_threshold", type=float, help="flag contexts below this probability")
    _opt(d, "--allowlist", key="wo_allowlist", help="never-flag contexts file")
    _opt(d, "--mode", key="wo_mode", choices=["conditional", "joint"], help="probability definition")
    _opt(d, "--min-support", key="wo_min_support", type=int, help="override the model's support limit")
    d.add_argument("--gold", help="M2 gold; prints precision/recall to stderr")
    d.set_defaults(func=cmd_wo_detect)
    return parser


# --- helpers ------------------------------------------------------------------

def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    cfg = Config.load(getattr(args, "config", None))
    for f in fields(Config):
        if getattr(args, f.name, None) is None:
            setattr(args, f.name, getattr(cfg, f.name))
    return args


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


@contextmanager
def _sink(path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
    else:
        yield sys.stdout


def _pmap(func: Callable, items: Sequence, jobs: int) -> list:
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(func, items, chunksize=max(1, len(items) // (jobs * 4))))
    return [func(x) for x in items]


def _need(value, flag: str):
    if not value:
        raise UsageError(f"{flag} is required")
    return value


# --- commands -----------------------------------------------------------------

def cmd_score(args) -> int:
    scheme = None
    if args.label_map:
        with open(args.label_map, encoding="utf-8") as fh:
            scheme = LabelScheme(mapping=load_label_map(fh))
    gold = parse_m2(_read(args.gold), scheme)
    hyps = read_plain(_read(args.hyp))
    if hyps and len(hyps) == len(gold) + 1 and not hyps[-1]:
        hyps = hyps[:-1]
    if len(hyps) != len(gold):
        raise ValueError(f"{len(hyps)} hypothesis lines for {len(gold)} gold sentences")
    scorer = M2Scorer(beta=args.beta, max_merge_span=args.max_merge_span,
                      selection=args.selection, case_half_cost=args.case_half_cost,
                      n_jobs=args.jobs)
    report = scorer.score(gold, hyps)
    with _sink(args.out) as out:
        if args.format in ("table", "both"):
            out.write(report.to_table())
        if args.format == "both":
            out.write("\n")
        if args.format in ("kv", "both"):
            out.write(report.to_kv())
    return EXIT_OK


def cmd_lm_train(args) -> int:
    if not args.out:
        raise UsageError("--out is required for training")
    sents = [s for s in read_plain(_read(args.input)) if s]
    model = NGramModel(order=args.order).fit(sents)
    model.save(args.out)
    logger.info("trained order-%d model: %d types, %d tokens", model.order,
                len(model.words), model.total_tokens_)
    return EXIT_OK


def cmd_lm_inspect(args) -> int:
    model = NGramModel.load(args.model)
    with _sink(args.out) as out:
        out.write(f"order={model.order}\n")
        out.write(f"vocab={len(model.words)}\n")
        out.write(f"total_tokens={model.total_tokens_}\n")
        out.write("weights=" + ",".join(f"{w:g}" for w in model.weights_) + "\n")
        for n, table in enumerate(model.counts_, 1):
            out.write(f"ngrams[{n}]={len(table)}\n")
    return EXIT_OK


def _correct_one(tokens, corrector):
    return corrector.correct(tokens)


def cmd_spell_correct(args) -> int:
    model = NGramModel.load(_need(args.lm_model, "--model"))
    repl = None
    if args.replacement_list:
        repl = load_replacement_list(_read(args.replacement_list))
    corrector = SpellCorrector.from_model(
        model, max_edit_distance_oov=args.max_edit_distance_oov,
        max_edit_distance_vocab=args.max_edit_distance_vocab,
        distance_penalty=args.distance_penalty, margin=args.margin, protect=args.protect)
    sents = read_plain(_read(args.input))
    staged = [repl.apply_with_edits(s) if repl else (s, []) for s in sents]
    results = _pmap(partial(_correct_one, corrector=corrector), [s for s, _ in staged], args.jobs)
    with _sink(args.out) as out:
        out.write(write_plain(toks for toks, _ in results))
    if args.edits_log:
        corpus = [AnnotatedSentence(src, {0: _compose_edits(src, pre_edits, applied)})
                  for src, (_, pre_edits), (_, applied) in zip(sents, staged, results)]
        with open(args.edits_log, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(serialize_m2(corpus))
    return EXIT_OK


def _compose_edits(source, list_edits, applied) -> tuple[Edit, ...]:
    """Edits over ``source`` for list rewrites followed by statistical fixes."""
    segments = []  # [src_start, src_end, output tokens, changed]
    by_start = {e.start: e for e in list_edits}
    i = 0
    while i < len(source):
        e = by_start.get(i)
        if e is not None:
            segments.append([e.start, e.end, list(e.correction), True])
            i = e.end
        else:
            segments.append([i, i + 1, [source[i]], False])
            i += 1
    fixes = {r.position: r.target for r in applied}
    pos = 0
    for seg in segments:
        for k in range(len(seg[2])):
            if pos in fixes:
                seg[2][k:k + 1] = list(fixes[pos])
                seg[3] = True
            pos += 1
    return tuple(Edit(a, b, tuple(out), _SPELL_LABEL) for a, b, out, changed in segments if changed)


def cmd_replist_apply(args) -> int:
    repl = load_replacement_list(_read(_need(args.replacement_list, "--list")))
    sents = read_plain(_read(args.input))
    with _sink(args.out) as out:
        out.write(write_plain(repl.apply(s) for s in sents))
    return EXIT_OK


def cmd_synth_profile(args) -> int:
    profile = derive_noise_profile(parse_m2(_read(args.gold)))
    with _sink(args.out) as out:
        out.write(profile.dumps())
    return EXIT_OK


def cmd_synth_generate(args) -> int:
    profile = NoiseProfile.loads(_read(_need(args.synth_profile, "--profile")))
    clean = read_plain(_read(args.input))
    records = synthesize(clean, profile, args.seed, args.intensity)
    with _sink(args.out) as out:
        out.write(write_synth_m2(records, clean))
    return EXIT_OK


def cmd_wo_train(args) -> int:
    if not args.out:
        raise UsageError("--out is required for training")
    det = PosContextDetector(min_support=args.wo_min_support).fit(parse_conllu(_read(args.conllu)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(det.dumps())
    return EXIT_OK


def _detect_one(sent, detector):
    return detector.detect(sent)


def cmd_wo_detect(args) -> int:
    allow = load_allowlist(_read(args.wo_allowlist)) if args.wo_allowlist else None
    params = dict(threshold=args.wo_threshold, mode=args.wo_mode, allowlist=allow)
    if args.wo_min_support != _DEFAULTS.wo_min_support:
        params["min_support"] = args.wo_min_support
    det = PosContextDetector.loads(_read(args.model), **params)
    sents = parse_conllu(_read(args.conllu))
    flags = _pmap(partial(_detect_one, detector=det), sents, args.jobs)
    with _sink(args.out) as out:
        for i, fl in enumerate(flags):
            for f in fl:
                out.write(f"{i}\t{f.start}\t{f.end}\t{f.probability:.6f}\t{f.reason}\n")
    if args.gold:
        res = evaluate_detector(flags, parse_m2(_read(args.gold)))
        print(f"precision={res.precision:.4f}\nrecall={res.recall:.4f}\nf05={res.f05:.4f}",
              file=sys.stderr)
    return EXIT_OK


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(_resolve(args))
    except UsageError as exc:
        print(f"gecw: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"gecw: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
