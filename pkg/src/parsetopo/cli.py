"""Command-line interface: ``parsetopo {contacts,eval,parse,classify,baseline}``.

Exit codes: 0 success (possibly with warnings), 2 input or usage error,
3 empty pair class.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from typing import List, Optional, Sequence

from .contacts import (
    DEFAULT_CUTOFF,
    DEFAULT_SEPARATION,
    extract_from_pdb,
    format_contact_list,
    read_contact_file,
)
from .errors import EmptyPairClassError, ParsetopoError
from .measures import TSV_COLUMNS, best_threshold, classification_metrics, evaluate
from .nullmodel import baseline_distribution
from .pcfg import (
    batch_score,
    map_sequence,
    read_grammar_file,
    read_sequences,
    viterbi_parse,
)
from .tree import read_tree_file, serialize_bracket

log = logging.getLogger("parsetopo")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY_CLASS = 3

PARSE_COLUMNS = ("record", "id", "length", "log_prob", "tree")
CLASSIFY_COLUMNS = (
    "record", "normalization", "threshold", "precision", "recall", "f1",
    "tp", "fp", "fn", "tn", "n_pos", "n_neg",
)
BASELINE_COLUMNS = (
    "record", "n_samples", "n_skipped", "seed", "n", "L", "t",
    "s1_mean", "s1_std", "r1_mean", "r1_std", "d1_mean", "d1_std",
)


class InputError(Exception):
    """Bad file contents or arguments; message names the offending file."""


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", default="-", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--quiet", "-q", action="store_true", help="suppress warnings")
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "tsv"), default="json")

    parser = argparse.ArgumentParser(
        prog="parsetopo",
        description="Score parse-tree topology against protein contact maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("contacts", parents=[common], help="extract a contact list")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pdb", help="PDB file")
    src.add_argument("--list", help="contact list file")
    p.add_argument("--n", type=_positive_int, help="residue count for a headerless --list")
    p.add_argument("--chain", help="chain id (default: first chain)")
    p.add_argument("--model", type=_positive_int, default=1, help="MODEL ordinal (default: 1)")
    p.add_argument("--cutoff", type=_positive_float, default=DEFAULT_CUTOFF,
                   help="contact cutoff in angstrom (default: 8.0)")
    p.add_argument("--format", choices=("list", "json"), default="list")
    p.set_defaults(func=cmd_contacts)

    p = sub.add_parser("eval", parents=[common, fmt], help="score trees against a contact map")
    p.add_argument("--tree", action="append", required=True, help="bracket tree file (repeatable)")
    p.add_argument("--contacts", required=True, help="contact list file")
    p.add_argument("--L", type=_positive_int, default=DEFAULT_SEPARATION,
                   help="minimum sequence separation (default: 5)")
    p.add_argument("--t", type=_positive_float, required=True, help="path-length threshold for d1")
    p.add_argument("--weighted", action="store_true", help="require and report weighted measures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parse", parents=[common, fmt], help="Viterbi-parse sequences")
    p.add_argument("--grammar", required=True)
    seqs = p.add_mutually_exclusive_group(required=True)
    seqs.add_argument("--seq", help="one sequence per line")
    seqs.add_argument("--fasta", help="FASTA file")
    p.add_argument("--emit-tree", metavar="DIR", help="write one bracket tree file per sequence")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("classify", parents=[common, fmt], help="classification metrics")
    p.add_argument("--grammar", required=True)
    p.add_argument("--pos", required=True, help="positive sequences (FASTA or plain)")
    p.add_argument("--neg", required=True, help="negative sequences (FASTA or plain)")
    how = p.add_mutually_exclusive_group(required=True)
    how.add_argument("--threshold", type=_finite_float)
    how.add_argument("--sweep", action="store_true", help="pick the F1-maximizing threshold")
    p.add_argument("--normalization", choices=("none", "per-length"), default="none")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("baseline", parents=[common, fmt], help="random-tree null distribution")
    p.add_argument("--contacts", required=True)
    p.add_argument("--L", type=_positive_int, default=DEFAULT_SEPARATION)
    p.add_argument("--t", type=_positive_float, required=True)
    p.add_argument("--n-samples", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_baseline)
    return parser


# -- helpers ---------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load(loader, path, *args):
    try:
        return loader(path, *args)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except EmptyPairClassError:
        raise
    except ParsetopoError as exc:
        raise InputError(f"{path}: {exc}") from None


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(args, records: List[dict], columns: Sequence[str]) -> None:
    if args.format == "tsv":
        lines = ["\t".join(columns)]
        lines += ["\t".join(_cell(r.get(c)) for c in columns) for r in records]
    else:
        lines = [json.dumps(r) for r in records]
    text = "\n".join(lines) + "\n"
    _write(args, text)


def _write(args, text: str) -> None:
    if args.output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _sequences(path: str):
    return read_sequences(_read_text(path))


# -- subcommands -----------------------------------------------------------


def cmd_contacts(args) -> int:
    if args.pdb:
        text = _read_text(args.pdb)
        try:
            cmap = extract_from_pdb(text, args.chain, args.model, args.cutoff, origin=args.pdb)
        except ParsetopoError as exc:
            raise InputError(f"{args.pdb}: {exc}") from None
    else:
        cmap = _load(read_contact_file, args.list, args.n)
    if args.format == "json":
        rec = {
            "record": "contacts",
            "origin": cmap.source.origin,
            "n": cmap.n_residues,
            "cutoff": cmap.source.cutoff,
            "atom_policy": cmap.source.atom_policy,
            "excluded": sorted(cmap.excluded),
            "contacts": [list(p) for p in cmap.sorted_contacts()],
        }
        _write(args, json.dumps(rec) + "\n")
    else:
        _write(args, format_contact_list(cmap))
    return EXIT_OK


def cmd_eval(args) -> int:
    cmap = _load(read_contact_file, args.contacts)
    records = []
    for path in args.tree:
        tree = _load(read_tree_file, path)
        try:
            report = evaluate(
                tree, cmap, args.L, args.t,
                weighted=True if args.weighted else None,
                tree_id=path, map_id=args.contacts,
            )
        except EmptyPairClassError as exc:
            raise EmptyPairClassError(exc.which, f"{path} vs {args.contacts}: {exc}") from None
        except ParsetopoError as exc:
            raise InputError(f"{path}: {exc}") from None
        for w in report.warnings:
            log.warning("%s: %s", path, w)
        records.append(report.to_dict() if args.format == "json" else report.to_row())
    _emit(args, records, TSV_COLUMNS)
    return EXIT_OK


def _tree_filename(index: int, seq_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]+", "_", seq_id).strip("._") or "seq"
    return f"{index:04d}_{safe[:64]}.tree"


def cmd_parse(args) -> int:
    grammar = _load(read_grammar_file, args.grammar)
    path = args.seq or args.fasta
    entries = _sequences(path)
    if not entries:
        raise InputError(f"{path}: no sequences")
    if args.emit_tree:
        os.makedirs(args.emit_tree, exist_ok=True)
    records = []
    processed = 0
    for index, (seq_id, residues) in enumerate(entries, start=1):
        rec = {"record": "parse", "id": seq_id, "length": None, "log_prob": None, "tree": None}
        try:
            seq = map_sequence(grammar, residues)
            rec["length"] = len(seq)
            result = viterbi_parse(grammar, seq)
        except ParsetopoError as exc:
            log.warning("%s: sequence %s: %s", path, seq_id, exc)
            rec["log_prob"] = "error"
            records.append(rec)
            continue
        processed += 1
        if result is None:
            rec["log_prob"] = "no-parse"
        else:
            rec["log_prob"] = result.log_prob
            if args.emit_tree:
                out = os.path.join(args.emit_tree, _tree_filename(index, seq_id))
                with open(out, "w", encoding="utf-8") as fh:
                    fh.write(f"# {seq_id} log_prob={result.log_prob!r}\n")
                    fh.write(serialize_bracket(result.tree) + "\n")
                rec["tree"] = out
        records.append(rec)
    _emit(args, records, PARSE_COLUMNS)
    if not processed:
        log.error("%s: no sequence could be processed", path)
        return EXIT_INPUT
    return EXIT_OK


def cmd_classify(args) -> int:
    grammar = _load(read_grammar_file, args.grammar)
    pos = _sequences(args.pos)
    neg = _sequences(args.neg)
    if not pos:
        raise InputError(f"{args.pos}: no sequences")
    if not neg:
        raise InputError(f"{args.neg}: no sequences")
    labelled = [(s, True) for _, s in pos] + [(s, False) for _, s in neg]
    scores = batch_score(grammar, labelled, args.normalization)
    try:
        if args.sweep:
            metrics = best_threshold(scores)
        else:
            metrics = classification_metrics(scores, args.threshold)
    except ParsetopoError as exc:
        raise InputError(str(exc)) from None
    rec = {"record": "classify", "normalization": args.normalization}
    rec.update(metrics.to_dict())
    rec["n_pos"] = len(pos)
    rec["n_neg"] = len(neg)
    _emit(args, [rec], CLASSIFY_COLUMNS)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cmap = _load(read_contact_file, args.contacts)
    try:
        summary = baseline_distribution(cmap, args.L, args.t, args.n_samples, args.seed)
    except EmptyPairClassError:
        raise
    except ParsetopoError as exc:
        raise InputError(f"{args.contacts}: {exc}") from None
    _emit(args, [summary.to_dict()], BASELINE_COLUMNS)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except EmptyPairClassError as exc:
        log.error("%s", exc)
        return EXIT_EMPTY_CLASS
    except (InputError, ParsetopoError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
