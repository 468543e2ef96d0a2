"""Text formats for observation sequences, labeled corpora and classifier bundles."""

from __future__ import annotations

import json
from typing import Iterable

from .errors import ParseError
from .terms import Alphabet, Atom, Lexer, TermParser

__all__ = ["parse_sequence", "parse_sequences", "format_sequence", "parse_labeled",
           "format_labeled", "read_text"]


def _atoms(lx: Lexer, tp: TermParser, alphabet: Alphabet | None) -> list[Atom]:
    out = []
    while True:
        tok = lx.peek()
        tp.new_scope()
        a = tp.atom()
        if alphabet is not None:
            try:
                alphabet.check_atom(a)
            except ParseError as exc:
                raise ParseError(str(exc), tok.line, tok.column) from None
        out.append(a)
        if not lx.accept(","):
            break
    return out


def parse_sequence(text: str, alphabet: Alphabet | None = None) -> list[Atom]:
    """One comma-separated sequence; the closing ``.`` is optional."""
    lx = Lexer(text)
    if lx.at_end():
        return []
    tp = TermParser(lx)
    seq = _atoms(lx, tp, alphabet)
    lx.accept(".")
    if not lx.at_end():
        raise lx.error(f"unexpected {lx.peek().text!r} after sequence")
    return seq


def parse_sequences(text: str, alphabet: Alphabet | None = None) -> list[list[Atom]]:
    """One sequence per non-blank line (``%`` starts a comment)."""
    out = []
    for n, line in enumerate(text.splitlines()):
        lx = Lexer(line, n)
        if lx.at_end():
            continue
        seq = _atoms(lx, TermParser(lx), alphabet)
        lx.expect(".")
        if not lx.at_end():
            raise lx.error(f"unexpected {lx.peek().text!r} after sequence")
        out.append(seq)
    return out


def format_sequence(seq: Iterable[Atom]) -> str:
    return ", ".join(map(str, seq)) + "."


def parse_labeled(text: str, alphabet: Alphabet | None = None) -> list[tuple[str, list[Atom]]]:
    """Records ``<label> TAB <atom>, ... .``, one per line."""
    out = []
    for n, line in enumerate(text.splitlines()):
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        label, sep, rest = line.partition("\t")
        if not sep or not label.strip():
            raise ParseError("expected '<label><TAB><sequence>'", n + 1, 1)
        lx = Lexer(rest, n)
        seq = _atoms(lx, TermParser(lx), alphabet)
        lx.expect(".")
        if not lx.at_end():
            raise lx.error(f"unexpected {lx.peek().text!r} after sequence")
        out.append((label.strip(), seq))
    return out


def format_labeled(records: Iterable[tuple[str, list[Atom]]]) -> str:
    return "".join(f"{label}\t{format_sequence(seq)}\n" for label, seq in records)


def read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
