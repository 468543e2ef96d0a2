"""UNIX command-session models with and without directory reuse, and a
synthetic session generator.

States are fully observable: each transition observes its source state.  The
last argument of a command records the previous command.  The reuse model
``U`` lets commands share the directory argument of the previous command; the
baseline ``N`` draws every directory afresh from the (uniform) identifier
distribution.
"""

from __future__ import annotations

import random

from .model import Lohmm, parse_model
from .terms import Atom, Const

__all__ = ["DEFAULT_DIRS", "unix_model_text", "unix_model", "generate_sessions"]

DEFAULT_DIRS = tuple(f"d{i}" for i in range(1, 21))
LASTCOM = ("start", "com", "mkdir", "ls", "cd", "cp", "mv")
DIR_COMMANDS = ("mkdir", "ls", "cd", "cp", "mv")


def _reuse_heads(c: str, args: tuple[str, ...]) -> list[str]:
    """Successor heads after a command whose directory arguments are ``args``."""
    heads = [f"mkdir({args[0]}, com)"] if len(args) == 1 else []
    heads += ["mkdir(_, com)", "com", "end"]
    for cmd in ("ls", "cd"):
        heads += [f"{cmd}({a}, {c})" for a in args] + [f"{cmd}(_, {c})"]
    for cmd in ("cp", "mv"):
        if len(args) == 1:
            heads += [f"{cmd}(_, {args[0]}, {c})", f"{cmd}({args[0]}, _, {c})"]
        else:
            heads += [f"{cmd}({args[0]}, _, {c})", f"{cmd}(_, {args[1]}, {c})"]
        heads.append(f"{cmd}(_, _, {c})")
    return heads


def _plain_heads(c: str) -> list[str]:
    return ["mkdir(_, com)", "com", "end", f"ls(_, {c})", f"cd(_, {c})",
            f"cp(_, _, {c})", f"mv(_, _, {c})"]


def unix_model_text(reuse: bool = True, dirs=DEFAULT_DIRS) -> str:
    """Model file text for ``U`` (``reuse=True``) or ``N``; all transitions from
    one body start out uniform."""
    lines = [
        "% UNIX sessions: " + ("commands may reuse the previous directory."
                               if reuse else "directories are never shared between commands."),
        f"domain dir = {{{', '.join(dirs)}}}.",
        f"domain lastcom = {{{', '.join(LASTCOM)}}}.",
        "identifier dir.",
        "predicate com.",
        "predicate mkdir(dir, lastcom).",
        "predicate ls(dir, lastcom).",
        "predicate cd(dir, lastcom).",
        "predicate cp(dir, dir, lastcom).",
        "predicate mv(dir, dir, lastcom).",
        "",
    ]

    def group(body: str, heads: list[str]) -> None:
        p = repr(1.0 / len(heads))
        lines.extend(f"{p} : {h} <- {body}." for h in heads)

    lines += ["0.5 : com <- start.", "0.5 : mkdir(_, start) <- start."]
    group("com", ["com", "mkdir(_, com)", "end"])
    for prev in ("start", "com"):
        body = f"mkdir(Dir, {prev})"
        group(body, _reuse_heads("mkdir", ("Dir",)) if reuse else _plain_heads("mkdir"))
    for cmd in ("cd", "ls"):
        for prev in DIR_COMMANDS:
            body = f"{cmd}(Dir, {prev})"
            group(body, _reuse_heads(cmd, ("Dir",)) if reuse else _plain_heads(cmd))
    for cmd in ("cp", "mv"):
        for prev in DIR_COMMANDS:
            body = f"{cmd}(From, To, {prev})"
            group(body, _reuse_heads(cmd, ("From", "To")) if reuse else _plain_heads(cmd))
    return "\n".join(lines) + "\n"


def unix_model(reuse: bool = True, dirs=DEFAULT_DIRS) -> Lohmm:
    return parse_model(unix_model_text(reuse, dirs)).require_valid()


def generate_sessions(n: int, seed: int = 0, reuse_rate: float = 0.8, dirs=DEFAULT_DIRS,
                      max_length: int = 40) -> list[list[Atom]]:
    """Synthetic sessions that each contain at least one ``mkdir``.

    After a directory command the next ``ls``/``cd`` targets the directory just
    used with probability ``reuse_rate``; ``cp``/``mv`` keep it as one of
    their two arguments with the same probability.
    """
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        s = _session(rng, reuse_rate, dirs, max_length)
        if s is not None and any(a.pred == "mkdir" for a in s):
            out.append(s)
    return out


def _session(rng, reuse_rate, dirs, max_length):
    def pick(current):
        if current is not None and rng.random() < reuse_rate:
            return current
        return rng.choice(dirs)

    seq = []
    if rng.random() < 0.5:
        d = rng.choice(dirs)
        seq.append(Atom("mkdir", (Const(d), Const("start"))))
        prev, cur = "mkdir", d
    else:
        seq.append(Atom("com"))
        prev, cur = "com", None
    while len(seq) < max_length:
        r = rng.random()
        if prev == "com":
            if r < 0.55:
                seq.append(Atom("com"))
            elif r < 0.85:
                cur = rng.choice(dirs)
                seq.append(Atom("mkdir", (Const(cur), Const("com"))))
                prev = "mkdir"
            else:
                return seq
            continue
        if r < 0.3:
            nxt = "ls"
        elif r < 0.6:
            nxt = "cd"
        elif r < 0.68:
            nxt = "cp"
        elif r < 0.76:
            nxt = "mv"
        elif r < 0.84:
            nxt = "mkdir"
        elif r < 0.94:
            nxt = "com"
        else:
            return seq
        if nxt == "com":
            seq.append(Atom("com"))
            prev, cur = "com", None
        elif nxt == "mkdir":
            cur = rng.choice(dirs)
            seq.append(Atom("mkdir", (Const(cur), Const("com"))))
            prev = "mkdir"
        elif nxt in ("ls", "cd"):
            cur = pick(cur)
            seq.append(Atom(nxt, (Const(cur), Const(prev))))
            prev = nxt
        else:
            kept = pick(cur)
            other = rng.choice(dirs)
            args = (kept, other) if rng.random() < 0.5 else (other, kept)
            seq.append(Atom(nxt, (Const(args[0]), Const(args[1]), Const(prev))))
            prev, cur = nxt, args[1]
    return seq
