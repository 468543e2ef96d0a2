"""Shipped example models and grammars.

``load("coin-files")`` returns a parsed model, ``load_pcfg("g-nested")`` a
grammar; ``path(name)`` gives the file itself.
"""

from __future__ import annotations

from importlib import resources

from ..compile import Pcfg, parse_pcfg
from ..model import Lohmm, parse_model

MODELS = ("coin-files", "fig1", "anbncn", "hmm-arity0", "parallel", "unix-U", "unix-N")
INVALID_MODELS = ("bad-glb",)
GRAMMARS = ("g-single", "g-geometric", "g-nested")


def path(name: str):
    for ext in (".lohmm", ".pcfg", ".seq"):
        p = resources.files(__name__) / (name + ext)
        if p.is_file():
            return p
    raise FileNotFoundError(f"no fixture named {name!r}")


def text(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def load(name: str) -> Lohmm:
    return parse_model(text(name))


def load_pcfg(name: str) -> Pcfg:
    return parse_pcfg(text(name))
