"""First-order terms, atoms, substitutions and the typed alphabet.

Terms are immutable values: ``Var``, ``Const`` and ``Compound``.  An ``Atom``
pairs a predicate symbol with argument terms.  Substitutions are plain dicts
mapping ``Var`` to terms.

Lists use Prolog syntax: ``[a, b | T]`` is built from the binary functor ``.``
and the empty-list constant ``[]``; both belong to the built-in ``list`` type.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .errors import GroundingError, ParseError, TypeCheckError

__all__ = [
    "Var", "Const", "Compound", "Atom", "Term", "Alphabet", "FunctorDecl",
    "START", "END", "NIL", "HASH", "LIST_TYPE",
    "apply_subst", "compose", "mgu", "unify_terms", "subsumes", "match",
    "is_variant", "rename_apart", "term_vars", "is_ground", "make_list",
    "list_items", "Lexer", "TermParser", "parse_term", "parse_atom",
]


@dataclass(frozen=True, slots=True)
class Var:
    """A logical variable; identity is ``(name, index)``."""

    name: str
    index: int = 0

    @property
    def anonymous(self) -> bool:
        return self.name.startswith("_")

    def __str__(self) -> str:
        if self.anonymous:
            return "_"
        return self.name if self.index == 0 else f"{self.name}#{self.index}"


@dataclass(frozen=True, slots=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self) -> str:
        if self.functor == "." and len(self.args) == 2:
            return _format_list(self)
        return f"{self.functor}({', '.join(map(str, self.args))})"


Term = Union[Var, Const, Compound]


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return (self.pred, len(self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(map(str, self.args))})"


LIST_TYPE = "list"
NIL = Const("[]")
HASH = Const("#")
START = Atom("start")
END = Atom("end")


def make_list(items: Iterable, tail=NIL):
    out = tail
    for item in reversed(list(items)):
        out = Compound(".", (item, out))
    return out


def list_items(term) -> tuple[list, object]:
    """Split a (possibly partial) list into its items and its tail."""
    items = []
    while isinstance(term, Compound) and term.functor == "." and len(term.args) == 2:
        items.append(term.args[0])
        term = term.args[1]
    return items, term


def _format_list(term) -> str:
    items, tail = list_items(term)
    body = ", ".join(map(str, items))
    if tail == NIL:
        return f"[{body}]"
    return f"[{body} | {tail}]"


# ---------------------------------------------------------------------------
# substitution algebra
# ---------------------------------------------------------------------------


def is_ground(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Const):
        return True
    return all(is_ground(a) for a in t.args)


def term_vars(t, acc: dict | None = None) -> list[Var]:
    """Variables of a term or atom in order of first occurrence."""
    if acc is None:
        acc = {}
    if isinstance(t, Var):
        acc.setdefault(t, None)
    elif not isinstance(t, Const):
        for a in t.args:
            term_vars(a, acc)
    return list(acc)


def apply_subst(e, s: dict):
    """Simultaneously replace every bound variable of ``e``."""
    if not s:
        return e
    if isinstance(e, Var):
        return s.get(e, e)
    if isinstance(e, Const):
        return e
    args = tuple(apply_subst(a, s) for a in e.args)
    if isinstance(e, Atom):
        return Atom(e.pred, args)
    return Compound(e.functor, args)


def compose(sigma: dict, gamma: dict) -> dict:
    """Return the substitution equivalent to applying ``sigma`` then ``gamma``."""
    out = {v: apply_subst(t, gamma) for v, t in sigma.items()}
    for v, t in gamma.items():
        if v not in sigma:
            out[v] = t
    return {v: t for v, t in out.items() if v != t}


def _walk(t, s):
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def _occurs(v, t, s) -> bool:
    t = _walk(t, s)
    if t == v:
        return True
    if isinstance(t, Compound):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify_terms(a, b, s: dict | None = None) -> dict | None:
    """Most general unifier of two terms (with occurs check), or None."""
    s = dict(s) if s else {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, s), _walk(y, s)
        if x == y:
            continue
        if isinstance(x, Var):
            if _occurs(x, y, s):
                return None
            s[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, s):
                return None
            s[y] = x
        elif isinstance(x, Compound) and isinstance(y, Compound):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return _resolve(s)


def _resolve(s: dict) -> dict:
    def full(t):
        t = _walk(t, s)
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(full(a) for a in t.args))
        return t

    return {v: full(t) for v, t in s.items()}


def mgu(a: Atom, b: Atom) -> dict | None:
    """Most general unifier of two atoms; None when they do not unify."""
    if a.pred != b.pred or len(a.args) != len(b.args):
        return None
    return unify_terms(Compound("", a.args), Compound("", b.args))


def _match(g, t, s: dict) -> bool:
    if isinstance(g, Var):
        bound = s.get(g)
        if bound is None:
            s[g] = t
            return True
        return bound == t
    if isinstance(g, Const):
        return g == t
    if not isinstance(t, Compound) or g.functor != t.functor or len(g.args) != len(t.args):
        return False
    return all(_match(x, y, s) for x, y in zip(g.args, t.args))


def match(general, specific) -> dict | None:
    """One-way matching: theta with ``general``theta == ``specific``, binding only
    variables of ``general``.  Variables of ``specific`` are treated as rigid."""
    if isinstance(general, Atom):
        if not isinstance(specific, Atom) or general.pred != specific.pred \
                or len(general.args) != len(specific.args):
            return None
        s: dict = {}
        for x, y in zip(general.args, specific.args):
            if not _match(x, y, s):
                return None
    else:
        s = {}
        if not _match(general, specific, s):
            return None
    return {v: t for v, t in s.items() if v != t}


subsumes = match


def is_variant(a, b) -> bool:
    """True when ``a`` and ``b`` are equal up to consistent variable renaming."""
    th = match(a, b)
    if th is None or match(b, a) is None:
        return False
    return all(isinstance(t, Var) for t in th.values()) and len(set(th.values())) == len(th)


def rename_apart(a, counter: Iterator[int]):
    """Variant of ``a`` whose variables carry a scope index never issued before."""
    vs = term_vars(a)
    if not vs:
        return a
    k = next(counter)
    return apply_subst(a, {v: Var(v.name, k) for v in vs})


# ---------------------------------------------------------------------------
# typed alphabet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctorDecl:
    name: str
    arity: int
    result: str
    arg_types: tuple | None = None  # None: arguments are not type-checked


_UNSEEN = object()


@dataclass(eq=False)
class Alphabet:
    """Typed first-order alphabet.

    Types are introduced by ``domain`` declarations (finite constant domains) or
    as result types of functors (recursive types, no selection domain).
    Predicates are keyed by ``(name, arity)``.
    """

    domains: dict = field(default_factory=dict)
    functors: dict = field(default_factory=dict)
    predicates: dict = field(default_factory=dict)
    identifiers: list = field(default_factory=list)
    allow_hash: bool = False
    decl_order: list = field(default_factory=list, repr=False)
    _const_types: dict = field(default_factory=dict, repr=False)
    _const_order: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.predicates.setdefault(("start", 0), ())
        self.predicates.setdefault(("end", 0), ())

    # -- declarations -----------------------------------------------------

    @property
    def types(self) -> set[str]:
        out = set(self.domains) | {f.result for f in self.functors.values()}
        out.add(LIST_TYPE)
        return out

    def add_domain(self, type_name: str, elements: Iterable) -> None:
        if type_name in self.domains:
            raise TypeCheckError(f"duplicate domain for type {type_name!r}")
        elements = tuple(elements)
        if not elements:
            raise TypeCheckError(f"domain of {type_name!r} is empty")
        if len(set(elements)) != len(elements):
            raise TypeCheckError(f"domain of {type_name!r} repeats an element")
        for e in elements:
            if e == HASH:
                raise TypeCheckError("'#' is reserved")
            if isinstance(e, Const):
                self._register_const(e.name, type_name)
            elif not is_ground(e):
                raise TypeCheckError(f"domain element {e} is not ground")
            else:
                self.check_term(e, type_name, {})
        self.domains[type_name] = elements
        self.decl_order.append(("domain", type_name))

    def _register_const(self, name: str, type_name: str) -> None:
        self._const_types.setdefault(name, [])
        if type_name not in self._const_types[name]:
            self._const_types[name].append(type_name)
        self._const_order.setdefault(name, len(self._const_order))

    def add_functor(self, name: str, arity: int, result: str, arg_types=None) -> None:
        if (name, arity) in self.functors:
            raise TypeCheckError(f"duplicate functor {name}/{arity}")
        if arg_types is not None:
            arg_types = tuple(arg_types)
            if len(arg_types) != arity:
                raise TypeCheckError(f"functor {name}/{arity} lists {len(arg_types)} argument types")
        self.functors[(name, arity)] = FunctorDecl(name, arity, result, arg_types)
        self.decl_order.append(("functor", (name, arity)))
        if arity == 0:
            self._register_const(name, result)
        if arg_types:
            for t in arg_types:
                if t not in self.types:
                    raise TypeCheckError(f"functor {name}/{arity} uses undeclared type {t!r}")

    def add_predicate(self, name: str, arg_types: Iterable[str]) -> None:
        arg_types = tuple(arg_types)
        if (name, len(arg_types)) in self.predicates:
            raise TypeCheckError(f"duplicate predicate {name}/{len(arg_types)}")
        for t in arg_types:
            if t not in self.types:
                raise TypeCheckError(f"predicate {name}/{len(arg_types)} uses undeclared type {t!r}")
        self.predicates[(name, len(arg_types))] = arg_types
        self.decl_order.append(("predicate", (name, len(arg_types))))

    def add_identifier(self, type_name: str) -> None:
        if type_name not in self.domains:
            raise TypeCheckError(f"identifier type {type_name!r} has no domain")
        if type_name not in self.identifiers:
            self.identifiers.append(type_name)
            self.decl_order.append(("identifier", type_name))

    def copy(self) -> "Alphabet":
        out = Alphabet(dict(self.domains), dict(self.functors), dict(self.predicates),
                       list(self.identifiers), self.allow_hash, list(self.decl_order))
        out._const_types = {k: list(v) for k, v in self._const_types.items()}
        out._const_order = dict(self._const_order)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Alphabet):
            return NotImplemented
        return (self.domains, self.functors, self.predicates, set(self.identifiers),
                self.allow_hash) == (other.domains, other.functors, other.predicates,
                                     set(other.identifiers), other.allow_hash)

    # -- queries ------------------------------------------------------------

    def domain(self, type_name: str | None) -> tuple | None:
        return self.domains.get(type_name) if type_name is not None else None

    def is_identifier(self, type_name: str | None) -> bool:
        return type_name in self.identifiers

    def arg_type(self, pred: str, arity: int, i: int) -> str:
        """Type of the 1-based argument ``i`` of ``pred/arity``."""
        return self.predicates[(pred, arity)][i - 1]

    def has_constant(self, name: str) -> bool:
        return name in self._const_types or name in ("[]",) or (name == "#" and self.allow_hash)

    # -- type checking --------------------------------------------------------

    def check_term(self, t, expected: str | None, var_types: dict) -> dict:
        if isinstance(t, Var):
            prev = var_types.get(t, _UNSEEN)
            if prev is _UNSEEN or prev is None:
                var_types[t] = expected
            elif expected is not None and prev != expected:
                raise TypeCheckError(f"variable {t} used at types {prev!r} and {expected!r}")
        elif isinstance(t, Const):
            if t.name == "#":
                if not self.allow_hash:
                    raise TypeCheckError("'#' is reserved")
            elif t.name == "[]":
                if expected not in (None, LIST_TYPE):
                    raise TypeCheckError(f"[] is not of type {expected!r}")
            else:
                types = self._const_types.get(t.name)
                if types is None:
                    raise TypeCheckError(f"unknown constant {t.name!r}")
                if expected is not None and expected not in types:
                    raise TypeCheckError(f"constant {t.name!r} is not of type {expected!r}")
        else:
            if t.functor == "." and len(t.args) == 2:
                decl = FunctorDecl(".", 2, LIST_TYPE, None)
            else:
                decl = self.functors.get((t.functor, len(t.args)))
            if decl is None:
                arities = sorted(a for (n, a) in self.functors if n == t.functor)
                if arities:
                    raise TypeCheckError(f"functor {t.functor} takes {arities} arguments, got {len(t.args)}")
                raise TypeCheckError(f"unknown functor {t.functor!r}")
            if expected is not None and decl.result != expected:
                raise TypeCheckError(f"term {t} is of type {decl.result!r}, expected {expected!r}")
            for i, a in enumerate(t.args):
                self.check_term(a, decl.arg_types[i] if decl.arg_types else None, var_types)
        return var_types

    def check_atom(self, a: Atom, var_types: dict | None = None) -> dict:
        """Type-check ``a``; returns the inferred ``{var: type-or-None}`` map."""
        if var_types is None:
            var_types = {}
        types = self.predicates.get((a.pred, len(a.args)))
        if types is None:
            arities = sorted(n for (p, n) in self.predicates if p == a.pred)
            if arities:
                raise TypeCheckError(f"predicate {a.pred} takes {arities} arguments, got {len(a.args)}")
            raise TypeCheckError(f"unknown predicate {a.pred!r}")
        for arg, ty in zip(a.args, types):
            self.check_term(arg, ty, var_types)
        return var_types

    # -- ordering and grounding ---------------------------------------------

    def term_key(self, t):
        """Canonical total order on terms: constants by declaration order,
        compounds lexicographically by (functor, arguments)."""
        if isinstance(t, Const):
            return (0, self._const_order.get(t.name, len(self._const_order)), t.name)
        if isinstance(t, Var):
            return (2, t.name, t.index)
        if isinstance(t, Atom):
            return (t.pred, len(t.args), tuple(self.term_key(a) for a in t.args))
        return (1, t.functor, len(t.args), tuple(self.term_key(a) for a in t.args))

    def ground_instances(self, a: Atom) -> Iterator[Atom]:
        """All type-respecting ground instances of ``a``, each once, canonical order."""
        var_types = self.check_atom(a)
        variables = term_vars(a)
        domains = []
        for v in variables:
            dom = self.domain(var_types.get(v))
            if dom is None:
                raise GroundingError(f"variable {v} of {a} has no finite domain")
            domains.append(dom)
        out = [apply_subst(a, dict(zip(variables, values)))
               for values in itertools.product(*domains)]
        yield from sorted(set(out), key=self.term_key)


# ---------------------------------------------------------------------------
# lexer and term parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<float>[0-9]+\.[0-9]+(?:[eE][-+]?[0-9]+)?|[0-9]+[eE][-+]?[0-9]+)
  | (?P<name>[a-z0-9][A-Za-z0-9_]*)
  | (?P<var>[A-Z][A-Za-z0-9_]*'*|_(?![A-Za-z0-9_]))
  | (?P<hash>\#)
  | (?P<arrow><-|->)
  | (?P<punct>[()\[\],|.:{}=/])
""", re.VERBOSE)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


class Lexer:
    """Token stream with one-token lookahead."""

    def __init__(self, text: str, line_offset: int = 0):
        self.tokens = list(self._scan(text, line_offset))
        self.pos = 0

    @staticmethod
    def _scan(text, line_offset):
        line, line_start, i = 1 + line_offset, 0, 0
        while i < len(text):
            m = _TOKEN_RE.match(text, i)
            if m is None:
                raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
            kind = m.lastgroup
            if kind == "nl":
                line += 1
                line_start = m.end()
            elif kind not in ("ws", "comment"):
                yield Token(kind, m.group(), line, i - line_start + 1)
            i = m.end()

    def peek(self, offset: int = 0) -> Token | None:
        j = self.pos + offset
        return self.tokens[j] if j < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseError("unexpected end of input",
                             last.line if last else 1, last.column if last else 1)
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek() or (self.tokens[-1] if self.tokens else None)
        if tok is None:
            return ParseError(message, 1, 1)
        return ParseError(message, tok.line, tok.column)

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text and tok.kind != "var":
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            found = "end of input" if tok is None else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        self.pos += 1
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            found = "end of input" if tok is None else repr(tok.text)
            raise self.error(f"expected {what}, found {found}")
        self.pos += 1
        return tok


class TermParser:
    """Recursive-descent parser for terms and atoms over one clause scope.

    Every ``_`` becomes a fresh variable ``_1``, ``_2``, ... numbered in order of
    occurrence within the scope, so re-parsing printed output is stable.
    """

    def __init__(self, lexer: Lexer):
        self.lx = lexer
        self._anon = 0

    def new_scope(self) -> None:
        self._anon = 0

    def _var(self, text: str) -> Var:
        if text == "_":
            self._anon += 1
            return Var(f"_{self._anon}")
        return Var(text)

    def term(self):
        lx = self.lx
        tok = lx.next()
        if tok.kind == "var":
            return self._var(tok.text)
        if tok.kind == "hash":
            return HASH
        if tok.text == "[":
            if lx.accept("]"):
                return NIL
            items = [self.term()]
            while lx.accept(","):
                items.append(self.term())
            tail = self.term() if lx.accept("|") else NIL
            lx.expect("]")
            return make_list(items, tail)
        if tok.kind == "name":
            if lx.accept("("):
                args = self._args()
                return Compound(tok.text, args)
            return Const(tok.text)
        raise lx.error(f"expected a term, found {tok.text!r}", tok)

    def _args(self) -> tuple:
        args = [self.term()]
        while self.lx.accept(","):
            args.append(self.term())
        self.lx.expect(")")
        return tuple(args)

    def atom(self) -> Atom:
        tok = self.lx.expect_kind("name", "a predicate symbol")
        if self.lx.accept("("):
            return Atom(tok.text, self._args())
        return Atom(tok.text)


def parse_atom(text: str, alphabet: Alphabet | None = None) -> Atom:
    """Parse one atom; with an alphabet the result is also type-checked."""
    lx = Lexer(text)
    tok = lx.peek()
    a = TermParser(lx).atom()
    if not lx.at_end():
        raise lx.error(f"unexpected {lx.peek().text!r} after atom")
    if alphabet is not None:
        try:
            alphabet.check_atom(a)
        except TypeCheckError as exc:
            raise TypeCheckError(str(exc), tok.line, tok.column) from None
    return a


def parse_term(text: str, alphabet: Alphabet | None = None, expected_type: str | None = None):
    """Parse one term; with an alphabet the result is also type-checked."""
    lx = Lexer(text)
    tok = lx.peek()
    t = TermParser(lx).term()
    if not lx.at_end():
        raise lx.error(f"unexpected {lx.peek().text!r} after term")
    if alphabet is not None:
        try:
            alphabet.check_term(t, expected_type, {})
        except TypeCheckError as exc:
            raise TypeCheckError(str(exc), tok.line, tok.column) from None
    return t
