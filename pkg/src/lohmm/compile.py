"""Constructions between representations.

* GNF probabilistic context-free grammars compile to end-terminated models
  whose hidden state is a stack of nonterminals.
* ``pcfg_string_prob`` is an independent brute-force oracle: it enumerates
  leftmost derivations directly on the grammar.
* ``mealy_to_moore`` moves emissions from transitions onto states by adding
  the (partially ground) observation as an extra last argument.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import LohmmError, ModelError
from .model import AbstractTransition, Lohmm, format_model
from .terms import END, HASH, START, Alphabet, Atom, Compound, Const, Lexer, Var, \
    make_list, match, term_vars

__all__ = [
    "Production", "Pcfg", "parse_pcfg", "format_pcfg", "pcfg_to_lohmm",
    "pcfg_string_prob", "MooreModel", "mealy_to_moore",
]


# ---------------------------------------------------------------------------
# grammars
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Production:
    prob: float
    lhs: str
    rhs: tuple

    def __str__(self) -> str:
        return f"{self.prob!r} : {self.lhs} -> {' '.join(self.rhs)}."


def is_nonterminal(sym: str) -> bool:
    return sym[:1].isupper()


@dataclass
class Pcfg:
    start: str
    productions: list = field(default_factory=list)

    @property
    def nonterminals(self) -> list[str]:
        seen = {self.start: None}
        for p in self.productions:
            seen.setdefault(p.lhs, None)
            for s in p.rhs:
                if is_nonterminal(s):
                    seen.setdefault(s, None)
        return list(seen)

    @property
    def terminals(self) -> list[str]:
        seen: dict = {}
        for p in self.productions:
            for s in p.rhs:
                if not is_nonterminal(s):
                    seen.setdefault(s, None)
        return list(seen)

    @property
    def is_gnf(self) -> bool:
        return all(p.rhs and not is_nonterminal(p.rhs[0])
                   and all(is_nonterminal(s) for s in p.rhs[1:]) for p in self.productions)

    def rules(self, lhs: str) -> list[Production]:
        return [p for p in self.productions if p.lhs == lhs]

    def check(self) -> None:
        """Raise :class:`ModelError` unless every nonterminal's rules sum to 1."""
        for x in self.nonterminals:
            total = math.fsum(p.prob for p in self.rules(x))
            if abs(total - 1.0) > 1e-9:
                raise ModelError(f"productions of {x} sum to {total!r}")
        for t in self.terminals:
            if t in ("start", "end"):
                raise ModelError(f"terminal {t!r} is reserved")


def parse_pcfg(text: str) -> Pcfg:
    """``start S.`` followed by productions ``p : X -> sym ... .``."""
    lx = Lexer(text)
    tok = lx.expect_kind("name", "'start'")
    if tok.text != "start":
        raise lx.error("grammar must begin with 'start <Nonterminal>.'", tok)
    start = lx.expect_kind("var", "a nonterminal").text
    lx.expect(".")
    prods = []
    while not lx.at_end():
        tok = lx.next()
        try:
            p = float(tok.text)
        except ValueError:
            raise lx.error(f"expected a probability, found {tok.text!r}", tok) from None
        if not 0.0 <= p <= 1.0:
            raise lx.error(f"probability {tok.text} outside [0, 1]", tok)
        lx.expect(":")
        lhs = lx.expect_kind("var", "a nonterminal").text
        lx.expect("->")
        rhs = []
        while not lx.accept("."):
            t = lx.next()
            if t.kind not in ("var", "name"):
                raise lx.error(f"unexpected {t.text!r} in production", t)
            rhs.append(t.text)
        prods.append(Production(p, lhs, tuple(rhs)))
    return Pcfg(start, prods)


def format_pcfg(g: Pcfg) -> str:
    return "\n".join([f"start {g.start}."] + [str(p) for p in g.productions]) + "\n"


def _nt_const(x: str) -> Const:
    return Const("n" + x)


def pcfg_to_lohmm(g: Pcfg) -> Lohmm:
    """Stack-machine model with P(w . end) equal to the grammar's P(w)."""
    g.check()
    if not g.is_gnf:
        raise ModelError("grammar is not in Greibach normal form")
    alpha = Alphabet()
    alpha.add_domain("nonterminal", [_nt_const(x) for x in g.nonterminals])
    alpha.add_predicate("stack", ["list"])
    for t in g.terminals:
        alpha.add_predicate(t, [])
    rest = Var("S")
    clauses = [AbstractTransition(1.0, Atom("stack", (make_list([_nt_const(g.start)]),)), START)]
    for p in g.productions:
        body = Atom("stack", (make_list([_nt_const(p.lhs)], rest),))
        head = Atom("stack", (make_list([_nt_const(y) for y in p.rhs[1:]], rest),))
        clauses.append(AbstractTransition(p.prob, head, body, Atom(p.rhs[0])))
    clauses.append(AbstractTransition(1.0, END, Atom("stack", (make_list([]),)), END))
    m = Lohmm(alpha, tuple(clauses), {}, "end")
    return m.require_valid()


def _min_yield(g: Pcfg) -> dict:
    """Shortest terminal yield of every nonterminal (inf if unproductive)."""
    best = {x: math.inf for x in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            n = sum(1 if not is_nonterminal(s) else best[s] for s in p.rhs)
            if n < best[p.lhs]:
                best[p.lhs], changed = n, True
    return best


def pcfg_string_prob(g: Pcfg, w: Sequence[str], max_steps: int = 200,
                     max_form: int = 64) -> tuple[float, bool]:
    """Sum of leftmost-derivation probabilities of ``w``.

    Returns ``(probability, truncated)``; ``truncated`` means some branch hit
    the step or sentential-form cap, so the probability is a lower bound.
    """
    w = tuple(w)
    ylen = _min_yield(g)
    rules = {x: g.rules(x) for x in g.nonterminals}
    total = []
    truncated = False
    # (matched prefix length, remaining sentential form, probability, steps)
    stack = [(0, (g.start,), 1.0, 0)]
    while stack:
        i, form, p, steps = stack.pop()
        # consume leading terminals
        j = 0
        while j < len(form) and not is_nonterminal(form[j]):
            if i >= len(w) or form[j] != w[i]:
                break
            i += 1
            j += 1
        else:
            form = form[j:]
            if not form:
                if i == len(w):
                    total.append(p)
                continue
            if sum(1 if not is_nonterminal(s) else ylen[s] for s in form) > len(w) - i:
                continue
            if steps >= max_steps or len(form) > max_form:
                truncated = True
                continue
            x, tail = form[0], form[1:]
            for r in rules[x]:
                if r.prob > 0.0:
                    stack.append((i, r.rhs + tail, p * r.prob, steps + 1))
            continue
    return math.fsum(total), truncated


# ---------------------------------------------------------------------------
# Mealy -> Moore
# ---------------------------------------------------------------------------


@dataclass
class MooreModel:
    """Model whose states carry the observation they emit as a last argument.

    ``core`` holds the extended alphabet, the enumerated ground prior and the
    emission-free transitions ``h(.., O#) <- b(.., _)``; ``O#`` is the
    observation with observation-only variables replaced by ``#``.  Emitting
    from a state grounds each ``#`` through the selection distribution.
    """

    core: Lohmm
    obs_type: str

    def emission_prob(self, state: Atom, obs: Atom) -> float:
        template = _term_to_atom(state.args[-1])
        theta = match(template, obs)
        if theta is None:
            return 0.0
        p = 1.0
        for j, arg in enumerate(template.args):
            if isinstance(arg, Var):
                p *= self.core.factor_prob((template.pred, template.arity, j + 1), theta[arg])
        return p

    def loglik(self, obs: Sequence[Atom]) -> float:
        """log P(obs) by the forward recursion over Moore states."""
        obs = list(obs)
        if not obs:
            return 0.0
        core = self.core
        alpha: dict = {}
        for st in core.initial_steps():
            e = self.emission_prob(st.state, obs[0])
            if e:
                alpha[st.state] = alpha.get(st.state, 0.0) + core.weight(st.clause, st.factors) * e
        loglik = 0.0
        for o in obs[1:]:
            z = sum(alpha.values())
            if z <= 0.0:
                return -math.inf
            loglik += math.log(z)
            nxt: dict = {}
            for s, a in alpha.items():
                for st in core.next_states(s):
                    e = self.emission_prob(st.state, o)
                    if e:
                        w = a / z * core.weight(st.clause, st.factors) * e
                        nxt[st.state] = nxt.get(st.state, 0.0) + w
            alpha = nxt
        if core.end_terminated:
            z = sum(a for s, a in alpha.items() if s.pred == "end")
        else:
            z = sum(alpha.values())
        return loglik + math.log(z) if z > 0.0 else -math.inf

    def likelihood(self, obs: Sequence[Atom]) -> float:
        ll = self.loglik(obs)
        return math.exp(ll) if ll > -math.inf else 0.0

    def emission_rules(self) -> list[str]:
        """One printable rule ``1.0 : o(..) <- h(.., o(..))`` per state pattern."""
        out: dict = {}
        for i in self.core.transitions:
            head = self.core.clauses[i].head
            k = itertools.count(1)
            t = head.args[-1]
            obs = Atom(t.name) if isinstance(t, Const) else \
                Atom(t.functor, tuple(Var(f"V{next(k)}") if x == HASH else x for x in t.args))
            anon = tuple(Var("_") for _ in head.args[:-1])
            out.setdefault(f"1.0 : {obs} <- {Atom(head.pred, anon + (t,))}.", None)
        return list(out)

    def __str__(self) -> str:
        text = format_model(self.core)
        rules = self.emission_rules()
        text += "\n% emissions: each state outputs its last argument, '#' drawn by selection\n"
        return text + "".join(f"% {r}\n" for r in rules)


def _atom_to_term(a: Atom):
    return Compound(a.pred, a.args) if a.args else Const(a.pred)


def _term_to_atom(t) -> Atom:
    """Inverse of the observation encoding; ``#`` becomes a fresh variable."""
    if isinstance(t, Const):
        return Atom(t.name)
    k = itertools.count(1)
    return Atom(t.functor, tuple(Var("#", next(k)) if a == HASH else a for a in t.args))


def mealy_to_moore(m: Lohmm, cap: int = 100_000) -> MooreModel:
    """Equivalent model with emissions attached to states.

    Raises :class:`LohmmError` when the enumerated prior exceeds ``cap`` states.
    """
    m.require_valid()
    a = m.alphabet
    obs_type = "observation"
    while obs_type in a.types:
        obs_type += "_"
    state_sigs: dict = {}
    for c in m.clauses:
        for x in (c.head, c.body):
            if x != START:
                state_sigs.setdefault(x.signature, None)
    obs_sigs = m.observation_signatures

    ext = Alphabet(allow_hash=True)
    for kind, key in a.decl_order:
        if kind == "domain":
            ext.add_domain(key, a.domains[key])
        elif kind == "functor":
            f = a.functors[key]
            ext.add_functor(f.name, f.arity, f.result, f.arg_types)
        elif kind == "identifier":
            ext.add_identifier(key)
    for sig in obs_sigs:
        if sig in ext.functors:
            raise LohmmError(f"observation symbol {sig[0]}/{sig[1]} clashes with a functor")
        ext.add_functor(sig[0], sig[1], obs_type, a.predicates[sig])
    for sig in obs_sigs:
        if sig not in ext.predicates:
            ext.add_predicate(sig[0], a.predicates[sig])
    for pred, n in state_sigs:
        if (pred, n + 1) in ext.predicates:
            raise LohmmError(f"extended state predicate {pred}/{n + 1} clashes with an observation")
        ext.add_predicate(pred, a.predicates[(pred, n)] + (obs_type,))

    trans = []
    for i in m.transitions:
        c = m.clauses[i]
        bound = set(term_vars(c.body)) | set(term_vars(c.head))
        o = c.observation
        o_hash = Atom(o.pred, tuple(HASH if isinstance(x, Var) and x not in bound else x
                                    for x in o.args))
        if any(v not in bound for v in term_vars(o_hash)):
            raise LohmmError(f"observation {o} has a nested free variable")
        head = Atom(c.head.pred, c.head.args + (_atom_to_term(o_hash),))
        body = Atom(c.body.pred, c.body.args + (Var("_0"),))
        trans.append(AbstractTransition(c.prob, head, body))

    sel: dict = {}
    for pos in set(m.selection) | set(m.selection_positions):
        if a.is_identifier(m.position_type(pos)):
            continue
        pred, n, i = pos
        if (pred, n) in state_sigs:
            sel[(pred, n + 1, i)] = dict(m.table(pos))
        if (pred, n) in obs_sigs:
            sel[pos] = dict(m.table(pos))

    scratch = Lohmm(ext, tuple(trans), sel, m.mode)
    prior: dict = {}
    for st0 in m.initial_steps():
        w0 = m.weight(st0.clause, st0.factors)
        src = Atom(st0.state.pred, st0.state.args + (HASH,))
        for st in scratch.next_states(src):
            prior[st.state] = prior.get(st.state, 0.0) + w0 * scratch.weight(st.clause, st.factors)
            if len(prior) > cap:
                raise LohmmError(f"Moore prior exceeds {cap} states")
    prior_clauses = tuple(AbstractTransition(p, s, START) for s, p in prior.items())
    return MooreModel(Lohmm(ext, prior_clauses + tuple(trans), sel, m.mode), obs_type)
