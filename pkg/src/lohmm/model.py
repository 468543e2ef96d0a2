"""Logical hidden Markov models: abstract transitions, the naive-Bayes selection
distribution, validation, conflict resolution and one-step semantics.

A model is a tuple (alphabet, clauses, selection, mode).  Clauses whose body is
``start`` form the prior; the others are abstract transitions.  A transition
without an ``emits`` part observes its own (ground) source state, which is how
fully observable models such as the UNIX command models are written.

Selection tables map a predicate argument position ``(pred, arity, i)``
(1-based ``i``) to a categorical distribution over the domain of the
argument's type.  Positions without an explicit table are uniform.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

from .errors import DeadStateError, GroundingError, LohmmError, ModelError, ParseError, \
    TypeCheckError
from .terms import END, START, Alphabet, Atom, Lexer, TermParser, apply_subst, is_ground, \
    is_variant, match, mgu, rename_apart, term_vars

log = logging.getLogger(__name__)

TOL = 1e-9

__all__ = [
    "AbstractTransition", "Lohmm", "Issue", "Step", "validate", "check",
    "selection_prob", "max_specific", "step_distribution", "parse_model",
    "format_model", "TOL",
]


@dataclass(frozen=True)
class AbstractTransition:
    """``prob : head <- body emits obs``; priors have body ``start`` and no obs."""

    prob: float
    head: Atom
    body: Atom
    obs: Atom | None = None

    @property
    def is_prior(self) -> bool:
        return self.body == START

    @property
    def observation(self) -> Atom:
        return self.obs if self.obs is not None else self.body

    def with_prob(self, p: float) -> "AbstractTransition":
        return AbstractTransition(p, self.head, self.body, self.obs)

    def __str__(self) -> str:
        text = f"{_fmt_prob(self.prob)} : {self.head} <- {self.body}"
        if self.obs is not None:
            text += f" emits {self.obs}"
        return text + "."


class Step(NamedTuple):
    """One grounded use of a clause: which clause, where it leads, what it emits,
    and the ``(position, value)`` choices the selection distribution made."""

    clause: int
    state: Atom
    obs: Atom | None
    factors: tuple


class _Slot(NamedTuple):
    var: object
    pos: tuple
    index: int  # argument index (0-based) in the atom


@dataclass
class _BodyClass:
    body: Atom
    members: list


@dataclass(frozen=True)
class Issue:
    kind: str
    message: str
    atoms: tuple = ()

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


@dataclass(frozen=True, eq=False)
class Lohmm:
    alphabet: Alphabet
    clauses: tuple
    selection: Mapping = field(default_factory=dict)
    mode: str = "fixed"  # "fixed" | "end"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lohmm):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.clauses == other.clauses
                and _plain(self.selection) == _plain(other.selection) and self.mode == other.mode)

    __hash__ = object.__hash__

    def __str__(self) -> str:
        return format_model(self)

    # -- structure ---------------------------------------------------------

    @property
    def priors(self) -> list[int]:
        return [i for i, c in enumerate(self.clauses) if c.is_prior]

    @property
    def transitions(self) -> list[int]:
        return [i for i, c in enumerate(self.clauses) if not c.is_prior]

    @cached_property
    def body_classes(self) -> list[_BodyClass]:
        """Transition bodies grouped up to variance, in clause order."""
        classes: list[_BodyClass] = []
        for i in self.transitions:
            body = self.clauses[i].body
            for cls in classes:
                if is_variant(cls.body, body):
                    cls.members.append(i)
                    break
            else:
                classes.append(_BodyClass(body, [i]))
        return classes

    @cached_property
    def _classes_by_sig(self) -> dict:
        out: dict = {}
        for k, cls in enumerate(self.body_classes):
            out.setdefault(cls.body.signature, []).append(k)
        return out

    @cached_property
    def _cache(self) -> dict:
        return {"applicable": {}, "tables": {}, "slots": {}}

    def slots(self, i: int) -> tuple[list, list]:
        """Free-variable slots of clause ``i``: (head slots, observation slots).

        A free variable is random over the domain of the argument it first appears
        in; it must appear there directly (not nested) and that argument's type
        must have a finite domain.
        """
        cache = self._cache["slots"]
        if i not in cache:
            c = self.clauses[i]
            bound = set(term_vars(c.body))
            head_slots = self._free_slots(c.head, bound)
            bound |= set(term_vars(c.head))
            obs_slots = [] if c.is_prior else self._free_slots(c.observation, bound)
            cache[i] = (head_slots, obs_slots)
        return cache[i]

    def _free_slots(self, a: Atom, bound: set) -> list[_Slot]:
        out = []
        for v in term_vars(a):
            if v in bound:
                continue
            j = next(j for j, arg in enumerate(a.args) if v in term_vars(arg))
            if a.args[j] != v:
                raise GroundingError(f"free variable {v} of {a} occurs nested inside a compound")
            pos = (a.pred, a.arity, j + 1)
            if self.alphabet.domain(self.alphabet.arg_type(a.pred, a.arity, j + 1)) is None:
                raise GroundingError(f"free variable {v} of {a} sits in argument {j + 1} "
                                     f"whose type has no finite domain")
            out.append(_Slot(v, pos, j))
        return out

    @cached_property
    def selection_positions(self) -> list[tuple]:
        """Argument positions at which the selection distribution is consulted."""
        seen: dict = {}
        for i in range(len(self.clauses)):
            head_slots, obs_slots = self.slots(i)
            for s in head_slots + obs_slots:
                seen.setdefault(s.pos, None)
        return list(seen)

    def position_type(self, pos: tuple) -> str:
        return self.alphabet.arg_type(*pos)

    def table(self, pos: tuple) -> dict:
        """Categorical distribution over the domain at ``pos`` (ordered by domain)."""
        tables = self._cache["tables"]
        if pos not in tables:
            ty = self.position_type(pos)
            dom = self.alphabet.domain(ty)
            if dom is None:
                raise GroundingError(f"argument {pos[2]} of {pos[0]}/{pos[1]} has no finite domain")
            explicit = self.selection.get(pos)
            if explicit is None or self.alphabet.is_identifier(ty):
                tables[pos] = {d: 1.0 / len(dom) for d in dom}
            else:
                tables[pos] = {d: float(explicit.get(d, 0.0)) for d in dom}
        return tables[pos]

    @property
    def end_terminated(self) -> bool:
        return self.mode == "end"

    def with_parameters(self, probs: Iterable[float] | None = None,
                        selection: Mapping | None = None) -> "Lohmm":
        """Same structure, new parameters."""
        clauses = self.clauses
        if probs is not None:
            probs = list(probs)
            if len(probs) != len(clauses):
                raise ValueError("one probability per clause expected")
            clauses = tuple(c.with_prob(float(p)) for c, p in zip(clauses, probs))
        sel = self.selection if selection is None else selection
        return Lohmm(self.alphabet, clauses, {k: dict(v) for k, v in sel.items()}, self.mode)

    # -- semantics -----------------------------------------------------------

    def applicable(self, state: Atom) -> int | None:
        """Index of the unique most specific body class matching ``state``."""
        cache = self._cache["applicable"]
        if state in cache:
            return cache[state]
        cands = [k for k in self._classes_by_sig.get(state.signature, ())
                 if match(self.body_classes[k].body, state) is not None]
        best = None
        for k in cands:
            body = self.body_classes[k].body
            if all(match(self.body_classes[j].body, body) is not None for j in cands):
                best = k
                break
        if cands and best is None:
            bodies = ", ".join(str(self.body_classes[k].body) for k in cands)
            raise ModelError(f"no unique most specific body for {state} among {bodies} "
                             f"(body set not closed under glb)")
        cache[state] = best
        return best

    def factor_prob(self, pos: tuple, value) -> float:
        return self.table(pos).get(value, 0.0)

    def weight(self, clause: int, factors: tuple) -> float:
        w = self.clauses[clause].prob
        for pos, value in factors:
            w *= self.factor_prob(pos, value)
        return w

    def _ground(self, slots, assign_from: dict):
        """Per-slot candidate values; fixed ones from ``assign_from``.  None if a
        fixed value falls outside its domain."""
        choices = []
        for s in slots:
            table = self.table(s.pos)
            if s.var in assign_from:
                val = assign_from[s.var]
                if val not in table:
                    return None
                choices.append((val,))
            else:
                choices.append(tuple(table))
        return choices

    def initial_steps(self) -> list[Step]:
        """Grounded prior clauses: the support of the initial state distribution."""
        out = []
        for i in self.priors:
            c = self.clauses[i]
            head_slots, _ = self.slots(i)
            for values in itertools.product(*self._ground(head_slots, {})):
                assign = {s.var: v for s, v in zip(head_slots, values)}
                factors = tuple((s.pos, v) for s, v in zip(head_slots, values))
                out.append(Step(i, apply_subst(c.head, assign), None, factors))
        return out

    def successors(self, state: Atom, observation: Atom | None = None,
                   target: Atom | None = None) -> list[Step]:
        """Grounded uses of the maximally specific transitions from ``state``.

        With ``observation`` given, only steps emitting it are returned (the
        observation is matched first, which binds head variables it mentions);
        otherwise every emitted ground observation is enumerated.  ``target``
        restricts the result to steps entering that ground state.
        """
        k = self.applicable(state)
        if k is None:
            return []
        out = []
        for i in self.body_classes[k].members:
            c = self.clauses[i]
            sigma = match(c.body, state)
            head_slots, obs_slots = self.slots(i)
            hb = apply_subst(c.head, sigma)
            ob = apply_subst(c.observation, sigma)
            if observation is not None:
                theta = match(ob, observation)
                if theta is None:
                    continue
                obs_choices = self._ground(obs_slots, theta)
                if obs_choices is None:
                    continue
            else:
                theta = {}
            if target is not None:
                tau = match(apply_subst(hb, theta), target)
                if tau is None:
                    continue
                theta = {**theta, **tau}
            head_choices = self._ground(head_slots, theta)
            if head_choices is None:
                continue
            for values in itertools.product(*head_choices):
                assign = {s.var: v for s, v in zip(head_slots, values)}
                nxt = apply_subst(hb, assign)
                hf = tuple((s.pos, v) for s, v in zip(head_slots, values))
                if observation is not None:
                    of = tuple((s.pos, theta[s.var]) for s in obs_slots)
                    out.append(Step(i, nxt, observation, hf + of))
                    continue
                ob2 = apply_subst(ob, assign)
                for ovals in itertools.product(*self._ground(obs_slots, {})):
                    o = apply_subst(ob2, {s.var: v for s, v in zip(obs_slots, ovals)})
                    of = tuple((s.pos, v) for s, v in zip(obs_slots, ovals))
                    out.append(Step(i, nxt, o, hf + of))
        return out

    def next_states(self, state: Atom) -> list[Step]:
        """Like :meth:`successors` but ignoring observations (head groundings only)."""
        k = self.applicable(state)
        if k is None:
            return []
        out = []
        for i in self.body_classes[k].members:
            c = self.clauses[i]
            hb = apply_subst(c.head, match(c.body, state))
            head_slots, _ = self.slots(i)
            for values in itertools.product(*self._ground(head_slots, {})):
                assign = {s.var: v for s, v in zip(head_slots, values)}
                hf = tuple((s.pos, v) for s, v in zip(head_slots, values))
                out.append(Step(i, apply_subst(hb, assign), None, hf))
        return out

    @cached_property
    def self_observed(self) -> bool:
        """True when every transition observes its own source state."""
        return all(self.clauses[i].obs is None for i in self.transitions)

    @cached_property
    def observation_signatures(self) -> list[tuple]:
        seen: dict = {}
        for i in self.transitions:
            seen.setdefault(self.clauses[i].observation.signature, None)
        return list(seen)

    def require_valid(self) -> "Lohmm":
        if "report" not in self._cache:
            self._cache["report"] = validate(self)
        report = self._cache["report"]
        if report:
            raise ModelError("invalid model:\n" + "\n".join(map(str, report)))
        return self


def _plain(sel: Mapping) -> dict:
    return {k: dict(v) for k, v in sel.items()}


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate(m: Lohmm) -> list[Issue]:
    """All violations of the model's well-formedness conditions (empty = valid).

    Zero-probability transitions are reported as warnings through logging; they
    stay in the model so that trained models keep their structure.
    """
    issues: list[Issue] = []
    alpha = m.alphabet

    for i, c in enumerate(m.clauses):
        if not 0.0 <= c.prob <= 1.0:
            issues.append(Issue("probability", f"clause {c} has probability outside [0, 1]"))
        try:
            vt = alpha.check_atom(c.head)
            alpha.check_atom(c.body, vt)
            if c.obs is not None:
                alpha.check_atom(c.obs, vt)
        except TypeCheckError as exc:
            issues.append(Issue("type", f"clause {c}: {exc}"))
            continue
        if c.is_prior and c.obs is not None:
            issues.append(Issue("prior", f"prior clause {c} must not emit"))
        try:
            m.slots(i)
        except GroundingError as exc:
            issues.append(Issue("groundability", f"clause {c}: {exc}", (c.head,)))
        if c.prob == 0.0:
            log.warning("clause %s has probability 0", c)

    if not m.transitions:
        issues.append(Issue("empty", "model has no abstract transitions"))
    priors = m.priors
    if not priors:
        issues.append(Issue("prior", "model has no prior clauses"))
    else:
        total = sum(m.clauses[i].prob for i in priors)
        if abs(total - 1.0) > TOL:
            issues.append(Issue("normalization", f"prior probabilities sum to {total!r}", (START,)))

    for cls in m.body_classes:
        total = sum(m.clauses[i].prob for i in cls.members)
        if abs(total - 1.0) > TOL:
            issues.append(Issue("normalization",
                                f"transitions from body {cls.body} sum to {total!r}", (cls.body,)))

    issues.extend(_glb_issues(m))

    for pos, table in m.selection.items():
        name = f"{pos[0]}/{pos[1]} arg {pos[2]}"
        try:
            ty = m.position_type(pos)
        except (KeyError, IndexError):
            issues.append(Issue("selection", f"selection for unknown position {name}"))
            continue
        dom = alpha.domain(ty)
        if dom is None:
            issues.append(Issue("selection", f"selection {name}: type {ty!r} has no finite domain"))
            continue
        if alpha.is_identifier(ty):
            issues.append(Issue("selection", f"selection {name}: identifier positions are uniform"))
        extra = [k for k in table if k not in dom]
        if extra:
            issues.append(Issue("selection", f"selection {name}: {extra[0]} outside the domain"))
        if any(v < 0 for v in table.values()):
            issues.append(Issue("selection", f"selection {name}: negative probability"))
        total = sum(table.values())
        if abs(total - 1.0) > TOL:
            issues.append(Issue("selection", f"selection {name} sums to {total!r}"))

    if m.end_terminated:
        for cls in m.body_classes:
            if cls.body.signature == END.signature:
                issues.append(Issue("end", "end state must be absorbing", (cls.body,)))
    return issues


def _glb_issues(m: Lohmm) -> list[Issue]:
    out = []
    counter = itertools.count(1)
    classes = m.body_classes
    for sig, ks in m._classes_by_sig.items():
        for x, k1 in enumerate(ks):
            for k2 in ks[x + 1:]:
                b1 = rename_apart(classes[k1].body, counter)
                b2 = rename_apart(classes[k2].body, counter)
                theta = mgu(b1, b2)
                if theta is None:
                    continue
                glb = apply_subst(b1, theta)
                if not any(is_variant(classes[k].body, glb) for k in ks):
                    out.append(Issue(
                        "glb", f"bodies {classes[k1].body} and {classes[k2].body} unify but their "
                               f"greatest lower bound {glb} is not a body",
                        (classes[k1].body, classes[k2].body)))
    return out


def check(m: Lohmm) -> Lohmm:
    """Return ``m`` if valid, otherwise raise :class:`ModelError` with the report."""
    return m.require_valid()


# ---------------------------------------------------------------------------
# module-level API
# ---------------------------------------------------------------------------


def selection_prob(m: Lohmm, ground: Atom, abstract: Atom) -> float:
    """mu(ground | abstract): product of the per-argument categorical probabilities
    of the values bound to the variables of ``abstract``."""
    theta = match(abstract, ground)
    if theta is None or not is_ground(ground):
        raise LohmmError(f"{ground} is not a ground instance of {abstract}")
    p = 1.0
    for s in m._free_slots(abstract, set()):
        table = m.table(s.pos)
        value = theta[s.var]
        if value not in table:
            raise LohmmError(f"{value} is outside the domain of argument {s.pos[2]} of "
                             f"{s.pos[0]}/{s.pos[1]}")
        p *= table[value]
    return p


def max_specific(m: Lohmm, state: Atom) -> list[AbstractTransition]:
    """The maximally specific transitions applying to a ground state."""
    k = m.applicable(state)
    if k is None:
        return []
    return [m.clauses[i] for i in m.body_classes[k].members]


def step_distribution(m: Lohmm, state: Atom) -> dict:
    """P(next state, observation | state) as ``{(state', obs): probability}``."""
    steps = m.successors(state)
    if not steps:
        raise DeadStateError(f"no abstract transition applies to {state}")
    out: dict = {}
    for st in steps:
        key = (st.state, st.obs)
        out[key] = out.get(key, 0.0) + m.weight(st.clause, st.factors)
    return out


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_KEYWORDS = {"domain", "predicate", "functor", "identifier", "selection"}


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _fmt_prob(p: float) -> str:
    return repr(float(p))


def parse_model(text: str) -> Lohmm:
    """Parse the model text format into an (unvalidated) model."""
    lx = Lexer(text)
    tp = TermParser(lx)
    alpha = Alphabet()
    clauses: list[AbstractTransition] = []
    selection: dict = {}

    def fail(exc, tok):
        cls = TypeCheckError if isinstance(exc, TypeCheckError) else ParseError
        return cls(str(exc), tok.line, tok.column)

    while not lx.at_end():
        tok = lx.peek()
        tp.new_scope()
        try:
            if tok.kind == "name" and tok.text in _KEYWORDS:
                lx.next()
                if tok.text == "domain":
                    ty = lx.expect_kind("name", "a type name").text
                    lx.expect("=")
                    lx.expect("{")
                    elems = [tp.term()]
                    while lx.accept(","):
                        elems.append(tp.term())
                    lx.expect("}")
                    alpha.add_domain(ty, elems)
                elif tok.text == "predicate":
                    name = lx.expect_kind("name", "a predicate name").text
                    types = []
                    if lx.accept("("):
                        types.append(lx.expect_kind("name", "a type name").text)
                        while lx.accept(","):
                            types.append(lx.expect_kind("name", "a type name").text)
                        lx.expect(")")
                    alpha.add_predicate(name, types)
                elif tok.text == "functor":
                    name = lx.expect_kind("name", "a functor name").text
                    if lx.accept("/"):
                        arity = int(lx.expect_kind("name", "an arity").text)
                        arg_types = None
                    else:
                        lx.expect("(")
                        arg_types = [lx.expect_kind("name", "a type name").text]
                        while lx.accept(","):
                            arg_types.append(lx.expect_kind("name", "a type name").text)
                        lx.expect(")")
                        arity = len(arg_types)
                    lx.expect(":")
                    result = lx.expect_kind("name", "a type name").text
                    alpha.add_functor(name, arity, result, arg_types)
                elif tok.text == "identifier":
                    alpha.add_identifier(lx.expect_kind("name", "a type name").text)
                else:
                    pred = lx.expect_kind("name", "a predicate name").text
                    lx.expect("/")
                    arity = int(lx.expect_kind("name", "an arity").text)
                    if lx.next().text != "arg":
                        raise lx.error("expected 'arg'", lx.peek(-1))
                    idx = int(lx.expect_kind("name", "an argument index").text)
                    pos = (pred, arity, idx)
                    if pos in selection:
                        raise ParseError(f"duplicate selection for {pred}/{arity} arg {idx}")
                    if (pred, arity) not in alpha.predicates or not 1 <= idx <= arity:
                        raise ParseError(f"selection for unknown position {pred}/{arity} arg {idx}")
                    dom = alpha.domain(alpha.arg_type(pred, arity, idx))
                    if dom is None:
                        raise TypeCheckError(f"argument {idx} of {pred}/{arity} has no finite domain")
                    lx.expect("{")
                    table: dict = {}
                    while True:
                        key = tp.term()
                        if key not in dom:
                            raise TypeCheckError(f"{key} is not in the domain of {pred}/{arity} arg {idx}")
                        if key in table:
                            raise ParseError(f"duplicate entry {key} in selection")
                        lx.expect(":")
                        table[key] = _prob(lx)
                        if not lx.accept(","):
                            break
                    lx.expect("}")
                    selection[pos] = table
                lx.expect(".")
            elif tok.kind in ("float", "name") and _is_number(tok.text):
                p = _prob(lx)
                lx.expect(":")
                start_tok = lx.peek()
                head = tp.atom()
                lx.expect("<-")
                body = tp.atom()
                obs = None
                if lx.peek() is not None and lx.peek().text == "emits":
                    lx.next()
                    obs = tp.atom()
                lx.expect(".")
                if body == START and obs is not None:
                    raise ParseError("prior clauses carry no observation")
                try:
                    vt = alpha.check_atom(head)
                    alpha.check_atom(body, vt)
                    if obs is not None:
                        alpha.check_atom(obs, vt)
                except TypeCheckError as exc:
                    raise fail(exc, start_tok) from None
                clauses.append(AbstractTransition(p, head, body, obs))
            else:
                raise lx.error(f"unexpected {tok.text!r} at start of statement", tok)
        except ParseError as exc:
            if exc.line is None:
                raise fail(exc, tok) from None
            raise
    mode = "end" if any(c.head == END for c in clauses) else "fixed"
    return Lohmm(alpha, tuple(clauses), selection, mode)


def _prob(lx: Lexer) -> float:
    tok = lx.next()
    if tok.kind not in ("float", "name") or not _is_number(tok.text):
        raise lx.error(f"expected a probability, found {tok.text!r}", tok)
    p = float(tok.text)
    if not 0.0 <= p <= 1.0:
        raise lx.error(f"probability {tok.text} outside [0, 1]", tok)
    return p


def format_model(m: Lohmm) -> str:
    """Render ``m`` in the model text format; ``parse_model`` inverts it exactly."""
    a = m.alphabet
    lines = []
    for kind, key in a.decl_order:
        if kind == "domain":
            lines.append(f"domain {key} = {{{', '.join(map(str, a.domains[key]))}}}.")
        elif kind == "functor":
            f = a.functors[key]
            if f.arg_types is None or f.arity == 0:
                lines.append(f"functor {f.name}/{f.arity} : {f.result}.")
            else:
                lines.append(f"functor {f.name}({', '.join(f.arg_types)}) : {f.result}.")
        elif kind == "predicate":
            types = a.predicates[key]
            lines.append(f"predicate {key[0]}({', '.join(types)})." if types else f"predicate {key[0]}.")
        elif kind == "identifier":
            lines.append(f"identifier {key}.")
    if m.selection:
        lines.append("")
    for pos, table in m.selection.items():
        entries = ", ".join(f"{k}: {_fmt_prob(v)}" for k, v in table.items())
        lines.append(f"selection {pos[0]}/{pos[1]} arg {pos[2]} {{{entries}}}.")
    lines.append("")
    lines.extend(str(c) for c in m.clauses)
    return "\n".join(lines) + "\n"
