"""Reference implementations used only by the tests.

Everything here is written from the model semantics directly (ground
instances, one-way matching, explicit path enumeration, dense matrices) and
shares no code path with the trellis or the slot machinery of the package.
"""

from __future__ import annotations

import functools
import itertools
import math
from collections import defaultdict

import numpy as np

from lohmm.terms import END, Atom, Var, apply_subst, match


# -- naive semantics -----------------------------------------------------------


def table(m, pred, arity, i):
    """Categorical over the domain of argument ``i`` of ``pred/arity``."""
    ty = m.alphabet.arg_type(pred, arity, i)
    dom = m.alphabet.domain(ty)
    explicit = m.selection.get((pred, arity, i))
    if explicit is None or m.alphabet.is_identifier(ty):
        return {d: 1.0 / len(dom) for d in dom}
    return {d: float(explicit.get(d, 0.0)) for d in dom}


def mu(m, ground: Atom, abstract: Atom) -> float:
    theta = match(abstract, ground)
    assert theta is not None
    p = 1.0
    seen = set()
    for j, arg in enumerate(abstract.args):
        if isinstance(arg, Var) and arg not in seen:
            seen.add(arg)
            p *= table(m, abstract.pred, len(abstract.args), j + 1).get(theta[arg], 0.0)
    return p


def most_specific_clauses(m, state: Atom) -> list[int]:
    trans = [i for i, c in enumerate(m.clauses) if not c.is_prior]
    hits = [i for i in trans if match(m.clauses[i].body, state) is not None]
    bodies = [m.clauses[i].body for i in hits]
    best = [i for i in hits if all(match(b, m.clauses[i].body) is not None for b in bodies)]
    return best


def prior_by_clause(m) -> dict:
    out = defaultdict(float)
    for i, c in enumerate(m.clauses):
        if c.is_prior:
            for g in m.alphabet.ground_instances(c.head):
                out[(i, g)] += c.prob * mu(m, g, c.head)
    return dict(out)


def step_by_clause(m, state: Atom) -> dict:
    """``{(clause, next state, observation): probability}`` from a ground state."""
    out = defaultdict(float)
    for i in most_specific_clauses(m, state):
        c = m.clauses[i]
        theta = match(c.body, state)
        head = apply_subst(c.head, theta)
        for g in m.alphabet.ground_instances(head):
            sigma = match(head, g)
            o_abs = apply_subst(apply_subst(c.observation, theta), sigma)
            for o in m.alphabet.ground_instances(o_abs):
                out[(i, g, o)] += c.prob * mu(m, g, head) * mu(m, o, o_abs)
    return dict(out)


def step(m, state: Atom) -> dict:
    out = defaultdict(float)
    for (_, g, o), p in step_by_clause(m, state).items():
        out[(g, o)] += p
    return dict(out)


# -- path enumeration ----------------------------------------------------------


def clause_paths(m, obs):
    """Every (state path, clause path, probability) explaining ``obs``."""
    obs = list(obs)
    end_mode = any(c.head == END for c in m.clauses)
    out = []

    def walk(t, states, clauses, p):
        if t == len(obs):
            if not end_mode or states[-1] == END:
                out.append((tuple(states), tuple(clauses), p))
            return
        if states[-1] == END:
            return
        for (i, g, o), q in step_by_clause(m, states[-1]).items():
            if o == obs[t] and q > 0:
                walk(t + 1, states + [g], clauses + [i], p * q)

    for (i, g), q in prior_by_clause(m).items():
        if q > 0:
            walk(0, [g], [i], q)
    return out


def brute_force(m, obs) -> dict:
    paths = clause_paths(m, obs)
    total = math.fsum(p for _, _, p in paths)
    ground = defaultdict(float)
    for s, _, p in paths:
        ground[s] += p
    best_ground = max(ground.values(), default=0.0)
    best_abstract = max((p for _, _, p in paths), default=0.0)
    return {
        "likelihood": total,
        "viterbi": best_ground,
        "viterbi_paths": [s for s, p in ground.items() if p == best_ground],
        "abstract": best_abstract,
        "abstract_paths": [(s, c) for s, c, p in paths if p == best_abstract],
        "ground": dict(ground),
        "paths": paths,
    }


def alpha_beta(m, obs):
    """Exact alpha_t/beta_t marginals by enumeration (layer t = after t observations)."""
    paths = clause_paths(m, obs)
    T = len(obs)
    joint = [defaultdict(float) for _ in range(T + 1)]
    for s, _, p in paths:
        for t in range(T + 1):
            joint[t][s[t]] += p
    # alpha also counts prefixes that die later, so enumerate them separately
    alpha = []
    for t in range(T + 1):
        a = defaultdict(float)
        for s, _, p in clause_paths_prefix(m, obs[:t]):
            a[s[-1]] += p
        alpha.append(dict(a))
    beta = [{s: joint[t].get(s, 0.0) / a for s, a in alpha[t].items()} for t in range(T + 1)]
    return alpha, beta


def clause_paths_prefix(m, obs):
    """Like :func:`clause_paths` but without the acceptance condition."""
    obs = list(obs)
    out = []

    def walk(t, states, p):
        if t == len(obs):
            out.append((tuple(states), None, p))
            return
        if states[-1] == END:
            return
        for (i, g, o), q in step_by_clause(m, states[-1]).items():
            if o == obs[t] and q > 0:
                walk(t + 1, states + [g], p * q)

    for (i, g), q in prior_by_clause(m).items():
        if q > 0:
            walk(0, [g], q)
    return out


def observation_alphabet(m) -> list[Atom]:
    seen = {}
    for c in m.clauses:
        if not c.is_prior:
            for g in m.alphabet.ground_instances(c.observation):
                seen.setdefault(g, None)
    return list(seen)


def path_posterior_counts(m, obs) -> dict:
    """Expected clause usage: sum over clause paths of posterior x occurrences."""
    paths = clause_paths(m, obs)
    z = math.fsum(p for _, _, p in paths)
    out = defaultdict(float)
    for _, cl, p in paths:
        for i in cl:
            out[i] += p / z
    return dict(out)


# -- classical HMM -------------------------------------------------------------


class DenseHmm:
    """Mealy HMM: ``J[i, j, o] = P(next j, emit o | i)``, prior ``pi``."""

    def __init__(self, pi, J):
        self.pi = np.asarray(pi, dtype=float)
        self.J = np.asarray(J, dtype=float)

    def forward(self, obs):
        a = self.pi.copy()
        alphas = [a]
        for o in obs:
            a = a @ self.J[:, :, o]
            alphas.append(a)
        return alphas

    def backward(self, obs):
        b = np.ones_like(self.pi)
        betas = [b]
        for o in reversed(obs):
            b = self.J[:, :, o] @ b
            betas.append(b)
        return betas[::-1]

    def likelihood(self, obs):
        return float(self.forward(obs)[-1].sum())

    def viterbi(self, obs):
        d = self.pi.copy()
        back = []
        for o in obs:
            cand = d[:, None] * self.J[:, :, o]
            back.append(cand.argmax(axis=0))
            d = cand.max(axis=0)
        path = [int(d.argmax())]
        for bp in reversed(back):
            path.append(int(bp[path[-1]]))
        return path[::-1], float(d.max())

    def baum_welch_step(self, corpus):
        """One unsmoothed re-estimation of ``pi`` and ``J`` over a corpus."""
        pi_num = np.zeros_like(self.pi)
        J_num = np.zeros_like(self.J)
        for obs in corpus:
            al, be = self.forward(obs), self.backward(obs)
            z = al[-1].sum()
            pi_num += al[0] * be[0] / z
            for t, o in enumerate(obs):
                J_num[:, :, o] += al[t][:, None] * self.J[:, :, o] * be[t + 1][None, :] / z
        pi = pi_num / pi_num.sum()
        J = J_num / J_num.sum(axis=(1, 2), keepdims=True)
        return DenseHmm(pi, J)


def all_sequences(symbols, T):
    return [list(s) for s in itertools.product(symbols, repeat=T)]


def _choices(m, abstract: Atom, ground: Atom, bound: set) -> tuple:
    """(position, value) pairs picked for the unbound variables of ``abstract``."""
    theta = match(abstract, ground)
    out, seen = [], set(bound)
    for j, arg in enumerate(abstract.args):
        if isinstance(arg, Var) and arg not in seen:
            seen.add(arg)
            out.append(((abstract.pred, len(abstract.args), j + 1), theta[arg]))
    return tuple(out)


def selection_posterior(m, obs) -> dict:
    """Expected selection choices ``{(position, value): count}`` by path enumeration."""
    obs = list(obs)
    end_mode = any(c.head == END for c in m.clauses)
    paths = []

    def walk(t, state, picks, p):
        if t == len(obs):
            if not end_mode or state == END:
                paths.append((picks, p))
            return
        if state == END:
            return
        for i in most_specific_clauses(m, state):
            c = m.clauses[i]
            theta = match(c.body, state)
            head = apply_subst(c.head, theta)
            for g in m.alphabet.ground_instances(head):
                sigma = match(head, g)
                o_abs = apply_subst(apply_subst(c.observation, theta), sigma)
                if match(o_abs, obs[t]) is None:
                    continue
                q = c.prob * mu(m, g, head) * mu(m, obs[t], o_abs)
                if q > 0:
                    walk(t + 1, g, picks + _choices(m, head, g, set())
                         + _choices(m, o_abs, obs[t], set()), p * q)

    for c in m.clauses:
        if c.is_prior:
            for g in m.alphabet.ground_instances(c.head):
                q = c.prob * mu(m, g, c.head)
                if q > 0:
                    walk(0, g, _choices(m, c.head, g, set()), q)
    z = math.fsum(p for _, p in paths)
    out = defaultdict(float)
    for picks, p in paths:
        for k in picks:
            out[k] += p / z
    return dict(out)


# -- grammars ------------------------------------------------------------------


def derivation_prob(g, w) -> float:
    """Sum over explicitly enumerated leftmost derivations of ``w``.

    In Greibach normal form every step emits exactly one terminal, so each
    derivation of ``w`` has ``len(w)`` steps and the enumeration is finite.
    """
    w = tuple(w)
    found = []

    def expand(i, form, p):
        if i == len(w):
            if not form:
                found.append(p)
            return
        if not form or len(form) > len(w) - i:
            return
        for r in g.rules(form[0]):
            if r.rhs[0] == w[i] and r.prob > 0:
                expand(i + 1, r.rhs[1:] + form[1:], p * r.prob)

    expand(0, (g.start,), 1.0)
    return math.fsum(found)


def inside(g, w) -> float:
    """P(start =>* w) by the inside recursion over GNF productions."""
    w = tuple(w)
    rules = {x: g.rules(x) for x in g.nonterminals}

    @functools.lru_cache(maxsize=None)
    def nt(x, i, j):
        if i >= j:
            return 0.0
        return math.fsum(r.prob * seq(r.rhs[1:], i + 1, j)
                         for r in rules[x] if w[i] == r.rhs[0])

    @functools.lru_cache(maxsize=None)
    def seq(xs, i, j):
        if not xs:
            return 1.0 if i == j else 0.0
        return math.fsum(nt(xs[0], i, k) * seq(xs[1:], k, j) for k in range(i + 1, j + 1))

    return nt(g.start, 0, len(w))
