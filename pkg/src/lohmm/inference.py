"""Dynamic programs over the grounded trellis: forward, backward, ground-level
Viterbi and Viterbi over abstract transitions.

Indexing: layer 0 holds the ground states drawn from the prior (no observation
consumed); step ``t = 1..T`` consumes ``obs[t-1]`` on the edge from layer
``t-1`` to layer ``t``.  In end-terminated models only the ``end`` state of the
last layer counts as accepting.

The trellis *graph* depends only on the model structure and the sequence, so
it is built once and re-weighted for every parameterization (EM iterations,
cross-validation folds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import LohmmError, ZeroLikelihoodError
from .model import Lohmm
from .terms import END, Atom, is_ground

__all__ = [
    "TrellisGraph", "Trellis", "ViterbiPath", "AbstractPath", "build_graph",
    "forward", "backward", "viterbi", "viterbi_abstract", "loglikelihood",
    "likelihood",
]


@dataclass
class TrellisGraph:
    """Reachable ground states per layer and the weighted-edge skeleton.

    ``keys`` interns every distinct ``(clause, factors)`` pair; an edge refers
    to its key by index so one weight vector serves the whole graph.
    """

    observations: tuple
    layers: list                 # layers[t]: list of ground states
    prior_edges: list            # (dst, key)
    edges: list                  # edges[t-1]: list of (src, dst, key) for step t
    keys: list                   # (clause, factors)
    accepting: list              # indices into the last layer
    dead: list = field(default_factory=list)  # (t, state) with no applicable transition

    @property
    def length(self) -> int:
        return len(self.observations)

    def weights(self, m: Lohmm) -> list[float]:
        return [m.weight(c, f) for c, f in self.keys]


def _check_observations(m: Lohmm, obs: Sequence[Atom]) -> tuple:
    obs = tuple(obs)
    for o in obs:
        if not isinstance(o, Atom) or not is_ground(o):
            raise LohmmError(f"observation {o} is not a ground atom")
        m.alphabet.check_atom(o)
    return obs


def build_graph(m: Lohmm, obs: Sequence[Atom]) -> TrellisGraph:
    """Ground the model against ``obs`` (structure only, no numbers).

    States that cannot continue are kept in their layer (and listed in
    ``dead``) but have no outgoing edges.
    """
    m.require_valid()
    obs = _check_observations(m, obs)
    keys: dict = {}

    def key(clause, factors):
        k = (clause, factors)
        if k not in keys:
            keys[k] = len(keys)
        return keys[k]

    layer: dict = {}
    prior_edges = []
    for st in m.initial_steps():
        idx = layer.setdefault(st.state, len(layer))
        prior_edges.append((idx, key(st.clause, st.factors)))
    layers = [list(layer)]
    edges = []
    dead = []
    succ_cache = m._cache.setdefault("succ", {})
    for t, o in enumerate(obs, 1):
        # Lookahead prunes states that cannot be accepted or cannot emit the
        # next symbol; it never changes any probability.
        target = None
        if t == len(obs) and m.end_terminated:
            target = END
        elif t < len(obs) and m.self_observed:
            target = obs[t]
        nxt: dict = {}
        step = []
        for si, s in enumerate(layers[-1]):
            ck = (s, o, target)
            steps = succ_cache.get(ck)
            if steps is None:
                steps = succ_cache[ck] = m.successors(s, o, target)
            if not steps and m.applicable(s) is None:
                dead.append((t - 1, s))
            for st in steps:
                di = nxt.setdefault(st.state, len(nxt))
                step.append((si, di, key(st.clause, st.factors)))
        layers.append(list(nxt))
        edges.append(step)
    last = layers[-1]
    if m.end_terminated:
        accepting = [i for i, s in enumerate(last) if s == END]
    else:
        accepting = list(range(len(last)))
    return TrellisGraph(obs, layers, prior_edges, edges, list(keys), accepting, dead)


@dataclass
class Trellis:
    """Forward (and optionally backward) values over a :class:`TrellisGraph`.

    In scaled mode ``alpha[t]`` and ``beta[t]`` hold the rescaled tables and
    ``scale[t]`` the per-layer normalizers; true values are recovered by
    :meth:`alpha_at` / :meth:`beta_at`.
    """

    graph: TrellisGraph
    weights: list
    mode: str
    alpha: list
    scale: list
    loglik: float
    beta: list | None = None

    @property
    def likelihood(self) -> float:
        if self.mode == "exact":
            return sum(self.alpha[-1][i] for i in self.graph.accepting) if self.loglik != -math.inf else 0.0
        return math.exp(self.loglik) if self.loglik != -math.inf else 0.0

    def states(self, t: int) -> list[Atom]:
        return self.graph.layers[t]

    def _log_prefix(self, t: int) -> float:
        return sum(math.log(c) for c in self.scale[: t + 1])

    def alpha_at(self, t: int) -> dict:
        """P(O_1..O_t, state at layer t) for every state of layer t."""
        if self.mode == "exact":
            return dict(zip(self.graph.layers[t], self.alpha[t]))
        if any(c == 0.0 for c in self.scale[: t + 1]):
            return {s: 0.0 for s in self.graph.layers[t]}
        f = math.exp(self._log_prefix(t))
        return {s: a * f for s, a in zip(self.graph.layers[t], self.alpha[t])}

    def beta_at(self, t: int) -> dict:
        """P(O_{t+1}..O_T accepted | state at layer t)."""
        if self.beta is None:
            raise LohmmError("backward values not computed")
        if self.mode == "exact":
            return dict(zip(self.graph.layers[t], self.beta[t]))
        if self.loglik == -math.inf:
            return {s: 0.0 for s in self.graph.layers[t]}
        f = math.exp(self.loglik - self._log_prefix(t))
        return {s: b * f for s, b in zip(self.graph.layers[t], self.beta[t])}


def forward(m: Lohmm, obs: Sequence[Atom], mode: str = "scaled",
            graph: TrellisGraph | None = None) -> tuple[float, Trellis]:
    """Likelihood P(obs | m) and the forward trellis."""
    if mode not in ("scaled", "exact"):
        raise ValueError(f"unknown numeric mode {mode!r}")
    if graph is None:
        graph = build_graph(m, obs)
    elif tuple(obs) != graph.observations:
        raise LohmmError("trellis was built for a different observation sequence")
    w = graph.weights(m)
    scaled = mode == "scaled"

    a0 = [0.0] * len(graph.layers[0])
    for d, k in graph.prior_edges:
        a0[d] += w[k]
    T = graph.length
    if T == 0 and m.end_terminated:
        a0 = [a0[i] if i in graph.accepting else 0.0 for i in range(len(a0))]
    alpha, scale = [], []
    loglik = 0.0

    def push(a):
        nonlocal loglik
        if scaled:
            c = sum(a)
            scale.append(c)
            if c > 0.0:
                loglik += math.log(c)
                a = [x / c for x in a]
            else:
                loglik = -math.inf
        alpha.append(a)

    push(a0)
    for t in range(1, T + 1):
        prev = alpha[-1]
        a = [0.0] * len(graph.layers[t])
        for s, d, k in graph.edges[t - 1]:
            ps = prev[s]
            if ps:
                a[d] += ps * w[k]
        if t == T and m.end_terminated:
            acc = set(graph.accepting)
            a = [x if i in acc else 0.0 for i, x in enumerate(a)]
        push(a)
    if not scaled:
        total = sum(alpha[-1][i] for i in graph.accepting)
        loglik = math.log(total) if total > 0.0 else -math.inf
    tr = Trellis(graph, w, mode, alpha, scale, loglik)
    return tr.likelihood, tr


def likelihood(m: Lohmm, obs: Sequence[Atom], mode: str = "scaled") -> float:
    return forward(m, obs, mode)[0]


def loglikelihood(m: Lohmm, obs: Sequence[Atom], graph: TrellisGraph | None = None) -> float:
    """log P(obs | m); ``-inf`` when the sequence is impossible."""
    return forward(m, obs, "scaled", graph)[1].loglik


def backward(m: Lohmm, obs: Sequence[Atom], trellis: Trellis) -> list:
    """Fill ``trellis.beta`` and return it.

    The last layer is 1 on accepting states (every state in fixed-length mode,
    only ``end`` in end-terminated mode) and 0 elsewhere.  In scaled mode the
    tables share the forward normalizers, so ``sum(alpha[t] * beta[t]) == 1``.
    """
    g = trellis.graph
    if tuple(obs) != g.observations:
        raise LohmmError("trellis was built for a different observation sequence")
    w = trellis.weights
    T = g.length
    scaled = trellis.mode == "scaled"
    bT = [0.0] * len(g.layers[T])
    for i in g.accepting:
        bT[i] = 1.0
    if scaled and trellis.loglik == -math.inf:
        trellis.beta = [[0.0] * len(layer) for layer in g.layers]
        return trellis.beta
    beta = [None] * (T + 1)
    beta[T] = bT
    for t in range(T, 0, -1):
        nxt = beta[t]
        b = [0.0] * len(g.layers[t - 1])
        for s, d, k in g.edges[t - 1]:
            nd = nxt[d]
            if nd:
                b[s] += w[k] * nd
        if scaled:
            c = trellis.scale[t]
            b = [x / c for x in b]
        beta[t - 1] = b
    trellis.beta = beta
    return beta


# ---------------------------------------------------------------------------
# Viterbi
# ---------------------------------------------------------------------------


class ViterbiPath(NamedTuple):
    states: list
    probability: float
    log_probability: float


class AbstractPath(NamedTuple):
    states: list          # ground states, layers 0..T
    transitions: list     # clause indices: the prior clause, then one per step
    probability: float
    log_probability: float

    def alternating(self, m: Lohmm) -> list:
        """``[start, c_0, S_0, c_1, S_1, ...]`` with clauses as objects."""
        out: list = [Atom("start")]
        for c, s in zip(self.transitions, self.states):
            out.extend([m.clauses[c], s])
        return out


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def _argmax(cands, key):
    """Highest score; among exact ties the canonically smallest ``key``."""
    best = None
    for score, tie, payload in cands:
        if best is None or score > best[0] or (score == best[0] and key(tie) < key(best[1])):
            best = (score, tie, payload)
    return best


def _run_viterbi(m: Lohmm, obs, graph, abstract: bool):
    if graph is None:
        graph = build_graph(m, obs)
    w = graph.weights(m)
    tkey = m.alphabet.term_key
    layers = graph.layers

    def combine(pairs):
        """Edge scores keyed by (src, dst[, clause]): parallel edges summed."""
        acc: dict = {}
        for ident, k in pairs:
            acc[ident] = acc.get(ident, 0.0) + w[k]
        return acc

    # layer 0
    delta = [-math.inf] * len(layers[0])
    psi0 = [None] * len(layers[0])
    if abstract:
        for (d, c), v in combine(((d, graph.keys[k][0]), k) for d, k in graph.prior_edges).items():
            lv = _log(v)
            if lv > delta[d] or (lv == delta[d] and psi0[d] is not None and c < psi0[d]):
                delta[d], psi0[d] = lv, c
    else:
        for (d,), v in combine(((d,), k) for d, k in graph.prior_edges).items():
            delta[d] = _log(v)
    deltas, psis = [delta], [psi0]
    for t in range(1, graph.length + 1):
        if abstract:
            scored = combine(((s, d, graph.keys[k][0]), k) for s, d, k in graph.edges[t - 1])
        else:
            scored = combine(((s, d), k) for s, d, k in graph.edges[t - 1])
        cands: dict = {}
        prev = deltas[-1]
        for ident, v in scored.items():
            s, d = ident[0], ident[1]
            sc = prev[s] + _log(v)
            if sc == -math.inf:
                continue
            clause = ident[2] if abstract else None
            cands.setdefault(d, []).append((sc, (layers[t - 1][s], clause if clause is not None else -1),
                                            (s, clause)))
        delta = [-math.inf] * len(layers[t])
        psi = [None] * len(layers[t])
        for d, cs in cands.items():
            best = _argmax(cs, lambda tie: (tkey(tie[0]), tie[1]))
            delta[d], psi[d] = best[0], best[2]
        deltas.append(delta)
        psis.append(psi)
    final = [(deltas[-1][i], layers[-1][i], i) for i in graph.accepting if deltas[-1][i] > -math.inf]
    if not final:
        raise ZeroLikelihoodError("observation sequence has probability 0 under the model")
    best = _argmax(final, tkey)
    logp, i = best[0], best[2]
    states, clauses = [], []
    for t in range(graph.length, -1, -1):
        states.append(layers[t][i])
        if t == 0:
            clauses.append(psis[0][i])
        else:
            s, c = psis[t][i]
            clauses.append(c)
            i = s
    states.reverse()
    clauses.reverse()
    return states, clauses, logp


def viterbi(m: Lohmm, obs: Sequence[Atom], graph: TrellisGraph | None = None) -> ViterbiPath:
    """Most probable ground state path; parallel abstract transitions between
    the same pair of ground states are summed into one ground edge."""
    states, _, logp = _run_viterbi(m, obs, graph, abstract=False)
    return ViterbiPath(states, math.exp(logp), logp)


def viterbi_abstract(m: Lohmm, obs: Sequence[Atom], graph: TrellisGraph | None = None) -> AbstractPath:
    """Most probable sequence of ground states *and* the abstract transitions
    used between them; every step commits to a single clause."""
    states, clauses, logp = _run_viterbi(m, obs, graph, abstract=True)
    return AbstractPath(states, clauses, math.exp(logp), logp)
