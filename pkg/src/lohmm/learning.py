"""Baum-Welch training: expected counts, smoothed re-estimation and the EM loop."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ZeroLikelihoodError
from .inference import TrellisGraph, backward, build_graph, forward
from .model import Lohmm

log = logging.getLogger(__name__)

__all__ = ["ExpectedCounts", "TrainConfig", "TrainResult", "expected_counts",
           "corpus_counts", "reestimate", "train", "randomize"]


@dataclass
class ExpectedCounts:
    """Posterior expected usage of clauses and selection choices.

    ``transitions[i]`` is the expected number of times clause ``i`` fired;
    ``selection[(pos, value)]`` the expected number of times the selection
    distribution picked ``value`` at argument position ``pos``.
    """

    transitions: dict = field(default_factory=dict)
    selection: dict = field(default_factory=dict)
    logliks: list = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return math.fsum(self.logliks)

    def add(self, other: "ExpectedCounts") -> None:
        for k, v in other.transitions.items():
            self.transitions[k] = self.transitions.get(k, 0.0) + v
        for k, v in other.selection.items():
            self.selection[k] = self.selection.get(k, 0.0) + v
        self.logliks.extend(other.logliks)

    def merge(self, other: "ExpectedCounts") -> "ExpectedCounts":
        out = ExpectedCounts(dict(self.transitions), dict(self.selection), list(self.logliks))
        out.add(other)
        return out


def _accumulate(counts: ExpectedCounts, key, xi: float) -> None:
    clause, factors = key
    counts.transitions[clause] = counts.transitions.get(clause, 0.0) + xi
    for f in factors:
        counts.selection[f] = counts.selection.get(f, 0.0) + xi


def expected_counts(m: Lohmm, obs: Sequence, graph: TrellisGraph | None = None,
                    mode: str = "scaled") -> ExpectedCounts:
    """E-step for one sequence.

    Raises :class:`ZeroLikelihoodError` when ``obs`` is impossible under ``m``.
    """
    _, tr = forward(m, obs, mode, graph)
    if tr.loglik == -math.inf:
        raise ZeroLikelihoodError("observation sequence has probability 0 under the model")
    beta = backward(m, tr.graph.observations, tr)
    g, w, alpha = tr.graph, tr.weights, tr.alpha
    keys = g.keys
    out = ExpectedCounts(logliks=[tr.loglik])
    # per-key sums first, so the reduction order is fixed by the trellis
    per_key = [0.0] * len(keys)
    if mode == "scaled":
        c0 = tr.scale[0]
        for d, k in g.prior_edges:
            per_key[k] += w[k] * beta[0][d] / c0
        for t in range(1, g.length + 1):
            a, b, c = alpha[t - 1], beta[t], tr.scale[t]
            for s, d, k in g.edges[t - 1]:
                if a[s] and b[d]:
                    per_key[k] += a[s] * w[k] * b[d] / c
    else:
        total = tr.likelihood
        for d, k in g.prior_edges:
            per_key[k] += w[k] * beta[0][d] / total
        for t in range(1, g.length + 1):
            a, b = alpha[t - 1], beta[t]
            for s, d, k in g.edges[t - 1]:
                if a[s] and b[d]:
                    per_key[k] += a[s] * w[k] * b[d] / total
    for k, xi in enumerate(per_key):
        if xi:
            _accumulate(out, keys[k], xi)
    return out


def corpus_counts(m: Lohmm, corpus: Sequence, graphs: Sequence | None = None,
                  mode: str = "scaled", skip_zero: bool = True) -> tuple[ExpectedCounts, list]:
    """Summed E-step over a corpus; returns the counts and indices of skipped sequences."""
    total = ExpectedCounts()
    skipped = []
    for i, obs in enumerate(corpus):
        g = graphs[i] if graphs is not None else None
        try:
            total.add(expected_counts(m, obs, g, mode))
        except ZeroLikelihoodError:
            if not skip_zero:
                raise ZeroLikelihoodError(f"sequence {i} has probability 0 under the model") from None
            skipped.append(i)
    return total, skipped


def reestimate(counts: ExpectedCounts, m: Lohmm, pseudocount: float = 1.0) -> Lohmm:
    """M-step: ``p = (m0 + xi(c)) / sum over the same body of (m0 + xi(c'))``.

    The prior clauses form one group.  Selection tables are re-estimated the
    same way per argument position; identifier positions stay uniform.  A
    group whose denominator is zero keeps its old parameters.
    """
    if pseudocount < 0:
        raise ValueError("pseudocount must be non-negative")
    probs = [c.prob for c in m.clauses]
    groups = [m.priors] + [cls.members for cls in m.body_classes]
    for members in groups:
        raw = [pseudocount + counts.transitions.get(i, 0.0) for i in members]
        z = math.fsum(raw)
        if z <= 0.0:
            log.warning("no expected usage for transitions from %s; keeping parameters",
                        m.clauses[members[0]].body)
            continue
        for i, r in zip(members, raw):
            probs[i] = r / z
    selection = {}
    for pos in m.selection_positions:
        ty = m.position_type(pos)
        if m.alphabet.is_identifier(ty):
            continue
        old = m.table(pos)
        raw = {v: pseudocount + counts.selection.get((pos, v), 0.0) for v in old}
        z = math.fsum(raw.values())
        if z <= 0.0:
            log.warning("no expected selections at %s/%s arg %s; keeping parameters", *pos)
            selection[pos] = dict(old)
        else:
            selection[pos] = {v: r / z for v, r in raw.items()}
    for pos, table in m.selection.items():
        selection.setdefault(pos, dict(table))
    return m.with_parameters(probs, selection)


@dataclass
class TrainConfig:
    pseudocount: float = 1.0
    tolerance: float = 0.1
    max_iterations: int = 200
    seed: int = 0
    mode: str = "scaled"
    skip_zero: bool = True


@dataclass
class TrainResult:
    model: Lohmm
    trace: list
    skipped: list
    converged: bool

    def __iter__(self):
        yield self.model
        yield self.trace


def train(m: Lohmm, corpus: Sequence, config: TrainConfig | None = None,
          graphs: Sequence | None = None) -> TrainResult:
    """EM until the total log-likelihood improves by less than ``tolerance``.

    ``trace[k]`` is the corpus log-likelihood of the k-th parameter set; the
    returned model is the last one evaluated (or the last re-estimate when
    ``max_iterations`` is exhausted).
    """
    config = config or TrainConfig()
    corpus = [tuple(o) for o in corpus]
    if not corpus:
        raise ValueError("empty training corpus")
    m.require_valid()
    if graphs is None:
        graphs = [build_graph(m, o) for o in corpus]
    trace: list = []
    skipped: list = []
    current = m
    prev = None
    for _ in range(config.max_iterations):
        counts, skipped = corpus_counts(current, corpus, graphs, config.mode, config.skip_zero)
        if len(skipped) == len(corpus):
            raise ZeroLikelihoodError("every training sequence has probability 0 under the model")
        if skipped:
            log.warning("skipped %d zero-likelihood sequence(s): %s", len(skipped), skipped[:10])
        L = counts.loglik
        trace.append(L)
        if prev is not None and L - prev < config.tolerance:
            return TrainResult(current, trace, skipped, True)
        prev = L
        current = reestimate(counts, current, config.pseudocount)
    return TrainResult(current, trace, skipped, False)


def randomize(m: Lohmm, seed: int = 0, spread: float = 0.5) -> Lohmm:
    """Same structure with parameters jittered multiplicatively and renormalized;
    useful as a perturbed starting point for EM."""
    rng = random.Random(seed)
    probs = [c.prob for c in m.clauses]
    for members in [m.priors] + [cls.members for cls in m.body_classes]:
        raw = [max(probs[i], 1e-3) * (1.0 + spread * (2.0 * rng.random() - 1.0)) for i in members]
        z = sum(raw)
        for i, r in zip(members, raw):
            probs[i] = r / z
    selection = {}
    for pos in m.selection_positions:
        if m.alphabet.is_identifier(m.position_type(pos)):
            continue
        raw = {v: max(p, 1e-3) * (1.0 + spread * (2.0 * rng.random() - 1.0))
               for v, p in m.table(pos).items()}
        z = sum(raw.values())
        selection[pos] = {v: r / z for v, r in raw.items()}
    return m.with_parameters(probs, selection)
