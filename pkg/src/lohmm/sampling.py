"""Generative semantics: sampling sequences and iterating the reachability operators.

Randomness comes only from the ``random.Random`` instance (Mersenne Twister)
passed in or seeded here, so a seed fully determines the output.
"""

from __future__ import annotations

import bisect
import itertools
import random
from typing import NamedTuple

from .errors import DeadStateError, LohmmError
from .model import Lohmm
from .terms import END, START, apply_subst, match

__all__ = ["sample_sequence", "sample_corpus", "reachable_sets", "Reachable", "DEFAULT_CAP"]

DEFAULT_CAP = 10_000


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def _draw(rng: random.Random, items: list, weights: list):
    cum = list(itertools.accumulate(weights))
    total = cum[-1]
    if total <= 0.0:
        raise LohmmError("cannot sample from an all-zero distribution")
    return items[min(bisect.bisect_right(cum, rng.random() * total), len(items) - 1)]


def _select(m: Lohmm, rng, slots, bound: dict) -> dict:
    out = dict(bound)
    for s in slots:
        if s.var in out:
            continue
        table = m.table(s.pos)
        out[s.var] = _draw(rng, list(table), list(table.values()))
    return out


def sample_sequence(m: Lohmm, seed=0, length: int | None = None,
                    cap: int = DEFAULT_CAP) -> tuple[list, list]:
    """Walk the model once: returns ``(states, observations)``.

    With ``length`` the walk makes exactly that many emitting steps (states
    ``S_0..S_length``).  Without it the walk runs until the ``end`` state,
    raising :class:`LohmmError` after ``cap`` steps.  ``seed`` may also be a
    ``random.Random`` instance, which is then advanced in place.
    """
    m.require_valid()
    rng = _rng(seed)
    if length is None and not m.end_terminated:
        raise LohmmError("model has no end state; give a fixed length")
    prior = m.priors
    i = _draw(rng, prior, [m.clauses[j].prob for j in prior])
    head_slots, _ = m.slots(i)
    state = apply_subst(m.clauses[i].head, _select(m, rng, head_slots, {}))
    states, observations = [state], []
    limit = length if length is not None else cap
    while len(observations) < limit:
        if length is None and state == END:
            return states, observations
        k = m.applicable(state)
        if k is None:
            err = DeadStateError(f"no abstract transition applies to {state} "
                                 f"after {len(observations)} step(s)")
            err.states, err.observations = states, observations
            raise err
        members = m.body_classes[k].members
        c = _draw(rng, members, [m.clauses[j].prob for j in members])
        clause = m.clauses[c]
        head_slots, obs_slots = m.slots(c)
        sigma = _select(m, rng, head_slots, match(clause.body, state))
        state = apply_subst(clause.head, sigma)
        sigma = _select(m, rng, obs_slots, sigma)
        observations.append(apply_subst(clause.observation, sigma))
        states.append(state)
    if length is None and state != END:
        raise LohmmError(f"no end state within {cap} steps")
    return states, observations


def sample_corpus(m: Lohmm, n: int, seed=0, length: int | None = None,
                  cap: int = DEFAULT_CAP) -> list[list]:
    """``n`` observation sequences from one seeded stream."""
    rng = _rng(seed)
    return [sample_sequence(m, rng, length, cap)[1] for _ in range(n)]


class Reachable(NamedTuple):
    states: frozenset
    observations: frozenset


def reachable_sets(m: Lohmm, horizon: int, cap: int = 100_000) -> list[Reachable]:
    """Exact reachable ground states and emitted observations, entries 0..horizon.

    Entry 0 is ``{start}``; entry 1 is the support of the prior; entry ``i+1``
    collects the successors of entry ``i`` together with the observations
    emitted on the way.  A sampled state ``S_k`` therefore lies in entry
    ``k + 1``.
    """
    m.require_valid()
    out = [Reachable(frozenset({START}), frozenset())]
    if horizon == 0:
        return out
    layer = frozenset(st.state for st in m.initial_steps())
    out.append(Reachable(layer, frozenset()))
    for i in range(2, horizon + 1):
        states, obs = set(), set()
        for s in layer:
            for st in m.successors(s):
                states.add(st.state)
                obs.add(st.obs)
            if len(states) > cap:
                raise LohmmError(f"more than {cap} reachable states at step {i}")
        layer = frozenset(states)
        out.append(Reachable(layer, frozenset(obs)))
    return out
