"""Plug-in sequence classification, cross-validation and pairwise model comparison.

Scores are natural-log likelihoods; an impossible sequence scores ``-inf``.
Trellis graphs depend only on the model structure, so they are built once per
sequence and shared by every fold and every class model.
"""

from __future__ import annotations

import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import LohmmError, ZeroLikelihoodError
from .inference import build_graph, forward
from .learning import TrainConfig, train
from .model import Lohmm, format_model, parse_model

log = logging.getLogger(__name__)

__all__ = ["ClassifierBundle", "fit", "predict", "cross_validate", "CVResult",
           "compare_models", "CompareResult", "assign_folds"]


class _Graphs:
    """Lazily built trellis graphs for one model structure over one corpus."""

    def __init__(self, template: Lohmm, corpus: Sequence):
        self.template = template
        self.corpus = corpus
        self._g: dict = {}

    def __getitem__(self, i: int):
        if i not in self._g:
            self._g[i] = build_graph(self.template, self.corpus[i])
        return self._g[i]

    def subset(self, idx: Sequence[int]) -> list:
        return [self[i] for i in idx]


def _score(m: Lohmm, obs, graph=None) -> float:
    return forward(m, obs, "scaled", graph)[1].loglik


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------


@dataclass
class ClassifierBundle:
    labels: list
    models: dict
    priors: dict
    traces: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "format": "lohmm-classifier",
            "classes": [{"label": c, "prior": self.priors[c], "model": format_model(self.models[c])}
                        for c in self.labels],
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClassifierBundle":
        data = json.loads(text)
        if data.get("format") != "lohmm-classifier":
            raise LohmmError("not a classifier bundle")
        labels = [c["label"] for c in data["classes"]]
        models = {c["label"]: parse_model(c["model"]).require_valid() for c in data["classes"]}
        priors = {c["label"]: float(c["prior"]) for c in data["classes"]}
        return cls(labels, models, priors)


def _labels_in_order(labeled) -> list:
    seen: dict = {}
    for label, _ in labeled:
        seen.setdefault(label, None)
    return list(seen)


def _fit(template, labeled, config, graphs: _Graphs | None, idx):
    labels = _labels_in_order(labeled[i] for i in idx)
    models, priors, traces = {}, {}, {}
    for c in labels:
        members = [i for i in idx if labeled[i][0] == c]
        seqs = [labeled[i][1] for i in members]
        gs = [graphs[i] for i in members] if graphs is not None else None
        try:
            res = train(template, seqs, config, gs)
        except LohmmError as exc:
            raise LohmmError(f"training class {c!r} failed: {exc}") from None
        models[c], traces[c] = res.model, res.trace
        priors[c] = len(members) / len(idx)
    return ClassifierBundle(labels, models, priors, traces)


def fit(template: Lohmm, labeled: Sequence, config: TrainConfig | None = None) -> ClassifierBundle:
    """One model per class, trained on that class's sequences; priors are class frequencies."""
    labeled = list(labeled)
    if not labeled:
        raise LohmmError("empty labeled corpus")
    template.require_valid()
    graphs = _Graphs(template, [s for _, s in labeled])
    return _fit(template, labeled, config or TrainConfig(), graphs, range(len(labeled)))


def _scores(bundle: ClassifierBundle, obs, graph=None) -> dict:
    out = {}
    for c in bundle.labels:
        ll = _score(bundle.models[c], obs, graph)
        out[c] = ll + math.log(bundle.priors[c]) if ll > -math.inf and bundle.priors[c] > 0 else -math.inf
    return out


def _argmax(bundle, scores):
    best = None
    for c in bundle.labels:
        if best is None or scores[c] > scores[best]:
            best = c
    return best


def predict(bundle: ClassifierBundle, obs, graph=None) -> tuple[str, dict]:
    """Class with the highest ``log P(obs | class) + log P(class)``.

    Ties go to the class listed first; when every class gives probability 0
    :class:`ZeroLikelihoodError` is raised.
    """
    scores = _scores(bundle, obs, graph)
    if all(v == -math.inf for v in scores.values()):
        raise ZeroLikelihoodError("sequence has probability 0 under every class")
    return _argmax(bundle, scores), scores


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------


def assign_folds(labels: Sequence, k: int | None, seed: int = 0) -> list[list[int]]:
    """Stratified folds: each class is shuffled with the seeded generator, the
    shuffles are concatenated in class order, and position ``j`` goes to fold
    ``j mod k``.  ``k=None`` gives leave-one-out (one fold per item)."""
    n = len(labels)
    if k is None:
        return [[i] for i in range(n)]
    if not 2 <= k <= n:
        raise LohmmError(f"cannot make {k} folds from {n} sequences")
    rng = random.Random(seed)
    order = []
    for c in _labels_in_order((lab, None) for lab in labels):
        members = [i for i, lab in enumerate(labels) if lab == c]
        rng.shuffle(members)
        order.extend(members)
    folds = [[] for _ in range(k)]
    for j, i in enumerate(order):
        folds[j % k].append(i)
    return [sorted(f) for f in folds]


@dataclass
class FoldResult:
    index: int
    test: list
    predictions: dict            # sequence index -> predicted label (None if impossible)
    train_loglik: dict           # class -> training log-likelihood
    test_loglik: dict            # sequence index -> {class: log-likelihood}


@dataclass
class CVResult:
    accuracy: float | None
    correct: int
    evaluated: int
    confusion: dict              # (true, predicted) -> count
    folds: list
    skipped_folds: list
    unscored: list               # sequences with probability 0 under every class


def _run_fold(args):
    template, labeled, config, fi, test, graphs = args
    labels = _labels_in_order(labeled)
    held = set(test)
    train_idx = [i for i in range(len(labeled)) if i not in held]
    present = {labeled[i][0] for i in train_idx}
    if any(c not in present for c in labels):
        return None
    bundle = _fit(template, labeled, config, graphs, train_idx)
    preds, test_ll = {}, {}
    for i in test:
        scores = _scores(bundle, labeled[i][1], graphs[i])
        test_ll[i] = {c: scores[c] - math.log(bundle.priors[c]) if scores[c] > -math.inf else -math.inf
                      for c in bundle.labels}
        preds[i] = None if all(v == -math.inf for v in scores.values()) else _argmax(bundle, scores)
    train_ll = {c: bundle.traces[c][-1] for c in bundle.labels}
    return FoldResult(fi, list(test), preds, train_ll, test_ll)


def _map(fn, jobs, items):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def cross_validate(template: Lohmm, labeled: Sequence, k: int | None = 10,
                   config: TrainConfig | None = None, seed: int | None = None,
                   jobs: int = 1) -> CVResult:
    """k-fold (or leave-one-out with ``k=None``) accuracy of the plug-in classifier.

    Folds whose training part lacks a class are skipped with a warning.
    """
    config = config or TrainConfig()
    labeled = list(labeled)
    template.require_valid()
    seed = config.seed if seed is None else seed
    folds = assign_folds([lab for lab, _ in labeled], k, seed)
    graphs = _Graphs(template, [s for _, s in labeled])
    if jobs and jobs > 1:
        graphs = graphs.subset(range(len(labeled)))
    results = _map(_run_fold, jobs,
                   [(template, labeled, config, fi, test, graphs) for fi, test in enumerate(folds)])
    confusion: dict = {}
    correct = evaluated = 0
    done, skipped, unscored = [], [], []
    for fi, res in enumerate(results):
        if res is None:
            log.warning("fold %d skipped: a class is missing from its training part", fi)
            skipped.append(fi)
            continue
        done.append(res)
        for i, pred in res.predictions.items():
            if pred is None:
                unscored.append(i)
                continue
            truth = labeled[i][0]
            confusion[(truth, pred)] = confusion.get((truth, pred), 0) + 1
            evaluated += 1
            correct += pred == truth
    acc = correct / evaluated if evaluated else None
    return CVResult(acc, correct, evaluated, confusion, done, skipped, unscored)


# ---------------------------------------------------------------------------
# model comparison
# ---------------------------------------------------------------------------


@dataclass
class CompareResult:
    win_rate: float | None
    wins: int
    compared: int
    llr: float                   # summed test log P_A - log P_B over finite pairs
    excluded: int                # impossible under both models
    rows: list                   # (index, fold train logP_A, fold train logP_B, test logP_A, test logP_B)

    @property
    def test_logp(self) -> tuple[float, float]:
        fin = [r for r in self.rows if r[3] > -math.inf and r[4] > -math.inf]
        return (math.fsum(r[3] for r in fin), math.fsum(r[4] for r in fin))


def _compare_fold(args):
    ma, mb, corpus, ga, gb, test, config = args
    if config is None:
        # score the given models as they are; "training" is the scored set itself
        fa, fb = ma, mb
        train_idx = test
    else:
        held = set(test)
        train_idx = [i for i in range(len(corpus)) if i not in held]
        fa = train(ma, [corpus[i] for i in train_idx], config, [ga[i] for i in train_idx]).model
        fb = train(mb, [corpus[i] for i in train_idx], config, [gb[i] for i in train_idx]).model
    la = math.fsum(_score(fa, corpus[i], ga[i]) for i in train_idx)
    lb = math.fsum(_score(fb, corpus[i], gb[i]) for i in train_idx)
    return [(i, la, lb, _score(fa, corpus[i], ga[i]), _score(fb, corpus[i], gb[i])) for i in test]


def compare_models(ma: Lohmm, mb: Lohmm, corpus: Sequence, k: int | None | str = None,
                   config: TrainConfig | None = None, seed: int = 0, jobs: int = 1) -> CompareResult:
    """Held-out win rate of ``ma`` over ``mb``: a win is ``log P_A - log P_B > 0``.

    ``k=None`` is leave-one-out, an int gives k folds, ``k="none"`` scores the
    given models on the whole corpus without training.  Sequences impossible
    under both models are excluded and counted.
    """
    corpus = [tuple(s) for s in corpus]
    ma.require_valid()
    mb.require_valid()
    ga, gb = _Graphs(ma, corpus), _Graphs(mb, corpus)
    if k == "none":
        folds = [list(range(len(corpus)))]
        cfg = None
    else:
        folds = [[i] for i in range(len(corpus))] if k is None else \
            assign_folds([0] * len(corpus), k, seed)
        cfg = config or TrainConfig()
    if jobs and jobs > 1:
        ga, gb = ga.subset(range(len(corpus))), gb.subset(range(len(corpus)))
    parts = _map(_compare_fold, jobs, [(ma, mb, corpus, ga, gb, test, cfg) for test in folds])
    rows = sorted(r for part in parts for r in part)
    wins = compared = excluded = 0
    llr = []
    for _, _, _, a, b in rows:
        if a == -math.inf and b == -math.inf:
            excluded += 1
            continue
        compared += 1
        wins += (a - b) > 0
        if a > -math.inf and b > -math.inf:
            llr.append(a - b)
    rate = wins / compared if compared else None
    return CompareResult(rate, wins, compared, math.fsum(llr), excluded, rows)
