import logging
import math

import pytest

import oracles
from lohmm import fixtures
from lohmm.errors import ZeroLikelihoodError
from lohmm.learning import (ExpectedCounts, TrainConfig, corpus_counts, expected_counts, randomize,
                            reestimate, train)
from lohmm.model import parse_model, validate
from lohmm.sampling import sample_corpus
from lohmm.terms import parse_atom


def atoms(m, *texts):
    return [parse_atom(t, m.alphabet) for t in texts]


def test_coin_counts_match_path_posterior(load):
    m = load("coin-files")
    obs = atoms(m, "out(f1)", "out(f1)")
    c = expected_counts(m, obs, mode="exact")
    want = oracles.path_posterior_counts(m, obs)
    assert c.transitions == pytest.approx(want, rel=1e-12)
    assert c.transitions[1] + c.transitions[2] == pytest.approx(2.0)


def test_edge_posterior_example(load):
    # first step st(f1) -> st(f1) is explained by the 0.6 clause (0.6) or the
    # 0.4 clause picking f1 (0.2): posterior 0.75; the last step is free, 0.6
    m = load("coin-files")
    c = expected_counts(m, atoms(m, "out(f1)", "out(f1)"), mode="exact")
    assert c.transitions[1] == pytest.approx(0.75 + 0.6, rel=1e-12)


@pytest.mark.parametrize("name", ["coin-files", "fig1", "parallel", "hmm-arity0"])
def test_counts_match_oracle(name):
    m = fixtures.load(name)
    for obs in sample_corpus(m, 4, seed=3, length=4):
        for mode in ("scaled", "exact"):
            c = expected_counts(m, obs, mode=mode)
            want = oracles.path_posterior_counts(m, obs)
            assert c.transitions.keys() == {k for k, v in want.items() if v > 0}
            for k, v in want.items():
                assert c.transitions.get(k, 0.0) == pytest.approx(v, rel=1e-9)
            sel = oracles.selection_posterior(m, obs)
            for k, v in sel.items():
                assert c.selection.get(k, 0.0) == pytest.approx(v, rel=1e-9, abs=1e-15)
            # posterior mass: one prior use plus one transition per observation
            assert math.fsum(c.transitions.values()) == pytest.approx(len(obs) + 1)


def test_selection_counts_follow_free_choices(load):
    m = load("coin-files")
    c = expected_counts(m, atoms(m, "out(f1)", "out(f1)"), mode="exact")
    total = math.fsum(v for (pos, _), v in c.selection.items())
    # the prior and the 0.4 clause pick a file; the 0.6 clause never does
    assert total == pytest.approx(c.transitions[0] + c.transitions[2])


def test_merge_is_exact_sum(load):
    m = load("fig1")
    corpus = sample_corpus(m, 6, seed=9, length=5)
    total, skipped = corpus_counts(m, corpus, mode="exact")
    assert skipped == []
    parts = [expected_counts(m, o, mode="exact") for o in corpus]
    acc = ExpectedCounts()
    for p in parts:
        acc.add(p)
    assert acc.transitions == total.transitions
    assert acc.selection == total.selection
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    assert left.transitions == pytest.approx(right.transitions, rel=1e-15)


def test_zero_likelihood_sequence(load):
    m = load("anbncn")
    with pytest.raises(ZeroLikelihoodError):
        expected_counts(m, atoms(m, "b", "end"))
    bad = atoms(m, "b", "end")
    good = atoms(m, "a", "b", "c", "end")
    _, skipped = corpus_counts(m, [good, bad])
    assert skipped == [1]
    with pytest.raises(ZeroLikelihoodError):
        corpus_counts(m, [good, bad], skip_zero=False)


def test_reestimate_ratios(load):
    m = load("coin-files")
    counts = ExpectedCounts({0: 1.0, 1: 3.0, 2: 1.0}, {}, [])
    m0 = reestimate(counts, m, pseudocount=0.0)
    assert [c.prob for c in m0.clauses] == pytest.approx([1.0, 0.75, 0.25])
    m1 = reestimate(counts, m, pseudocount=1.0)
    assert [c.prob for c in m1.clauses][1:] == pytest.approx([4 / 6, 2 / 6])
    assert validate(m1) == []


def test_reestimate_keeps_unused_body(load, caplog):
    m = load("fig1")
    counts = ExpectedCounts({0: 1.0, 2: 1.0}, {}, [])
    with caplog.at_level(logging.WARNING):
        new = reestimate(counts, m, pseudocount=0.0)
    assert "keeping parameters" in caplog.text
    assert [c.prob for c in new.clauses][8:] == [c.prob for c in m.clauses][8:]


def test_deterministic_model_is_fixed_point():
    m = parse_model("""predicate a.
predicate b.
1.0 : a <- start.
1.0 : b <- a emits a.
1.0 : end <- b emits b.
""")
    res = train(m, [[parse_atom("a"), parse_atom("b")]], TrainConfig(pseudocount=0.0))
    assert res.converged and len(res.trace) == 2
    assert [c.prob for c in res.model.clauses] == [1.0, 1.0, 1.0]
    assert res.trace[0] == pytest.approx(0.0)


def test_monotone_without_pseudocounts(load):
    m = load("fig1")
    corpus = sample_corpus(m, 40, seed=4, length=6)
    start = randomize(m, seed=1)
    res = train(start, corpus, TrainConfig(pseudocount=0.0, tolerance=-1.0, max_iterations=15))
    assert len(res.trace) == 15
    assert all(b >= a - 1e-9 for a, b in zip(res.trace, res.trace[1:]))
    assert validate(res.model) == []


def test_train_result_unpacks(load):
    m = load("coin-files")
    corpus = sample_corpus(m, 10, seed=0, length=4)
    model, trace = train(m, corpus)
    assert trace and validate(model) == []


def test_all_zero_corpus_fails(load):
    m = load("anbncn")
    with pytest.raises(ZeroLikelihoodError):
        train(m, [atoms(m, "b", "end")])


def test_randomize_keeps_structure(load):
    m = load("fig1")
    r = randomize(m, seed=3)
    assert validate(r) == []
    assert [c.head for c in r.clauses] == [c.head for c in m.clauses]
    assert [c.prob for c in r.clauses] != [c.prob for c in m.clauses]
