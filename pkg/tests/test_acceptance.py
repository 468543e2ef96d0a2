"""The ten acceptance criteria, each at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py -v``; a per-criterion PASS/FAIL
summary is printed at the end of the session.
"""

import math
import random
import time
from collections import Counter

import pytest
from scipy.stats import chisquare

import oracles
from lohmm import fixtures
from lohmm.classify import compare_models
from lohmm.compile import mealy_to_moore, pcfg_to_lohmm
from lohmm.inference import backward, forward, likelihood, viterbi, viterbi_abstract
from lohmm.learning import TrainConfig, expected_counts, randomize, reestimate, train
from lohmm.model import parse_model, validate
from lohmm.sampling import reachable_sets, sample_corpus, sample_sequence
from lohmm.terms import END, Atom, parse_atom
from lohmm.unix import generate_sessions, unix_model


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_context_sensitive_law():
    with Clock() as clk:
        m = fixtures.load("anbncn")
        a, b, c = (parse_atom(x, m.alphabet) for x in "abc")
        for n in range(1, 7):
            p = likelihood(m, [a] * n + [b] * n + [c] * n + [END])
            assert p == pytest.approx(0.2 * 0.8 ** (n - 1), rel=1e-9)
        for word in ("aabc", "abbc", "aabbc"):
            obs = [parse_atom(x, m.alphabet) for x in word] + [END]
            assert likelihood(m, obs) == 0.0
    assert clk.elapsed < 1.0


def test_criterion_2_grammar_compilation():
    with Clock() as clk:
        for name in fixtures.GRAMMARS:
            g = fixtures.load_pcfg(name)
            assert len(g.terminals) <= 3 and len(g.nonterminals) <= 3
            m = pcfg_to_lohmm(g)
            for n in range(1, 6):
                for w in oracles.all_sequences(g.terminals, n):
                    want = oracles.derivation_prob(g, w)
                    got = likelihood(m, [Atom(t) for t in w] + [END])
                    assert abs(got - want) <= 1e-9
    assert clk.elapsed < 10.0


def test_criterion_3_normalization():
    with Clock() as clk:
        for name in ("coin-files", "fig1"):
            m = fixtures.load(name)
            assert not m.end_terminated
            symbols = oracles.observation_alphabet(m)
            assert len(symbols) <= 5
            for T in range(1, 5):
                total = math.fsum(likelihood(m, obs) for obs in oracles.all_sequences(symbols, T))
                assert total == pytest.approx(1.0, abs=1e-6)
    assert clk.elapsed < 30.0


def _oracle_cases():
    cases = []
    for name in ("coin-files", "fig1", "parallel", "hmm-arity0"):
        m = fixtures.load(name)
        reach = set().union(*(r.states for r in reachable_sets(m, 6)))
        assert len(reach) <= 50
        for T in range(1, 6):
            cases += [(m, obs) for obs in sample_corpus(m, 3, seed=100 + T, length=T)]
    m = fixtures.load("anbncn")
    for w in ("abc", "aabbcc", "abbc"):
        cases.append((m, [parse_atom(x, m.alphabet) for x in w] + [END]))
    return cases


def test_criterion_4_brute_force_inference():
    for m, obs in _oracle_cases():
        bf = oracles.brute_force(m, obs)
        p, tr = forward(m, obs)
        assert p == pytest.approx(bf["likelihood"], rel=1e-9, abs=1e-300)
        if bf["likelihood"] == 0.0:
            continue
        assert viterbi(m, obs).probability == pytest.approx(bf["viterbi"], rel=1e-9)
        assert viterbi_abstract(m, obs).probability == pytest.approx(bf["abstract"], rel=1e-9)
        backward(m, obs, tr)
        for t in range(len(obs) + 1):
            at, bt = tr.alpha_at(t), tr.beta_at(t)
            s = math.fsum(at[x] * bt[x] for x in tr.states(t))
            assert s == pytest.approx(p, rel=1e-9)


def _dense(m):
    """Dense matrices read off the arity-0 model's clauses."""
    states, symbols = ["h1", "h2"], ["x", "y"]
    pi = [0.0, 0.0]
    J = [[[0.0, 0.0] for _ in states] for _ in states]
    for c in m.clauses:
        if c.is_prior:
            pi[states.index(c.head.pred)] += c.prob
        else:
            J[states.index(c.body.pred)][states.index(c.head.pred)][symbols.index(c.obs.pred)] += c.prob
    return oracles.DenseHmm(pi, J), states, symbols


def test_criterion_5_hmm_reduction():
    m = fixtures.load("hmm-arity0")
    hmm, states, symbols = _dense(m)
    corpus = sample_corpus(m, 8, seed=5, length=7)
    for obs in corpus:
        idx = [symbols.index(o.pred) for o in obs]
        assert likelihood(m, obs) == pytest.approx(hmm.likelihood(idx), rel=1e-9)
        path, prob = hmm.viterbi(idx)
        v = viterbi(m, obs)
        assert v.probability == pytest.approx(prob, rel=1e-9)
        assert [s.pred for s in v.states] == [states[i] for i in path]
    counts = None
    for obs in corpus:
        c = expected_counts(m, obs, mode="exact")
        counts = c if counts is None else counts.merge(c)
    new = reestimate(counts, m, pseudocount=0.0)
    ref, _, _ = _dense(new)
    want = hmm.baum_welch_step([[symbols.index(o.pred) for o in obs] for obs in corpus])
    assert abs(ref.pi - want.pi).max() <= 1e-9
    assert abs(ref.J - want.J).max() <= 1e-9


def test_criterion_6_em():
    with Clock() as clk:
        fig1 = fixtures.load("fig1")
        corpus = sample_corpus(fig1, 500, seed=43, length=8)
        res = train(randomize(fig1, seed=1), corpus,
                    TrainConfig(pseudocount=0.0, tolerance=-math.inf, max_iterations=25))
        assert len(res.trace) >= 20
        assert all(b >= a - 1e-9 for a, b in zip(res.trace, res.trace[1:]))

        coin = fixtures.load("coin-files")
        data = sample_corpus(coin, 500, seed=42, length=10)
        f1, f2 = coin.alphabet.domain("file")
        start = coin.with_parameters([1.0, 0.3, 0.7], {("st", 1, 1): {f1: 0.7, f2: 0.3}})
        fitted = train(start, data, TrainConfig(pseudocount=0.0, tolerance=1e-6,
                                                max_iterations=500)).model
        for got, want in zip(fitted.clauses, coin.clauses):
            assert abs(got.prob - want.prob) <= 0.05
        for v, p in fitted.table(("st", 1, 1)).items():
            assert abs(p - 0.5) <= 0.05

        default = train(fig1, corpus, TrainConfig(pseudocount=1.0, tolerance=0.1))
        assert default.converged
    assert clk.elapsed < 60.0


def test_criterion_7_sampler_agreement():
    m = fixtures.load("coin-files")
    rng = random.Random(20240101)
    counts = Counter(tuple(sample_sequence(m, rng, 3)[1]) for _ in range(100_000))
    seqs = oracles.all_sequences(oracles.observation_alphabet(m), 3)
    probs = [likelihood(m, s) for s in seqs]
    assert math.fsum(probs) == pytest.approx(1.0)
    observed = [counts.get(tuple(s), 0) for s in seqs]
    assert sum(observed) == 100_000
    expected = [p * 100_000 for p in probs]
    _, pvalue = chisquare(observed, expected)
    assert pvalue > 0.01


def test_criterion_8_moore_equivalence():
    m = fixtures.load("coin-files")
    mm = mealy_to_moore(m)
    for T in range(1, 4):
        for obs in oracles.all_sequences(oracles.observation_alphabet(m), T):
            assert mm.likelihood(obs) == pytest.approx(likelihood(m, obs), rel=1e-9)
    fig1 = fixtures.load("fig1")
    walk = [parse_atom(x, fig1.alphabet)
            for x in ("emacs(hmm1)", "latex(hmm1)", "emacs(lohmm1)", "ls")]
    assert mealy_to_moore(fig1).likelihood(walk) == pytest.approx(likelihood(fig1, walk), rel=1e-9)


def test_criterion_9_unification_benefit():
    sessions = generate_sessions(200, seed=0, reuse_rate=0.8)
    res = compare_models(unix_model(True), unix_model(False), sessions, k=None)
    assert res.compared == 200
    assert res.win_rate > 0.5
    assert res.llr > 0


def test_criterion_10_validation():
    issues = validate(fixtures.load("bad-glb"))
    assert any(i.kind == "glb" for i in issues)
    bad_sum = parse_model("""domain file = {f1, f2}.
predicate st(file).
predicate out(file).
1.0 : st(F) <- start.
0.8 : st(F) <- st(F) emits out(F).
0.4 : st(_) <- st(F) emits out(F).
""")
    assert any(i.kind == "normalization" for i in validate(bad_sum))
    for name in fixtures.MODELS:
        assert validate(fixtures.load(name)) == [], name
    for name in fixtures.GRAMMARS:
        assert validate(pcfg_to_lohmm(fixtures.load_pcfg(name))) == []
