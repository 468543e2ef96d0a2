import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lohmm import fixtures
from lohmm.errors import DeadStateError, LohmmError
from lohmm.inference import likelihood
from lohmm.model import parse_model
from lohmm.sampling import reachable_sets, sample_corpus, sample_sequence
from lohmm.terms import END, START, parse_atom


def test_fixed_length_shape(load):
    m = load("fig1")
    states, obs = sample_sequence(m, seed=4, length=5)
    assert len(states) == 6 and len(obs) == 5


def test_seed_determinism(load):
    m = load("fig1")
    assert sample_corpus(m, 5, seed=7, length=4) == sample_corpus(m, 5, seed=7, length=4)
    assert sample_corpus(m, 5, seed=7, length=4) != sample_corpus(m, 5, seed=8, length=4)


@pytest.mark.parametrize("seed", range(20))
def test_anbncn_samples_are_in_language(load, seed):
    m = load("anbncn")
    states, obs = sample_sequence(m, seed=seed)
    assert states[-1] == END and obs[-1] == END
    word = "".join(a.pred for a in obs[:-1])
    n = len(word) // 3
    assert word == "a" * n + "b" * n + "c" * n
    assert likelihood(m, obs) == pytest.approx(0.2 * 0.8 ** (n - 1))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["coin-files", "fig1", "hmm-arity0", "parallel"]), st.integers(0, 10**6))
def test_samples_have_positive_likelihood(name, seed):
    m = fixtures.load(name)
    obs = sample_sequence(m, seed=seed, length=4)[1]
    assert likelihood(m, obs) > 0


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["coin-files", "fig1", "anbncn"]), st.integers(0, 10**6))
def test_sampled_states_are_reachable(name, seed):
    m = fixtures.load(name)
    states, obs = sample_sequence(m, seed=seed, length=None if m.end_terminated else 4)
    reach = reachable_sets(m, len(states))
    for k, s in enumerate(states):
        assert s in reach[k + 1].states
    for k, o in enumerate(obs):
        assert o in reach[k + 2].observations


def test_reachable_sets_coin(load):
    m = load("coin-files")
    r = reachable_sets(m, 3)
    assert r[0].states == {START}
    assert {str(s) for s in r[1].states} == {"st(f1)", "st(f2)"}
    assert {str(o) for o in r[2].observations} == {"out(f1)", "out(f2)"}


def test_dead_state_carries_partial_walk():
    m = parse_model("""predicate a.
predicate b.
1.0 : a <- start.
1.0 : b <- a emits a.
""")
    with pytest.raises(DeadStateError) as ei:
        sample_sequence(m, length=3)
    assert ei.value.states == [parse_atom("a"), parse_atom("b")]
    assert ei.value.observations == [parse_atom("a")]


def test_step_cap():
    m = parse_model("""predicate a.
1.0 : a <- start.
1.0 : a <- a emits a.
0.0 : end <- a emits a.
""")
    with pytest.raises(LohmmError, match="50 steps"):
        sample_sequence(m, cap=50)


def test_fixed_mode_needs_length(load):
    with pytest.raises(LohmmError):
        sample_sequence(load("coin-files"))
