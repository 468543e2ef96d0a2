"""Logical hidden Markov models: distributions over sequences of ground atoms."""

from .classify import ClassifierBundle, compare_models, cross_validate, fit, predict
from .compile import Pcfg, mealy_to_moore, parse_pcfg, pcfg_string_prob, pcfg_to_lohmm
from .errors import (DeadStateError, GroundingError, LohmmError, ModelError, ParseError,
                     TypeCheckError, ZeroLikelihoodError)
from .formats import format_sequence, parse_labeled, parse_sequence, parse_sequences
from .inference import backward, forward, likelihood, loglikelihood, viterbi, viterbi_abstract
from .learning import TrainConfig, expected_counts, reestimate, train
from .model import AbstractTransition, Lohmm, format_model, parse_model, step_distribution, validate
from .sampling import reachable_sets, sample_corpus, sample_sequence
from .terms import Atom, Compound, Const, Var, mgu, parse_atom, parse_term

__version__ = "0.1.0"

__all__ = [
    "ClassifierBundle", "compare_models", "cross_validate", "fit", "predict",
    "Pcfg", "mealy_to_moore", "parse_pcfg", "pcfg_string_prob", "pcfg_to_lohmm",
    "DeadStateError", "GroundingError", "LohmmError", "ModelError", "ParseError",
    "TypeCheckError", "ZeroLikelihoodError",
    "format_sequence", "parse_labeled", "parse_sequence", "parse_sequences",
    "backward", "forward", "likelihood", "loglikelihood", "viterbi", "viterbi_abstract",
    "TrainConfig", "expected_counts", "reestimate", "train",
    "AbstractTransition", "Lohmm", "format_model", "parse_model", "step_distribution", "validate",
    "reachable_sets", "sample_corpus", "sample_sequence",
    "Atom", "Compound", "Const", "Var", "mgu", "parse_atom", "parse_term",
]
