"""Command-line interface.

Exit codes: 0 success, 1 invalid model or zero likelihood, 2 usage or parse error.
Numbers are printed with 9 significant digits.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from .classify import ClassifierBundle, compare_models, cross_validate, fit, predict
from .compile import mealy_to_moore, parse_pcfg, pcfg_to_lohmm
from .errors import DeadStateError, GroundingError, LohmmError, ModelError, ParseError, \
    ZeroLikelihoodError
from .formats import format_sequence, parse_labeled, parse_sequence, parse_sequences, read_text
from .inference import backward, forward, viterbi, viterbi_abstract
from .learning import TrainConfig, train
from .model import format_model, parse_model, validate
from .sampling import DEFAULT_CAP, sample_sequence

log = logging.getLogger("lohmm")


class UsageError(Exception):
    pass


def num(x: float) -> str:
    return f"{x:.9g}"


def _read(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return read_text(path)


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _model(args, attr: str = "model"):
    m = parse_model(_read(getattr(args, attr)))
    issues = validate(m)
    if issues:
        raise ModelError("invalid model:\n" + "\n".join(map(str, issues)))
    return m


def _sequences(args, m) -> list:
    """``--seq`` is a file (one sequence per line) or a literal sequence."""
    if args.seq is None:
        raise UsageError("--seq is required")
    if os.path.exists(args.seq):
        return parse_sequences(read_text(args.seq), m.alphabet)
    return [parse_sequence(args.seq, m.alphabet)]


def _config(args) -> TrainConfig:
    return TrainConfig(pseudocount=args.pseudocount, tolerance=args.tolerance,
                       max_iterations=args.max_iter, seed=args.seed, mode=args.mode)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    m = parse_model(_read(args.model))
    issues = validate(m)
    for issue in issues:
        print(issue)
    if not issues:
        print(f"valid: {len(m.priors)} prior and {len(m.transitions)} abstract transitions, "
              f"{'end-terminated' if m.end_terminated else 'fixed-length'}")
    return 1 if issues else 0


def cmd_eval(args) -> int:
    m = _model(args)
    seqs = _sequences(args, m)
    status = 0
    if args.format == "tabular":
        print("index\tlikelihood\tloglik")
    for i, obs in enumerate(seqs):
        p, tr = forward(m, obs, args.mode)
        if tr.loglik == -math.inf:
            status = 1
        if args.backward:
            backward(m, obs, tr)
        if args.format == "tabular":
            print(f"{i}\t{num(p)}\t{num(tr.loglik)}")
        else:
            print(f"likelihood {num(p)}  loglik {num(tr.loglik)}")
    return status


def cmd_viterbi(args) -> int:
    m = _model(args)
    for obs in _sequences(args, m):
        if args.abstract:
            res = viterbi_abstract(m, obs)
            print(f"probability {num(res.probability)}  logprob {num(res.log_probability)}")
            for c, s in zip(res.transitions, res.states):
                print(f"  {m.clauses[c]}")
                print(f"    -> {s}")
        else:
            res = viterbi(m, obs)
            print(f"probability {num(res.probability)}  logprob {num(res.log_probability)}")
            print("  " + " -> ".join(map(str, res.states)))
    return 0


def cmd_train(args) -> int:
    m = _model(args)
    corpus = parse_sequences(_read(args.data), m.alphabet)
    res = train(m, corpus, _config(args))
    for i, ll in enumerate(res.trace):
        print(f"iteration {i}: loglik {num(ll)}", file=sys.stderr)
    if not res.converged:
        log.warning("stopped after %d iterations without converging", args.max_iter)
    _write(format_model(res.model), args.out)
    return 0


def cmd_sample(args) -> int:
    import random
    m = _model(args)
    rng = random.Random(args.seed)
    for _ in range(args.n):
        states, obs = sample_sequence(m, rng, args.length, args.cap)
        if args.hidden:
            print("% hidden: " + format_sequence(states))
        print(format_sequence(obs))
    return 0


def cmd_classify(args) -> int:
    if args.action == "fit":
        m = _model(args)
        labeled = parse_labeled(_read(args.data), m.alphabet)
        bundle = fit(m, labeled, _config(args))
        _write(bundle.to_json(), args.out)
        return 0
    if args.action == "predict":
        if args.bundle is None:
            raise UsageError("--bundle is required")
        bundle = ClassifierBundle.from_json(_read(args.bundle))
        alphabet = bundle.models[bundle.labels[0]].alphabet
        if args.seq is None:
            raise UsageError("--seq is required")
        seqs = parse_sequences(read_text(args.seq), alphabet) if os.path.exists(args.seq) \
            else [parse_sequence(args.seq, alphabet)]
        for obs in seqs:
            label, scores = predict(bundle, obs)
            print(label + "\t" + "\t".join(f"{c}={num(scores[c])}" for c in bundle.labels))
        return 0
    m = _model(args)
    labeled = parse_labeled(_read(args.data), m.alphabet)
    k = None if args.loo else args.folds
    res = cross_validate(m, labeled, k, _config(args), args.seed, args.jobs)
    if res.accuracy is None:
        print("accuracy undefined (no fold evaluated)")
    else:
        print(f"accuracy {num(res.accuracy)}  ({res.correct}/{res.evaluated})")
    for (truth, pred), n in sorted(res.confusion.items()):
        print(f"  {truth} -> {pred}: {n}")
    if res.skipped_folds:
        print(f"skipped folds: {len(res.skipped_folds)}")
    if args.format == "tabular":
        print("fold\tclass\ttrain_loglik\ttest_loglik")
        for f in res.folds:
            for c, ll in f.train_loglik.items():
                test = math.fsum(v[c] for v in f.test_loglik.values())
                print(f"{f.index}\t{c}\t{num(ll)}\t{num(test)}")
    return 0


def cmd_compare(args) -> int:
    ma, mb = _model(args, "model_a"), _model(args, "model_b")
    corpus = parse_sequences(_read(args.data), ma.alphabet)
    k = "none" if args.no_train else (args.folds if args.folds else None)
    res = compare_models(ma, mb, corpus, k, _config(args), args.seed, args.jobs)
    rate = "undefined" if res.win_rate is None else num(res.win_rate)
    print(f"win rate {rate}  ({res.wins}/{res.compared}, excluded {res.excluded})")
    print(f"summed log-likelihood ratio {num(res.llr)}")
    ta, tb = res.test_logp
    print(f"test logP A {num(ta)}  test logP B {num(tb)}")
    if args.format == "tabular":
        print("index\ttrain_logP_A\ttrain_logP_B\ttest_logP_A\ttest_logP_B\tlog_ratio")
        for i, la, lb, a, b in res.rows:
            ratio = a - b if a > -math.inf or b > -math.inf else float("nan")
            print(f"{i}\t{num(la)}\t{num(lb)}\t{num(a)}\t{num(b)}\t{num(ratio)}")
    return 0


def cmd_pcfg2lohmm(args) -> int:
    _write(format_model(pcfg_to_lohmm(parse_pcfg(_read(args.grammar)))), args.out)
    return 0


def cmd_mealy2moore(args) -> int:
    _write(str(mealy_to_moore(_model(args), args.cap)), args.out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lohmm", description="Logical hidden Markov models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", "-m", help="model file (default: stdin)")
        sp.add_argument("--format", choices=("human", "tabular"), default="human")
        sp.add_argument("--mode", choices=("scaled", "exact"), default="scaled",
                        help="numeric regime for forward/backward")
        sp.add_argument("-v", "--verbose", action="store_true")

    def training(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--pseudocount", type=float, default=1.0)
        sp.add_argument("--tolerance", type=float, default=0.1)
        sp.add_argument("--max-iter", type=int, default=200)
        sp.add_argument("--jobs", type=int, default=1, help="parallel folds/classes")

    sp = sub.add_parser("validate", help="check a model file")
    sp.add_argument("model", nargs="?", help="model file (default: stdin)")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("eval", help="likelihood of observation sequences")
    common(sp)
    sp.add_argument("--seq", required=True, help="sequence file or literal 'a, b, c'")
    sp.add_argument("--backward", action="store_true", help="also run the backward pass")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("viterbi", help="most likely state path")
    common(sp)
    sp.add_argument("--seq", required=True)
    sp.add_argument("--abstract", action="store_true",
                    help="maximize over abstract transitions as well as states")
    sp.set_defaults(func=cmd_viterbi)

    sp = sub.add_parser("train", help="Baum-Welch re-estimation")
    common(sp)
    training(sp)
    sp.add_argument("--data", required=True, help="sequences, one per line")
    sp.add_argument("--out", "-o", help="trained model file (default: stdout)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="draw sequences")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--length", "-T", type=int, help="fixed number of observations")
    sp.add_argument("-n", type=int, default=1, help="number of sequences")
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="step cap when sampling until end")
    sp.add_argument("--hidden", action="store_true", help="also print the hidden state path")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("classify", help="plug-in classification")
    sp.add_argument("action", choices=("fit", "predict", "cv"))
    common(sp)
    training(sp)
    sp.add_argument("--data", help="labeled corpus: '<label>TAB<seq>.' per line")
    sp.add_argument("--bundle", help="classifier bundle (predict)")
    sp.add_argument("--seq", help="sequence file or literal (predict)")
    sp.add_argument("--out", "-o")
    sp.add_argument("--folds", "-k", type=int, default=10)
    sp.add_argument("--loo", action="store_true", help="leave-one-out instead of k folds")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("compare", help="held-out win rate of model A over model B")
    common(sp, model=False)
    training(sp)
    sp.add_argument("--model-a", required=True)
    sp.add_argument("--model-b", required=True)
    sp.add_argument("--data", required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--folds", "-k", type=int, help="k-fold instead of leave-one-out")
    g.add_argument("--no-train", action="store_true", help="score the given parameters")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("pcfg2lohmm", help="compile a GNF grammar")
    sp.add_argument("grammar", nargs="?", help="grammar file (default: stdin)")
    sp.add_argument("--out", "-o")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_pcfg2lohmm)

    sp = sub.add_parser("mealy2moore", help="move emissions onto states")
    sp.add_argument("model", nargs="?", help="model file (default: stdin)")
    sp.add_argument("--out", "-o")
    sp.add_argument("--cap", type=int, default=100_000)
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_mealy2moore)
    return p


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, GroundingError, ZeroLikelihoodError, DeadStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except LohmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
