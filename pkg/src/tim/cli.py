"""Command-line pipelines: index, fit, search, cf, eval.

Every option may also come from a ``--config`` file of ``key = value`` lines
(keys are option names without the leading dashes); explicit flags win.
Errors are reported as a single JSON line on stderr and a nonzero exit.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from tim import adhoc, cf, corpus, evaluation, mixture
from tim.runs import write_run

log = logging.getLogger("tim")

DEFAULTS = {
    "format": "jsonl",
    "method": "em",
    "tol": mixture.DEFAULT_TOL,
    "max_iter": mixture.DEFAULT_MAX_ITER,
    "burn_in": 500,
    "samples": 1000,
    "seed": None,
    "k1": 1.2,
    "b": 0.75,
    "lambda_": 0.1,
    "mu": 1000.0,
    "threshold": cf.DEFAULT_THRESHOLD,
    "k": 1000,
    "metrics": "map,mrr",
    "k_values": "10",
    "depth": evaluation.DEFAULT_DEPTH,
    "min_df": 1,
    "tag": "tim",
    "r_max": cf.DEFAULT_R_MAX,
}

_TYPES = {
    "tol": float, "max_iter": int, "burn_in": int, "samples": int, "seed": int,
    "k1": float, "b": float, "lambda_": float, "mu": float, "threshold": int, "k": int,
    "depth": int, "min_df": int, "r_max": int,
}


class CLIError(Exception):
    def __init__(self, code: str, message: str, status: int = 1):
        super().__init__(message)
        self.code = code
        self.status = status


@contextlib.contextmanager
def atomic_output(path: str | os.PathLike):
    """Yield a temp path next to ``path``; rename over it only on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _need_file(path, what):
    if path is None:
        raise CLIError("missing_argument", f"{what} is required", 2)
    if not Path(path).is_file():
        raise CLIError("missing_file", f"{what} not found: {path}")
    return path


def _need_outdir(path, what):
    if path is None:
        raise CLIError("missing_argument", f"{what} is required", 2)
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise CLIError("missing_file", f"output directory for {what} does not exist: {parent}")
    return path


def read_config(path) -> dict:
    cfg = {}
    with open(_need_file(path, "--config"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise CLIError("bad_config", f"{path}:{lineno}: expected key = value")
            key = key.strip().replace("-", "_")
            if key == "lambda":
                key = "lambda_"
            cfg[key] = value.strip()
    return cfg


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None or key in ("config",):
            continue
        if key in cfg:
            raw = cfg[key]
            try:
                value = _TYPES.get(key, str)(raw)
            except ValueError:
                raise CLIError("bad_config", f"config value for {key!r} is invalid: {raw!r}") from None
        else:
            value = DEFAULTS.get(key)
        setattr(args, key, value)
    for key in ("stem",):
        if not getattr(args, key, False) and cfg.get(key, "").lower() in ("1", "true", "yes"):
            setattr(args, key, True)
    return args


def _gibbs_config(args) -> mixture.GibbsConfig:
    if args.seed is None:
        raise CLIError("missing_argument", "--seed is required for Gibbs sampling", 2)
    return mixture.GibbsConfig(burn_in=args.burn_in, samples=args.samples, seed=args.seed)


def _baseline_config(args) -> adhoc.BaselineConfig:
    try:
        return adhoc.BaselineConfig(k1=args.k1, b=args.b, lam=args.lambda_, mu=args.mu)
    except ValueError as exc:
        raise CLIError("bad_argument", str(exc), 2) from None


# -- subcommands -------------------------------------------------------------------

def cmd_index(args) -> int:
    _need_file(args.corpus, "--corpus")
    _need_outdir(args.out, "--out")
    stop = corpus.ENGLISH_STOPWORDS if args.stopwords else None
    docs = corpus.ingest_corpus(args.corpus, args.format, stem=args.stem, stopwords=stop)
    index = corpus.build_index(docs)
    with atomic_output(args.out) as tmp:
        index.save(tmp)
    log.info("indexed %d documents, %d terms", index.n_docs, len(index.vocabulary))
    return 0


def _query_terms(args) -> set[str] | None:
    if args.topics is None:
        return None
    stop = corpus.ENGLISH_STOPWORDS if args.stopwords else None
    return {t for _, toks in corpus.read_topics(args.topics, args.stem, stop) for t in toks}


def cmd_fit(args) -> int:
    _need_file(args.index, "--index")
    if args.topics is not None:
        _need_file(args.topics, "--topics")
    _need_outdir(args.out, "--out")
    if args.method not in ("em", "gibbs"):
        raise CLIError("bad_argument", f"--method must be em or gibbs, not {args.method!r}", 2)
    gibbs = _gibbs_config(args) if args.method == "gibbs" else None
    index = corpus.InvertedIndex.load(args.index)
    wanted = _query_terms(args)
    hists = {}
    for term in index.vocabulary:
        if index.df(term) < args.min_df or (wanted is not None and term not in wanted):
            continue
        hists[term] = corpus.term_stats(index, term).tf_histogram
    models = mixture.fit_many(hists, method=args.method, tol=args.tol, max_iter=args.max_iter,
                              gibbs=gibbs)
    with atomic_output(args.out) as tmp:
        mixture.write_models(tmp, models.values())
    log.info("fitted %d terms with %s", len(models), args.method)
    return 0


def cmd_search(args) -> int:
    _need_file(args.index, "--index")
    if (args.topics is None) == (args.query is None):
        raise CLIError("bad_argument", "give exactly one of --topics or --query", 2)
    if args.topics is not None:
        _need_file(args.topics, "--topics")
    _need_outdir(args.out, "--out")
    model = args.model or "tim-em"
    if model not in adhoc.MODELS:
        raise CLIError("bad_argument", f"--model must be one of {', '.join(adhoc.MODELS)}", 2)
    params = None
    if model.startswith("tim-"):
        _need_file(args.models, "--models")
        fitted = mixture.read_models(args.models)
        expected = model.split("-", 1)[1]
        other = sorted({m.method for m in fitted.values()} - {expected})
        if other:
            raise CLIError("format_mismatch",
                           f"--model {model} needs a {expected} model file, found method(s) {other}")
        params = {t: m.params for t, m in fitted.items()}
    if args.k < 1:
        raise CLIError("bad_argument", "--k must be >= 1", 2)
    index = corpus.InvertedIndex.load(args.index)
    stop = corpus.ENGLISH_STOPWORDS if args.stopwords else None
    if args.topics is not None:
        topics = corpus.read_topics(args.topics, args.stem, stop)
    else:
        topics = [(args.qid, corpus.tokenize(args.query, args.stem, stop))]
    queries = [adhoc.QueryRepresentation(qid, toks) for qid, toks in topics]
    scorer = adhoc.make_scorer(model, params, _baseline_config(args))
    rankings = adhoc.search_many(index, scorer, queries, args.k)
    with atomic_output(args.out) as tmp:
        write_run(tmp, rankings, args.tag)
    return 0


def _cf_ranker(args, matrix):
    gibbs = _gibbs_config(args) if args.method == "gibbs" else None
    if getattr(args, "models", None):
        fits = mixture.read_models(_need_file(args.models, "--models"))
        users, items = cf.models_from_fits(fits)
        return cf.CFRanker(matrix, args.threshold, users, items)
    return cf.CFRanker(matrix, args.threshold, method=args.method, tol=args.tol,
                       max_iter=args.max_iter, gibbs=gibbs)


def cmd_cf(args) -> int:
    if args.method not in ("em", "gibbs"):
        raise CLIError("bad_argument", f"--fit must be em or gibbs, not {args.method!r}", 2)
    if args.action == "fit":
        _need_file(args.ratings, "--ratings")
        _need_outdir(args.out, "--out")
        matrix = cf.load_ratings(args.ratings, args.r_max)
        gibbs = _gibbs_config(args) if args.method == "gibbs" else None
        _, _, fits = cf.fit_all_models(matrix, args.threshold, args.method, args.tol,
                                       args.max_iter, gibbs)
        with atomic_output(args.out) as tmp:
            mixture.write_models(tmp, fits.values())
        return 0
    if args.action == "rank":
        _need_file(args.ratings, "--ratings")
        _need_outdir(args.out, "--out")
        matrix = cf.load_ratings(args.ratings, args.r_max)
        ranker = _cf_ranker(args, matrix)
        users = args.users.split(",") if args.users else ranker.user_ids
        rankings = [ranker.rank_items_for_user(u, args.k) for u in users]
        with atomic_output(args.out) as tmp:
            write_run(tmp, rankings, args.tag)
        return 0
    # eval
    _need_file(args.ratings, "--ratings")
    _need_file(args.test, "--test")
    train = cf.load_ratings(args.ratings, args.r_max)
    test = cf.load_ratings(args.test, args.r_max)
    ranker = _cf_ranker(args, train)
    qrels = evaluation.Qrels()
    for (u, i), r in sorted(test.ratings.items()):
        if u in ranker.matrix.by_user:
            qrels.add(u, i, max(0, r - args.threshold + 1))
    runs = {u: ranker.rank_items_for_user(u, args.k) for u in qrels.query_ids}
    report = evaluation.evaluate_run(runs, qrels, _split(args.metrics), _ints(args.k_values),
                                     args.depth)
    _emit_report(report, args.out)
    return 0


def _split(s: str) -> list[str]:
    return [x for x in (p.strip() for p in s.split(",")) if x]


def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in _split(str(s))]
    except ValueError:
        raise CLIError("bad_argument", f"cutoffs must be integers: {s!r}", 2) from None


def _emit_report(report, out):
    text = report.format()
    if out:
        _need_outdir(out, "--out")
        with atomic_output(out) as tmp:
            Path(tmp).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_eval(args) -> int:
    _need_file(args.run, "--run")
    _need_file(args.qrels, "--qrels")
    try:
        metrics = evaluation.expand_metrics(_split(args.metrics), _ints(args.k_values))
    except ValueError as exc:
        raise CLIError("bad_argument", str(exc), 2) from None
    report = evaluation.evaluate_run(args.run, args.qrels, metrics, depth=args.depth)
    _emit_report(report, args.out)
    return 0


# -- parser ------------------------------------------------------------------------

def _estimation_flags(p):
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)


def _analysis_flags(p):
    p.add_argument("--stem", action="store_true", help="apply the S-stemmer")
    p.add_argument("--stopwords", action="store_true", help="drop common English words")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an inverted index from a corpus")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=["jsonl", "trec", "trec-sgml"])
    p.add_argument("--out")
    _analysis_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("fit", help="fit per-term 2-Poisson mixtures")
    p.add_argument("--config")
    p.add_argument("--index")
    p.add_argument("--method", choices=["em", "gibbs"])
    p.add_argument("--out")
    p.add_argument("--min-df", dest="min_df", type=int)
    p.add_argument("--topics", help="only fit terms occurring in these topics")
    _estimation_flags(p)
    _analysis_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="rank documents and write a TREC run")
    p.add_argument("--config")
    p.add_argument("--index")
    p.add_argument("--models", help="fitted model file (tim-em / tim-gibbs)")
    p.add_argument("--topics")
    p.add_argument("--query")
    p.add_argument("--qid", default="q1")
    p.add_argument("--model")
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.add_argument("--tag")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--mu", type=float)
    _analysis_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cf", help="collaborative-filtering item ranking")
    p.add_argument("action", choices=["fit", "rank", "eval"])
    p.add_argument("--config")
    p.add_argument("--ratings", help="training ratings (user item rating [timestamp])")
    p.add_argument("--test", help="held-out ratings for 'eval'")
    p.add_argument("--models", help="reuse a model file written by 'cf fit'")
    p.add_argument("--users", help="comma-separated users to rank (default: all)")
    p.add_argument("--threshold", type=int)
    p.add_argument("--r-max", dest="r_max", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--fit", "--method", dest="method", choices=["em", "gibbs"])
    p.add_argument("--metrics")
    p.add_argument("--k-values", dest="k_values")
    p.add_argument("--depth", type=int)
    p.add_argument("--out")
    p.add_argument("--tag")
    _estimation_flags(p)
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("eval", help="score a run against qrels")
    p.add_argument("--config")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--metrics", help="comma list: map, mrr, P@k, ndcg@k, or bare P/ndcg")
    p.add_argument("--k-values", "--k", dest="k_values", help="cutoffs for bare P/ndcg")
    p.add_argument("--depth", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def _error_line(code: str, message: str) -> str:
    return json.dumps({"error": code, "message": message}, sort_keys=True)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            sys.stderr.write(_error_line("usage", "invalid command line") + "\n")
        return int(exc.code or 0)
    logging.basicConfig(stream=sys.stderr, format="tim: %(levelname)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    try:
        return args.func(_resolve(args))
    except CLIError as exc:
        sys.stderr.write(_error_line(exc.code, str(exc)) + "\n")
        return exc.status
    except (corpus.CorpusFormatError, corpus.EmptyCorpusError, cf.RatingFormatError,
            evaluation.QrelsFormatError, ValueError, KeyError) as exc:
        sys.stderr.write(_error_line(type(exc).__name__, str(exc)) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(_error_line("io", str(exc)) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
