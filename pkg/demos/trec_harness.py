"""
Ad-hoc comparison harness for a TREC collection
================================================

Runs the full command pipeline (index, fit, search, eval) for the two
2-Poisson rankers and the three baselines on any TREC-style collection, then
prints a MAP/MRR table.  The licensed TREC disks are not shipped; anyone who
holds them can point this script at their copy::

    python demos/trec_harness.py --corpus ft.sgml --format trec-sgml \\
        --topics topics.401-450 --qrels qrels.401-450 --workdir ft8 --seed 1

Topics are read title-only.  ``--check`` adds the directional comparison
between the Bayesian-fitted ranker and Dirichlet smoothing; no tolerance is
claimed for the absolute numbers.
"""

import argparse
import sys
from pathlib import Path

from tim.cli import main as tim
from tim.evaluation import evaluate_run

RUNS = [
    # (run name, search --model, model file or None)
    ("tim-gibbs", "tim-gibbs", "gibbs.tsv"),
    ("tim-em", "tim-em", "em.tsv"),
    ("bm25", "bm25", None),
    ("lm-jm", "lm-jm", None),
    ("dirichlet", "dirichlet", None),
]


def step(*argv):
    code = tim([str(a) for a in argv])
    if code:
        sys.exit(f"step failed ({code}): tim {' '.join(map(str, argv))}")


def run_harness(corpus, fmt, topics, qrels, workdir, seed=1, stem=False):
    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    analysis = ["--stem"] if stem else []
    index = work / "index.tim"
    step("index", "--corpus", corpus, "--format", fmt, "--out", index, *analysis)

    # only query terms need mixtures; fitting the whole vocabulary is wasted work here
    step("fit", "--index", index, "--topics", topics, "--method", "em",
         "--out", work / "em.tsv", *analysis)
    step("fit", "--index", index, "--topics", topics, "--method", "gibbs",
         "--seed", seed, "--out", work / "gibbs.tsv", *analysis)

    table = {}
    for name, model, models in RUNS:
        run = work / f"run.{name}.txt"
        extra = ["--models", work / models] if models else []
        step("search", "--index", index, "--topics", topics, "--model", model,
             "--tag", name, "--out", run, *extra, *analysis)
        rep = evaluate_run(run, qrels, ["map", "mrr"])
        table[name] = (rep.means["map"], rep.means["mrr"])
    return table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--format", default="trec-sgml")
    ap.add_argument("--topics", required=True)
    ap.add_argument("--qrels", required=True)
    ap.add_argument("--workdir", required=True)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--stem", action="store_true")
    ap.add_argument("--check", action="store_true",
                    help="exit 1 unless tim-gibbs MAP >= dirichlet MAP")
    args = ap.parse_args(argv)

    table = run_harness(args.corpus, args.format, args.topics, args.qrels,
                        args.workdir, args.seed, args.stem)
    print(f"{'run':<10} {'MAP':>7} {'MRR':>7}")
    for name, (map_, mrr) in table.items():
        print(f"{name:<10} {map_:7.4f} {mrr:7.4f}")
    if args.check:
        ok = table["tim-gibbs"][0] >= table["dirichlet"][0]
        print(f"directional check tim-gibbs MAP >= dirichlet MAP: {'yes' if ok else 'no'}")
        return 0 if ok else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
