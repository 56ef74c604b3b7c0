"""Command-line entry points.

Subcommands cover the whole surface: ``run`` executes a job from a config
file, ``index`` materializes postings for a term list, ``serve`` hosts the
scheduler, ``simulate`` replays multi-cluster scenarios, ``bench`` compares
the indexed scan against a naive one, and ``gen-corpus`` writes synthetic
resources.  Report-producing commands print to stdout and, given an output
path, write the delimited file with a rendered figure alongside.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import tempfile
import threading
from pathlib import Path
from typing import List, Optional

from . import CASE_INSENSITIVE, CASE_MODES, __version__
from .bench import BENCH_COLUMNS, MODE_INDEXED, MODE_NAIVE, run_benchmark
from .controller import execute_job, load_pairs, parse_config, parse_key_value_file
from .corpus import load_resource, sentence_split
from .errors import ConfigError, CotermError, EmptyTermError
from .gen import generate_corpus, sample_pairs
from .index import InvertedIndex, normalize_term
from .scheduler.core import (
    DEFAULT_FAIR_SHARE_LIMIT,
    DEFAULT_STALE_TIMEOUT,
    SchedulerCore,
)
from .scheduler.service import SchedulerService
from .scheduler.store import SchedulerStore
from .sim import Scenario, parse_scenario, run_scenario, validate_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DEGRADED = 1
EXIT_ERROR = 2

_SERVE_KEYS = {
    "listen_host": "127.0.0.1",
    "listen_port": "8774",
    "store_path": "scheduler.db",
    "stale_timeout": str(DEFAULT_STALE_TIMEOUT),
    "fair_share_limit": str(DEFAULT_FAIR_SHARE_LIMIT),
}


def _setup_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


# -- run ---------------------------------------------------------------


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    report = execute_job(config)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_DEGRADED if report.degraded else EXIT_OK


# -- index -------------------------------------------------------------


def _split_terms(raw: str) -> List[str]:
    return [t.strip() for t in raw.split(",") if t.strip()]


def _cmd_index(args) -> int:
    corpus = load_resource(args.resource)
    if args.sentences:
        corpus = sentence_split(corpus)
    if args.terms:
        raw_terms = _split_terms(args.terms)
    elif args.pairs:
        raw_terms = [t for pair in load_pairs(args.pairs) for t in pair]
    else:
        raise ConfigError("index needs --terms or --pairs")
    terms = []
    for raw in raw_terms:
        try:
            terms.append(normalize_term(raw, args.case_mode))
        except EmptyTermError:
            print("skipping term with no tokens: %r" % raw, file=sys.stderr)
    if not terms:
        raise ConfigError("no usable terms to index")
    index = InvertedIndex(corpus, args.case_mode)
    index.materialize(terms, workers=args.workers)
    index.save_cache(args.output)
    print(
        "indexed %d distinct terms over %d documents -> %s"
        % (len(index.known_terms()), corpus.n_docs, args.output)
    )
    return EXIT_OK


# -- serve -------------------------------------------------------------


def _serve_settings(args) -> dict:
    settings = dict(_SERVE_KEYS)
    if args.config:
        values = parse_key_value_file(args.config)
        for key in values:
            if key not in _SERVE_KEYS:
                raise ConfigError("unknown setting %r" % key)
        settings.update(values)
    if args.host is not None:
        settings["listen_host"] = args.host
    if args.port is not None:
        settings["listen_port"] = str(args.port)
    if args.store is not None:
        settings["store_path"] = args.store
    if args.stale_timeout is not None:
        settings["stale_timeout"] = str(args.stale_timeout)
    if args.fair_share_limit is not None:
        settings["fair_share_limit"] = str(args.fair_share_limit)
    return settings


def _cmd_serve(args) -> int:
    settings = _serve_settings(args)
    try:
        port = int(settings["listen_port"])
        stale_timeout = float(settings["stale_timeout"])
        fair_share_limit = int(settings["fair_share_limit"])
    except ValueError as exc:
        raise ConfigError("bad serve setting: %s" % exc) from None

    store = SchedulerStore(settings["store_path"])
    core = SchedulerCore(
        store, stale_timeout=stale_timeout, fair_share_limit=fair_share_limit
    )
    service = SchedulerService(core, settings["listen_host"], port)

    def _stop(signum, frame):
        threading.Thread(target=service.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)

    print("scheduler listening on %s" % service.url, flush=True)
    try:
        service.serve_forever()
    finally:
        store.close()
    return EXIT_OK


# -- simulate ----------------------------------------------------------


def _sim_tsv(report) -> str:
    lines = [
        "cluster\tcrashed\ttasks_total\tcached\texecuted\ttakeovers\t"
        "pending_peak\tpredicted_alone\tpredicted_executions\twall_time_seconds"
    ]
    for c in report.per_cluster:
        lines.append(
            "%d\t%s\t%d\t%d\t%d\t%d\t%d\t%d\t%.2f\t%.3f"
            % (
                c.cluster,
                "yes" if c.crashed else "no",
                c.tasks_total,
                c.cached,
                c.executed,
                c.takeovers,
                c.pending_peak,
                c.predicted_alone,
                c.predicted_executions,
                c.wall_time_seconds,
            )
        )
    return "\n".join(lines) + "\n"


def _cmd_simulate(args) -> int:
    if args.config:
        scenario = parse_scenario(args.config)
    else:
        scenario = Scenario()
        validate_scenario(scenario)

    if args.workdir:
        report = run_scenario(scenario, args.workdir)
    else:
        with tempfile.TemporaryDirectory(prefix="coterm-sim-") as workdir:
            report = run_scenario(scenario, workdir)

    print(json.dumps(report.as_dict(), indent=2))
    if args.output:
        out = Path(args.output)
        out.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
        tsv_path = out.with_suffix(".tsv")
        tsv_path.write_text(_sim_tsv(report), encoding="utf-8")
        from .plots import render_sim_figure

        figure_path = out.with_suffix(".png")
        render_sim_figure(report, figure_path)
        print(
            "wrote %s, %s, %s" % (out, tsv_path, figure_path), file=sys.stderr
        )
    return EXIT_OK


# -- bench -------------------------------------------------------------


def _parse_workers_list(raw: str) -> List[int]:
    try:
        values = [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--workers must be a comma list of integers") from None
    if not values or any(v < 1 for v in values):
        raise ConfigError("--workers entries must be >= 1")
    return values


def _cmd_bench(args) -> int:
    workers_list = _parse_workers_list(args.workers)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for mode in modes:
        if mode not in (MODE_INDEXED, MODE_NAIVE):
            raise ConfigError("unknown bench mode %r" % mode)

    if args.resource:
        corpus = load_resource(args.resource)
        vocab = None
    else:
        tmpdir = tempfile.mkdtemp(prefix="coterm-bench-")
        corpus_path = Path(tmpdir) / "corpus.tsv"
        vocab = generate_corpus(corpus_path, args.docs, args.vocab, args.seed)
        corpus = load_resource(corpus_path)

    if args.pair_list:
        raw_pairs = load_pairs(args.pair_list)
    else:
        if vocab is None:
            raise ConfigError("--pair-list is required with --resource")
        raw_pairs = sample_pairs(vocab, args.pairs, args.seed + 1)

    rows = run_benchmark(corpus, raw_pairs, args.case_mode, workers_list, modes)
    text = "\t".join(BENCH_COLUMNS) + "\n" + "".join(r.tsv() + "\n" for r in rows)
    print(text, end="")
    if args.output:
        out = Path(args.output)
        out.write_text(text, encoding="utf-8")
        from .plots import render_benchmark_figure

        figure_path = out.with_suffix(".png")
        render_benchmark_figure(rows, figure_path)
        print("wrote %s, %s" % (out, figure_path), file=sys.stderr)
    return EXIT_OK


# -- gen-corpus --------------------------------------------------------


def _cmd_gen_corpus(args) -> int:
    vocab = generate_corpus(args.output, args.docs, args.vocab, args.seed)
    print("wrote %d documents to %s" % (args.docs, args.output))
    if args.pairs:
        if not args.pairs_output:
            raise ConfigError("--pairs needs --pairs-output")
        pairs = sample_pairs(vocab, args.pairs, args.seed + 1)
        Path(args.pairs_output).write_text(
            "".join("%s\t%s\n" % pair for pair in pairs), encoding="utf-8"
        )
        print("wrote %d pairs to %s" % (len(pairs), args.pairs_output))
    return EXIT_OK


# -- wiring ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coterm",
        description="co-occurrence counting with a shared task cache",
    )
    parser.add_argument(
        "--version", action="version", version="%(prog)s " + __version__
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log more; repeat for debug output",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser(
        "run", parents=[common], help="execute one job from a config file"
    )
    p_run.add_argument("--config", required=True, help="job config file")
    p_run.set_defaults(func=_cmd_run)

    p_index = sub.add_parser(
        "index", parents=[common], help="materialize postings into a cache file"
    )
    p_index.add_argument("--resource", required=True, help="corpus file")
    p_index.add_argument("--output", required=True, help="postings cache to write")
    p_index.add_argument("--terms", help="comma-separated terms to index")
    p_index.add_argument("--pairs", help="pair list whose terms get indexed")
    p_index.add_argument(
        "--case-mode", default=CASE_INSENSITIVE, choices=CASE_MODES
    )
    p_index.add_argument("--workers", type=int, default=1)
    p_index.add_argument(
        "--sentences",
        action="store_true",
        help="split documents into sentences before indexing",
    )
    p_index.set_defaults(func=_cmd_index)

    p_serve = sub.add_parser(
        "serve", parents=[common], help="host the task scheduler over HTTP"
    )
    p_serve.add_argument("--config", help="serve config file")
    p_serve.add_argument("--host", help="listen address")
    p_serve.add_argument("--port", type=int, help="listen port; 0 picks a free one")
    p_serve.add_argument("--store", help="sqlite database path")
    p_serve.add_argument("--stale-timeout", type=float)
    p_serve.add_argument("--fair-share-limit", type=int)
    p_serve.set_defaults(func=_cmd_serve)

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="replay a multi-cluster scenario"
    )
    p_sim.add_argument("--config", help="scenario config file")
    p_sim.add_argument("--workdir", help="directory for generated inputs and outputs")
    p_sim.add_argument(
        "--output",
        help="write the JSON report here plus .tsv and .png siblings",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser(
        "bench", parents=[common], help="time indexed and naive counting"
    )
    p_bench.add_argument("--resource", help="benchmark this corpus file")
    p_bench.add_argument("--pair-list", help="benchmark these pairs")
    p_bench.add_argument("--docs", type=int, default=20000)
    p_bench.add_argument("--vocab", type=int, default=5000)
    p_bench.add_argument("--pairs", type=int, default=50)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--workers", default="1", help="comma list of worker counts")
    p_bench.add_argument(
        "--modes", default="%s,%s" % (MODE_INDEXED, MODE_NAIVE)
    )
    p_bench.add_argument(
        "--case-mode", default=CASE_INSENSITIVE, choices=CASE_MODES
    )
    p_bench.add_argument(
        "--output", help="write the TSV here plus a .png figure sibling"
    )
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser(
        "gen-corpus", parents=[common], help="write a synthetic corpus"
    )
    p_gen.add_argument("--output", required=True)
    p_gen.add_argument("--docs", type=int, default=1000)
    p_gen.add_argument("--vocab", type=int, default=500)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--pairs", type=int, default=0, help="also sample this many pairs")
    p_gen.add_argument("--pairs-output", help="pair list path for --pairs")
    p_gen.set_defaults(func=_cmd_gen_corpus)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except (CotermError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
