"""Command line front end: build, count, locate, extract, stats, bench."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import corpus
from .esp import esp_comp
from .index import EspIndex, IndexFormatError, UnsupportedOperation, build_index
from .search import Searcher

log = logging.getLogger("espindex")


def _fraction(text: str) -> Fraction:
    try:
        eps = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if not 0 < eps <= 1:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1]")
    return eps


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("lengths must be positive")
    return out


def _emit(rows, fmt: str, out=None):
    """Key/value rows as TSV or CSV."""
    out = out or sys.stdout
    writer = csv.writer(out, delimiter="\t" if fmt == "tsv" else ",", lineterminator="\n")
    writer.writerow(["key", "value"])
    for k, v in rows:
        writer.writerow([k, v])


def _patterns(args) -> list[bytes]:
    if args.pattern is not None:
        return [args.pattern.encode("latin-1") if isinstance(args.pattern, str) else args.pattern]
    data = Path(args.pattern_file).read_bytes()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def cmd_build(args) -> int:
    text = Path(args.input).read_bytes()
    if not text:
        print("error: input is empty", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    d = esp_comp(text)
    idx = build_index(d, args.epsilon, lengths=args.lengths)
    size = idx.save(args.output)
    secs = time.perf_counter() - t0
    _emit([
        ("u", len(text)),
        ("n", d.n_vars),
        ("nodes", idx.header.nodes),
        ("levels", d.height),
        ("epsilon", str(idx.header.eps)),
        ("file_bytes", size),
        ("bits_per_symbol", f"{8 * size / len(text):.4f}"),
        ("build_seconds", f"{secs:.3f}"),
    ], args.format)
    return 0


def _load(path) -> EspIndex:
    return EspIndex.load(path)


def cmd_count(args) -> int:
    s = Searcher(_load(args.index))
    for p in _patterns(args):
        print(s.count(p, args.strategy, args.prefix_rate))
    return 0


def cmd_locate(args) -> int:
    s = Searcher(_load(args.index))
    for p in _patterns(args):
        pos = s.locate(p, args.strategy, args.prefix_rate)
        print(" ".join(str(int(x) + 1) for x in pos))
    return 0


def cmd_extract(args) -> int:
    s = Searcher(_load(args.index))
    sys.stdout.buffer.write(s.extract(args.start, args.stop))
    sys.stdout.buffer.flush()
    return 0


def stats_rows(idx: EspIndex, file_bytes: int | None = None):
    h = idx.header
    rows = [
        ("u", h.u), ("n", h.n), ("sigma_used", h.sigma_used), ("nodes", h.nodes),
        ("epsilon", str(h.eps)), ("lstar", h.lstar), ("lengths_flag", int(idx.has_lengths)),
    ]
    rows += [(f"bits.{k}", v) for k, v in idx.space().items()]
    rows += [(f"term.{k}", v) for k, v in idx.bound_terms().items()]
    sections = idx.section_sizes()
    rows += [(f"bytes.{k}", v) for k, v in sections.items()]
    rows.append(("bytes.total", sum(sections.values())))
    if file_bytes is not None:
        rows.append(("file_bytes", file_bytes))
    return rows


def cmd_stats(args) -> int:
    idx = _load(args.index)
    rows = stats_rows(idx, Path(args.index).stat().st_size)
    _emit(rows, args.format)
    if args.plot:
        from .report import plot_space

        space = idx.space()
        space["bound"] = idx.bound_terms()["nodes.bound"]
        plot_space(space, args.plot, title=Path(args.index).name)
    return 0


def bench_rows(idx: EspIndex, lengths, trials: int, seed: int, strategies, prefix_rate=0.01,
               workers: int = 1):
    s = Searcher(idx)
    rng = np.random.default_rng(seed)
    u = idx.u
    rows = []
    for length in lengths:
        if length > u:
            log.warning("skipping length %d > text length %d", length, u)
            continue
        starts = rng.integers(0, u - length + 1, trials)
        pats = [s.decode(idx.start, int(a), int(a) + length) for a in starts]
        for strategy in strategies:
            def run(p, strategy=strategy):
                t0 = time.perf_counter()
                c = s.count(p, strategy, prefix_rate)
                return time.perf_counter() - t0, c

            if workers > 1:
                with ThreadPoolExecutor(workers) as ex:
                    res = list(ex.map(run, pats))
            else:
                res = [run(p) for p in pats]
            # inverse work on a cold searcher, so memo tables do not hide it
            cold = Searcher(idx)
            with idx.perm.tally() as tally:
                for p in pats[: min(50, len(pats))]:
                    cold.count(p, strategy, prefix_rate)
            rows.append({
                "length": length,
                "strategy": strategy,
                "epsilon": str(idx.header.eps),
                "trials": trials,
                "mean_ms": 1000 * float(np.mean([r[0] for r in res])),
                "mean_count": float(np.mean([r[1] for r in res])),
                "inverse_reads_per_call": tally[0] / max(tally[1], 1),
            })
    return rows


def cmd_bench(args) -> int:
    idx = _load(args.index)
    strategies = ["adjacency", "core-verify"] if args.strategy == "both" else [args.strategy]
    if "core-verify" in strategies and not idx.has_lengths:
        print("error: core-verify needs an index built with --lengths", file=sys.stderr)
        return 2
    rows = bench_rows(idx, args.lengths_list, args.trials, args.seed, strategies,
                      args.prefix_rate, args.workers)
    fields = ["length", "strategy", "epsilon", "trials", "mean_ms", "mean_count",
              "inverse_reads_per_call"]
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if args.output:
            out.close()
    if args.plot:
        from .report import plot_bench

        plot_bench(rows, args.plot, title=Path(args.index).name)
    return 0


def cmd_corpus(args) -> int:
    data = corpus.generate(args.kind, args.size, args.seed)
    Path(args.output).write_bytes(data)
    return 0


def _add_pattern_args(p):
    p.add_argument("-x", "--index", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("-p", "--pattern", type=lambda s: s.encode("utf-8"))
    g.add_argument("-P", "--pattern-file")
    p.add_argument("--strategy", choices=["adjacency", "core-verify"], default="adjacency")
    p.add_argument("--prefix-rate", type=float, default=0.01)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="espindex", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="compress a file into an index")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--epsilon", type=_fraction, default=Fraction(1, 4))
    p.add_argument("--lengths", action="store_true", help="store yield lengths (locate/extract)")
    p.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("count", help="count occurrences, one line per pattern")
    _add_pattern_args(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("locate", help="1-based start positions, one line per pattern")
    _add_pattern_args(p)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("extract", help="print text positions FROM..TO (1-based, inclusive)")
    p.add_argument("-x", "--index", required=True)
    p.add_argument("--from", dest="start", type=int, required=True)
    p.add_argument("--to", dest="stop", type=int, required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", help="space accounting")
    p.add_argument("-x", "--index", required=True)
    p.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p.add_argument("--plot", help="write a space breakdown figure here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="mean count time per pattern length")
    p.add_argument("-x", "--index", required=True)
    p.add_argument("--lengths-list", type=_int_list, default=[10, 100, 1000, 10000])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=["adjacency", "core-verify", "both"], default="both")
    p.add_argument("--prefix-rate", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="CSV file (stdout by default)")
    p.add_argument("--plot", help="write a time-vs-length figure here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("corpus", help="write a synthetic test corpus")
    p.add_argument("--kind", choices=sorted(corpus.KINDS), required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UnsupportedOperation, IndexFormatError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
