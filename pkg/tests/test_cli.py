import csv
import io

import pytest

from espindex import corpus
from espindex.cli import main
from espindex.search import naive_count, naive_positions


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    text = corpus.english_like(30000, seed=11)
    src = root / "t.txt"
    src.write_bytes(text)
    return root, src, text


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(out):
    return {r["key"]: r["value"] for r in csv.DictReader(io.StringIO(out), delimiter="\t")}


def test_build_deterministic(files, capsys):
    root, src, text = files
    a, b = root / "a.idx", root / "b.idx"
    code, out, _ = run(capsys, "build", "-i", src, "-o", a, "--lengths")
    assert code == 0
    rows = kv(out)
    assert int(rows["u"]) == len(text) and float(rows["bits_per_symbol"]) > 0
    run(capsys, "build", "-i", src, "-o", b, "--lengths")
    assert a.read_bytes() == b.read_bytes()


def test_epsilon_tradeoff(files, capsys):
    root, src, text = files
    sizes = {}
    for eps in ("1", "1/4"):
        path = root / f"e{eps.replace('/', '_')}.idx"
        run(capsys, "build", "-i", src, "-o", path, "--epsilon", eps)
        sizes[eps] = path.stat().st_size
        _, out, _ = run(capsys, "count", "-x", path, "-p", "the")
        assert int(out) == naive_count(text, b"the")
    assert sizes["1/4"] < sizes["1"]


def test_count_pattern_file(files, capsys):
    root, src, text = files
    idx = root / "a.idx"
    if not idx.exists():
        run(capsys, "build", "-i", src, "-o", idx, "--lengths")
    pats = [text[i:i + n] for i, n in ((0, 5), (100, 12), (2000, 40))] + [b"qqqqzzzz"]
    pats = [p for p in pats if b"\n" not in p]
    pf = root / "pats.txt"
    pf.write_bytes(b"\n".join(pats) + b"\n")
    for strategy in ("adjacency", "core-verify"):
        code, out, _ = run(capsys, "count", "-x", idx, "-P", pf, "--strategy", strategy)
        assert code == 0
        assert [int(x) for x in out.split()] == [naive_count(text, p) for p in pats]


def test_locate_extract(files, capsys):
    root, src, text = files
    idx = root / "a.idx"
    _, out, _ = run(capsys, "locate", "-x", idx, "-p", "he")
    assert [int(x) - 1 for x in out.split()] == naive_positions(text, b"he")
    code = main(["extract", "-x", str(idx), "--from", "11", "--to", "30"])
    assert code == 0
    code, _, err = run(capsys, "extract", "-x", idx, "--from", "5", "--to", str(len(text) + 1))
    assert code == 2 and "outside" in err


def test_missing_lengths(files, capsys):
    root, src, _ = files
    bare = root / "bare.idx"
    run(capsys, "build", "-i", src, "-o", bare)
    code, _, err = run(capsys, "count", "-x", bare, "-p", "abc", "--strategy", "core-verify")
    assert code == 2 and "lengths" in err
    code, _, err = run(capsys, "locate", "-x", bare, "-p", "abc")
    assert code == 2


def test_stats_identity(files, capsys, tmp_path):
    root, src, _ = files
    idx = root / "a.idx"
    fig = tmp_path / "space.png"
    code, out, _ = run(capsys, "stats", "-x", idx, "--plot", fig)
    rows = kv(out)
    assert code == 0 and fig.stat().st_size > 0
    assert int(rows["bytes.total"]) == int(rows["file_bytes"]) == idx.stat().st_size
    parts = [k for k in rows if k.startswith("bytes.") and k != "bytes.total"]
    assert sum(int(rows[k]) for k in parts) == idx.stat().st_size
    for key in ("term.nodes.perm_term", "term.nodes.louds_term", "term.o_n_term", "term.vars.bound"):
        assert key in rows


def test_bench(files, capsys, tmp_path):
    root, src, _ = files
    idx = root / "a.idx"
    fig = tmp_path / "bench.png"
    out_csv = tmp_path / "bench.csv"
    argv = ["bench", "-x", idx, "--lengths-list", "10,100", "--trials", "20", "--seed", "3",
            "-o", out_csv, "--plot", fig]
    assert run(capsys, *argv)[0] == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert [(r["length"], r["strategy"]) for r in rows] == [
        ("10", "adjacency"), ("10", "core-verify"), ("100", "adjacency"), ("100", "core-verify")]
    assert fig.stat().st_size > 0
    first = [r["mean_count"] for r in rows]
    run(capsys, *argv)
    assert [r["mean_count"] for r in csv.DictReader(out_csv.open())] == first


def test_bad_arguments(files, capsys):
    root, src, _ = files
    with pytest.raises(SystemExit):
        main(["build", "-i", str(src), "-o", str(root / "z.idx"), "--epsilon", "3/2"])
    empty = root / "empty.txt"
    empty.write_bytes(b"")
    assert run(capsys, "build", "-i", empty, "-o", root / "z.idx")[0] == 2
    assert run(capsys, "count", "-x", root / "nope.idx", "-p", "a")[0] == 1


def test_corpus_command(tmp_path, capsys):
    out = tmp_path / "dna.txt"
    assert run(capsys, "corpus", "--kind", "dna", "--size", "1000", "--seed", "2", "-o", out)[0] == 0
    assert out.read_bytes() == corpus.dna_like(1000, 2)
