import csv
import io

import pytest

from figure_lines import FIGURE_LINES
from roundhash.cli import main
from roundhash.experiments import DEFAULT_SEED


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_table_check_prints_every_figure_line(capsys):
    code, out = run(capsys, "table-check", "--s0", "3")
    assert code == 0
    lines = out.splitlines()
    for _, seq in FIGURE_LINES:
        assert seq in lines
    assert lines[-2].startswith("mapper-vs-oracle: ok")
    assert lines[-1].startswith("placement: ok")


def test_table_check_inserts(capsys):
    _, out = run(capsys, "table-check", "--s0", "3", "--inserts", "0")
    assert out.splitlines()[0] == "0 1 2"


def test_table_check_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr("roundhash.experiments.table_check", lambda s0, n, seed: (["broken"], False))
    assert main(["table-check", "--s0", "2"]) == 1


def test_dist_stats_row(capsys):
    code, out = run(capsys, "dist-stats", "--strategy", "round", "--s0", "1", "--buckets", "1", "--samples", "10")
    assert code == 0
    header, row = rows(out)
    assert header[0] == "strategy" and header[-1] == "percentile_ratio"
    assert row[:4] == ["round", "1", "1", "10"]
    assert [float(v) for v in row[5:]] == [1.0] * 5


def test_jump_rejects_s0():
    with pytest.raises(SystemExit) as err:
        main(["dist-stats", "--strategy", "jump", "--s0", "4", "--buckets", "10"])
    assert err.value.code == 2


def test_round_needs_s0():
    with pytest.raises(SystemExit):
        main(["dist-stats", "--strategy", "linear", "--buckets", "10"])


def test_value_errors_become_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["dist-stats", "--strategy", "round", "--s0", "4", "--buckets", "100", "--samples", "50"])
    assert err.value.code == 2
    with pytest.raises(SystemExit):
        main(["stash-trace", "--B", "8", "--epsilon", "0"])


def test_bench_header_only_without_calls(capsys):
    code, out = run(capsys, "bench-hash", "--strategy", "jump", "--calls", "0")
    assert code == 0 and out == "buckets,ns_per_call,sum_ns_per_element,relative\n"


def test_bench_rows(capsys):
    main(["bench-hash", "--strategy", "round", "--s0", "8",
          "--min-buckets", "16", "--max-buckets", "64", "--calls", "500", "--repeats", "1"])
    captured = capsys.readouterr()
    assert [r[0] for r in rows(captured.out)[1:]] == ["16", "32", "64"]
    assert captured.err.startswith("checksum 0x")


def test_stash_outputs_are_reproducible(tmp_path, capsys):
    args = ["stash-sim", "--B", "32", "--epsilon", "1/10", "--s0", "4", "--max-n-blocks", "64", "--min-n-blocks", "8"]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header, row = rows((tmp_path / "a.csv").read_text())
    assert header == ["B", "epsilon", "s0", "n", "measured", "predicted"]
    assert row[:4] == ["32", "0.1", "4", "2048"]
    main(args + ["--seed", "5", "--out", str(tmp_path / "c.csv")])
    assert (tmp_path / "c.csv").read_bytes() != (tmp_path / "a.csv").read_bytes()


def test_stash_trace_csv(capsys):
    _, out = run(capsys, "stash-trace", "--B", "8", "--epsilon", "0.25", "--max-n-blocks", "16", "--every", "4")
    table = rows(out)
    assert table[0] == ["n", "stash", "q", "s"]
    ns = [int(r[0]) for r in table[1:]]
    assert ns == sorted(set(ns)) and ns[-1] == 128
    _, out = run(capsys, "stash-trace", "--B", "8", "--epsilon", "0.25", "--max-n-blocks", "0")
    assert out == "n,stash,q,s\n"


def test_seed_flag_parses_hex(capsys):
    code, _ = run(capsys, "table-check", "--s0", "2", "--inserts", "3", "--seed", "0xff")
    assert code == 0
    with pytest.raises(SystemExit):
        main(["table-check", "--s0", "2", "--seed", str(2**64)])
    assert DEFAULT_SEED < 2**64
