import json

import pytest

from streamrules import catalog
from streamrules.cli import main
from streamrules.model import Stream
from streamrules.streamio import write_stream


@pytest.fixture()
def q2_paths(tmp_path):
    program = catalog.program_path("q2")
    ticks = {
        t: [
            ("traffic", "ma", 40.0, 1.0),
            ("pollution", "mb", 10.0, 1.0),
            ("traffic", "ma", 160.0, 2.0),
            ("pollution", "mb", 200.0, 2.0),
        ]
        + ([("parking", "mc", 1.0, 1.0)] if t == 2 else [])
        for t in range(5)
    }
    stream_path = tmp_path / "stream.ndjson"
    write_stream(Stream(0, 4, ticks), stream_path)
    return str(program), str(stream_path)


def test_run_emits_ndjson_per_tick(q2_paths, capsys):
    program, stream = q2_paths
    code = main(
        ["run", "--program", program, "--stream", stream, "--outputs", "x",
         "--engine", "incremental"]
    )
    assert code == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
    assert [l["t"] for l in lines] == [0, 1, 2, 3, 4]
    assert all("latency_us" in l for l in lines)
    assert lines[2]["answers"] == [["x", 1.0, 2.0]]
    assert lines[0]["answers"] == []


def test_run_both_engines_agree_exit_zero(q2_paths, capsys):
    program, stream = q2_paths
    code = main(
        ["run", "--program", program, "--stream", stream, "--outputs", "x",
         "--engine", "both"]
    )
    assert code == 0


def test_run_report_file(q2_paths, tmp_path):
    program, stream = q2_paths
    report = tmp_path / "out.ndjson"
    code = main(
        ["run", "--program", program, "--stream", stream, "--outputs", "x",
         "--engine", "naive", "--report", str(report)]
    )
    assert code == 0
    assert len(report.read_text().strip().splitlines()) == 5


def test_missing_program_file_exit_one(q2_paths, capsys):
    _, stream = q2_paths
    code = main(["run", "--program", "/nope/missing.rules", "--stream", stream])
    assert code == 1
    assert "missing.rules" in capsys.readouterr().err


def test_parse_error_exit_one(tmp_path, q2_paths, capsys):
    _, stream = q2_paths
    bad = tmp_path / "bad.rules"
    bad.write_text("p(X) :- q(Y)")
    code = main(["run", "--program", str(bad), "--stream", stream])
    assert code == 1
    assert "parse error" in capsys.readouterr().err


def test_usage_error_exit_one(q2_paths, capsys):
    program, stream = q2_paths
    with pytest.raises(SystemExit) as exc:
        main(["run", "--program", program, "--stream", stream, "--engine", "warp"])
    assert exc.value.code == 1


def test_unknown_outputs_exit_one(q2_paths, capsys):
    program, stream = q2_paths
    code = main(
        ["run", "--program", program, "--stream", stream, "--outputs", "zzz"]
    )
    assert code == 1


def test_engine_mismatch_exit_two(q2_paths, monkeypatch, capsys):
    # Force a divergence to exercise the mismatch path.
    import streamrules.cli as cli_mod

    program, stream = q2_paths
    real = cli_mod.push_tick

    def broken(state, t, facts):
        result = real(state, t, facts)
        if t == 3:
            return type(result)(result.time, {}, result.at_derivations)
        return result

    monkeypatch.setattr(cli_mod, "push_tick", broken)
    code = main(
        ["run", "--program", program, "--stream", stream, "--outputs", "x",
         "--engine", "both"]
    )
    assert code == 2
    assert "mismatch at t=3" in capsys.readouterr().err


def test_bench_json_report(q2_paths, tmp_path, capsys):
    program, stream = q2_paths
    out = tmp_path / "bench.json"
    code = main(
        ["bench", "--program", program, "--stream", stream, "--warmup", "1",
         "--output", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["naive"]["ticks"] == 4
    assert report["incremental"]["ticks"] == 4
    assert "speedup" in report and "rules_fired" in report


def test_bench_empty_stream(tmp_path, capsys):
    program = catalog.program_path("q2")
    empty = tmp_path / "empty.ndjson"
    empty.write_text("")
    code = main(["bench", "--program", str(program), "--stream", str(empty), "--warmup", "0"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["naive"] == {"ticks": 0}


def test_export_writes_dataset_and_summary(q2_paths, tmp_path, capsys):
    program = str(catalog.program_path("q2"))
    config = str(catalog.config_path("q2"))
    out = tmp_path / "ds.ndjson"
    code = main(
        ["export", "--program", program, "--synthetic", config, "--outputs", "x",
         "--task", "multilabel", "--window", "3",
         "--universe", "1,2,3,4,5,6,7,8,9,10", "--out", str(out)]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "samples=998" in printed and "label histogram" in printed
    assert out.exists() and (tmp_path / "ds.ndjson.meta.json").exists()


def test_check_small_run_exit_zero(capsys):
    code = main(["check", "--queries", "q2,q4", "--streams", "2", "--ticks", "25"])
    assert code == 0
    assert "0 mismatch(es)" in capsys.readouterr().out


def test_check_unknown_query(capsys):
    code = main(["check", "--queries", "q9"])
    assert code == 1


def test_synthetic_source(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "ticks": 10, "scenario": "conflict"}))
    program = str(catalog.program_path("q2"))
    code = main(
        ["run", "--program", program, "--synthetic", str(cfg), "--outputs", "x"]
    )
    assert code == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 10
