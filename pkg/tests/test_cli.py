import json

import pytest

from pktsched import cli
from pktsched.adversary import LB_RATIO


def call(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_is_deterministic(capsys, tmp_path):
    a = call(capsys, "gen", "--seed", "5", "--s", "3", "--count", "8")[1]
    b = call(capsys, "gen", "--seed", "5", "--s", "3", "--count", "8")[1]
    assert a == b
    data = json.loads(a)
    assert data["s_bound"] == 3 and len(data["packets"]) == 8
    path = tmp_path / "inst.json"
    assert call(capsys, "gen", "--seed", "5", "--s", "3", "--count", "8", "--out", str(path))[0] == 0
    assert json.loads(path.read_text()) == data


def test_opt_on_bundled_example(capsys):
    code, out, _ = call(capsys, "opt", "--instance", "bundled:paper_s3", "--json")
    assert code == 0
    assert json.loads(out)["weight"] == 4.418033988749895
    code, out, _ = call(capsys, "opt", "--instance", "bundled:paper_s3", "--oracle")
    assert code == 0 and out.startswith("weight 4.418033988749895")


def test_simulate_trace_schema(capsys, tmp_path):
    inst, path = tmp_path / "inst.json", tmp_path / "trace.json"
    call(capsys, "gen", "--seed", "1", "--s", "2", "--count", "9", "--out", str(inst))
    code, out, _ = call(capsys, "simulate", "--alg", "lcalpha", "--instance", str(inst), "--trace", str(path))
    assert code == 0 and "lcalpha" in out
    trace = json.loads(path.read_text())
    assert trace["policy"] == "lcalpha" and trace["lookahead"] == 1
    step = trace["steps"][0]
    assert {"slot", "packet", "kind", "pending", "lookahead", "plan", "plan_weights"} <= set(step)
    assert set(trace["schedule"]) <= {str(s["slot"]) for s in trace["steps"]}


def test_simulate_json(capsys):
    code, out, _ = call(capsys, "simulate", "--alg", "greedy", "--instance", "bundled:paper_s3", "--json")
    assert code == 0
    assert json.loads(out)["schedule"] == {"1": 3, "2": 2}


def test_lowerbound(capsys, tmp_path):
    path = tmp_path / "lb.json"
    code, out, _ = call(capsys, "lowerbound", "--alg", "lcalpha", "--n", "50", "--report", str(path))
    assert code == 0
    report = json.loads(path.read_text())
    assert report["ratio"] >= 1.27
    assert report["ratio"] == pytest.approx(report["formula_ratio"], abs=1e-9)
    assert report["limit"] == LB_RATIO


def test_audit_commands(capsys):
    code, out, _ = call(capsys, "audit", "--alg", "toggleh", "--instance", "bundled:paper_s3", "--json")
    assert code == 0 and json.loads(out)["verdict"] == "pass"
    code, out, _ = call(capsys, "audit", "--alg", "lcalpha", "--seed-fuzz", "50", "--json")
    assert code == 0
    body = json.loads(out)
    assert body["instances"] == 50 and body["failed"] == 0


def test_bench_empty(capsys):
    code, out, _ = call(capsys, "bench", "--alg", "greedy", "-N", "0", "--json")
    assert code == 0
    agg = json.loads(out)
    assert agg["count"] == 0 and agg["count_exceeding"] == 0


def test_bench_csv_deterministic(capsys, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p, threads in zip(paths, ("1", "3")):
        code, *_ = call(capsys, "bench", "--alg", "toggleh", "-N", "40", "--seed", "2",
                        "--threads", threads, "--csv", str(p))
        assert code == 0
    a, b = (p.read_text() for p in paths)
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "instance_id,alg,opt,ratio" and len(lines) == 41


def test_bench_bound_violation(capsys):
    code, out, _ = call(capsys, "bench", "--alg", "greedy", "-N", "30", "--s", "3", "--bound", "1.0", "--json")
    assert code == 1
    assert json.loads(out)["count_exceeding"] > 0


def test_usage_errors(capsys, tmp_path):
    assert call(capsys, "bench", "--alg", "nonsense", "-N", "1")[0] == 2
    assert call(capsys, "opt", "--instance", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"packets": [{"id": 0, "r": 3, "d": 1, "w": 1.0}]}')
    code, _, err = call(capsys, "opt", "--instance", str(bad))
    assert code == 2 and "error" in err
    assert call(capsys, "opt", "--instance", "bundled:nope")[0] == 2
    assert call(capsys, "audit", "--alg", "toggleh")[0] == 2
    # four-slot windows are outside what lcalpha handles
    assert call(capsys, "simulate", "--alg", "lcalpha", "--instance", "bundled:paper_s3")[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--alg", "greedy"])
    assert exc.value.code == 2


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PKTSCHED_THREADS", "2")
    assert cli._threads(8) == 2
    assert cli._threads(None) == 2
    monkeypatch.delenv("PKTSCHED_THREADS")
    assert cli._threads(None) == 1
