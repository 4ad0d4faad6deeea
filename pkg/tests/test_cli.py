import json

from vizscout.cli import main
from vizscout.search import SearchConfig
from vizscout.session import start_session


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_recommend_basic(capsys, flights_path):
    code, out, _ = run_cli(capsys, "recommend", str(flights_path),
                           "--top-k", "5", "--seed", "42")
    assert code == 0
    lines = [l for l in out.strip().splitlines() if l]
    assert lines[0].startswith("rank")
    rows = lines[1:]
    assert len(rows) == 5
    crfs = [float(r.split()[1]) for r in rows]
    assert all(a >= b for a, b in zip(crfs, crfs[1:]))
    assert all("mark " in r for r in rows)


def test_recommend_missing_file(capsys, tmp_path):
    code, _, err = run_cli(capsys, "recommend", str(tmp_path / "missing.csv"))
    assert code == 1
    assert "file not found" in err


def test_recommend_zero_iterations(capsys, flights_path):
    code, out, _ = run_cli(capsys, "recommend", str(flights_path),
                           "--iterations", "0")
    assert code == 0
    assert len(out.strip().splitlines()) == 1  # header only


def test_recommend_emit_specs(capsys, flights_path, tmp_path):
    outdir = tmp_path / "specs"
    code, _, _ = run_cli(capsys, "recommend", str(flights_path), "--top-k", "3",
                         "--seed", "42", "--emit-specs", str(outdir))
    assert code == 0
    files = sorted(outdir.glob("chart_*.json"))
    assert len(files) == 3
    doc = json.loads(files[0].read_text())
    assert doc["spec_version"] == 1 and "data" in doc


def test_recommend_stats_flag(capsys, flights_path):
    code, out, _ = run_cli(capsys, "recommend", str(flights_path), "--stats",
                           "--seed", "1")
    assert code == 0
    stats = json.loads(out.strip().splitlines()[-1])
    assert stats["iterations_run"] == 100


def test_recommend_config_file(capsys, flights_path, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"iterations": 40, "top_k": 2}))
    code, out, _ = run_cli(capsys, "recommend", str(flights_path),
                           "--config", str(cfg), "--stats")
    assert code == 0
    assert json.loads(out.strip().splitlines()[-1])["iterations_run"] == 40
    assert len(out.strip().splitlines()) == 1 + 2 + 1  # header + rows + stats


def test_rules_list(capsys):
    code, out, _ = run_cli(capsys, "rules", "list")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 15
    assert any("pie.no_avg" in l for l in lines)


def test_hints_json(capsys, flights_path):
    code, out, _ = run_cli(capsys, "hints", str(flights_path), "--seed", "42")
    assert code == 0
    hints = json.loads(out)
    assert hints and all({"id", "text", "cost"} <= set(h) for h in hints)
    assert sum(h["cost"] for h in hints) <= 40


def test_replay_roundtrip(capsys, flights, flights_path, tmp_path):
    log = tmp_path / "session.jsonl"
    s = start_session(flights, SearchConfig(iterations=100, seed=42, top_k=5),
                      clock=lambda: 0.0, log_path=log)
    hint = next(h for h in s.history[0].hints_offered
                if h.template_kind == "explore_field_y")
    s.apply_hint(hint.id)
    code, out, _ = run_cli(capsys, "replay", str(log), str(flights_path))
    assert code == 0
    assert "reproduced" in out
    assert "round 1:" in out and "round 2:" in out


def test_replay_detects_wrong_table(capsys, flights, tmp_path):
    log = tmp_path / "session.jsonl"
    start_session(flights, SearchConfig(iterations=50, seed=1, top_k=3),
                  clock=lambda: 0.0, log_path=log)
    other = tmp_path / "other.csv"
    other.write_text("A,B\n1,x\n2,y\n")
    code, _, err = run_cli(capsys, "replay", str(log), str(other))
    assert code == 1
    assert "error" in err
