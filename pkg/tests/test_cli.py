import json
import subprocess
import sys

import pytest

from martensim.cli import UsageError, load_spec, main


def sim(tmp_path, *extra):
    return main(["simulate", "--out", str(tmp_path), "--max-steps", "4", "--seed", "7",
                 "--threads", "1", *extra])


def test_simulate_writes_outputs(tmp_path, capsys):
    assert sim(tmp_path) == 0
    assert "seed 7" in capsys.readouterr().out
    lines = (tmp_path / "events.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["k"] == 1
    assert (tmp_path / "series.csv").read_text().startswith("k,volume,n_components,n_events\n")
    st = json.loads((tmp_path / "final_state.json").read_text())
    assert st["config"]["seed"] == 7 and st["k"] == 4


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    sim(a)
    sim(b)
    for name in ("events.jsonl", "series.csv", "final_state.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_ensemble_suffixes(tmp_path):
    assert sim(tmp_path, "--n-seeds", "2", "--base-seed", "3") == 0
    assert (tmp_path / "events_seed3.jsonl").exists()
    assert (tmp_path / "final_state_seed4.json").exists()


def test_simulate_sobolev_series(tmp_path):
    assert sim(tmp_path, "--sobolev") == 0
    head = (tmp_path / "sobolev.csv").read_text().splitlines()[0]
    assert head == "k,lp_term,gagliardo_estimate,stderr,cutoff_bound,bound_rhs"


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"algorithm": "B", "max_steps": 5, "seed": 1,
                               "output": {"dir": str(tmp_path / "o")}}))
    assert main(["simulate", "--config", str(cfg), "--seed", "2"]) == 0
    st = json.loads((tmp_path / "o" / "final_state.json").read_text())
    assert st["config"]["algorithm"] == "B" and st["config"]["seed"] == 2


@pytest.mark.parametrize("doc,msg", [
    ({"bogus": 1}, "unknown config key"),
    ({"stats": {"nope": 1}}, "unknown config key stats.nope"),
    ({"delta": "0.4"}, "unexpected type"),
    ({"max_steps": True}, "unexpected type"),
    ({"output": 3}, "must be an object"),
])
def test_bad_config(doc, msg):
    with pytest.raises(UsageError, match=msg):
        load_spec(text=json.dumps(doc))


def test_bad_json_location(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "delta": 0.4,\n}')
    assert main(["simulate", "--config", str(cfg), "--max-steps", "1"]) == 2
    assert f"{cfg}:3:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "--algorithm", "Amod", "--p", "0.4", "--max-steps", "2"],
    ["simulate", "--delta", "1.5", "--max-steps", "2"],
    ["simulate"],
    ["stats"],
    ["render"],
    ["verify", "fast", "--only", "1", "--inject", "nothing=1"],
])
def test_usage_errors_exit_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_stats_and_render(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--delta", "0.05", "--max-steps", "9",
                 "--seed", "3", "--threads", "1"]) == 0
    st = str(tmp_path / "final_state.json")
    assert main(["stats", "--input", st, st, "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["n_inputs"] == 2 and fit["normalization"] == "density"
    assert 0 < fit["mean_covered_fraction"] < 1
    assert (tmp_path / "histogram.csv").read_text().startswith("bin_lo,bin_hi,count,density")
    rows = (tmp_path / "buckets.csv").read_text().splitlines()
    assert rows[0] == "class,volume" and rows[-1].startswith("total,")
    total = float(rows[-1].split(",")[1])
    assert sum(float(r.split(",")[1]) for r in rows[1:-1]) == pytest.approx(total)

    img = tmp_path / "run.ppm"
    assert main(["render", "--state", st, "--width", "32", "--height", "16",
                 "--image", str(img)]) == 0
    assert img.read_bytes().startswith(b"P6\n32 16\n255\n")
    assert len(img.read_bytes()) == len(b"P6\n32 16\n255\n") + 32 * 16 * 3


def test_render_block(tmp_path):
    img = tmp_path / "h.ppm"
    assert main(["render", "--block", "H", "--width", "50", "--height", "20",
                 "--image", str(img)]) == 0
    assert img.read_bytes().startswith(b"P6\n50 20\n255\n")


def test_stats_combine(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps({"exponent": 1.0}))
    b.write_text(json.dumps({"exponent": 2.107}))
    capsys.readouterr()
    assert main(["stats", "--combine", str(a), str(b)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["combined_exponent"] == pytest.approx(-2.107) and out["branch"] == "inner"


def test_verify_pass_and_injected_failure(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["verify", "fast", "--only", "1", "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["passed"] is True
    assert main(["verify", "fast", "--only", "2", "--inject", "cA=0.7",
                 "--report", str(rep)]) == 1
    doc = json.loads(rep.read_text())
    assert doc["passed"] is False


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "martensim.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "simulate" in out.stdout
