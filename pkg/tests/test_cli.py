import json
import subprocess
import sys

import pytest

from helt.cli import main

TINY = {
    "seed": 7,
    "env": {"horizon": 120},
    "learner": {"n_steps": 20, "batch_size": 40, "minibatch_size": 20, "hidden": 8},
    "league": {"iteration_timeout_steps": 40, "total_iterations": 2},
    "evaluation": {"n_matches": 2},
}


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    assert main(["league", "run", "--config", str(cfg), "--out", str(root / "a")]) == 0
    return root, cfg


def test_pool_gen(tmp_path):
    out = tmp_path / "pool.jsonl"
    assert main(["pool", "gen", "--out", str(out), "--per-level", "2", "--seed", "3"]) == 0
    assert len(out.read_text().splitlines()) == 8
    manifest = json.loads((tmp_path / "pool.jsonl.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["files"] == ["pool.jsonl"]


def test_league_run_is_byte_identical(tiny_run):
    root, cfg = tiny_run
    assert main(["league", "run", "--config", str(cfg), "--out", str(root / "b")]) == 0
    a, b = root / "a", root / "b"
    for name in ("metrics.csv", "events.jsonl", "league.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert len((a / "metrics.csv").read_text().splitlines()) == 1 + 6
    manifest = json.loads((a / "run.manifest.json").read_text())
    assert manifest["seed"] == 7 and len(manifest["config_hash"]) == 64


def test_eval_and_report(tiny_run):
    run = tiny_run[0] / "a"
    assert main(["eval", "elo", "--run", str(run), "--matches", "2"]) == 0
    assert (run / "elo.csv").read_text().startswith("agent,elo,elo_mean")
    assert main(["eval", "behavior", "--run", str(run), "--matches", "3"]) == 0
    assert len((run / "matches.jsonl").read_text().splitlines()) == 6
    assert main(["report", "--run", str(run)]) == 0
    rows = (run / "cdf_attack.csv").read_text().splitlines()[1:]
    by_pop = {}
    for row in rows:
        name, score, cdf = row.split(",")
        by_pop.setdefault(name, []).append((float(score), float(cdf)))
    assert set(by_pop) == {"main", "aggressive", "random"}
    for pts in by_pop.values():
        assert all(p[1] <= q[1] and p[0] <= q[0] for p, q in zip(pts, pts[1:]))
        assert pts[-1][1] == 1.0


def test_generalization_without_held_out_is_named_error(tmp_path, capsys):
    cfg = tmp_path / "all.json"
    cfg.write_text(json.dumps({**TINY, "league": {**TINY["league"], "total_iterations": 0},
                               "subset": {"level_counts": [3, 3, 3, 3]}}))
    assert main(["league", "run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    code = main(["eval", "generalization", "--run", str(tmp_path / "r"), "--matches", "2"])
    assert code == 1
    assert "subset" in capsys.readouterr().err


def test_usage_errors_exit_two():
    for argv in (["bogus"], ["league", "run"], ["pool", "gen", "--out", "x", "--nope"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_config_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"league": {"win_threshold": 2}}))
    assert main(["league", "run", "--config", str(bad)]) == 1
    assert "league.win_threshold" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "helt", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.startswith("helt ")
