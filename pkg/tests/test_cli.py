import json

import pytest

from pollsim.cli import build_parser, main
from pollsim.runner import data_path, default_config_path


def test_parser_flags():
    args = build_parser().parse_args(["run", "--backend", "mock", "--n", "3", "--seed", "9", "--out", "x", "--dry-run"])
    assert (args.command, args.backend, args.n, args.seed, args.out, args.dry_run) == ("run", "mock", 3, 9, "x", True)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--backend", "other"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--api-key", "sk"])  # credentials come only from the environment


def test_plan_prints_summary(tmp_path, capsys):
    assert main(["plan", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "80 cells × 20 replicates × 7 questions = 11,200 tasks" in out
    assert "estimated cost: $" in out


def test_run_parse_compare(tmp_path, capsys):
    cfg = json.loads((default_config_path()).read_text())
    data = data_path
    cfg.update(
        questionnaire=str(data("questionnaire.json")),
        bootstrap_reps=20,
        groupings=["ideology"],
        output_dir=str(tmp_path / "runs"),
    )
    cfg["backend"]["mock_model"] = str(data("mock_model.json"))
    cfg["human"]["csv"] = str(data("ces_synthetic_2022.csv"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--n", "1"]) == 0
    assert main(["parse", "--config", str(path), "--n", "1"]) == 0
    assert main(["compare", "--config", str(path), "--n", "1"]) == 0
    out = capsys.readouterr().out
    assert "queried 560" in out and "failure rate 0.00%" in out and "rho" in out


def test_errors_exit_nonzero(tmp_path, capsys, monkeypatch):
    assert main(["plan", "--config", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["compare", "--out", str(tmp_path)]) == 1
    assert "pollsim run" in capsys.readouterr().err
    monkeypatch.delenv("POLLSIM_API_KEY", raising=False)
    assert main(["run", "--backend", "live", "--n", "1", "--out", str(tmp_path)]) == 1
    assert "POLLSIM_API_KEY" in capsys.readouterr().err
