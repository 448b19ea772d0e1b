import csv
from pathlib import Path

import pytest

from normdiff.cli import build_parser, main
from normdiff.config import COMMANDS, SCHEMA, ConfigError, RunConfig

GOLDEN = Path(__file__).parent / "golden" / "help.txt"

K2 = """
[game]
a = 3
b = 2
c = 0
d = 0
[model]
beta = 1
[graph]
family = complete
size = 2
[run]
stop = steps:100
seed = 7
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[-1].startswith("# version=")
    return list(csv.reader(lines[:-1]))


def test_help_matches_golden():
    assert build_parser().format_help() == GOLDEN.read_text()


def test_help_lists_commands_and_keys():
    text = build_parser().format_help()
    for cmd in COMMANDS:
        assert cmd in text
    for section, keys in SCHEMA.items():
        for key in keys:
            assert f"[{section}] {key}:" in text


def test_simulate_minimal(tmp_path, capsys):
    cfg = write(tmp_path, K2)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a" / "trace.csv")
    assert rows[0] == ["step", "vertex", "pre", "post", "countA", "potential"]
    assert len(rows) == 101
    assert "rounds=" in capsys.readouterr().out


def test_simulate_is_byte_identical(tmp_path):
    cfg = write(tmp_path, K2)
    for d in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_seed_flag_changes_trace(tmp_path):
    cfg = write(tmp_path, K2.replace("steps:100", "steps:2000"))
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--seed", "8", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_risk_dominance_violation_exit(tmp_path, capsys):
    cfg = write(tmp_path, K2.replace("a = 3", "a = 1"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "risk dominance" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write(tmp_path, K2 + "colour = red\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_capacity_exit_code(tmp_path):
    cfg = write(tmp_path, K2.replace("size = 2", "size = 16"))
    assert main(["exact-stationary", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_all_censored_exit_code(tmp_path):
    text = K2.replace("beta = 1", "beta = inf") + "[experiment]\np = 0.4\nreplicas = 30\nbudget = 100\n"
    assert main(["inertia", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 4


def test_exact_and_stable_states(tmp_path):
    cfg = write(tmp_path, K2)
    assert main(["exact-stationary", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "stationary.csv")
    mass = {r[0]: float(r[1]) for r in rows[1:]}
    assert mass["11"] == pytest.approx(0.6815, abs=1e-4)
    assert main(["stable-states", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "stable_states.csv")
    assert [r[0] for r in rows[1:] if r[3] == "1"] == ["11"]


def test_restricted_stationary(tmp_path):
    text = K2.replace("size = 2", "size = 4").replace("family = complete", "family = cycle")
    text = text.replace("[run]", "[run]\nrestricted = 0,1")
    assert main(["exact-stationary", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "stationary.csv")
    for r in rows[1:]:
        if r[0][2:] != "00":
            assert float(r[1]) == 0


def test_close_knit_commands(tmp_path, capsys):
    cfg = write(tmp_path, "[graph]\nfamily = cycle\nsize = 8\n[experiment]\nr = 0.3\nk = 3\n")
    assert main(["close-knit", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "holds=True" in capsys.readouterr().out
    cfg = write(tmp_path, "[graph]\nfamily = cycle\nsize = 8\n[experiment]\nset = 0,1,2,3\n")
    assert main(["close-knit", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "close_knit.csv")
    assert float(rows[1][1]) == pytest.approx(3 / 8)


def test_inertia_and_scaling(tmp_path):
    base = K2.replace("a = 3", "a = 2").replace("b = 2", "b = 1").replace("beta = 1", "beta = 2")
    base = base.replace("family = complete", "family = cycle").replace("size = 2", "size = 8")
    cfg = write(tmp_path, base + "[experiment]\np = 0.1\nreplicas = 30\n")
    assert main(["inertia", "--config", cfg, "--out", str(tmp_path / "i")]) == 0
    rows = read_csv(tmp_path / "i" / "inertia.csv")
    assert len(rows) == 31
    cfg = write(tmp_path, base + "[experiment]\np = 0.1\nreplicas = 30\nsizes = 8,12,16,24\npilot = true\n")
    assert main(["scaling", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    rows = read_csv(tmp_path / "s" / "scaling.csv")
    assert rows[0] == ["family", "slope", "stderr", "intercept"]


def test_adversary_and_fairness(tmp_path, capsys):
    text = K2.replace("beta = 1", "beta = 4").replace("family = complete", "family = cycle")
    text = text.replace("size = 2", "size = 16")
    cfg = write(tmp_path, text + "[experiment]\nr = 0.5\nhorizon = 20000\nreplicas = 3\n")
    assert main(["adversary", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "exceedances=0" in capsys.readouterr().out
    cfg = write(tmp_path, text + "[scheduler]\nkind = random\n[experiment]\nrounds = 200\n")
    assert main(["fairness", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fairness.csv")
    assert len(rows) == 201


def test_config_parsing_details():
    cfg = RunConfig.from_text(K2 + "[scheduler]\nkind = periodic\nsets = 0;1\n")
    g, _ = cfg.graph()
    sched = cfg.scheduler(g)
    assert sched.m == 2
    with pytest.raises(ConfigError):
        RunConfig.from_text("[bogus]\nx = 1\n")
    with pytest.raises(ConfigError, match="beta"):
        RunConfig.from_text("[model]\nbeta = -1\n").params()
    assert RunConfig.from_text("[model]\nbeta = inf\n").params().is_best_response
