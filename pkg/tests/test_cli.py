import json
import subprocess
import sys

import pytest

from bwr import cli
from bwr.errors import PrecisionError
from bwr.game import GameError, validate

from conftest import CORPUS


def run(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def game_file(name):
    return CORPUS / f"{name}.json"


@pytest.fixture
def bad(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(
        json.dumps(
            {
                "positions": [{"id": "r", "owner": "random"}, {"id": "a", "owner": "white"}],
                "arcs": [
                    {"from": "r", "to": "a", "reward": 0, "prob": {"num": 1, "den": 2}},
                    {"from": "r", "to": "r", "reward": 0, "prob": {"num": 1, "den": 3}},
                    {"from": "a", "to": "a", "reward": 0},
                ],
            }
        )
    )
    return p


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", game_file("G_choice"), "--mode", "practical")
    res = json.loads(out)
    assert code == 0
    assert (res["t_max"], res["t_min"], res["T"], res["B"]) == ("4/1", "2/1", ["a", "w"], ["b"])
    assert res["strategies"]["top"]["max"] == {"w": "a"} and res["certified"]


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", game_file("G_rand"))
    res = json.loads(out)
    assert code == 0 and set(res["values"].values()) == {"3/2"} and res["certified"]


def test_validate_error(capsys, bad):
    code, out, err = run(capsys, "validate", bad)
    assert code == 1 and out == ""
    assert "'r'" in err and "5/6" in err


def test_validate_params(capsys):
    code, out, _ = run(capsys, "validate", game_file("G_rand"), "--mode", "paper")
    res = json.loads(out)
    assert code == 0 and res["params"]["k"] == 1 and res["params"]["D"] == 2 and res["params"]["U"] == 12
    assert validate(res["game"]).n == 3


def test_solve(capsys):
    code, out, _ = run(capsys, "solve", game_file("G_rand"))
    res = json.loads(out)
    assert code == 0 and res["ergodic"] and res["value"] == "3/2"
    assert res["max_strategy"] == {"w": "r"} and res["min_strategy"] == {"b": "r"}


def test_solve_non_ergodic(capsys):
    code, out, err = run(capsys, "solve", game_file("G_choice"))
    res = json.loads(out)
    assert code == 0 and not res["ergodic"] and "not ergodic" in err
    assert res["classification"]["T"] == ["a", "w"]


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", game_file("G_two_comp"))
    res = json.loads(out)
    assert code == 0 and res["diffs"] == [] and res["class_conditions_ok"]


def test_compare_inconsistency(capsys, monkeypatch):
    monkeypatch.setattr(cli, "compare", lambda g, cfg: {"diffs": [{"field": "t_max"}]})
    code, _, err = run(capsys, "compare", game_file("G_loop"))
    assert code == 2 and "inconsistency" in err


def test_precision_exit(capsys, monkeypatch):
    def boom(*a, **k):
        raise PrecisionError("lost positive definiteness")

    monkeypatch.setattr(cli, "classify", boom)
    code, _, err = run(capsys, "classify", game_file("G_loop"))
    assert code == 3 and "precision" in err


def test_generate_self_loop(capsys):
    code, out, _ = run(capsys, "generate", "-n", 1, "-k", 0, "-U", 5, "-D", 1, "--min-degree", 1, "--max-degree", 1, "--seed", 7)
    g = validate(out)
    assert code == 0 and g.n == 1 and g.arcs[0].source == g.arcs[0].target


def test_generate_deterministic(capsys, tmp_path):
    args = ["generate", "-n", 5, "-k", 2, "-U", 3, "-D", 2, "--seed", 42]
    run(capsys, *args, "--out", tmp_path / "a.json")
    run(capsys, *args, "--out", tmp_path / "b.json")
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b
    # the corpus copy of this instance
    assert validate(a.decode()).to_dict() == validate(game_file("G_gen42").read_text()).to_dict()


def test_generate_bad_params(capsys):
    code, _, err = run(capsys, "generate", "-n", 2, "-k", 1, "-D", 1, "--min-degree", 2)
    assert code == 1 and "too small" in err


def test_export_dot(capsys):
    code, out, _ = run(capsys, "export-dot", game_file("G_rand"))
    assert code == 0 and out.startswith("digraph")
    assert "shape=circle" in out and "p=1/2" in out


def test_text_format(capsys):
    code, out, _ = run(capsys, "classify", game_file("G_loop"), "--format", "text")
    assert code == 0 and "t_max: 5/1" in out


def test_env_precision(capsys, monkeypatch):
    monkeypatch.setenv("BWR_PRECISION_BITS", "300")
    seen = {}
    real = cli.classify

    def spy(game, config):
        seen["bits"] = config.precision_bits
        return real(game, config)

    monkeypatch.setattr(cli, "classify", spy)
    assert run(capsys, "classify", game_file("G_loop"))[0] == 0
    assert seen["bits"] == 300
    monkeypatch.setenv("BWR_PRECISION_BITS", "many")
    assert run(capsys, "classify", game_file("G_loop"))[0] == 1


def test_flag_overrides_env(capsys, monkeypatch):
    monkeypatch.setenv("BWR_PRECISION_BITS", "300")
    seen = {}
    real = cli.classify

    def spy(game, config):
        seen["bits"] = config.precision_bits
        return real(game, config)

    monkeypatch.setattr(cli, "classify", spy)
    run(capsys, "classify", game_file("G_loop"), "--precision-bits", 400)
    assert seen["bits"] == 400


def test_paper_gate_exit(capsys):
    code, _, err = run(capsys, "classify", game_file("G_gen42"), "--mode", "paper")
    assert code == 1 and err


@pytest.mark.parametrize(
    "argv",
    [["classify"], ["nonsense"], ["classify", "missing.json"], ["classify", "x.json", "--b-exponent", "0"]],
)
def test_input_errors(capsys, argv):
    assert cli.run(argv) == 1


def test_run_config_validation():
    with pytest.raises(GameError):
        cli.RunConfig(seed=-1)
    with pytest.raises(GameError):
        cli.RunConfig(enumeration_cap=0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bwr", "oracle", str(game_file("G_loop"))], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["values"] == {"a": "5/1"}


def test_deterministic_output(capsys):
    first = run(capsys, "classify", game_file("G_rand2"))[1]
    assert run(capsys, "classify", game_file("G_rand2"))[1] == first
