import json
import math
from pathlib import Path

import pytest

from karlin.cli import main
from karlin.config import Config, ConfigError, model_params, parse_override, simulation_plan
from karlin.experiments import Report, emit_plot_data, parse_plot_data
from karlin.samplers import Rademacher

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_CLT = """
experiment = "clt"
[model]
alpha = 1.5
alpha_prime = 1.5
rho = 0.5
[plan]
n = 200
m_n = 40
R = 300
times = [0.5, 1.0]
seed = 11
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(tmp_path, cfg, *extra, out="out"):
    return main(["run", cfg, "--out", str(tmp_path / out), *extra])


def test_parse_override_types():
    assert parse_override("plan.R=100") == (["plan", "R"], 100)
    assert parse_override("plan.times=[0.5, 1.0]") == (["plan", "times"], [0.5, 1.0])
    assert parse_override("model.innovation=pareto") == (["model", "innovation"], "pareto")
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_config_missing_field_names_it():
    cfg = Config.from_string('experiment = "clt"\n[model]\nalpha_prime = 1.5\nrho = 0.5\n')
    with pytest.raises(ConfigError) as info:
        model_params(cfg)
    assert info.value.field == "model.alpha"


def test_enriquez_preset_config():
    cfg = Config.load(CONFIGS / "enriquez.toml")
    p = model_params(cfg)
    assert isinstance(p.innovation, Rademacher)
    assert p.beta == pytest.approx(0.75)
    assert simulation_plan(cfg).m_n == math.ceil(5000 ** 0.6)


def test_supmeasure_config_growth():
    plan = simulation_plan(Config.load(CONFIGS / "supmeasure.toml"))
    assert plan.m_n == 911


def test_run_is_byte_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, SMALL_CLT)
    _run(tmp_path, cfg, "--threads", "1", out="a")
    _run(tmp_path, cfg, "--threads", "3", out="b")
    _run(tmp_path, cfg, "--threads", "1", out="c")
    for name in ("clt.json", "clt.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_seed_flag_changes_output(tmp_path):
    cfg = _write(tmp_path, SMALL_CLT)
    _run(tmp_path, cfg, out="a")
    _run(tmp_path, cfg, "--seed", "12", out="b")
    assert (tmp_path / "a" / "clt.csv").read_bytes() != (tmp_path / "b" / "clt.csv").read_bytes()


def test_json_report_schema(tmp_path):
    cfg = _write(tmp_path, SMALL_CLT)
    _run(tmp_path, cfg)
    body = json.loads((tmp_path / "out" / "clt.json").read_text())
    assert body["experiment"] == "clt"
    assert body["params"]["plan"]["m_n"] == 40
    assert set(body["checks"][0]) == {"id", "target_ref", "simulated", "theoretical", "tolerance", "passed"}


def test_csv_header_and_round_trip(tmp_path):
    cfg = _write(tmp_path, SMALL_CLT)
    _run(tmp_path, cfg)
    text = (tmp_path / "out" / "clt.csv").read_text()
    assert text.split("\n", 1)[0] == "experiment,check_id,x,simulated,theoretical,stderr"
    assert "\r" not in text
    rows = parse_plot_data(text)
    assert len(rows) == 12
    assert all(r["experiment"] == "clt" for r in rows)


def test_empty_report_csv():
    assert emit_plot_data(None) == "experiment,check_id,x,simulated,theoretical,stderr\n"
    r = Report("x", {})
    r.within("a", "ref", 1.0, math.nan, math.nan, 4.0)
    row = parse_plot_data(emit_plot_data(r))[0]
    assert math.isnan(row["theoretical"]) and math.isnan(row["x"])
    assert json.loads(r.to_json())["checks"][0]["theoretical"] is None


def test_missing_field_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL_CLT.replace("alpha = 1.5\n", "", 1))
    assert _run(tmp_path, cfg) == 2
    assert "model.alpha" in capsys.readouterr().err


def test_unknown_experiment_exit_2(tmp_path):
    cfg = _write(tmp_path, SMALL_CLT.replace('"clt"', '"nope"'))
    assert _run(tmp_path, cfg) == 2


def test_domain_error_exit_2(tmp_path):
    assert _run(tmp_path, _write(tmp_path, SMALL_CLT), "--set", "model.rho=1.2") == 2


def test_bad_flag_exit_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", "x.toml", "--threads"])
    assert info.value.code == 2


def test_budget_exit_3(tmp_path, monkeypatch):
    monkeypatch.setenv("KARLIN_BUDGET", "1000")
    assert _run(tmp_path, _write(tmp_path, SMALL_CLT)) == 3


def test_gate_failure_exit_4(tmp_path):
    # a negative allowance makes every ECF tolerance negative
    assert _run(tmp_path, _write(tmp_path, SMALL_CLT), "--set", "check.allowance=-10") == 4


def test_theory_eval_passes(tmp_path, capsys):
    assert _run(tmp_path, str(CONFIGS / "theory_eval.toml")) == 0
    assert "PASS m_coeff_d1" in capsys.readouterr().out


def test_eval_m_coeff(capsys):
    assert main(["eval", "m-coeff", "--alpha", "1.5", "--beta", "0.5", "--times", "1", "--delta", "1"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.7724538509055163, rel=1e-7)


def test_eval_m_coeff_bad_pattern():
    assert main(["eval", "m-coeff", "--alpha", "1.5", "--beta", "0.5", "--times", "1", "--delta", "2"]) == 2
