import csv
import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacnet.cli import main
from pacnet.config import (
    ConfigError,
    ExperimentConfig,
    LearnSettings,
    apply_overrides,
    dump_config,
    load_config,
)
from pacnet.experiments import CSV_COLUMNS, run_hardness, run_learn, run_verify, summarize

FAST_LEARN = ["--set", "learn.d=8", "--set", "learn.n_test=5000"]


def run_cli(tmp_path, *args):
    return main([*args, "--out", str(tmp_path / "out")])


def read_report(tmp_path):
    return json.loads((tmp_path / "out" / "report.json").read_text())


# --- configuration --------------------------------------------------------


def test_defaults_valid():
    cfg = load_config(None)
    assert cfg.learn.k == 1 and cfg.hardness.k == 4 and cfg.verify.invariants is None


def test_toml_round_trip(tmp_path):
    cfg = ExperimentConfig(seed=2**64 - 1, trials=3)
    cfg.learn.cover_eps = 0.1
    cfg.verify.invariants = ["antisymmetry", "parseval"]
    path = tmp_path / "c.toml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**64 - 1),
    eps=st.floats(0.01, 0.99),
    sigma=st.floats(0, 10),
    k=st.integers(1, 5),
    angle=st.one_of(st.none(), st.floats(0.1, 90)),
)
def test_round_trip_property(seed, eps, sigma, k, angle):
    cfg = ExperimentConfig(seed=seed, learn=LearnSettings(k=2 if angle else k, eps=eps, sigma=sigma, angle_deg=angle))
    assert ExperimentConfig.from_dict(__import__("tomli").loads(dump_config(cfg))) == cfg


def test_none_fields_omitted():
    text = dump_config(ExperimentConfig())
    assert "cover_eps" not in text and "angle_deg" not in text and "invariants" not in text


@pytest.mark.parametrize(
    "text, match",
    [
        ("bogus = 1", "unknown key"),
        ("[learn]\nk = 'two'", "integer"),
        ("[learn]\nk = 0", "at least 1"),
        ("[learn]\neps = 1.5", "eps"),
        ("[hardness]\nbound = 1.0", "bound"),
        ("seed = -1", "unsigned"),
        ("learn = 3", "table"),
        ("[learn\nk=1", "malformed"),
        ("[learn]\nangle_deg = 5.0", "k = 2"),
    ],
)
def test_invalid_configs(tmp_path, text, match):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.toml")


def test_precedence(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("seed = 5\ntrials = 2\n[learn]\nk = 2\neps = 0.3\n")
    cfg = apply_overrides(load_config(path), ["learn.eps=0.2", "hardness.phi=tanh"], seed=9)
    assert cfg.seed == 9  # flag beats file
    assert cfg.trials == 2  # file beats default
    assert cfg.learn.k == 2 and cfg.learn.eps == 0.2
    assert cfg.hardness.phi == "tanh"
    assert cfg.learn.d == LearnSettings().d  # default survives


def test_override_syntax_error():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["learn.k"])


def test_summarize():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s["median"] == 2.5 and s["iqr"] == 1.5 and s["n"] == 4
    assert summarize([]) == {"n": 0}


# --- runners --------------------------------------------------------------


def small_learn_cfg(**kw):
    cfg = ExperimentConfig(trials=2, **kw)
    cfg.learn.d = 8
    cfg.learn.n_test = 5000
    return cfg


def test_learn_report_reproducible():
    a, b = run_learn(small_learn_cfg(seed=3)), run_learn(small_learn_cfg(seed=3))
    assert a.metrics_json() == b.metrics_json()
    assert run_learn(small_learn_cfg(seed=4)).metrics_json() != a.metrics_json()


def test_threads_do_not_change_metrics():
    assert run_learn(small_learn_cfg(seed=3, threads=2)).metrics_json() == run_learn(small_learn_cfg(seed=3)).metrics_json()


def test_learn_report_contents():
    rep = run_learn(small_learn_cfg())
    trial = rep.metrics["trials"][0]
    for key in ("rel_error", "residuals", "cover_size", "candidates", "n_chow"):
        assert key in trial
    assert set(rep.trials[0]) == set(CSV_COLUMNS)
    # every result-affecting setting is echoed
    for f in dataclasses.fields(LearnSettings):
        if getattr(ExperimentConfig().learn, f.name) is not None:
            assert f.name in rep.config["learn"]


def test_hardness_vanishing_skips_correlation():
    cfg = ExperimentConfig()
    cfg.hardness.k = 3
    cfg.hardness.m = 4
    with pytest.warns(RuntimeWarning, match="vanishing"):
        rep = run_hardness(cfg)
    assert rep.metrics["vanishing"] and rep.metrics["correlation"] is None


def test_hardness_single_plane_is_trivial():
    cfg = ExperimentConfig()
    cfg.hardness.m = 1
    rep = run_hardness(cfg)
    assert rep.metrics["correlation"]["estimates"] == []
    assert rep.metrics["packing"]["pairwise_bound"] == 0.0


def test_verify_empty_selection():
    cfg = ExperimentConfig()
    cfg.verify.invariants = []
    rep = run_verify(cfg)
    assert rep.metrics["checks"] == [] and rep.passed


def test_verify_unknown_invariant():
    cfg = ExperimentConfig()
    cfg.verify.invariants = ["nope"]
    with pytest.raises(KeyError):
        run_verify(cfg)


# --- command line ---------------------------------------------------------


def test_cli_learn_writes_outputs(tmp_path, capsys):
    assert run_cli(tmp_path, "learn", "--trials", "2", "--seed", "11", *FAST_LEARN) == 0
    assert "rel_error median" in capsys.readouterr().out
    rep = read_report(tmp_path)
    assert rep["seed"] == 11 and rep["version"] and rep["config"]["learn"]["d"] == 8
    assert {"metrics", "summary", "timings", "config"} <= set(rep)
    with open(tmp_path / "out" / "trials.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and list(rows[0]) == CSV_COLUMNS


def test_cli_learn_reproducible(tmp_path):
    run_cli(tmp_path, "learn", "--trials", "2", *FAST_LEARN)
    first = read_report(tmp_path)
    run_cli(tmp_path, "learn", "--trials", "2", *FAST_LEARN)
    second = read_report(tmp_path)
    assert json.dumps(first["metrics"], sort_keys=True) == json.dumps(second["metrics"], sort_keys=True)


def test_cli_k_zero_is_config_error(tmp_path, capsys):
    assert run_cli(tmp_path, "learn", "--set", "learn.k=0") == 2
    assert "learn.k" in capsys.readouterr().err


def test_cli_bad_config_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[learn]\nk = 'x'\n")
    assert run_cli(tmp_path, "learn", "--config", str(bad)) == 2


def test_cli_budget_refusal(tmp_path, capsys):
    code = run_cli(tmp_path, "learn", "--set", "learn.k=3", "--set", "learn.max_candidates=1000", *FAST_LEARN)
    assert code == 3
    assert "exceed the configured cap of 1000" in capsys.readouterr().err


def test_cli_verify_failure_exit(tmp_path):
    code = run_cli(
        tmp_path, "verify", "--set", "verify.grid_order=4", "--set", 'verify.invariants=["hermite_orthonormality"]'
    )
    assert code == 4
    assert read_report(tmp_path)["metrics"]["checks"][0]["passed"] is False


def test_cli_verify_default_passes(tmp_path, capsys):
    assert run_cli(tmp_path, "verify") == 0
    rep = read_report(tmp_path)
    assert rep["summary"]["failed"] == 0 and rep["summary"]["total"] >= 15


def test_cli_verify_empty(tmp_path):
    assert run_cli(tmp_path, "verify", "--set", "verify.invariants=[]") == 0
    assert read_report(tmp_path)["metrics"]["checks"] == []


def test_cli_pack_and_failure(tmp_path, capsys):
    assert run_cli(tmp_path, "pack", "--set", "hardness.m=8") == 0
    assert read_report(tmp_path)["metrics"]["planes"] == 8
    assert run_cli(tmp_path, "pack", "--set", "hardness.bound=0", "--set", "hardness.m=2") == 2
    assert "packed only 1 of 2" in capsys.readouterr().err


def test_cli_hardness_vanishing_warns(tmp_path, capsys):
    code = run_cli(tmp_path, "hardness", "--set", "hardness.k=3", "--set", "hardness.m=2")
    assert code == 0
    assert "vanishing instance" in capsys.readouterr().err


def test_cli_hardness_small(tmp_path):
    code = run_cli(
        tmp_path, "hardness", "--set", "hardness.d=60", "--set", "hardness.m=4", "--set", "hardness.n_mc=20000",
        "--set", "hardness.bound=0.5",
    )
    assert code == 0
    corr = read_report(tmp_path)["metrics"]["correlation"]
    assert len(corr["estimates"]) == 4 and corr["violations"] == 0


def test_cli_chow(tmp_path):
    assert run_cli(tmp_path, "chow", "--trials", "2", "--set", "learn.d=6") == 0
    assert len(read_report(tmp_path)["metrics"]["trials"]) == 2


def test_cli_print_config(capsys):
    assert main(["learn", "--print-config", "--seed", "7"]) == 0
    assert "seed = 7" in capsys.readouterr().out


def test_cli_rejects_bad_seed():
    with pytest.raises(SystemExit):
        main(["learn", "--seed", "-3"])
