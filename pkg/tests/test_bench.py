import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from accelmlmc import bench, cli
from accelmlmc.bench import (ROW_COLUMNS, ConfigError, ExperimentConfig, ResultRow, build_config,
                             load_config, parse_config_text, rmse, rows_csv, run_experiment,
                             summarize, write_outputs)
from accelmlmc.mlmc import ConstantSet
from accelmlmc.schemes import PathDivergenceError

EXPLICIT = dict(alpha=1, p=2, beta=1, beta_L=1, gamma=1, gamma_L=1, c1=0.5, c1_p=0.25,
                c20=1e-4, c2=5e-4, c2L=5e-3, c30=2, c3=3, c3L=8)


def explicit_config(**kw):
    base = dict(model_id="gbm", eps_list=(1.0,), replications=1, mode_list=("standard",),
                constants_source="explicit", constants=dict(EXPLICIT))
    base.update(kw)
    return ExperimentConfig(**base).validate()


def row(mode, eps, est, exact, cost, rep=0, error=""):
    return ResultRow("m", "f", mode, eps, rep, est, exact, None if error else abs(est - exact),
                     cost, 1, (1, 1), "0", error)


def test_parse_config_text():
    raw = parse_config_text("# header\nmodel_id = gbm  # trailing\n\neps_list = 1, 0.5\n")
    assert raw == {"model_id": "gbm", "eps_list": "1, 0.5"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


def test_build_config_types_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("model_id = nonlinear\neps_min = 2\nreplications = 4\nmode_list = both\n"
                    "q_policy = optimal\n")
    cfg = load_config(path, {"replications": 7, "master_seed": None})
    assert cfg.functional_id == "paper_f"
    assert cfg.eps_list == (1.0, 0.25, 0.0625)
    assert cfg.replications == 7 and cfg.mode_list == ("standard", "modified")


@pytest.mark.parametrize("raw", [
    {"eps_list": "0.5, 1"}, {"eps_list": "1, 1"}, {"eps_list": "-1"}, {"replications": "0"},
    {"mode_list": "fast"}, {"model_id": "heston"}, {"functional_id": "cube"}, {"M": "1"},
    {"q_policy": "1.5"}, {"q_policy": "best"}, {"constants_source": "guess"},
    {"constants_source": "explicit", "alpha": "1"}, {"colour": "blue"}, {"replications": "x"},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        build_config(raw)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_gbm_single_row():
    rows = run_experiment(explicit_config())
    assert len(rows) == 1
    r = rows[0]
    assert r.exact == pytest.approx(0.1 * math.exp(1.5), rel=1e-15)
    assert r.abs_error == abs(r.estimate - r.exact)
    assert r.ok and r.L == len(r.N_l) - 1


@pytest.mark.parametrize("model_id,functional_id,exact", [
    ("nonlinear", "paper_f", 0.0),
    ("fourdim", "component_1", 0.125 * math.e**2),
    ("fourdim", "component_3", math.e**2),
])
def test_exact_references(model_id, functional_id, exact):
    cfg = explicit_config(model_id=model_id, functional_id=functional_id)
    assert run_experiment(cfg)[0].exact == pytest.approx(exact, rel=1e-15, abs=1e-15)


def test_rows_in_index_order():
    cfg = explicit_config(eps_list=(1.0, 0.5), replications=2, mode_list=("standard", "modified"))
    rows = run_experiment(cfg)
    keys = [(r.eps, r.mode, r.replication) for r in rows]
    assert keys == [(e, m, k) for e in (1.0, 0.5) for m in ("standard", "modified") for k in (0, 1)]


def test_failures_recorded_and_run_continues(monkeypatch):
    real = bench.mlmc_estimate

    def flaky(model, f, eps, constants, mode, spec, **kw):
        if spec.stream_path[-1] == 1:
            raise PathDivergenceError("boom", step=3, level=1, sample=0)
        return real(model, f, eps, constants, mode, spec, **kw)

    monkeypatch.setattr(bench, "mlmc_estimate", flaky)
    rows = run_experiment(explicit_config(replications=3))
    assert [r.ok for r in rows] == [True, False, True]
    assert "boom" in rows[1].error
    s = summarize(rows)[0]
    assert s.reps_standard == 2


def test_summary_ratio_and_bound():
    rows = [row("standard", 0.1, 1.0, 1.0, 100), row("modified", 0.1, 1.0, 1.0, 25)]
    s = summarize(rows)[0]
    assert s.ratio == 4.0 and s.theory_bound == 4.0 and s.baseline == "all-alpha"


def test_summary_deterministic_rows_give_abs_bias():
    rows = [row("standard", 0.1, 1.25, 1.0, 10, rep=r) for r in range(5)]
    s = summarize(rows)[0]
    assert s.rmse_standard == 0.25
    assert s.rmse_modified is None and s.ratio is None and s.reps_modified == 0


def test_summary_absent_cell():
    rows = [row("standard", 0.1, 0.0, 0.0, 0, error="x"), row("modified", 0.1, 1.0, 1.0, 5)]
    s = summarize(rows)[0]
    assert s.rmse_standard is None and s.ratio is None


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(-10, 10))
def test_rmse_count_convention(estimates, exact):
    rows = [row("standard", 0.5, e, exact, 1, rep=i) for i, e in enumerate(estimates)]
    s = summarize(rows)[0]
    want = math.sqrt(math.fsum((e - exact) ** 2 for e in estimates) / len(estimates))
    assert s.rmse_standard == pytest.approx(want, rel=1e-12, abs=1e-300)
    assert rmse(e - exact for e in estimates) == s.rmse_standard


def test_cost_column_is_metered_total():
    r = run_experiment(explicit_config(eps_list=(0.1,)))[0]
    # every level's metered cost is N_l times the per-sample step law for GBM/EM
    expected = r.N_l[0] * 2 + sum(n * 2 * (2**l + 2 ** (l - 1)) for l, n in enumerate(r.N_l) if l)
    assert r.total_cost == expected


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_serialisation_round_trips(x):
    r = row("standard", 0.5, x, 0.0, 1)
    line = rows_csv([r]).splitlines()[1]
    assert float(line.split(",")[ROW_COLUMNS.index("estimate")]) == x


def test_csv_header_order():
    assert rows_csv([]).strip() == ",".join(ROW_COLUMNS)
    assert ROW_COLUMNS[:2] == ("model_id", "functional_id")
    assert ROW_COLUMNS[-2:] == ("seed", "error")


def test_outputs_byte_identical_across_workers(tmp_path):
    cfg = explicit_config(model_id="nonlinear", eps_list=(1.0, 0.5), replications=2,
                          mode_list=("standard", "modified"))
    cs = ConstantSet(**EXPLICIT, source="explicit")
    a = write_outputs(tmp_path / "a", cfg, cs, run_experiment(cfg, cs, workers=1))
    b = write_outputs(tmp_path / "b", cfg, cs, run_experiment(cfg, cs, workers=4))
    assert a == b
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "timings.csv").exists()


def test_cli_theory(capsys):
    assert cli.main(["theory", "--alpha", "1", "--p", "2", "--beta", "1", "--gamma", "1"]) == 0
    out = capsys.readouterr().out
    assert "beta_eq_gamma" in out and "= 4" in out
    assert cli.main(["theory", "--alpha", "1", "--p", "2", "--beta", "1", "--gamma", "2"]) == 0
    assert "all-order-p baseline >= 2" in capsys.readouterr().out
    assert cli.main(["theory", "--alpha", "1", "--p", "2", "--beta", "2", "--gamma", "1",
                     "--beta-L", "3"]) == 0
    assert "eventual strict improvement: yes" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("eps_list = 0.1, 1\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err
    assert cli.main(["theory", "--alpha", "-1", "--p", "2", "--beta", "1", "--gamma", "1"]) == 1


def test_cli_run_writes_outputs(tmp_path):
    cfg = tmp_path / "exp.cfg"
    lines = ["model_id = gbm", "eps_list = 1, 0.25", "replications = 2", "mode_list = both",
             "constants_source = explicit"] + [f"{k} = {v}" for k, v in EXPLICIT.items()]
    cfg.write_text("\n".join(lines) + "\n")
    out = tmp_path / "res"
    assert cli.main(["run", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    rows = (out / "rows.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2
    assert rows[1].split(",")[ROW_COLUMNS.index("seed")] == "5/0.0.0"
    assert (out / "summary.csv").read_text().count("\n") == 3


def test_cli_partial_failure_exit_code(tmp_path, monkeypatch):
    def broken(*a, **k):
        raise PathDivergenceError("diverged")

    monkeypatch.setattr(bench, "mlmc_estimate", broken)
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("constants_source = explicit\n"
                   + "".join(f"{k} = {v}\n" for k, v in EXPLICIT.items()))
    assert cli.main(["run", "--config", str(cfg), "--eps-min", "0", "--replications", "1",
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_constants(capsys):
    assert cli.main(["constants", "--model", "gbm", "--pilot-n", "1000", "--pilot-levels", "3"]) == 0
    out = capsys.readouterr().out
    parsed = parse_config_text(out)
    assert set(parsed) >= {"alpha", "beta", "c2", "c3L"}
