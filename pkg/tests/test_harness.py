import copy
import json
import os
from dataclasses import replace

import numpy as np
import pytest

import plapmulti as pm
from plapmulti.cli import main as cli_main
from plapmulti.harness import (
    BifurcationTable,
    ScenarioConfig,
    export_report,
    load_config,
    load_report,
    reverify_report,
    run_scenario,
    sweep_lambda,
    verify_main_theorem,
)

FAST_OPTS = pm.SolverOptions(residual_tolerance=1e-6)


def fast_config(n=101, **kw):
    base = dict(
        mesh=pm.MeshSpec(1, (1.0,), (n,)),
        alpha=1.5,
        p=2.0,
        beta=3.0,
        gamma=4.0,
        first_options=FAST_OPTS,
        third_options=FAST_OPTS,
        pass_options=FAST_OPTS,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def test_canonical_scenario_passes(canonical_report):
    report, _elapsed = canonical_report
    assert report.passed
    assert report.error == ""
    names = [c.name for c in report.checks]
    assert names == [
        "energy_sign_ordering",
        "residuals_within_tolerance",
        "nonnegativity",
        "pairwise_distinctness",
        "t_scale_separation",
    ]
    assert all(c.passed for c in report.checks)
    j = {k: r.energy.total for k, r in report.results.items()}
    assert max(j["first"], j["third"]) < 0.0 < j["pass"]


def test_config_validation():
    with pytest.raises(ValueError):
        fast_config(lambda_mode="fraction", lambda_value=1.5)
    with pytest.raises(ValueError):
        fast_config(lambda_mode="explicit", lambda_value=-1.0)
    with pytest.raises(ValueError):
        fast_config(lambda_mode="percent")
    with pytest.raises(ValueError):
        fast_config(alpha=2.5)  # breaks the exponent ordering


def test_2d_scenario_passes():
    config = ScenarioConfig(
        mesh=pm.MeshSpec(2, (1.0, 1.0), (21, 21)),
        alpha=1.5,
        p=2.0,
        beta=3.0,
        gamma=4.0,
        first_options=FAST_OPTS,
        third_options=FAST_OPTS,
        pass_options=FAST_OPTS,
    )
    report = run_scenario(config)
    assert report.passed
    for r in report.results.values():
        assert r.energy.residual_norm < 1e-6


def test_verify_detects_duplicated_solution(canonical_report):
    report, _ = canonical_report
    broken = copy.deepcopy(report)
    broken.results["third"] = copy.deepcopy(broken.results["first"])
    checks = {c.name: c.passed for c in verify_main_theorem(broken)}
    assert not checks["pairwise_distinctness"]


def test_verify_detects_flipped_pass_energy(canonical_report):
    report, _ = canonical_report
    broken = copy.deepcopy(report)
    e = broken.results["pass"].energy
    broken.results["pass"].energy = replace(e, total=-e.total)
    checks = {c.name: c.passed for c in verify_main_theorem(broken)}
    assert not checks["energy_sign_ordering"]


@pytest.fixture(scope="module")
def small_sweep():
    return sweep_lambda(fast_config(), [0.1, 0.3, 0.5, 0.9])


def test_sweep_inside_threshold(small_sweep):
    table = small_sweep
    assert all(row["in_region"] for row in table.rows)
    assert table.lost_at_fraction is None
    for row in table.rows:
        assert row["J1"] < 0.0 and row["J3"] < 0.0
        assert row["conv1"] and row["conv2"] and row["conv3"]


def test_sweep_beyond_threshold_loses_region():
    table = sweep_lambda(fast_config(), [0.5, 2.0, 5.0, 20.0], solve_at=[])
    flags = [row["in_region"] for row in table.rows]
    assert flags[0] is True
    assert not flags[-1]
    assert table.lost_at_fraction is not None
    # once lost the region never reappears on the sampled grid
    first_loss = flags.index(False)
    assert not any(flags[first_loss:])


def test_sweep_first_root_decays():
    table = sweep_lambda(fast_config(), [1e-3, 3e-3, 1e-2, 3e-2, 0.1], solve_at=[])
    lams = np.array([row["lambda"] for row in table.rows])
    t1s = np.array([row["t1"] for row in table.rows])
    assert np.all(np.diff(t1s) > 0)
    slope = np.polyfit(np.log(lams), np.log(t1s), 1)[0]
    assert slope > 0.5


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        sweep_lambda(fast_config(), [])
    with pytest.raises(ValueError):
        sweep_lambda(fast_config(), [0.5, -0.1])


def test_export_determinism(tmp_path, canonical_report):
    report, _ = canonical_report
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    export_report(report, "json", p1)
    export_report(report, "json", p2)
    assert p1.read_bytes() == p2.read_bytes()
    c1, c2 = tmp_path / "a.csv", tmp_path / "b.csv"
    export_report(report, "csv", c1)
    export_report(report, "csv", c2)
    assert c1.read_bytes() == c2.read_bytes()
    with pytest.raises(ValueError):
        export_report(report, "xml", tmp_path / "c.xml")
    with pytest.raises(ValueError):
        export_report(42, "json", tmp_path / "d.json")


def test_table_csv_shape(tmp_path, small_sweep):
    path = tmp_path / "table.csv"
    export_report(small_sweep, "csv", path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == BifurcationTable.COLUMNS
    assert len(lines) == 1 + len(small_sweep.rows)


def test_report_roundtrip_and_reverify(tmp_path, canonical_report):
    report, _ = canonical_report
    path = tmp_path / "report.json"
    export_report(report, "json", path)
    loaded = load_report(path)
    assert loaded.lambda_used == report.lambda_used
    for k in report.results:
        assert np.array_equal(loaded.results[k].solution, report.results[k].solution)
    checked = reverify_report(loaded)
    assert checked.passed


def test_reverify_catches_tampering(tmp_path, canonical_report):
    report, _ = canonical_report
    path = tmp_path / "report.json"
    export_report(report, "json", path)
    data = json.loads(path.read_text())
    # overwrite the pass solution with the first solution
    data["results"]["pass"]["solution"] = data["results"]["first"]["solution"]
    path.write_text(json.dumps(data))
    checked = reverify_report(load_report(path))
    assert not checked.passed


CONFIG_TEXT = """\
# canonical scenario, coarse mesh for test speed
dimension = 1
extent = 1.0
nodes = 101
alpha = 1.5
p = 2.0
beta = 3.0
gamma = 4.0
lambda_fraction = 0.5
residual_tolerance = 1e-6
seed = 7
"""


def test_load_config(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(CONFIG_TEXT)
    config = load_config(path)
    assert config.mesh == pm.MeshSpec(1, (1.0,), (101,))
    assert config.lambda_mode == "fraction"
    assert config.lambda_value == 0.5
    assert config.seed == 7
    assert config.first_options.residual_tolerance == 1e-6
    bad = tmp_path / "bad.toml"
    bad.write_text("alpha 1.5\n")
    with pytest.raises(ValueError):
        load_config(bad)


def test_cli_solve_sweep_check(tmp_path, capsys):
    cfg_path = tmp_path / "scenario.toml"
    cfg_path.write_text(CONFIG_TEXT)
    out = tmp_path / "out"

    code = cli_main(["solve", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "solution_first.csv").exists()
    captured = capsys.readouterr()
    assert "PASS" in captured.out

    code = cli_main(
        ["sweep", "--config", str(cfg_path), "--out", str(out), "--format", "csv",
         "--grid", "0.5,2.0", "--solve-at", "0.5"]
    )
    assert code == 0
    assert (out / "sweep.csv").exists()

    code = cli_main(["lambda-star", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    assert (out / "lambda_star.json").exists()
    captured = capsys.readouterr()
    assert "lambda_star" in captured.out

    code = cli_main(["check", "--report", str(out / "report.json")])
    assert code == 0

    # tampered report fails the check with exit code 2
    data = json.loads((out / "report.json").read_text())
    data["results"]["pass"]["solution"] = data["results"]["first"]["solution"]
    (out / "bad_report.json").write_text(json.dumps(data))
    assert cli_main(["check", "--report", str(out / "bad_report.json"), "--quiet"]) == 2

    # missing file surfaces as an error exit
    assert cli_main(["check", "--report", str(out / "nope.json")]) == 1
    assert cli_main(["solve", "--config", str(tmp_path / "nope.toml")]) == 1


def test_save_report_fields(tmp_path, canonical_report):
    from plapmulti.harness import save_report_fields

    report, _ = canonical_report
    save_report_fields(report, tmp_path)
    for name in ("first", "pass", "third"):
        mesh, v = pm.load_field(tmp_path / f"solution_{name}.csv")
        assert np.array_equal(v, report.results[name].solution)
