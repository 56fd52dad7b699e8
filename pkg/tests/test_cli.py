import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvcz.cli import main
from cvcz.cli.runner import ResultRow, from_csv, from_json, run, to_csv, to_json
from cvcz.cli.scenario import bundled_names, load_scenario, parse_scenario

BUNDLED = {"fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig3a", "fig3bc", "threshold"}


def rows_of(capsys, *argv):
    code = main(["run", "--scenario", *argv])
    out = capsys.readouterr().out
    return code, {(r.quantity, r.engine): r for r in from_csv(out)}


def minimal(**kw):
    doc = {
        "version": 1,
        "name": "t",
        "squeezing_db": -5,
        "inputs": {"alpha": {"type": "vacuum"}, "beta": {"type": "vacuum"}},
        "outputs": ["quadratures"],
    }
    doc.update(kw)
    return doc


def test_bundled_set():
    assert BUNDLED <= set(bundled_names())


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_validate(name, capsys):
    assert main(["validate", name]) == 0


def test_list(capsys):
    assert main(["list"]) == 0
    assert "fig3a" in capsys.readouterr().out


def test_fig2a_db_rows(capsys):
    code, rows = rows_of(capsys, "fig2a")
    assert code == 0
    got = [rows[(f"db_{q}", "covariance")].value for q in ("x_mu", "p_mu", "x_nu", "p_nu")]
    assert np.allclose(got, [2.13, 4.70, 2.13, 4.70], atol=0.01)
    assert rows[("db_x_mu", "covariance")].unit == "dB-rel-SNL"


def test_db_rows_derive_from_variance_rows(capsys):
    from cvcz.analysis import db_rel_snl

    _, rows = rows_of(capsys, "fig2b")
    for q in ("x_mu", "p_mu", "x_nu", "p_nu"):
        var = rows[(f"var_{q}", "covariance")].value
        assert rows[(f"db_{q}", "covariance")].value == db_rel_snl(var)


def test_fig2b_power_rows(capsys):
    _, rows = rows_of(capsys, "fig2b")
    assert rows[("power_x_mu", "covariance")].value == pytest.approx(21.52, abs=0.01)
    assert rows[("power_p_nu", "covariance")].value == pytest.approx(21.56, abs=0.01)
    assert abs(rows[("mean_p_mu", "covariance")].value) < 1e-9


def test_fig3a_verdicts(capsys):
    _, rows = rows_of(capsys, "fig3a")
    verdict = {g: rows[(f"witness_entangled@g={g}", "covariance")].value for g in (0.5, 0.63, 0.75, 0.89, 1.25)}
    assert verdict[0.63] == verdict[0.75] == verdict[0.89] == 1.0
    assert verdict[0.5] == verdict[1.25] == 0.0


def test_threshold_rows(capsys):
    _, rows = rows_of(capsys, "threshold")
    assert rows[("threshold_s_max@g=0.75", "analytic")].value == pytest.approx(0.4)
    assert rows[("optimal_squeezing_db", "analytic")].value == pytest.approx(-3.98, abs=0.01)


def test_engine_both_exits_zero(capsys):
    code, rows = rows_of(capsys, "fig3bc", "--shots", "20000")
    assert code == 0
    assert rows[("var_x_mu", "montecarlo")].err > 0
    assert rows[("var_x_mu", "covariance")].err is None


def test_engine_disagreement_exit_code(capsys, monkeypatch):
    from cvcz.cli import runner

    original = runner.covariance_rows

    def skewed(sc):
        return [ResultRow(r.quantity, r.engine, r.value * 1.5, r.unit, r.err) for r in original(sc)]

    monkeypatch.setattr(runner, "covariance_rows", skewed)
    code = main(["run", "--scenario", "fig3bc", "--shots", "5000"])
    assert code == 4
    assert "disagreement" in capsys.readouterr().err


def test_overrides_and_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["run", "--scenario", "fig2a", "--engine", "montecarlo", "--shots", "500",
                 "--seed", "5", "--format", "json", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["metadata"]["montecarlo"]["seed"] == 5
    assert doc["metadata"]["montecarlo"]["n_shots"] == 500
    assert {r["engine"] for r in doc["rows"]} == {"montecarlo"}


def test_config_error_reports_field(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(minimal(inputs={"alpha": {"type": "vacuum"}})))
    assert main(["validate", str(p)]) == 2
    assert "inputs" in capsys.readouterr().err


def test_config_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "version": 1,\n  "name": ,\n}')
    assert main(["run", "--scenario", str(p)]) == 2
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch",
    [
        {"cluster_loss": 1.2},
        {"output_loss": [0.9, -0.1]},
        {"visibility": 0.0},
        {"outputs": ["witness"], "gains": [0.75, -1.0]},
    ],
)
def test_physics_error(tmp_path, capsys, patch):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(minimal(**patch)))
    assert main(["run", "--scenario", str(p)]) == 3


def test_missing_scenario(capsys):
    assert main(["run", "--scenario", "nope_not_here"]) == 2


def test_no_outputs_is_config_error():
    from cvcz.cli.scenario import ConfigError

    with pytest.raises(ConfigError):
        parse_scenario(minimal(outputs=[]))


def test_visibility_folds_into_output_loss():
    sc = parse_scenario(minimal(output_loss="high_loss", visibility=0.97))
    assert sc.output_efficiency == pytest.approx((0.9 * 0.97**2,) * 2)


floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=100)
@given(st.lists(st.tuples(floats, st.one_of(st.none(), floats)), max_size=10))
def test_csv_roundtrip_is_lossless(values):
    rows = [ResultRow(f"q{k}", "montecarlo", v, "variance", e) for k, (v, e) in enumerate(values)]
    assert from_csv(to_csv(rows)) == rows


def test_json_roundtrip():
    res = run(load_scenario("fig3a"))
    assert from_json(to_json(res)) == res.rows


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cvcz.cli", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "fig2a" in out.stdout
