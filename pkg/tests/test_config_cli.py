import csv
import json
import math
import os
import re
from importlib import resources

import numpy as np
import pytest

from nvsinglet import pipelines
from nvsinglet.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from nvsinglet.config import ConfigError, ResultRecord, bundled_config, load_config, parse_experiment, set_path

BUNDLED = ["fig2a", "fig2a_ramp", "fig2c", "fig2d", "fig2d_bath", "fig2e", "fig3", "fig3_bath"]


def _data_path(name):
    return str(resources.files("nvsinglet").joinpath("data", f"{name}.json"))


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _drop(cfg, section, key):
    out = json.loads(json.dumps(cfg))
    out[section].pop(key)
    return out


# ---------------------------------------------------------------------------
# config parsing


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_parse(name):
    exp = parse_experiment(bundled_config(name))
    assert exp.t_total > 0 and exp.protocol.t_re > 0


def test_config_units_are_converted():
    exp = parse_experiment(bundled_config("fig2a"))
    assert exp.protocol.t_re == pytest.approx(40e-6)
    assert exp.protocol.t1_rho == pytest.approx(2e-3)
    assert exp.system.nuclei[0].a_perp == pytest.approx(2 * math.pi * 16e3)
    assert exp.drive.omega_rf_rabi == pytest.approx(2 * math.pi * 4e3)
    assert exp.t_total == pytest.approx(20e-3)


def test_config_missing_t_re_names_path():
    cfg = _drop(bundled_config("fig2a"), "protocol", "t_re_us")
    with pytest.raises(ConfigError) as exc:
        parse_experiment(cfg)
    assert exc.value.path == "protocol.t_re"


@pytest.mark.parametrize(
    "path, value, where",
    [
        ("protocol.t_re_ms", 0.04, "protocol.t_re"),
        ("protocol.polarization", 0.2, "protocol.polarization"),
        ("backend", "quantum", "backend"),
        ("system.nuclei", [], "system.nuclei"),
    ],
)
def test_config_errors_carry_field_path(path, value, where):
    cfg = set_path(bundled_config("fig2a"), path, value)
    with pytest.raises(ConfigError) as exc:
        parse_experiment(cfg)
    assert exc.value.path.startswith(where)


@pytest.mark.parametrize("name", BUNDLED)
def test_echo_is_a_fixed_point(name):
    exp = parse_experiment(bundled_config(name))
    again = parse_experiment(exp.echo())
    assert again.echo() == exp.echo()
    assert again.protocol == exp.protocol
    assert np.allclose(again.system.nuclei[0].a_par, exp.system.nuclei[0].a_par, rtol=1e-15)


@pytest.mark.parametrize("backend", ["full", "effective"])
def test_echo_closure_reproduces_trajectory(backend):
    cfg = set_path(bundled_config("fig2a"), "t_total_ms", 2.0)
    exp = parse_experiment(cfg, backend)
    a = pipelines.run_backend(exp, backend)
    b = pipelines.run_backend(parse_experiment(exp.echo(), backend), backend)
    assert np.max(np.abs(a.pair_states - b.pair_states)) <= 1e-12


def test_result_record_round_trip():
    rec = ResultRecord(
        config={"name": "x", "t_total_s": 0.02},
        trajectories={"full": {"t_ms": [0.0, 0.4], "LN": [0.0, 0.123456789012345]}},
        summary={"final_LN": 0.97797, "T_Cv_ms": None},
        provenance={"version": "1", "seed": 3, "backend": "full"},
    )
    text = rec.to_json()
    back = ResultRecord.from_json(text)
    assert back == rec
    assert back.to_json() == text


def test_apply_override_drops_superseded_keys():
    cfg = bundled_config("fig2a")
    out = pipelines.apply_override(cfg, "protocol.alpha_sq_over_omega_rf", 2.0)
    assert "t_re_us" not in out["protocol"]
    out = pipelines.apply_override(cfg, "drive.omega_rf_rabi_khz", 3.0)
    assert "omega_rf_over_delta" not in out["drive"]
    assert "t_re_us" in cfg["protocol"]


def test_parse_values():
    assert pipelines.parse_values("1,2, 4") == [1.0, 2.0, 4.0]
    assert pipelines.parse_values("lin:0:1:3") == [0.0, 0.5, 1.0]
    assert pipelines.parse_values("geom:1:4:3") == pytest.approx([1.0, 2.0, 4.0])


# ---------------------------------------------------------------------------
# CLI: evolve / steady


def test_cli_evolve_fig2a_csv(tmp_path, capsys):
    assert main(["evolve", _data_path("fig2a"), "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "fig2a.csv", newline="") as fh:
        raw = fh.read()
    assert "\r" not in raw
    rows = list(csv.reader(raw.splitlines()))
    assert tuple(rows[0]) == ("t_ms", "pop_uu", "pop_dd", "pop_S", "pop_T", "LN", "fidelity_S")
    final = dict(zip(rows[0], map(float, rows[-1])))
    assert final["pop_S"] >= 0.95
    assert max(final["pop_uu"], final["pop_dd"], final["pop_T"]) <= 0.05
    for cell in (c for r in rows[1:] for c in r):
        mantissa = re.sub(r"e[-+]\d+$", "", cell).lstrip("-").replace(".", "").lstrip("0")
        assert len(mantissa) <= 9
    rec = ResultRecord.from_json((tmp_path / "fig2a.json").read_text())
    assert rec.provenance["backend"] == "full"
    assert rec.config["protocol"]["t_re_s"] == pytest.approx(40e-6)


def test_cli_evolve_both_backends(tmp_path, capsys):
    cfg = set_path(bundled_config("fig2a"), "t_total_ms", 2.0)
    rc = main(["evolve", _write_cfg(tmp_path, cfg), "--backend", "both", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    assert (tmp_path / "fig2a_full.csv").exists() and (tmp_path / "fig2a_effective.csv").exists()
    rec = ResultRecord.from_json((tmp_path / "fig2a.json").read_text())
    assert set(rec.trajectories) == {"full", "effective"}
    assert rec.summary["comparison"]["max_trace_distance"] >= 0


def test_cli_evolve_missing_t_re(tmp_path, capsys):
    cfg = _drop(bundled_config("fig2a"), "protocol", "t_re_us")
    assert main(["evolve", _write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "protocol.t_re" in capsys.readouterr().err


def test_cli_evolve_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    from nvsinglet.errors import IntegrationError

    def boom(*a, **k):
        raise IntegrationError("trace drift")

    monkeypatch.setattr(pipelines, "run_backend", boom)
    assert main(["evolve", _data_path("fig2a"), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert "trace drift" in capsys.readouterr().err


def test_cli_bad_set_and_missing_file(tmp_path, capsys):
    assert main(["evolve", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert main(["evolve", _data_path("fig2a"), "--set", "novalue"]) == EXIT_USAGE
    assert main(["evolve", "no_such_bundle"]) == EXIT_USAGE


def test_load_config_accepts_bundled_name():
    assert load_config("fig2a") == bundled_config("fig2a")


def test_cli_steady_fig2a(tmp_path, capsys):
    assert main(["steady", _data_path("fig2a"), "--out", str(tmp_path)]) == EXIT_OK
    rec = json.loads((tmp_path / "fig2a_steady.json").read_text())
    s = rec["summary"]
    assert s["zero_mode_count"] == 1
    assert s["spectral_gap_per_s"] > 0
    assert len(s["steady_state"]["re"]) == 4
    assert s["analytic"]["applicable"]
    assert s["LN"] == pytest.approx(s["analytic"]["analytic_LN"], abs=0.01)


def test_cli_steady_degenerate_is_reported(tmp_path, capsys):
    cfg = bundled_config("fig2a")
    cfg = set_path(cfg, "system.nuclei.1.a_par_khz", 2.0)
    cfg = pipelines.apply_override(cfg, "drive.omega_rf_rabi_khz", 0.0)
    assert main(["steady", _write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_OK
    s = json.loads((tmp_path / "fig2a_steady.json").read_text())["summary"]
    assert s["zero_mode_count"] >= 2
    assert s["LN"] is None and s["steady_state"] is None


# ---------------------------------------------------------------------------
# CLI: sweep


def _sweep(tmp_path, name, jobs, extra=()):
    out = tmp_path / name
    args = ["sweep", _data_path("fig2a"), "--mode", "steady", "--jobs", str(jobs), "--out", str(out)]
    args += ["--param", "drive.detuning_sum_khz", "--values", "lin:-1:1:3"]
    args += ["--param", "system.a_perp_asymmetry_khz", "--values=-2,0,2"]
    assert main(args + list(extra)) == EXIT_OK
    return out.read_text()


def test_cli_sweep_grid_order_independent_of_jobs(tmp_path, capsys):
    serial = _sweep(tmp_path, "a.csv", 1)
    parallel = _sweep(tmp_path, "b.csv", 2)
    assert serial == parallel
    rows = list(csv.reader(serial.splitlines()))
    assert rows[0][:2] == ["drive.detuning_sum_khz", "system.a_perp_asymmetry_khz"]
    grid = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert grid == [(a, b) for a in (-1.0, 0.0, 1.0) for b in (-2.0, 0.0, 2.0)]


def test_cli_sweep_rejects_bad_path(tmp_path, capsys):
    args = ["sweep", _data_path("fig2a"), "--param", "drive.bogus", "--values", "1,2", "--out", str(tmp_path / "x.csv")]
    assert main(args) == EXIT_USAGE
    assert "drive.bogus" in capsys.readouterr().err
    args = ["sweep", _data_path("fig2a"), "--param", "drive.rf_tuning", "--values", "1", "--out", str(tmp_path / "x.csv")]
    assert main(args) == EXIT_USAGE


def test_cli_sweep_rejects_mismatched_values(tmp_path, capsys):
    args = ["sweep", _data_path("fig2a"), "--param", "t_total_ms", "--out", str(tmp_path / "x.csv")]
    assert main(args) == EXIT_USAGE


def test_sweep_detuning_coupling_surface(tmp_path):
    """Imbalance-sum by coupling-asymmetry surface peaks at the origin and falls off outward."""
    res = pipelines.figure_fig2b(str(tmp_path))
    h = res["header"]
    ln = {(r[0], r[1]): r[h.index("final_LN")] for r in res["rows"]}
    origin = ln[(0.0, 0.0)]
    assert origin >= 0.9
    for corner in [(-1.0, -4.0), (-1.0, 4.0), (1.0, -4.0), (1.0, 4.0)]:
        assert ln[corner] < origin
    # along each axis LN does not rise moving away from the origin
    for axis in (0, 1):
        line = sorted((k[axis], v) for k, v in ln.items() if k[1 - axis] == 0.0)
        left = [v for x, v in line if x <= 0]
        right = [v for x, v in line if x >= 0]
        assert all(a <= b + 1e-6 for a, b in zip(left, left[1:]))
        assert all(a >= b - 1e-6 for a, b in zip(right, right[1:]))


def test_sweep_imbalance_range_effective(tmp_path):
    """With Omega_rf = 8 Delta and |alpha|^2/Omega_rf = 2 the master equation stays above 0.9."""
    res = pipelines.figure_fig2d(str(tmp_path))
    h = res["header"]
    for row in res["rows"]:
        assert row[h.index("final_LN_effective")] >= 0.9
        assert row[h.index("alpha_sq_over_omega_rf")] == pytest.approx(2, rel=0.1)
    small = [r for r in res["rows"] if r[0] <= 1.0]
    assert all(r[h.index("final_LN_full")] >= 0.9 for r in small)


# ---------------------------------------------------------------------------
# CLI: figure / abundance


def test_cli_figure_unknown_name(capsys, tmp_path):
    assert main(["figure", "fig9", "--out", str(tmp_path)]) == EXIT_USAGE
    err = capsys.readouterr().err
    for name in pipelines.FIGURES:
        assert name in err


def test_cli_figure_fig2a(tmp_path, capsys):
    assert main(["figure", "fig2a", "--out", str(tmp_path), "--jobs", "1"]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "fig2a.csv").read_text().splitlines()))
    last = {k: float(v) for k, v in rows[-1].items()}
    assert last["pop_S"] >= 0.95
    assert max(last["pop_uu"], last["pop_dd"], last["pop_T"]) <= 0.05
    assert os.path.exists(tmp_path / "fig2a.json")


def test_cli_figure_fig3(tmp_path, capsys):
    assert main(["figure", "fig3", "--out", str(tmp_path), "--jobs", "1"]) == EXIT_OK
    summary = json.loads((tmp_path / "fig3.json").read_text())["summary"]
    assert summary["final_t_ms"] == pytest.approx(30.0)
    assert summary["final_LN"] >= 0.95


def test_cli_abundance(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["abundance", "--trials", "20000", "--seed", "5", "--out", str(a)]) == EXIT_OK
    assert main(["abundance", "--trials", "20000", "--seed", "5", "--out", str(b)]) == EXIT_OK
    body_a, body_b = json.loads(a.read_text()), json.loads(b.read_text())
    assert json.dumps(body_a["result"], sort_keys=True) == json.dumps(body_b["result"], sort_keys=True)
    assert "timestamp" in body_a and "timestamp" not in body_a["result"]
    res = body_a["result"]
    assert res["seed"] == 5 and res["trials"] == 20000
    assert res["lattice"]["abundance"] == pytest.approx(0.0055)
    assert res["stderr"] > 0


def test_cli_abundance_rejects_few_trials(capsys):
    assert main(["abundance", "--trials", "100"]) == EXIT_USAGE
