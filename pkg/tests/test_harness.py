import json
import math

import numpy as np
import pytest

from irs_isac import ValidationError, harness
from irs_isac.beamforming import AoSolution
from irs_isac.cli import main
from irs_isac.harness import (CSV_COLUMNS, ConfigError, ExperimentConfig, SweepRecord, parse_config, read_csv,
                              records_to_csv, run_sweep, summarize)
from irs_isac.system import ReflectCoeffs, TransmitDesign

TINY = {"dims": {"M": 2, "N": 2, "K": 1, "T": 64}, "gamma_grid_db": [5.0], "schemes": ["transmit_only"],
        "receiver_types": ["I"], "n_trials": 2}


def tiny(**over):
    doc = json.loads(json.dumps(TINY))
    doc.update(over)
    return parse_config(json.dumps(doc))


def test_empty_config_gives_defaults():
    cfg = parse_config("{}")
    assert (cfg.M, cfg.N, cfg.K, cfg.T) == (8, 8, 3, 256)
    assert cfg.power_dbm == 30.0
    assert (cfg.sigma_r_dbm, cfg.sigma_k_dbm) == (-110.0, -80.0)
    assert cfg.geometry.irs_pos == (4.0, 2.0)
    assert cfg.propagation.alpha_bs_cu == 3.5
    assert cfg.gamma_grid_db == [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]


def test_more_elements_than_antennas_rejected():
    with pytest.raises(ConfigError, match="rank"):
        parse_config('{"dims": {"M": 4, "N": 6}}')


@pytest.mark.parametrize("text, field", [
    ('{"dims": {"Q": 1}}', "dims"),
    ('{"colour": 1}', "colour"),
    ('{"gamma_grid_db": []}', "gamma_grid_db"),
    ('{"schemes": ["magic"]}', "schemes"),
    ('{"receiver_types": ["III"]}', "receiver_types"),
    ('{"base_seed": -1}', "base_seed"),
    ('{"ao": {"rel_tol": 2}}', "ao"),
    ('{"ao": {"speed": 2}}', "ao"),
    ('{"dims": {"K": 0}}', "K"),
    ('{"propagation": {"alpha_bs_cu": -1}}', "propagation"),
])
def test_invalid_fields_are_named(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_parse_error_reports_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        parse_config('{\n  "n_trials": ,\n}')


def test_round_trip_canonical_form():
    doc = {"dims": {"K": 2}, "gamma_grid_db": [10, 20], "ao": {"max_outer_iters": 5}}
    cfg = parse_config(json.dumps(doc))
    canon = cfg.to_dict()
    assert parse_config(json.dumps(canon)).to_dict() == canon
    assert canon["dims"] == {"M": 8, "N": 8, "K": 2, "T": 256}
    assert canon["gamma_grid_db"] == [10.0, 20.0]


def test_single_cell_gives_one_record():
    recs = run_sweep(tiny(n_trials=1))
    assert len(recs) == 1
    r = recs[0]
    assert r.status == "Converged" and r.crb > 0
    assert r.crb_db == pytest.approx(10 * math.log10(r.crb))
    assert math.isnan(r.wall_ms)


def test_same_seed_byte_identical_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(tiny(), a)
    run_sweep(tiny(), b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(tiny(n_trials=3), a, jobs=1)
    run_sweep(tiny(n_trials=3), b, jobs=2)
    assert a.read_bytes() == b.read_bytes()


def fake_solution(ch, value):
    return AoSolution(TransmitDesign.zeros(ch.K, ch.M), ReflectCoeffs(np.zeros(ch.N)), [value], "Converged")


def test_cells_share_channels_and_row_count(monkeypatch):
    seen = {}

    def fake(ch, params, scheme, rx, cfg, seed):
        seen.setdefault(ch.meta["trial"], set()).add(ch.digest())
        return fake_solution(ch, 1.0)

    monkeypatch.setattr(harness, "_run_scheme", fake)
    cfg = parse_config('{"n_trials": 3, "gamma_grid_db": [1, 2], "schemes": ["proposed", "separate"]}')
    recs = run_sweep(cfg)
    assert len(recs) == 3 * 2 * 2 * 2
    assert all(len(d) == 1 for d in seen.values())
    assert len({next(iter(d)) for d in seen.values()}) == 3


def test_solver_failures_are_recorded(monkeypatch):
    from irs_isac.beamforming import SolverError

    def broken(*args):
        raise SolverError("boom")

    monkeypatch.setattr(harness, "_run_scheme", broken)
    recs = run_sweep(tiny())
    assert [r.status for r in recs] == ["NumericalFailure"] * 2
    assert all(math.isnan(r.crb) for r in recs)


def test_csv_round_trip_and_format(tmp_path):
    recs = [SweepRecord(0, 0, 5.0, "I", "proposed", "Converged", 1.234567890123e-5, -49.08485, 3),
            SweepRecord(0, 1, 5.0, "I", "proposed", "Infeasible", float("nan"), float("nan"), 0)]
    text = records_to_csv(recs)
    assert "1.23456789e-05" in text
    assert ",Infeasible,,,0," in text
    path = tmp_path / "r.csv"
    path.write_text(text)
    back = read_csv(path)
    assert back[0].crb == pytest.approx(1.23456789e-5)
    assert math.isnan(back[1].crb)


def record(value_db, status="Converged", gamma=5.0):
    crb = 10 ** (value_db / 10) if status != "Infeasible" else float("nan")
    return SweepRecord(0, 0, gamma, "I", "proposed", status, crb, value_db if status != "Infeasible" else float("nan"), 1)


def test_summary_single_record():
    (row,) = summarize([record(-40.0)])
    assert row["mean_crb_db"] == pytest.approx(-40.0)
    assert row["ci_half_width_db"] == 0.0
    assert row["feasibility_rate"] == 1.0


def test_summary_feasibility_rate():
    (row,) = summarize([record(-40.0), record(-41.0), record(0.0, "Infeasible")])
    assert row["feasibility_rate"] == pytest.approx(2 / 3)
    assert row["n_with_crb"] == 2


def test_summary_hand_computed():
    rows = summarize([record(-40.0), record(-42.0), record(-44.0), record(-10.0, gamma=10.0)])
    first = rows[0]
    assert first["mean_crb_db"] == pytest.approx(-42.0)
    assert first["median_crb_db"] == pytest.approx(-42.0)
    # t(0.975, 2) = 4.302653, sample std 2, n = 3
    assert first["ci_half_width_db"] == pytest.approx(4.302653 * 2 / math.sqrt(3), rel=1e-6)
    assert rows[1]["gamma_db"] == 10.0


def test_summary_rejects_empty():
    with pytest.raises(ValidationError):
        summarize([])


# command line ---------------------------------------------------------------


def write_config(tmp_path, doc=TINY):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "res.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--trials", "1"]) == 0
    assert len(out.read_text().splitlines()) == 2
    summ = tmp_path / "s.json"
    assert main(["summarize", "--in", str(out), "--out", str(summ)]) == 0
    rows = json.loads(summ.read_text())
    assert rows[0]["n_runs"] == 1


def test_cli_validate_prints_canonical(tmp_path, capsys):
    assert main(["validate", "--config", str(write_config(tmp_path, {}))]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == ExperimentConfig().to_dict()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_config(tmp_path, {"dims": {"M": 2, "N": 3}})
    assert main(["validate", "--config", str(bad)]) == 1
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["summarize", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_seed_override_changes_channels(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--config", str(cfg), "--out", str(a), "--trials", "1", "--seed", "1"])
    main(["run", "--config", str(cfg), "--out", str(b), "--trials", "1", "--seed", "2"])
    assert a.read_text() != b.read_text()
    assert a.read_text().splitlines()[1].startswith("1,")
