import json

import pytest
from pydantic import ValidationError

import main
from src.config.settings import DEFAULT_THRESHOLDS
from src.runner import (
    ResidualEntry,
    ResidualReport,
    Scenario,
    batch,
    check_identities,
    cm_simulate,
    exit_code_for,
    load_reports,
    load_scenarios,
    run,
    run_scenario,
)
from src.runner.schemas import LatticeConfig, PeriodMatrixConfig, worst_exit_code
from src.utils.errors import ConfigInvalid

SHIFT_LATTICE = {"omega1": [1.5, 0.0], "omega2": [0.3, 1.2]}
BETHE = {"kind": "bethe", "payload": {"lattice": SHIFT_LATTICE, "q": [[0.3, 0.2]]}, "outputs": {"csv": True}}
NO_ZEROS = {
    "kind": "involution",
    "payload": {"variant": "kp", "tau": [0, 1], "U": [1], "V": [0], "zeta": [0],
                "window": [[0.1, 0.1], [0.3, 0.3]]},
}


def _write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


# --- esquemas ---------------------------------------------------------------------

def test_complex_pairs_and_numbers():
    lat = LatticeConfig(omega1=0.5, omega2=[0.0, 0.5]).build()
    assert lat.omega2 == 0.5j
    with pytest.raises(ValidationError):
        LatticeConfig(omega1="medio", omega2=[0, 1])


def test_period_shape_error_names_index():
    with pytest.raises(ValidationError) as info:
        PeriodMatrixConfig(g=2, B_re=[[0, 0], [0, 0]], B_im=[[1, 0], [0]])
    assert "B_im[1]" in str(info.value)


def test_payload_error_names_field():
    bad = {"kind": "cm", "payload": {"q": [0.1, 0.2], "p": [0.0], "lattice": SHIFT_LATTICE,
                                     "z": [0.3, 0.2], "dt": 0.01, "steps": 3}}
    with pytest.raises(ValidationError) as info:
        Scenario.model_validate(bad)
    assert "payload" in str(info.value)
    bad["payload"]["p"] = [0.0, 0.0]
    bad["payload"]["dt"] = -1.0
    with pytest.raises(ValidationError) as info:
        Scenario.model_validate(bad)
    assert "payload.dt" in str(info.value)


def test_unknown_kind_rejected():
    with pytest.raises(ValidationError):
        Scenario.model_validate({"kind": "navier-stokes", "payload": {}})


def test_scenario_digest_tracks_content():
    a = Scenario.model_validate(BETHE)
    b = Scenario.model_validate(BETHE)
    assert a.digest() == b.digest()
    assert a.model_copy(update={"seed": a.seed + 1}).digest() != a.digest()


def test_typed_payload_parses_complex():
    payload = Scenario.model_validate(BETHE).typed_payload()
    assert payload.q0 == [0.3 + 0.2j]
    assert payload.window == (-2, 2)


# --- reportes -------------------------------------------------------------------------

@pytest.mark.parametrize(
    "value, threshold, bound, passed",
    [
        (1e-10, 1e-9, "upper", True),
        (1e-8, 1e-9, "upper", False),
        (0.98, 0.9, "lower", True),
        (0.5, 0.9, "lower", False),
        (3.0, None, "upper", True),
        (float("nan"), None, "upper", False),
    ],
)
def test_residual_entry_judge(value, threshold, bound, passed):
    assert ResidualEntry.judge("r", value, threshold, bound).passed is passed


def test_report_round_trip():
    report = ResidualReport(scenario="s", kind="kp", digest="abc", seed=7, status="fail",
                            residuals=[ResidualEntry.judge("kp.residual", 3e-4, 1e-4)],
                            provenance={"grid": [[0.1, 0.0]], "const": [-1.2, 0.0]},
                            deviations=["cero no simple"], seconds=1.5)
    back = ResidualReport.model_validate_json(report.model_dump_json())
    assert back == report
    assert "seconds" not in json.loads(report.to_json())
    assert json.loads(report.to_json(timing=True))["seconds"] == 1.5


def test_exit_codes():
    assert ResidualReport(scenario="a", status="pass").exit_code == 0
    assert ResidualReport(scenario="a", status="fail").exit_code == 2
    assert ResidualReport(scenario="a", status="error").exit_code == 1
    assert worst_exit_code([0, 2, 0]) == 2
    assert worst_exit_code([2, 1, 0]) == 1
    assert worst_exit_code([]) == 0


# --- ejecución ------------------------------------------------------------------------

def test_empty_scenario_list(tmp_path):
    path = _write(tmp_path / "vacio.json", [])
    reports = run(path, out_dir=tmp_path / "out")
    assert reports == []
    assert exit_code_for(reports) == 0
    assert (tmp_path / "out" / "vacio.json").read_text(encoding="utf-8") == "[]\n"


def test_bethe_scenario_passes_and_writes_table(tmp_path):
    path = _write(tmp_path / "bethe.json", BETHE)
    [report] = run(path, out_dir=tmp_path / "out")
    assert report.status == "pass"
    assert report.residuals[0].name == "bethe.residual"
    assert report.residuals[0].value <= 1e-12
    table = (tmp_path / "out" / "bethe.levels.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == "n,re_q0,im_q0"
    assert len(table) == 1 + 5


def test_bethe_unit_spacing_threshold_is_strict(tmp_path):
    assert not ResidualEntry.judge("bethe.residual", 1e-10, DEFAULT_THRESHOLDS["bethe.residual"]).passed
    [report] = run(_write(tmp_path / "bethe.json", BETHE), out_dir=tmp_path / "out")
    assert report.residuals[0].threshold == 1e-12


def test_bethe_march_has_own_threshold(tmp_path):
    march = {"q_prev": [[-0.9, 0.05], [-0.45, 0.4]], "q_curr": [[0.1, 0.05], [0.55, 0.4]], "levels": 3}
    scenario = {"kind": "bethe", "payload": {"lattice": SHIFT_LATTICE, "march": march}}
    [report] = run(_write(tmp_path / "marcha.json", scenario), out_dir=tmp_path / "out")
    [entry] = report.residuals
    assert entry.name == "bethe.march_residual"
    assert entry.threshold == DEFAULT_THRESHOLDS["bethe.march_residual"] == 1e-9
    assert report.status == "pass"


def test_tolerance_override_fails(tmp_path):
    scenario = dict(BETHE, tolerances={"bethe.residual": -1.0})
    [report] = run(_write(tmp_path / "estricto.json", scenario), out_dir=tmp_path / "out")
    assert report.status == "fail"
    assert report.exit_code == 2


def test_module_error_is_reported(tmp_path):
    [report] = run(_write(tmp_path / "sin_ceros.json", NO_ZEROS), out_dir=tmp_path / "out")
    assert report.status == "error"
    assert "InsufficientZeros" in report.error
    assert report.exit_code == 1


def test_invalid_file_raises_config_invalid(tmp_path):
    path = tmp_path / "roto.json"
    path.write_text("{ no es json", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        load_scenarios(path)
    bad = _write(tmp_path / "malo.json", [BETHE, {"kind": "bethe", "payload": {"lattice": SHIFT_LATTICE}}])
    with pytest.raises(ConfigInvalid) as info:
        load_scenarios(bad)
    assert "malo.json[1]" in str(info.value)


def test_list_names_and_seed_override(tmp_path):
    path = _write(tmp_path / "lista.json", [BETHE, BETHE])
    reports = run(path, out_dir=tmp_path / "out", seed=123)
    assert [r.scenario for r in reports] == ["lista-00", "lista-01"]
    assert all(r.seed == 123 for r in reports)
    assert load_reports(tmp_path / "out" / "lista.json") == [r.model_copy(update={"seconds": None})
                                                              for r in reports]


def test_provenance_reruns_scenario(tmp_path):
    [report] = run(_write(tmp_path / "bethe.json", BETHE), out_dir=tmp_path / "out")
    again = Scenario.model_validate(report.provenance["scenario"])
    assert again.digest() == report.digest
    assert run_scenario(again).report.residuals == report.residuals


def test_rerun_is_bit_identical(tmp_path):
    for name in ("a", "b"):
        check_identities(g=1, samples=4, seed=11, out_dir=tmp_path / name)
    first = (tmp_path / "a" / "check-identities-g1.json").read_bytes()
    second = (tmp_path / "b" / "check-identities-g1.json").read_bytes()
    assert first == second


def test_identity_battery_genus_one(tmp_path):
    report = check_identities(g=1, samples=10, seed=7, out_dir=tmp_path)
    names = {entry.name for entry in report.residuals}
    assert {"theta.quasiperiodicity", "theta.addition", "weierstrass.phi_pole_slope"} <= names
    assert report.status == "pass"


def test_csv_report_format(tmp_path):
    run(_write(tmp_path / "bethe.json", BETHE), out_dir=tmp_path / "out", fmt="csv")
    lines = (tmp_path / "out" / "bethe.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("scenario,kind,digest,status,residual")
    assert lines[1].split(",")[4] == "bethe.residual"


# --- simulaciones y lotes ---------------------------------------------------------------

def test_cm_simulate_short_format(tmp_path):
    config = {"system": "cm", "N": 2, "q": [[0.2, 0.1], [0.55, 0.3]], "p": [0.1, -0.1],
              "lattice": {"omega1": [0.5, 0], "omega2": [0.17, 0.62]}, "z": [0.3, 0.2],
              "dt": 1e-3, "steps": 20}
    [report] = cm_simulate(_write(tmp_path / "cm2.json", config), out_dir=tmp_path / "out")
    values = {entry.name: entry.value for entry in report.residuals}
    assert values["cm.lax"] <= 1e-8
    assert report.provenance["kappa"] == 4.0
    entries = {entry.name: entry for entry in report.residuals}
    for name in ("cm.negative_sign", "cm.negative_sign_flipped"):
        assert entries[name].bound == "lower"
        assert entries[name].value > 1e-2
        assert entries[name].passed
    rows = (tmp_path / "out" / "cm2.trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert len(rows) == 1 + 21


def test_cm_simulate_rejects_other_kinds(tmp_path):
    path = _write(tmp_path / "theta.json", {"kind": "theta-check", "payload": {"g": 1, "samples": 1}})
    with pytest.raises(ConfigInvalid):
        cm_simulate(path, out_dir=tmp_path / "out")


def test_batch_orders_rows_and_keeps_going(tmp_path):
    scenarios = tmp_path / "escenarios"
    scenarios.mkdir()
    _write(scenarios / "b_estricto.json", dict(BETHE, tolerances={"bethe.residual": -1.0}))
    _write(scenarios / "a_bethe.json", BETHE)
    (scenarios / "c_roto.json").write_text("[", encoding="utf-8")
    summary = batch(scenarios, out_dir=tmp_path / "out", threads=2)
    assert [row.file for row in summary.rows] == ["a_bethe.json", "b_estricto.json", "c_roto.json"]
    assert [row.status for row in summary.rows] == ["pass", "fail", "error"]
    assert summary.exit_code == 1
    assert (tmp_path / "out" / "summary.json").exists()
    assert (tmp_path / "out" / "a_bethe.json").exists()


def test_main_exit_codes(tmp_path):
    out = str(tmp_path / "out")
    empty = _write(tmp_path / "vacio.json", [])
    strict = _write(tmp_path / "estricto.json", dict(BETHE, tolerances={"bethe.residual": -1.0}))
    invalid = _write(tmp_path / "malo.json", {"kind": "bethe", "payload": {}})
    assert main.main(["run", "--config", str(empty), "--out", out]) == 0
    assert main.main(["run", "--config", str(strict), "--out", out]) == 2
    assert main.main(["run", "--config", str(invalid), "--out", out]) == 1
