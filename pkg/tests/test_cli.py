import json
import os

import pytest

from bqlcd.cli import main

DATA = os.path.join(os.path.dirname(__file__), "data")


def data(name):
    return os.path.join(DATA, name)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_check_curry_fails_with_c5(capsys):
    code, report = run(capsys, "check", data("curry_proof.json"))
    assert code == 1
    assert report["valid"] is False
    assert {v["constraint"] for v in report["violations"]} == {"C5"}


def test_check_top_int_valid_everywhere(capsys):
    for system in ["nbqlcd_r", "nbqlcd", "tjk+"]:
        code, report = run(capsys, "check", data("top_proof.json"),
                           "--system", system)
        assert code == 0 and report["valid"]


def test_check_malformed_json_exits_2(capsys):
    code = main(["check", data("malformed.json")])
    assert code == 2


def test_check_unknown_system_exits_2(capsys):
    code = main(["check", data("top_proof.json"), "--system", "nope"])
    assert code == 2


def test_reduce_stratum_minus_one_identity(capsys):
    code, payload = run(capsys, "reduce", data("top_proof.json"))
    assert code == 0
    assert payload["n"] == 0
    assert payload["stats"]["strata"] == [-1, -1]


def test_reduce_mp(capsys):
    code, payload = run(capsys, "reduce", data("mp_proof.json"))
    assert code == 0
    assert payload["n"] == 1
    assert payload["proof"]["conclusion"] == "true -> q"
    assert payload["stats"]["strata"][1] == -1


def test_reduce_nested(capsys):
    code, payload = run(capsys, "reduce", data("nested_proof.json"))
    assert code == 0
    assert payload["n"] == 2


def test_reduce_rejects_invalid(capsys):
    code, report = run(capsys, "reduce", data("curry_proof.json"))
    assert code == 1 and report["valid"] is False


def test_sat_true_and_false(capsys):
    code, payload = run(capsys, "sat", data("m1_model.json"),
                        "--world", "w", "--formula", "true")
    assert code == 0 and payload["value"] is True
    code, payload = run(capsys, "sat", data("m1_model.json"),
                        "--world", "w", "--formula", "(p & (p -> q)) -> q")
    assert code == 1 and payload["value"] is False


def test_sat_dead_end_conditional(capsys):
    code, payload = run(capsys, "sat", data("m1_model.json"),
                        "--world", "u", "--formula", "p -> false")
    assert code == 0 and payload["value"] is True


def test_sat_trace(capsys):
    code, payload = run(capsys, "sat", data("m1_model.json"),
                        "--world", "w", "--formula", "p -> q", "--trace")
    assert "trace" in payload
    assert payload["trace"]["formula"] == "p -> q"


def test_sat_unknown_world_exits_2(capsys):
    assert main(["sat", data("m1_model.json"),
                 "--world", "zz", "--formula", "p"]) == 2


def test_sat_open_formula_exits_2(capsys):
    assert main(["sat", data("m1_model.json"),
                 "--world", "w", "--formula", "P(x)"]) == 2


def test_countermodel_found(capsys):
    code, payload = run(capsys, "countermodel",
                        "--conclusion", "(p & (p -> q)) -> q",
                        "--max-worlds", "2", "--max-domain", "1")
    assert code == 0 and payload["found"]
    assert payload["witness"] in payload["model"]["worlds"]


def test_countermodel_none_for_transitivity(capsys):
    code, payload = run(capsys, "countermodel",
                        "--premises", "p -> q", "q -> r",
                        "--conclusion", "p -> r")
    assert code == 1 and payload["found"] is False and payload["exhausted"]


def test_countermodel_identity_modes(capsys):
    code, payload = run(capsys, "countermodel",
                        "--conclusion", "c = d | (c = d -> false)",
                        "--mode", "strict")
    assert code == 1
    code, payload = run(capsys, "countermodel",
                        "--conclusion", "c = d | (c = d -> false)",
                        "--mode", "congruence", "--max-worlds", "2")
    assert code == 0 and payload["found"]


def test_brady_curry(capsys):
    code, report = run(capsys, "brady", data("curry_universe.json"))
    assert code == 0
    assert report["stable"] and report["theta"] == 1
    assert report["checks"]["loop_verified"]


def test_brady_tower_unstable_but_checks_pass(capsys):
    code, report = run(capsys, "brady", data("tower_universe.json"),
                       "--depth-budget", "5")
    assert code == 0
    assert report["stable"] is False


def test_brady_malformed_exits_2(capsys):
    assert main(["brady", data("malformed.json")]) == 2


def test_out_flag_writes_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code = main(["check", data("top_proof.json"), "--out", str(target)])
    assert code == 0
    assert json.loads(target.read_text())["valid"] is True


def test_selftest(capsys):
    code = main(["--jobs", "2", "selftest", "--seed", "7"])
    out = capsys.readouterr().out
    assert code == 0
    assert "persistence: ok" in out
    assert "truth_construction: ok" in out


def test_brady_report_schema(capsys):
    code, report = run(capsys, "brady", data("truth_teller_universe.json"))
    assert code == 0
    assert set(report) >= {"universe", "depth", "theta", "stable", "t_ext",
                           "converged_at", "history", "traces", "checks"}
    for tr in report["traces"]:
        assert set(tr) == {"world", "stages", "fixed_point_stage"}
        assert tr["fixed_point_stage"] <= len(report["universe"]) + 1
    assert all(isinstance(v, bool) for v in report["checks"].values())


def test_check_report_schema(capsys):
    code, report = run(capsys, "check", data("curry_proof.json"))
    assert set(report) == {"valid", "violations"}
    for v in report["violations"]:
        assert set(v) == {"node", "constraint", "message"}


def test_selftest_deterministic(capsys):
    code1 = main(["selftest", "--seed", "3"])
    out1 = capsys.readouterr().out
    code2 = main(["selftest", "--seed", "3"])
    out2 = capsys.readouterr().out
    assert code1 == code2 == 0 and out1 == out2
