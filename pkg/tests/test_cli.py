import csv
import io
import json
from fractions import Fraction

import pytest

from suite import TINY, TINY_GOLDEN, TINY_INTERSECTION, TINY_UNIFORM
from halfspace_prg import cli, ltf
from halfspace_prg.eval_count import approx_count
from halfspace_prg.prggen import GenParams, generate, GenSeed, make_params, plan_params


def problem_file(tmp_path, pairs, n, name="problem.json"):
    data = {"n": n, "vars": "pm1",
            "constraints": [{"weights": list(w), "theta": str(t)} for w, t in pairs]}
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def invoke(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def invoke_json(capsys, *argv):
    code, out, err = invoke(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def tiny_flags():
    return ["--n", str(TINY["n"]), "--ell", str(TINY["ell"]),
            "--r-hash", str(TINY["r_hash"]), "--r-bucket", str(TINY["r_bucket"])]


def test_plan_matches_library(capsys):
    report = invoke_json(capsys, "plan", "--n", "1024", "--k", "16", "--s", "4", "--tau", "0.125",
                         "--delta-cnf", str(2.0 ** -20))
    want = plan_params(1024, 16, 4, 0.125, delta_cnf=2.0 ** -20)
    assert GenParams.from_dict(report["params"]) == want
    assert report["error_bound"]["label"] == "HEURISTIC"
    assert report["config"]["n"] == 1024


def test_plan_params_file_round_trip(capsys, tmp_path):
    report = invoke_json(capsys, "plan", "--n", "16", "--k", "2", "--s", "2", "--tau", "0.25")
    path = tmp_path / "params.json"
    path.write_text(json.dumps(report["params"]))
    out = invoke_json(capsys, "gen", "--params", str(path), "--seed-int", "0")
    assert out["params"] == report["params"]
    assert out["samples"][0]["point"] == [1] * 16


def test_gen_seed_forms_agree(capsys):
    p = make_params(**TINY)
    seed = GenSeed.from_int(p, 12345)
    by_int = invoke_json(capsys, "gen", *tiny_flags(), "--seed-int", "12345")
    by_hex = invoke_json(capsys, "gen", *tiny_flags(), "--seed-hex", seed.to_hex(p))
    assert by_int["samples"] == by_hex["samples"]
    assert by_int["samples"][0]["point"] == generate(p, seed)
    drawn = invoke_json(capsys, "gen", *tiny_flags(), "--count", "5", "--stream-id", "3")
    later = invoke_json(capsys, "gen", *tiny_flags(), "--count", "2", "--start", "3", "--stream-id", "3")
    assert drawn["samples"][3:] == later["samples"]


def test_count_matches_library(capsys, tmp_path):
    path = problem_file(tmp_path, TINY_INTERSECTION, 8)
    report = invoke_json(capsys, "count", "-i", path, *tiny_flags())
    F = ltf.intersection_of(TINY_INTERSECTION)
    want = approx_count(F, make_params(**TINY))
    assert Fraction(report["satisfying_estimate_exact"]) == want.satisfying_estimate
    assert want.satisfying_estimate == 256 * (1 - TINY_GOLDEN["intersection"]) / 2


def test_fool_tiny_and_full_independence(capsys, tmp_path):
    path = problem_file(tmp_path, TINY_INTERSECTION, 8)
    report = invoke_json(capsys, "fool", "-i", path, *tiny_flags())
    assert Fraction(report["err_exact"]) == abs(TINY_GOLDEN["intersection"] - TINY_UNIFORM["intersection"])
    path = problem_file(tmp_path, [((1, 1, -1, 1), 0), ((1, 0, 1, 0), 1)], 4, "small.json")
    report = invoke_json(capsys, "fool", "-i", path, "--ell", "2", "--r-hash", "2", "--r-bucket", "4")
    assert Fraction(report["err_exact"]) == 0


def test_fool_on_cnf_file(capsys, tmp_path):
    path = tmp_path / "cnf.json"
    path.write_text(json.dumps(ltf.sparse_to_cnf(ltf.Ltf([1, 1, 1], 0)).to_dict()))
    report = invoke_json(capsys, "fool", "-i", str(path), "--ell", "2", "--r-bucket", "3")
    assert Fraction(report["err_exact"]) == 0


def test_reruns_are_byte_identical(capsys, tmp_path):
    path = problem_file(tmp_path, TINY_INTERSECTION, 8)
    argv = ["count", "-i", path, *tiny_flags(), "--mode", "mc-seeds", "--N", "3000", "--stream-id", "4"]
    _, first, _ = invoke(capsys, *argv)
    _, second, _ = invoke(capsys, *argv)
    assert first == second
    one = json.loads(first)
    many = invoke_json(capsys, *argv, "--workers", "3")
    one.pop("config")
    many.pop("config")
    assert one == many


def test_output_file_and_csv(capsys, tmp_path):
    path = problem_file(tmp_path, TINY_INTERSECTION, 8)
    target = tmp_path / "scan.csv"
    code, out, _ = invoke(capsys, "hybrid-scan", "-i", path, *tiny_flags(), "--format", "csv", "-o", str(target))
    assert code == 0 and out == ""
    rows = list(csv.DictReader(io.StringIO(target.read_text())))
    assert [int(r["b"]) for r in rows] == [0, 1, 2]
    assert Fraction(rows[-1]["value_exact"]) == TINY_GOLDEN["intersection"]
    assert json.loads(rows[0]["config"])["command"] == "hybrid-scan"


def test_diagnostic_subcommands(capsys, tmp_path):
    path = problem_file(tmp_path, [((1, 1, 1, 1, 1, 1), 0), ((1, -1, 1, -1, 1, -1), 0)], 6)
    d = invoke_json(capsys, "dichotomy", "-i", path, "--s", "2", "--tau", "1/2")
    assert [r["class"] for r in d["rows"]] == ["Regular", "Regular"]
    assert len(d["decomposition"]["regular"]) == 2
    b = invoke_json(capsys, "bucket-stats", "-i", path, "--n", "6", "--N", "50")
    assert b["label"] == "HEURISTIC" and b["samples"] == 50
    per = invoke_json(capsys, "bucket-stats", "-i", path, "--hash-seed-hex", "000000")
    assert [r["bucket"] for r in per["rows"]] == [1, 2] and per["rows"][1]["h"] == 0
    s = invoke_json(capsys, "strip", "-i", path, "--N", "2000", "--lambda", "0.2")
    assert 0 <= s["estimate"] <= 1
    inv = invoke_json(capsys, "invariance", "-i", path, "--N", "2000")
    assert inv["p_uniform_method"] == "ExactUniform"
    k = invoke_json(capsys, "verify-kwise", "--n", "4", "--r", "2")
    assert k["passed"]


def test_br_test_subcommand(capsys, tmp_path):
    path = tmp_path / "cnf.json"
    path.write_text(json.dumps({"n": 4, "clauses": [[[1, -1], [2, 1]]]}))
    report = invoke_json(capsys, "br-test", "-i", str(path), "--r", "2")
    assert Fraction(report["error"]) == 0


def test_exit_codes(capsys, tmp_path):
    path = problem_file(tmp_path, TINY_INTERSECTION, 8)
    code, _, err = invoke(capsys, "count", "-i", path, *tiny_flags(), "--strategy", "enumerate", "--cap", "16")
    assert code == cli.EXIT_CAP == 2 and "error" in err
    code, _, _ = invoke(capsys, "count", "-i", str(tmp_path / "missing.json"), "--n", "8")
    assert code == cli.EXIT_IO == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke(capsys, "count", "-i", str(bad), "--n", "8")[0] == 3
    assert invoke(capsys, "plan", "--n", "16", "--k", "2", "--s", "2", "--tau", "1.5")[0] == 1
    assert invoke(capsys, "plan", "--n", "16", "--k", "2")[0] == 1
    code, out, err = invoke(capsys, "strip", "-i", path, "--lambda", "2")
    assert code == 1 and out == ""
    with pytest.raises(SystemExit) as info:
        cli.run(["count"])
    assert info.value.code == 1


def test_help(capsys):
    with pytest.raises(SystemExit) as info:
        cli.run(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in ("plan", "gen", "count", "fool", "hybrid-scan", "br-test", "invariance"):
        assert name in out
    with pytest.raises(SystemExit):
        cli.run(["count", "--help"])
    assert "default" in capsys.readouterr().out
