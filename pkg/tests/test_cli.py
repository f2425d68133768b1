import json

import pytest

from linpert.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_strata(capsys):
    code, out, _ = run(capsys, "strata", "--n", "1", "--m", "2", "--l", "1", "--sf", "3")
    assert code == 0
    d = json.loads(out)
    assert d["k0"] == 1 and d["s0"] == 1


def test_sf(capsys):
    code, out, _ = run(capsys, "sf", "--catalog", "circle_in_R2", "--samples", "100")
    assert code == 0 and json.loads(out)["s_f"] == 3


def test_verify_exit_codes(capsys):
    base = ["verify", "--property", "morse", "--catalog", "circle_in_R2", "--F", "height_cubed", "--seed", "5"]
    code, out, _ = run(capsys, *base)
    assert code == 0 and json.loads(out)["pass"] is True
    code, out, _ = run(capsys, *base, "--alpha-zero", "--dump-alpha")
    d = json.loads(out)
    assert code == 1 and d["pass"] is False and d["alpha"] == [[0.0, 0.0]]


def test_verify_tolerance_override(capsys):
    code, out, _ = run(capsys, "verify", "--property", "morse", "--catalog", "circle_in_R2", "--F", "height",
                       "--tol", "newton_tol=1e-11")
    assert code == 0 and json.loads(out)["tolerances"]["newton_tol"] == 1e-11


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--property", "morse", "--catalog", "klein_bottle", "--F", "height"],
        ["verify", "--property", "morse", "--catalog", "circle_in_R2", "--F", "height", "--tol", "bogus"],
        ["verify", "--property", "levitation"],
        ["strata", "--n", "0", "--m", "1", "--l", "1"],
        ["experiment", "--config", "/nonexistent/run.cfg"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err


def test_experiment_writes_json_and_csv(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("catalog = circle_in_R2\nF = height_cubed\nproperties = morse\ntrials = 2\ncontrol_zero_alpha = true\n")
    out_csv = tmp_path / "out.csv"
    code, out, _ = run(capsys, "experiment", "--config", str(cfg), "--csv", str(out_csv))
    assert code == 0
    assert json.loads(out)["aggregate"]["morse"]["pass_count"] == 2
    assert out_csv.read_text().splitlines()[0] == "trial,property,pass,key_metric,alpha_digest"


def test_catalog_lists_entries(capsys):
    code, out, _ = run(capsys, "catalog")
    d = json.loads(out)
    assert code == 0 and "torus_in_R3" in d["manifolds"] and "morse" in d["properties"]
