import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from circmatern.cli import main, read_fields

GOLDEN = Path(__file__).parent / "golden"

# name -> argv; the files in tests/golden were written by these exact flags
GOLDEN_CASES = {
    "cov_alpha1": ["cov", "--alpha", "1", "--kappa", "1", "--n", "4", "--closed"],
    "cov_alpha3_series": ["cov", "--alpha", "3", "--kappa", "2.5", "--n", "8", "--series", "--tol", "1e-14"],
    "car_order1": ["car", "--n", "3", "--order", "1", "--a", "0.3", "--sigma2", "1"],
    "car_order2": ["car", "--n", "7", "--order", "2", "--a", "0.45", "--sigma2", "0.5"],
    "match_alpha1": ["match", "--alpha", "1", "--kappa", "10", "--n", "50", "--besag"],
    "match_alpha2": ["match", "--alpha", "2", "--kappa", "10", "--n", "10"],
    "figure1": ["figure1"],
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split("=", 1)
            meta[k] = v
        else:
            body.append(line.split(","))
    header, rows = body[0], body[1:]
    return meta, [dict(zip(header, r)) for r in rows]


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_golden_files(name, fmt, capsys):
    code, out, _ = run(GOLDEN_CASES[name] + ["--format", fmt], capsys)
    assert code == 0
    assert out == (GOLDEN / f"{name}.{fmt}").read_text()
    code, again, _ = run(GOLDEN_CASES[name] + ["--format", fmt], capsys)
    assert again == out


def test_cov_examples(capsys):
    _, out, _ = run(GOLDEN_CASES["cov_alpha1"], capsys)
    meta, rows = parse_csv(out)
    assert rows[0]["lag"] == "0" and float(rows[0]["value"]) == pytest.approx(1.081977, abs=1e-6)
    _, series, _ = run(["cov", "--alpha", "1", "--kappa", "1", "--n", "4", "--series", "--tol", "1e-12"], capsys)
    _, srows = parse_csv(series)
    np.testing.assert_allclose([float(r["value"]) for r in srows], [float(r["value"]) for r in rows], atol=1e-9)
    assert meta["method"] == "closed"


def test_json_mirrors_csv(capsys):
    _, csv_out, _ = run(GOLDEN_CASES["car_order2"], capsys)
    _, json_out, _ = run(GOLDEN_CASES["car_order2"] + ["--format", "json"], capsys)
    meta, rows = parse_csv(csv_out)
    doc = json.loads(json_out)
    assert list(doc["meta"]) == list(meta)
    assert doc["columns"] == list(rows[0])
    for r, j in zip(rows, doc["rows"]):
        for c in doc["columns"]:
            assert float(r[c]) == pytest.approx(j[c], rel=1e-15)


def test_car_examples(capsys):
    code, out, _ = run(GOLDEN_CASES["car_order1"], capsys)
    meta, rows = parse_csv(out)
    np.testing.assert_allclose([float(r["covariance"]) for r in rows], [1.346154, 0.576923, 0.576923], atol=1e-6)
    assert meta["psd"] == "true"
    code, _, err = run(["car", "--n", "4", "--order", "2", "--a", "0.3"], capsys)
    assert code == 2 and len(err.strip().splitlines()) == 1


def test_match_examples(capsys):
    _, out, err = run(GOLDEN_CASES["match_alpha1"], capsys)
    meta, _ = parse_csv(out)
    assert float(meta["a"]) == pytest.approx(0.490164, abs=1e-6)
    assert float(meta["sigma2"]) == pytest.approx(0.00986877, abs=1e-8)
    assert float(meta["max_corr_diff"]) <= 1e-10
    assert float(meta["besag_a"]) == pytest.approx(0.4901961, abs=1e-7)
    assert meta["warning"] == "none" and err == ""
    _, out, err = run(GOLDEN_CASES["match_alpha2"], capsys)
    meta, _ = parse_csv(out)
    assert float(meta["discrepancy_factor"]) == pytest.approx(1.313035, abs=1e-6)
    assert "warning" in err and meta["warning"] != "none"


def test_figure1(capsys):
    _, out, _ = run(["figure1", "--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["meta"]["alpha"] == 2 and doc["meta"]["kappa"] == 10
    assert doc["meta"]["left_n"] == 10 and doc["meta"]["right_n"] == 50
    assert doc["meta"]["right_max_corr_diff"] < doc["meta"]["left_max_corr_diff"]
    assert len(doc["rows"]) == 60
    code, _, _ = run(["figure1", "--alpha", "1"], capsys)
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["cov", "--alpha", "0.4", "--kappa", "1", "--n", "4"],
        ["cov", "--alpha", "1", "--kappa", "-1", "--n", "4"],
        ["cov", "--alpha", "1", "--kappa", "1", "--n", "four"],
        ["cov", "--alpha", "1", "--kappa", "1", "--n", "4", "--closed", "--series"],
        ["car", "--n", "5", "--a", "0.5"],
        ["match", "--alpha", "3", "--kappa", "1", "--n", "10"],
        ["sample", "--n", "8", "--kappa", "1", "--alpha", "1", "--seed", "abc"],
        ["sample", "--n", "8", "--kappa", "1", "--alpha", "1"],
        ["sample", "--n", "8", "--model", "car", "--seed", "1"],
        ["ergodicity", "--kappa", "10", "--alpha", "1", "--replicates", "0", "--seed", "0"],
        ["ergodicity", "--kappa", "10", "--alpha", "1", "--sizes", "16,x", "--seed", "0"],
        ["nosuchcommand"],
        [],
    ],
)
def test_invalid_arguments_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert out == ""
    assert len(err.strip().splitlines()) == 1


def test_numerical_failure_exit_3(tmp_path, capsys):
    path = tmp_path / "fields.csv"
    path.write_text("replicate,index,value\n" + "".join(f"0,{i},1.0\n" for i in range(6)))
    # a constant field only pushes the fit to a bracket end, which is not an error
    code, out, _ = run(["fit", "--input", str(path), "--alpha", "1"], capsys)
    assert code == 0
    for alpha in ("1", "2", "3"):
        code, out, err = run(["cov", "--alpha", alpha, "--kappa", "1e-300", "--n", "4"], capsys)
        assert code == 3 and out == "" and err.count("\n") == 1


def test_sample_determinism_and_summary(tmp_path, capsys):
    argv = ["sample", "--n", "16", "--kappa", "1", "--alpha", "1", "--seed", "5", "--replicates", "3"]
    _, first, _ = run(argv, capsys)
    _, second, _ = run(argv, capsys)
    assert first == second
    _, other, _ = run(argv[:-3] + ["6", "--replicates", "3"], capsys)
    assert other != first
    code, out, _ = run(
        ["sample", "--n", "16", "--kappa", "1", "--alpha", "1", "--seed", "5", "--replicates", "20000", "--summary"],
        capsys,
    )
    assert code == 0
    _, rows = parse_csv(out)
    lag0 = rows[0]
    assert float(lag0["theory"]) == pytest.approx(1.081977, abs=1e-6)
    assert abs(float(lag0["z"])) < 4
    code, out, _ = run(["sample", "--model", "car", "--n", "8", "--a", "0.3", "--seed", "1", "--format", "json"], capsys)
    assert code == 0 and len(json.loads(out)["rows"]) == 8


def test_fit_from_files(tmp_path, capsys):
    csv_path = tmp_path / "fields.csv"
    code, _, _ = run(
        ["sample", "--n", "128", "--kappa", "5", "--alpha", "1", "--seed", "2024", "--replicates", "200", "--out", str(csv_path)],
        capsys,
    )
    assert code == 0
    assert read_fields(str(csv_path)).shape == (200, 128)
    _, out, _ = run(["fit", "--input", str(csv_path), "--alpha", "1"], capsys)
    _, rows = parse_csv(out)
    assert 4.5 <= float(rows[0]["kappa"]) <= 5.5 and rows[0]["boundary"] == "none"

    json_path = tmp_path / "fields.json"
    run(["sample", "--n", "32", "--kappa", "5", "--alpha", "1", "--seed", "1", "--replicates", "4", "--format", "json", "--out", str(json_path)], capsys)
    np.testing.assert_allclose(read_fields(str(json_path)), read_fields(str(json_path)))
    assert read_fields(str(json_path)).shape == (4, 32)

    zero = tmp_path / "zero.csv"
    zero.write_text("replicate,index,value\n" + "".join(f"0,{i},0\n" for i in range(16)))
    _, out, _ = run(["fit", "--input", str(zero), "--alpha", "2"], capsys)
    _, rows = parse_csv(out)
    assert rows[0]["boundary"] in ("lower", "upper")

    holes = tmp_path / "holes.csv"
    holes.write_text("replicate,index,value\n0,0,1\n0,2,1\n")
    code, _, _ = run(["fit", "--input", str(holes), "--alpha", "1"], capsys)
    assert code == 2
    code, _, _ = run(["fit", "--input", str(tmp_path / "missing.csv"), "--alpha", "1"], capsys)
    assert code == 2


def test_ergodicity_command(capsys):
    code, out, _ = run(["ergodicity", "--kappa", "10", "--alpha", "1", "--seed", "0", "--replicates", "20000"], capsys)
    assert code == 0
    _, rows = parse_csv(out)
    assert [r["n"] for r in rows] == ["16", "64", "256"]
    assert all(abs(float(r["z"])) < 3 for r in rows)
    _, out, _ = run(
        ["ergodicity", "--kappa", "10", "--alpha", "1", "--seed", "0", "--replicates", "20000", "--extra-variance", "0.05", "--sizes", "16,256"],
        capsys,
    )
    _, rows = parse_csv(out)
    np.testing.assert_allclose([float(r["variance"]) for r in rows], 0.06, rtol=0.05)


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment manifest\nalpha = 1\nkappa=1\nn=4\nclosed=true\n")
    code, out, _ = run(["cov", "--config", str(cfg)], capsys)
    assert code == 0
    assert out == (GOLDEN / "cov_alpha1.csv").read_text()
    # flags win over the file
    code, out, _ = run(["cov", "--config", str(cfg), "--kappa", "2"], capsys)
    meta, _ = parse_csv(out)
    assert meta["kappa"] == "2"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert run(["cov", "--config", str(bad)], capsys)[0] == 2
    bad.write_text("just text\n")
    assert run(["cov", "--config", str(bad)], capsys)[0] == 2
    assert run(["cov", "--config", str(tmp_path / "nope.cfg")], capsys)[0] == 2


def test_out_path_and_module_entry(tmp_path):
    out = tmp_path / "car.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "circmatern"] + GOLDEN_CASES["car_order1"] + ["--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout == ""
    assert out.read_text() == (GOLDEN / "car_order1.csv").read_text()
    proc = subprocess.run([sys.executable, "-m", "circmatern", "cov", "--alpha", "0.4", "--kappa", "1", "--n", "4"], capture_output=True, text=True)
    assert proc.returncode == 2
