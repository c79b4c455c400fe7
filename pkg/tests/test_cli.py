import json

import jsonschema
import numpy as np
import pytest

from qhjm.cli import main
from qhjm.fixtures import SIGMA2

SCHEMA_PATH = "src/qhjm/report_schema.json"


def run_cli(args, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(list(args) + ["--output", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


@pytest.fixture(scope="module")
def schema():
    with open(SCHEMA_PATH) as fh:
        return json.load(fh)


def validate(report, schema):
    jsonschema.validate(report, schema)


class TestDecompose:
    def test_sigma3_rank_one(self, tmp_path, schema):
        code, report = run_cli(
            ["decompose", "--builtin", "sigma3", "--r", "1", "--seed", "1"], tmp_path
        )
        assert code == 0
        validate(report, schema)
        assert report["results"]["explained_variance"] == pytest.approx(0.800, abs=1e-3)

    def test_sigma2_full_spectrum(self, tmp_path, schema):
        code, report = run_cli(
            ["decompose", "--builtin", "sigma2", "--r", "2", "--seed", "1"], tmp_path
        )
        assert code == 0
        validate(report, schema)
        tr = float(np.trace(SIGMA2))
        vals = report["results"]["eigenvalues"]
        assert vals[0] == pytest.approx(0.8576 * tr, rel=1e-3)
        assert vals[1] == pytest.approx(0.1424 * tr, rel=1e-3)

    def test_identity_from_file(self, tmp_path, schema):
        src = tmp_path / "ident.json"
        src.write_text(json.dumps({"matrix": np.eye(3).tolist(), "grid": [1, 2, 3]}))
        code, report = run_cli(
            ["decompose", "--matrix", str(src), "--r", "3", "--seed", "1"], tmp_path
        )
        assert code == 0
        validate(report, schema)
        assert report["results"]["explained_variance"] == pytest.approx(1.0)

    def test_bad_matrix_file_exits_validation(self, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text(json.dumps({"matrix": [[1, 2], [2, -5]]}))
        code, _ = run_cli(["decompose", "--matrix", str(src), "--r", "1"], tmp_path)
        assert code == 2

    def test_missing_file_rejected_at_parse(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["decompose", "--matrix", str(tmp_path / "nope.json")])
        assert exc.value.code == 2


class TestQpca:
    def test_two_bit_run_matches_embedded_oracle(self, tmp_path, schema):
        code, report = run_cli(
            ["qpca", "--builtin", "sigma2", "--bits", "2", "--shots", "8192", "--seed", "7"],
            tmp_path,
        )
        assert code == 0
        validate(report, schema)
        est = report["results"]["estimate"]
        assert est["converged"] and est["iterations"] <= 4
        vec = np.array(est["eigenvector_real"]) + 1j * np.array(est["eigenvector_imag"])
        oracle = np.array(report["results"]["oracle"]["leading_eigenvector"])
        assert abs(np.vdot(vec, oracle)) ** 2 >= 0.999
        assert report["results"]["ambiguity"]["verdict"] == "K=1"
        assert report["results"]["entangling_count"] == 6
        assert set(report["results"]["histograms"]) == {"z", "x", "y", "r"}

    def test_noisy_register_decoheres(self, tmp_path, schema):
        code, report = run_cli(
            ["qpca", "--builtin", "sigma2", "--bits", "3", "--noise", "0.08", "--seed", "7"],
            tmp_path,
        )
        assert code == 0
        validate(report, schema)
        tv = report["results"]["eigenvalue_register_tv_to_uniform"]
        # noiseless peak sits at TV ~0.82; twelve entanglers at 8% leave ~0.34
        assert 0.20 <= tv <= 0.45

    def test_zero_bits_rejected_by_parser(self):
        with pytest.raises(SystemExit) as exc:
            main(["qpca", "--builtin", "sigma2", "--bits", "0"])
        assert exc.value.code == 2

    def test_annihilating_projection_exits_numerical(self, tmp_path, capsys):
        src = tmp_path / "pure.json"
        src.write_text(json.dumps({"matrix": [[1.0, 0.0], [0.0, 0.0]]}))
        code, _ = run_cli(
            ["qpca", "--matrix", str(src), "--bits", "2", "--target-bits", "11", "--seed", "1"],
            tmp_path,
        )
        assert code == 3
        assert "hint" in capsys.readouterr().err


class TestHjm:
    def test_reference_factors_martingale(self, tmp_path, schema):
        code, report = run_cli(
            [
                "hjm", "--factors-from", "sigma3", "--r", "1", "--paths", "20000",
                "--dt", "0.00396", "--horizon", "0.5", "--seed", "11",
            ],
            tmp_path,
        )
        assert code == 0
        validate(report, schema)
        for row in report["results"]["martingale"]:
            assert row["abs_error"] <= 3 * row["mc_standard_error"]

    def test_zero_volatility_single_path_is_exact(self, tmp_path, schema):
        code, report = run_cli(
            ["hjm", "--sigma", "0", "--paths", "1", "--horizon", "0.5", "--seed", "1"],
            tmp_path,
        )
        assert code == 0
        validate(report, schema)
        prices = {p["maturity"]: p["price"] for p in report["results"]["bond_prices"]}
        for row in report["results"]["martingale"]:
            assert row["mc_estimate"] == pytest.approx(prices[row["maturity"]], abs=1e-10)

    def test_quantum_extraction_pipeline(self, tmp_path, schema):
        code, report = run_cli(
            [
                "hjm", "--factors-from", "sigma2", "--quantum", "--bits", "3",
                "--paths", "2000", "--horizon", "0.15", "--dt", "0.01", "--seed", "13",
            ],
            tmp_path,
        )
        assert code == 0
        validate(report, schema)
        assert report["results"]["factor_set"]["provenance"] == "quantum"

    def test_horizon_beyond_factor_grid_rejected(self, tmp_path):
        code, _ = run_cli(
            ["hjm", "--factors-from", "sigma3", "--horizon", "2.0", "--paths", "10"],
            tmp_path,
        )
        assert code == 2

    def test_missing_source_rejected(self, tmp_path):
        code, _ = run_cli(["hjm", "--paths", "10"], tmp_path)
        assert code == 2


class TestIngestCheck:
    def test_valid_history(self, tmp_path, schema):
        csv = tmp_path / "hist.csv"
        csv.write_text(
            "date,tenor_1m,tenor_3m\n2024-01-02,0.03,0.032\n2024-01-03,0.031,0.033\n"
        )
        code, report = run_cli(["ingest-check", "--history", str(csv)], tmp_path)
        assert code == 0
        validate(report, schema)
        assert report["results"]["rows"] == 2
        assert report["results"]["first_date"] == "2024-01-02"

    def test_invalid_history_exits_validation(self, tmp_path):
        csv = tmp_path / "hist.csv"
        csv.write_text("date,tenor_1q\n2024-01-02,0.03\n")
        code, _ = run_cli(["ingest-check", "--history", str(csv)], tmp_path)
        assert code == 2


class TestDeterminism:
    @pytest.mark.parametrize(
        "args",
        [
            ["decompose", "--builtin", "sigma3", "--r", "2", "--seed", "5"],
            ["qpca", "--builtin", "sigma2", "--bits", "2", "--shots", "2048", "--seed", "5"],
            [
                "hjm", "--factors-from", "sigma3", "--r", "1", "--paths", "3000",
                "--horizon", "0.25", "--seed", "5",
            ],
        ],
    )
    def test_identical_seed_identical_bytes(self, tmp_path, args):
        _, first = run_cli(args, tmp_path, "a.json")
        _, second = run_cli(args, tmp_path, "b.json")
        first.pop("generated_at")
        second.pop("generated_at")
        assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)

    def test_seed_env_var_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QHJM_SEED", "77")
        _, report = run_cli(["decompose", "--builtin", "sigma2"], tmp_path)
        assert report["provenance"]["seed"] == 77
