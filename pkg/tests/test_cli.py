import json
import math

import numpy as np
import pytest

from quadform.cli import main


def run_cli(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def docs(tmp_path):
    paths = {}

    def write(name, payload):
        p = tmp_path / name
        p.write_text(json.dumps(payload))
        paths[name] = str(p)

    write("chisq2.json", {"kind": "reduced", "omega": [1.0], "nu": [2],
                          "delta2": [0.0], "sigma": 0.0, "const": 0.0})
    write("example1.json", {
        "kind": "raw",
        "a": (np.array([[-1, -1, 1, -1], [-1, -1, -1, 1], [1, -1, 1, 1],
                        [-1, 1, 1, 1]]) / 2.0).tolist(),
        "b": [0, 0, 0, 0], "c": 0.0, "mu": [0, 1, 0, 1],
        "sigma_mat": (np.array([[5, 5, 3, 3], [5, 5, 3, 3], [3, 3, 9, 1],
                                [3, 3, 1, 9]]) / 4.0).tolist(),
    })
    write("beta.json", {"kind": "ratio", "a": [[1, 0], [0, 0]],
                        "b": [[1, 0], [0, 1]], "mu": [0, 0],
                        "sigma_mat": [[1, 0], [0, 1]]})
    write("complex.json", {
        "kind": "raw_complex",
        "a": [[[1, 0], [0, -1]], [[0, 1], [1, 0]]],
        "b": [[1, 0], [1, 0]], "c": 0.0,
        "mu": [[1, 0], [1, 1]],
        "sigma_mat": [[[10, 0], [0, -6]], [[0, 6], [10, 0]]],
    })
    write("gauss_only.json", {"kind": "reduced", "omega": [], "nu": [],
                              "delta2": [], "sigma": 0.0, "const": 0.0})
    return paths


class TestCommands:
    def test_reduce_paper_example(self, capsys, docs):
        code, out, _ = run_cli(capsys, "reduce", docs["example1.json"])
        assert code == 0
        payload = json.loads(out)
        assert np.allclose(sorted(payload["omega"]), [-2.0, 2.0], atol=1e-9)
        assert np.allclose(payload["delta2"], [0.125, 0.125], atol=1e-9)
        assert abs(payload["sigma"] - 2.0) < 1e-9
        assert abs(payload["const"] - 1.0) < 1e-9
        assert payload["classification"]["definiteness"] == "indefinite"

    def test_reduce_complex(self, capsys, docs):
        code, out, _ = run_cli(capsys, "reduce", docs["complex.json"])
        assert code == 0
        payload = json.loads(out)
        assert np.allclose(payload["omega"], [16.0], atol=1e-9)
        assert payload["nu"] == [2]
        assert abs(payload["delta2"][0] - 53 / 128) < 1e-9

    def test_cdf_value(self, capsys, docs):
        code, out, _ = run_cli(capsys, "cdf", "--q", "2", docs["chisq2.json"])
        assert code == 0
        payload = json.loads(out)
        assert abs(payload["value"] - (1 - math.exp(-1))) < 1e-9
        assert payload["method"] == "central_even"
        assert payload["error_bound"] == 0.0

    def test_quantile(self, capsys, docs):
        code, out, _ = run_cli(capsys, "quantile", "--p", "0.5", docs["chisq2.json"])
        payload = json.loads(out)
        assert code == 0
        assert abs(payload["value"] - 2 * math.log(2)) < 1e-7

    def test_ratio_moment(self, capsys, docs):
        code, out, _ = run_cli(capsys, "ratio-moment", "--p", "1", docs["beta.json"])
        payload = json.loads(out)
        assert code == 0
        assert abs(payload["value"] - 0.5) < 1e-8

    def test_grid_reuses_reduction(self, capsys, docs):
        code, out, _ = run_cli(capsys, "cdf", "--grid", "0:4:5", docs["chisq2.json"])
        payload = json.loads(out)
        assert code == 0
        assert payload["grid"] == [0.0, 1.0, 2.0, 3.0, 4.0]
        expect = [0.0] + [1 - math.exp(-q / 2) for q in (1.0, 2.0, 3.0, 4.0)]
        assert np.allclose(payload["values"], expect, atol=1e-12)

    def test_moments_and_cumulants(self, capsys, docs):
        code, out, _ = run_cli(capsys, "moments", "--order", "2", docs["chisq2.json"])
        assert json.loads(out)["values"] == [2.0, 8.0]
        code, out, _ = run_cli(capsys, "cumulants", "--order", "3", docs["chisq2.json"])
        assert json.loads(out)["values"] == [2.0, 4.0, 16.0]

    def test_mc_check(self, capsys, docs):
        code, out, _ = run_cli(capsys, "mc-check", "--q", "2", "--n", "200000",
                               "--seed", "11", docs["chisq2.json"])
        payload = json.loads(out)
        assert code == 0
        assert abs(payload["z_score"]) < 4.0
        assert payload["seed"] == 11

    def test_byte_identical_output(self, capsys, docs):
        _, out1, _ = run_cli(capsys, "cdf", "--q", "1.3", "--method", "davies",
                             "--tol", "1e-6", docs["chisq2.json"])
        _, out2, _ = run_cli(capsys, "cdf", "--q", "1.3", "--method", "davies",
                             "--tol", "1e-6", docs["chisq2.json"])
        assert out1 == out2

    def test_pretty_renders(self, capsys, docs):
        code, out, _ = run_cli(capsys, "cdf", "--q", "2", "--pretty",
                               docs["chisq2.json"])
        assert code == 0
        assert "value" in out and "{" not in out


class TestExitCodes:
    def test_invalid_input(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"kind": "nope"}')
        code, _, err = run_cli(capsys, "cdf", "--q", "1", str(p))
        assert code == 2 and "kind" in err

    def test_not_applicable(self, capsys, docs):
        code, _, err = run_cli(capsys, "cdf", "--q", "1", "--method",
                               "central_even", docs["example1.json"])
        assert code == 4 and "sigma" in err

    def test_convergence_failure(self, capsys, docs):
        # chi-square with one dof cannot honestly certify 1e-12 by lattice
        doc = {"kind": "reduced", "omega": [1.0], "nu": [1], "delta2": [0.0]}
        p = json.dumps(doc)
        import tempfile, os
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            fh.write(p)
            name = fh.name
        try:
            code, out, err = run_cli(capsys, "cdf", "--q", "1.0", "--method",
                                     "davies", "--tol", "1e-12", name)
        finally:
            os.unlink(name)
        assert code == 3
        assert "davies" in err

    def test_missing_file(self, capsys):
        code, _, err = run_cli(capsys, "cdf", "--q", "1", "/nonexistent.json")
        assert code == 2

    def test_degenerate_reduce_reports_constant(self, capsys, tmp_path):
        doc = {"kind": "raw", "a": [[1, 0], [0, 0]], "b": [0, 0], "c": 0.0,
               "mu": [1, 1], "sigma_mat": [[0, 0], [0, 1]]}
        p = tmp_path / "deg.json"
        p.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "reduce", str(p))
        assert code == 0
        payload = json.loads(out)
        assert payload == {"kind": "constant", "value": 1.0}
