import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from optmeas import design
from optmeas.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestFidelityCommand:
    def test_pure(self):
        code, text = run("fidelity", "--copies", "2", "--prior", "pure")
        assert code == 0
        fields = text.splitlines()[1].split("\t")
        assert fields[:4] == ["2", "pure", "0.75", "0.75"]

    def test_two_point(self):
        code, text = run("fidelity", "--copies", "1", "--prior", "two-point:0.1@0,0.9@1", "--method", "closed")
        assert code == 0 and "0.658114" in text

    def test_zero_copies(self):
        with pytest.raises(SystemExit) as info:
            run("fidelity", "--copies", "0", "--prior", "pure")
        assert info.value.code == 2

    def test_bad_prior(self, capsys):
        code, _ = run("fidelity", "--copies", "1", "--prior", "nonsense")
        assert code == 2 and "unknown prior" in capsys.readouterr().err

    def test_quad_order(self, monkeypatch):
        monkeypatch.setenv("OPTMEAS_QUAD_ORDER", "64")
        code, text = run("--quad-order", "32", "fidelity", "--copies", "1", "--prior", "uniform-ball",
                         "--method", "closed")
        assert code == 0 and "0.811038" in text


class TestPovmCommand:
    @pytest.mark.parametrize("N,count", [(3, 8), (4, 15)])
    def test_counts(self, tmp_path, N, count):
        path = tmp_path / "p.json"
        code, _ = run("povm", "--copies", str(N), "--prior", "uniform-ball", "--out", str(path))
        doc = json.loads(path.read_text())
        assert code == 0 and doc["count"] == count and len(doc["elements"]) == count
        assert doc["identity_residual"] < 1e-9

    def test_matrices(self, tmp_path):
        path = tmp_path / "p.json"
        run("povm", "--copies", "2", "--with-matrices", "--out", str(path))
        elem = json.loads(path.read_text())["elements"][0]
        m = np.array(elem["matrix"])
        assert m.shape == (4, 4, 2)

    def test_size_cap(self, tmp_path, capsys):
        code, _ = run("povm", "--copies", "11", "--out", str(tmp_path / "p.json"))
        assert code == 2 and "size cap" in capsys.readouterr().err

    def test_missing_design(self, capsys):
        code, _ = run("povm", "--copies", "6")
        assert code == 2 and "direction set" in capsys.readouterr().err

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("povm", "--copies", "3", "--prior", "two-point", "--out", str(a), "--with-matrices")
        run("povm", "--copies", "3", "--prior", "two-point", "--out", str(b), "--with-matrices")
        assert a.read_bytes() == b.read_bytes()


class TestVerifyCommand:
    def test_pure_baseline(self):
        code, text = run("verify", "--copies", "2", "--prior", "pure")
        assert code == 0 and "FAIL" not in text

    def test_four_copies(self, tmp_path):
        path = tmp_path / "v.json"
        code, text = run("verify", "--copies", "4", "--prior", "uniform-ball", "--json", str(path))
        assert code == 0
        doc = json.loads(path.read_text())
        checks = {c["name"]: c for c in doc["checks"]}
        assert doc["passed"] and checks["identity_resolution"]["residual"] < 1e-9
        assert "identity_resolution" in text

    def test_corrupted_design(self, tmp_path, capsys):
        doc = design.direction_set(4).to_json()
        doc["entries"][0]["c_sq"] *= 1.1
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, text = run("verify", "--copies", "4", "--design-file", str(path))
        assert code == 1
        assert "first failing invariant: design[2s=4]" in capsys.readouterr().err
        line = next(l for l in text.splitlines() if "design[2s=4]" in l)
        assert line.startswith("FAIL") and "residual=" in line

    def test_tolerance_override(self, capsys):
        code, _ = run("verify", "--copies", "1", "--tol", "identity=1e-30")
        assert code == 1 and "identity_resolution" in capsys.readouterr().err

    @pytest.mark.parametrize("tol", ["identity=-1", "bogus=1e-3", "identity=abc"])
    def test_bad_tolerance(self, tol):
        assert run("verify", "--copies", "1", "--tol", tol)[0] == 2

    def test_json_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("verify", "--copies", "2", "--prior", "two-point", "--seed", "4", "--json", str(a))
        run("verify", "--copies", "2", "--prior", "two-point", "--seed", "4", "--json", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestDesignCommand:
    def test_four_ten(self, tmp_path):
        path = tmp_path / "d.json"
        code, _ = run("design", "--twice-s", "4", "--count", "10", "--seed", "1", "--out", str(path))
        doc = json.loads(path.read_text())
        assert code == 0 and doc["certificate"]["design_residual"] < 1e-10
        assert doc["certificate"]["seed"] == 1

    def test_tetrahedron(self):
        code, text = run("design", "--twice-s", "2", "--count", "4", "--seed", "1")
        ds = design.DirectionSet.from_json(json.loads(text))
        G = np.sort(design.gram(ds).ravel())
        assert code == 0 and np.allclose(G, np.sort(design.gram(design.builtin_direction_set(2)).ravel()))

    def test_infeasible(self, capsys):
        code, _ = run("design", "--twice-s", "2", "--count", "2")
        assert code == 2 and "infeasible" in capsys.readouterr().err

    def test_convergence_failure(self, capsys):
        code, _ = run("design", "--twice-s", "3", "--count", "4", "--restarts", "2")
        assert code == 1 and "best residual" in capsys.readouterr().err

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            run("design", "--twice-s", "3", "--count", "6", "--seed", "2", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()


class TestTableCommand:
    def test_pure(self):
        code, text = run("table", "--max-copies", "5", "--prior", "pure", "--no-direct")
        values = [float(r["fbar_closed"]) for r in rows(text)]
        assert code == 0
        assert np.allclose(values, [2 / 3, 3 / 4, 4 / 5, 5 / 6, 6 / 7], atol=1e-6)

    def test_random(self):
        code, text = run("table", "--max-copies", "3", "--prior", "random")
        assert code == 0
        assert all(float(r["fbar_closed"]) == 1.0 and float(r["fbar_direct"]) == 1.0 for r in rows(text))

    def test_monotone_columns(self):
        _, text = run("table", "--max-copies", "6", "--prior", "uniform-ball", "--prior", "two-point",
                      "--no-direct")
        by_prior = {}
        for r in rows(text):
            by_prior.setdefault(r["prior_id"], []).append(float(r["fbar_closed"]))
        for col in by_prior.values():
            assert len(col) == 6 and all(b >= a for a, b in zip(col, col[1:]))

    def test_file_precision(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run("table", "--max-copies", "2", "--prior", "uniform-ball", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()
        first = rows(a.read_text())[0]
        assert first["fbar_closed"] == f"{float(first['fbar_closed']):.17g}"
        assert len(first["fbar_closed"]) > 12 and float(first["abs_diff"]) < 1e-8


def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "optmeas.cli", "fidelity", "-N", "1", "--method", "closed"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and "0.666667" in ok.stdout
    bad = subprocess.run([sys.executable, "-m", "optmeas.cli", "fidelity", "-N", "0"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
