import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mrlab.certificates import TRI_EXPONENT, master_exponent, tri_recurrence
from mrlab.cli import main
from mrlab.estimator import estimate_mr
from mrlab.families import FamilyDescriptor, enumerate_family
from mrlab.formats import INSTANCE_HEADER, dumps_instance, parse_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def footer(text):
    return [l[2:] for l in text.splitlines()[1:] if l.startswith("#")]


class TestSchemas:
    @pytest.mark.parametrize("argv,header", [
        (["families", "--kind", "intervals", "--n", "2"], "member_id,label,size,points"),
        (["estimate", "--family", "intervals", "--n", "2", "--seed", "1", "--restarts", "1"],
         "family,kind,n,mode,restart,iters,value,gram_residual,seed"),
        (["scaling", "--family", "intervals", "--ns", "2", "--seed", "1", "--restarts", "1"],
         "family,kind,n,mode,members,d,value,log2_n,log2_value,slope,seed"),
        (["certify", "--n", "4"], "k,n,B,envelope"),
        (["master", "--a", "4", "--b", "2", "--c", "1"], "a,b,c,log_power,case,exponent"),
        (["decompose", "--n", "4"], "piece,role,i,j"),
    ])
    def test_header_rows(self, capsys, argv, header):
        code, out, _ = run(capsys, *argv)
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# mrlab ") and " v1" in lines[0]
        assert lines[1] == header


class TestFamilies:
    def test_intervals(self, capsys):
        code, out, _ = run(capsys, "families", "--kind", "intervals", "--n", "2")
        assert code == 0 and len(table(out)) == 3

    def test_line_cut(self, capsys):
        code, out, _ = run(capsys, "families", "--kind", "tri", "--n", "3", "--mode", "line-cut")
        rows = table(out)
        assert code == 0 and len(rows) == 3
        assert sorted(int(r["size"]) for r in rows) == [0, 1, 3]

    def test_cap(self, capsys):
        code, _, err = run(capsys, "families", "--kind", "tri", "--n", "100", "--mode", "line-cut")
        assert code == 3 and "capped" in err

    def test_lattice_export(self, capsys, tmp_path):
        path = tmp_path / "lat.csv"
        code, _, _ = run(capsys, "families", "--kind", "tri", "--n", "4", "--lattice-csv", str(path))
        lines = path.read_text().splitlines()
        assert code == 0 and lines[0].startswith("# mrlab lattice v1") and lines[1] == "i,j,member_id"

    @pytest.mark.parametrize("argv", [
        ["families", "--kind", "nope", "--n", "2"],
        ["families", "--kind", "tri", "--n", "-2"],
        ["families", "--kind", "tri"],
        ["families", "--kind", "explicit", "--sets", "1:x"],
        ["bogus"],
        [],
    ])
    def test_parse_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 3


class TestEstimate:
    def test_singleton_summary(self, capsys):
        code, out, _ = run(capsys, "estimate", "--family", "explicit", "--sets", "1:1", "--seed", "0",
                           "--restarts", "3")
        assert code == 0
        summary = [l for l in footer(out) if l.startswith("summary")][0]
        value = float(summary.split("best_lower_bound=")[1].split()[0])
        assert abs(value - 1.0) <= 1e-6

    def test_values_within_envelope(self, capsys):
        code, out, _ = run(capsys, "estimate", "--family", "tri", "--n", "4", "--seed", "7",
                           "--restarts", "6", "--workers", "2")
        fam = enumerate_family(FamilyDescriptor.tri(4))
        rows = table(out)
        assert code == 0 and len(rows) == 6
        assert all(float(r["value"]) <= math.sqrt(len(fam)) + 1e-9 for r in rows)
        assert "lower bound" in out.splitlines()[0]

    def test_byte_identical_across_workers(self, capsys):
        outs = []
        for workers in ("1", "4", "1"):
            code, out, _ = run(capsys, "estimate", "--family", "tri", "--n", "4", "--restarts", "32",
                               "--seed", "7", "--workers", workers)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1] == outs[2]

    def test_seed_required(self, capsys):
        assert run(capsys, "estimate", "--family", "tri", "--n", "4")[0] == 3

    def test_family_file(self, capsys, tmp_path):
        path = tmp_path / "fam.json"
        path.write_text(FamilyDescriptor.explicit([[(1, 1)], [(1, 1), (2, 1)]]).dumps())
        code, out, _ = run(capsys, "estimate", "--family-file", str(path), "--seed", "2", "--restarts", "2")
        assert code == 0 and len(table(out)) == 2

    def test_warm_start(self, capsys, tmp_path):
        fam = enumerate_family(FamilyDescriptor.tri(4))
        rec = estimate_mr(fam, restarts=3, seed=5)
        inst = tmp_path / "best.inst"
        inst.write_text(dumps_instance(rec.system, rec.coeffs, fam))
        code, out, _ = run(capsys, "estimate", "--family", "tri", "--n", "6", "--seed", "1",
                           "--restarts", "1", "--init", str(inst))
        rows = table(out)
        assert code == 0 and [r["restart"] for r in rows] == ["-1", "0"]
        assert float(rows[0]["value"]) >= rec.value - 1e-6

    def test_bad_init_exit_2(self, capsys, tmp_path):
        inst = tmp_path / "bad.inst"
        inst.write_text("not json")
        assert run(capsys, "estimate", "--family", "tri", "--n", "4", "--seed", "1",
                   "--init", str(inst))[0] == 2


class TestEval:
    def write(self, tmp_path, values, weights=(1.0, 1.0), coeffs=(0.7071067811865476,) * 2):
        body = {
            "family": FamilyDescriptor.explicit([[(1, 1)], [(2, 1)], [(1, 1), (2, 1)]]).to_dict(),
            "index": [[1, 1], [2, 1]],
            "weights": list(weights),
            "system": values,
            "coeffs": list(coeffs),
        }
        path = tmp_path / "x.inst"
        path.write_text(INSTANCE_HEADER + "\n" + json.dumps(body))
        return str(path)

    def test_rotated_example(self, capsys, tmp_path):
        r = 1 / math.sqrt(2)
        path = self.write(tmp_path, [[r, r], [r, -r]])
        code, out, _ = run(capsys, "eval", "--instance", path)
        assert code == 0
        rows = table(out)
        np.testing.assert_allclose([float(x["maximal_function"]) for x in rows], [1.0, 0.5], atol=1e-15)
        value = float([l for l in footer(out) if l.startswith("value")][0].split()[1])
        assert value == pytest.approx(math.sqrt(1.25), abs=1e-15)

    def test_naive_method(self, capsys, tmp_path):
        r = 1 / math.sqrt(2)
        path = self.write(tmp_path, [[r, r], [r, -r]])
        a = run(capsys, "eval", "--instance", path)[1]
        b = run(capsys, "eval", "--instance", path, "--method", "naive")[1]
        assert a == b

    def test_not_orthonormal(self, capsys, tmp_path):
        path = self.write(tmp_path, [[1.0, 0.5], [0.0, 1.0]])
        code, _, err = run(capsys, "eval", "--instance", path)
        assert code == 2 and "orthonormal" in err

    @pytest.mark.parametrize("text", ["{", "[]", '{"weights": [1]}'])
    def test_malformed(self, capsys, tmp_path, text):
        path = tmp_path / "m.inst"
        path.write_text(text)
        assert run(capsys, "eval", "--instance", str(path))[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "eval", "--instance", str(tmp_path / "none"))[0] == 2

    def test_roundtrip_dump(self, capsys, tmp_path):
        fam = enumerate_family(FamilyDescriptor.intervals(3))
        rec = estimate_mr(fam, restarts=2, seed=0)
        path = tmp_path / "r.inst"
        path.write_text(dumps_instance(rec.system, rec.coeffs, fam))
        code, out, _ = run(capsys, "eval", "--instance", str(path))
        value = float([l for l in footer(out) if l.startswith("value")][0].split()[1])
        assert code == 0 and abs(value - rec.value) <= 1e-12


class TestScaling:
    def test_three_rows_and_svg(self, capsys, tmp_path):
        svg = tmp_path / "s.svg"
        code, out, _ = run(capsys, "scaling", "--family", "tri", "--ns", "2,4,8", "--seed", "1",
                           "--restarts", "2", "--svg", str(svg))
        rows = table(out)
        assert code == 0 and [int(r["n"]) for r in rows] == [2, 4, 8]
        assert rows[0]["slope"] == "" and rows[1]["slope"] != ""
        text = svg.read_text()
        assert text.startswith("<svg") and text.count("<polyline") == 2
        ref = master_exponent(tri_recurrence()).exponent
        assert f"reference slope {ref:.7f}" in text
        assert any(f"reference exponent {ref!r}" in l for l in footer(out))
        assert ref == pytest.approx(TRI_EXPONENT, abs=1e-15)

    def test_chain_is_monotone(self, capsys):
        code, out, _ = run(capsys, "scaling", "--family", "tri", "--ns", "4,6,8", "--seed", "3",
                           "--restarts", "2")
        vals = [float(r["value"]) for r in table(out)]
        assert code == 0
        assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))

    def test_byte_identical(self, capsys):
        argv = ["scaling", "--family", "tri", "--ns", "2,4,8", "--seed", "4", "--restarts", "4"]
        a = run(capsys, *argv, "--workers", "1")[1]
        b = run(capsys, *argv, "--workers", "3")[1]
        assert a == b


class TestCertifyMasterGamma:
    def test_certify(self, capsys):
        code, out, _ = run(capsys, "certify", "--n", "1024", "--c5", "1", "--base", "1")
        rows = table(out)
        assert code == 0 and len(rows) == 11
        assert float(rows[1]["B"]) == pytest.approx(2.912110, abs=1e-6)
        assert all(float(r["B"]) <= float(r["envelope"]) for r in rows)

    def test_certify_htri_column(self, capsys):
        code, out, _ = run(capsys, "certify", "--n", "8", "--m", "4")
        assert code == 0 and "htri_bound" in out.splitlines()[1]

    def test_certify_guard(self, capsys):
        assert run(capsys, "certify", "--n", str(2**61 + 1))[0] == 3

    def test_master(self, capsys):
        code, out, _ = run(capsys, "master", "--a", "4", "--b", "2", "--c", "1")
        assert code == 0 and float(table(out)[0]["exponent"]) == 2.0

    def test_master_boundary(self, capsys):
        code, _, err = run(capsys, "master", "--a", "4", "--b", "2", "--c", "2")
        assert code == 4 and "boundary case" in err

    def test_master_tri(self, capsys):
        code, out, _ = run(capsys, "master", "--tri")
        assert float(table(out)[0]["exponent"]) == pytest.approx(0.9499843134764958, abs=1e-14)

    def test_master_invalid(self, capsys):
        assert run(capsys, "master", "--a", "4", "--b", "1", "--c", "2")[0] == 3

    def test_gamma(self, capsys):
        code, out, _ = run(capsys, "gamma")
        assert code == 0 and out.splitlines()[0] == "3.732050807568877"
        assert out.splitlines()[1].startswith("eigenvector ")


class TestConfig:
    def test_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# experiment bundle\nseed = 9\nrestarts = 2\nkind = intervals\nn = 3\n")
        code, out, _ = run(capsys, "--config", str(cfg), "estimate")
        rows = table(out)
        assert code == 0 and len(rows) == 2 and rows[0]["seed"] == "9"
        code, out, _ = run(capsys, "--config", str(cfg), "estimate", "--restarts", "3", "--seed", "1")
        rows = table(out)
        assert len(rows) == 3 and rows[0]["seed"] == "1"

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("frobnicate = 1\n")
        assert run(capsys, "--config", str(cfg), "gamma")[0] == 3

    def test_bad_value(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("restarts = many\nseed = 1\n")
        assert run(capsys, "--config", str(cfg), "estimate", "--family", "tri", "--n", "3")[0] == 3

    def test_malformed_and_missing(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n")
        assert run(capsys, "--config", str(cfg), "gamma")[0] == 3
        assert run(capsys, "--config", str(tmp_path / "none.cfg"), "gamma")[0] == 3

    def test_parse_config(self):
        assert parse_config("a-b = 1 # note\n\n c=x y\n") == {"a_b": "1", "c": "x y"}

    def test_certify_constants_from_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("c5 = 0\nbase = 2\n")
        code, out, _ = run(capsys, "--config", str(cfg), "certify", "--n", "2")
        assert float(table(out)[1]["B"]) == pytest.approx(2 * math.sqrt(2 + math.sqrt(3)), rel=1e-15)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mrlab", "gamma"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("3.732050807568877")
    proc = subprocess.run([sys.executable, "-m", "mrlab", "master", "--a", "2", "--b", "2", "--c", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 4


def test_verbose_logs_to_stderr_only(capsys):
    code, out, err = run(capsys, "-v", "estimate", "--family", "intervals", "--n", "2", "--seed", "0",
                         "--restarts", "1")
    assert code == 0 and "restart 0" in err and "restart 0" not in "".join(footer(out))
