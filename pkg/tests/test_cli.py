import io
import json
import math
import subprocess
import sys

import pytest

from switchlin.cli import main
from switchlin.document import dump_document, load_document, read_document
from switchlin.errors import DocumentError

SCALAR = """format_version: 1
mode: continuous
name: scalar pair
matrices:
  - [[-1]]
  - [[0.5]]
signal:
  prefix: []
  tail: [[1, 2], [2, 1]]
"""

BOUNDARY = """format_version: 1
mode: continuous
matrices: [[[-1]], [[1]]]
signal: {tail: [[1, 1], [2, 1]]}
"""

CLASSIC_BAD = """format_version: 1
mode: continuous
matrices:
  - [[-0.1, 1], [-10, -0.1]]
  - [[-0.1, 10], [-1, -0.1]]
signal: {tail: [[1, 0.95], [2, 0.05]]}
"""

DISCRETE = """format_version: 1
mode: discrete
matrices:
  - [[0.4, 0], [0, 0.4]]
  - [[0, 2], [2, 0]]
signal: {tail: [1, 2]}
"""

HYBRID = """format_version: 1
mode: hybrid
matrices: [[[-1]], [[0.5]]]
jump_matrices: [[[1]], [[-1]]]
signal:
  flow: {tail: [[1, 2], [2, 1]]}
  jump: {tail: [1, 2]}
"""


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def write(tmp_path):
    def _write(text, name="doc.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


class TestValidate:
    def test_valid(self, write):
        code, out, _ = run("validate", write(SCALAR))
        assert code == 0 and "valid continuous document" in out

    def test_zero_duration(self, write):
        doc = SCALAR.replace("prefix: []", "prefix: [[1, 1], [2, 1]]").replace("[1, 2], [2, 1]]", "[1, 0], [2, 1]]")
        code, out, _ = run("validate", write(doc))
        assert code == 2
        assert "non-positive duration at segment 3" in out

    def test_unused_warning(self, write):
        doc = SCALAR.replace("  - [[0.5]]\n", "  - [[0.5]]\n  - [[0.0]]\n")
        code, out, _ = run("validate", write(doc))
        assert code == 0
        assert "warning: subsystem 3 unused asymptotically" in out

    def test_parse_error_position(self, write):
        code, _, err = run("validate", write("format_version: 1\nmode: continuous\nmatrices: [[[1, x]]]\nsignal: {tail: [[1, 1]]}\n"))
        assert code == 2
        assert "line 3" in err and "matrices.0.0.1" in err

    def test_missing_file(self, tmp_path):
        code, _, err = run("validate", tmp_path / "missing.yaml")
        assert code == 2 and "cannot read" in err


class TestCertify:
    def test_scalar(self, write):
        code, out, _ = run("certify", write(SCALAR))
        assert code == 0
        assert "kappa = 0.606531" in out
        assert "certified-stable" in out

    def test_boundary(self, write):
        code, out, _ = run("certify", write(BOUNDARY))
        assert code == 1
        assert "L = 0\n" in out

    def test_empirical(self, write):
        doc = SCALAR.replace("prefix: []", "prefix: [[1, 2], [2, 1], [1, 2], [2, 1]]").replace(
            "  tail: [[1, 2], [2, 1]]\n", "")
        code, out, _ = run("certify", write(doc))
        assert code == 1
        assert "advisory only: empirical estimates" in out

    def test_horizon_forces_empirical(self, write):
        code, out, _ = run("certify", write(SCALAR), "--horizon", 30)
        assert code == 1 and "(empirical)" in out

    def test_json_report(self, write):
        code, out, _ = run("certify", write(SCALAR), "--json")
        report = json.loads(out)
        assert code == 0
        assert report["command"] == "certify"
        assert report["input_digest"].startswith("sha256:")
        assert report["payload"]["kappa"] == math.exp(-0.5)
        assert "timing" not in report

    def test_timing_flag(self, write):
        code, out, _ = run("certify", write(SCALAR), "--json", "--timing")
        assert "timing" in json.loads(out)

    def test_deterministic(self, write):
        path = write(SCALAR)
        assert run("certify", path, "--json") == run("certify", path, "--json")
        assert run("certify", path) == run("certify", path)

    def test_s_ratio(self, write):
        code, out, _ = run("certify", write(SCALAR), "--s-ratio", 1.5)
        assert "s-condition (s = 1.5): holds" in out

    def test_explicit_invalid_set(self, write):
        code, _, err = run("certify", write(SCALAR), "--set", "2")
        assert code == 2 and "cannot stabilize" in err

    def test_discrete(self, write):
        code, out, _ = run("certify", write(DISCRETE))
        assert code == 0 and "||A||" in out

    def test_hybrid(self, write):
        code, out, _ = run("certify", write(HYBRID), "--json")
        report = json.loads(out)
        assert code == 0
        assert report["payload"]["combination"] == "one-bounded-one-decays"


class TestSimulate:
    def test_scalar_decay(self, write):
        doc = SCALAR.replace("tail: [[1, 2], [2, 1]]", "tail: [[1, 1]]")
        code, out, err = run("simulate", write(doc), "--x0", "1", "--horizon", 3)
        assert code == 0
        assert out.startswith("t,x_1,norm,event\n")
        final = float(out.strip().splitlines()[-1].split(",")[2])
        assert final == pytest.approx(math.exp(-3), abs=1e-12)
        assert "final norm: 0.0497871" in err

    def test_out_file_and_bound(self, write, tmp_path):
        csv_path = tmp_path / "traj.csv"
        code, out, _ = run("simulate", write(SCALAR), "--x0", "1", "--horizon", 9, "--out", csv_path,
                           "--verify-bound")
        assert code == 0
        assert "norm-product bound: holds" in out
        last = csv_path.read_text().strip().splitlines()[-1].split(",")
        assert float(last[1]) == pytest.approx(math.exp(-4.5), abs=1e-12)

    def test_growth(self, write):
        code, _, err = run("simulate", write(CLASSIC_BAD), "--x0", "1,0", "--horizon", 50, "--json")
        summary = json.loads(err)
        assert summary["final_norm"] > summary["initial_norm"]

    def test_dimension_mismatch(self, write):
        code, _, err = run("simulate", write(SCALAR), "--x0", "1,2", "--horizon", 3)
        assert code == 2 and "dimension mismatch" in err

    def test_hybrid_identity_jumps(self, write):
        hybrid = HYBRID.replace("jump_matrices: [[[1]], [[-1]]]", "jump_matrices: [[[1]]]").replace(
            "jump: {tail: [1, 2]}", "jump: {tail: [1]}")
        _, _, err_h = run("simulate", write(hybrid, "h.yaml"), "--x0", "1", "--horizon", 9, "--json")
        _, _, err_c = run("simulate", write(SCALAR, "c.yaml"), "--x0", "1", "--horizon", 9, "--json")
        assert json.loads(err_h)["final_norm"] == pytest.approx(json.loads(err_c)["final_norm"], rel=1e-13)

    def test_periodic_needs_horizon(self, write):
        code, _, err = run("simulate", write(SCALAR))
        assert code == 2 and "--horizon" in err


class TestDesign:
    def test_stabilizer_emits_certified(self, write, tmp_path):
        emitted = tmp_path / "fixed.yaml"
        code, out, _ = run("design", "stabilizer", write(CLASSIC_BAD), "--A0", "[[-1,0],[0,-1]]",
                           "--lambda", 0.5, "--emit", emitted)
        assert code == 0 and "N = 2" in out
        code, out, _ = run("certify", emitted)
        assert code == 0

    def test_c12_plan(self, write):
        a = math.log(1.2)
        doc = f"""format_version: 1
mode: continuous
matrices: [[[-1.0, 0], [0, -1.0]], [[{2 * a + 1.0!r}, 0], [0, {2 * a + 1.0!r}]]]
signal: {{tail: [[1, 1], [2, 1]]}}
"""
        code, out, _ = run("design", "stabilizer", write(doc), "--A0", "[[-1,0],[0,-1]]", "--json")
        payload = json.loads(out)["payload"]
        assert code == 0 and payload["N"] == 3 and payload["certificate"]["verdict"] == "certified-stable"

    def test_already_stable(self, write):
        code, out, _ = run("design", "stabilizer", write(SCALAR), "--A0", "[[-1]]")
        assert code == 1
        assert "no repair needed (c ≤ 1)" in out

    def test_infeasible_lambda(self, write):
        code, out, _ = run("design", "stabilizer", write(CLASSIC_BAD), "--A0", "[[-1,0],[0,-1]]",
                           "--lambda", 0.9)
        assert code == 1 and "infeasible" in out

    def test_dwell(self, write, tmp_path):
        emitted = tmp_path / "cycle.yaml"
        code, out, _ = run("design", "dwell", write(SCALAR), "--bad-dwell", "2=1", "--emit", emitted,
                           "--json")
        payload = json.loads(out)["payload"]
        assert code == 0
        assert payload["t_bar"][0] == pytest.approx(0.55)
        assert run("certify", emitted)[0] == 0


class TestNormsAndRandom:
    def test_norms(self, write):
        code, out, _ = run("norms", write(DISCRETE), "--json")
        rows = json.loads(out)["payload"]["matrices"]
        assert code == 0
        assert rows[0]["norm"] == pytest.approx(0.4) and rows[1]["norm"] == pytest.approx(2.0)

    def test_random_signal_seeded(self, write):
        path = write(SCALAR)
        a = run("random-signal", path, "--seed", 3)[1]
        assert a == run("random-signal", path, "--seed", 3)[1]
        assert a != run("random-signal", path, "--seed", 4)[1]
        assert load_document(a).signal.indices() == {1, 2}


class TestDocument:
    @pytest.mark.parametrize("text", [SCALAR, DISCRETE, HYBRID, CLASSIC_BAD])
    def test_round_trip(self, text):
        once = dump_document(load_document(text))
        assert dump_document(load_document(once)) == once

    def test_float_spelling(self):
        text = SCALAR.replace("[[0.5]]", "[[1e-20]]")
        once = dump_document(load_document(text))
        assert "1.0e-20" in once
        assert load_document(once).matrices[1][0][0] == 1e-20

    def test_unknown_key(self):
        with pytest.raises(DocumentError, match="unknown keys"):
            load_document(SCALAR + "extra: 1\n")

    def test_wrong_version(self):
        with pytest.raises(DocumentError) as info:
            load_document(SCALAR.replace("format_version: 1", "format_version: 2"))
        assert info.value.line == 1

    def test_mixed_dimensions(self):
        with pytest.raises(DocumentError, match="mixed dimensions"):
            load_document(SCALAR.replace("[[0.5]]", "[[0.5, 0], [0, 1]]"))

    def test_hybrid_requires_jumps(self):
        with pytest.raises(DocumentError):
            load_document(HYBRID.replace("jump_matrices: [[[1]], [[-1]]]\n", ""))

    def test_syntax_error(self):
        with pytest.raises(DocumentError) as info:
            load_document("a: [1")
        assert info.value.line == 1

    def test_read_document(self, write):
        assert read_document(write(SCALAR)).name == "scalar pair"


class TestEntryPoints:
    def test_module_invocation(self, write):
        proc = subprocess.run([sys.executable, "-m", "switchlin", "certify", str(write(SCALAR))],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "certified-stable" in proc.stdout

    def test_usage_error_exit_code(self):
        assert run("certify")[0] == 2
        assert run("bogus")[0] == 2
