import io
import json
import subprocess
import sys

import pytest

from rirs.cli import UsageError, config_hash, parse_config, parse_range, run


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def report(*argv):
    code, text = call(*argv)
    assert code == 0, text
    return json.loads(text)


def test_norm_report_schema():
    rep = report("norm", "--norm", "lp:2", "--variable", "[1, 2, 3, 4]")
    assert rep["schema"] == "rirs-report/1"
    assert rep["result"]["value"] == pytest.approx((30 / 4) ** 0.5)
    assert rep["provenance"]["parameters"]["norm"] == "flag"
    assert rep["provenance"]["parameters"]["trace"] == "default"
    assert rep["config_hash"] == config_hash("norm", rep["config"])


def test_output_is_byte_identical_across_runs():
    argv = ("dual-gap", "--measure", "es:0.25", "--count", "5", "--seed", "3")
    assert call(*argv) == call(*argv)


def test_window_norm_landmark_from_cli():
    rep = report("norm", "--norm", "appendix_b", "--variable", "[[0.01, 1], [0.99, 0]]")
    assert rep["result"]["value"] == pytest.approx(0.24)


def test_trace_lists_bisection_steps():
    rep = report("norm", "--norm", "orlicz:exp", "--variable", "catalog:uniform4", "--trace")
    assert len(rep["result"]["trace"]) > 5


def test_distance_of_log_tail():
    rep = report("distance", "--variable", "catalog:neg-log-tail")
    assert rep["result"]["value"] == pytest.approx(1.0)
    assert rep["result"]["method"] == "closed-form"


def test_distance_mixed_sign_needs_part():
    code, _ = call("distance", "--variable", "[-1, 2]")
    assert code == 2
    assert report("distance", "--variable", "[-1, 2]", "--part", "neg")["result"]["value"] == 0.0


def test_rho_exact_tag():
    rep = report("rho", "--measure", "es:0.5", "--variable", "catalog:uniform4")
    assert rep["result"]["value"] == -1.5
    assert rep["provenance"]["values"]["value"] == "exact"


def test_axioms_pass_and_fail_codes():
    assert call("axioms", "--measure", "es:0.5", "--trials", "30")[0] == 0
    code, text = call("axioms", "--measure", "square", "--trials", "30")
    assert code == 1
    assert json.loads(text)["result"]["axioms"]["positive_homogeneity"]["violations"] > 0


def test_axioms_supphi_note():
    rep = report("axioms", "--measure", "supphi", "--trials", "20")
    assert "cash_invariance" not in rep["result"]["axioms"]
    assert "note" in rep["result"]


def test_fatou_probe_defaults():
    rep = report("fatou-probe")
    assert rep["result"]["gap"] == pytest.approx(1.0, abs=1e-6)
    assert rep["result"]["verdict"] == "FATOU_FAILS"


def test_fatou_probe_dominated_sequence():
    rep = report("fatou-probe", "--kind", "lemma31", "--y", "[0]")
    assert rep["result"]["gap"] == pytest.approx(1.0, abs=1e-6)
    assert call("fatou-probe", "--kind", "lemma31")[0] == 2


def test_aocea_cert_and_search():
    rep = report("aocea-cert", "--eps", "0.1")
    assert rep["result"]["k"] == 20 and rep["result"]["indices"][0] == 8
    rep = report("aocea-search", "--trials", "40")
    assert rep["result"]["holds"]
    assert call("aocea-search", "--norm", "lp:2", "--trials", "5")[0] == 2


def test_verify_chain_csv():
    code, text = call("verify-appendixb", "--format", "csv")
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0].startswith("# rirs")
    assert lines[1].startswith("m,")
    assert len(lines) == 2 + 11
    assert call("verify-appendixb", "--m", "1..3")[0] == 2


def test_dual_gap_single_variable():
    rep = report("dual-gap", "--measure", "es:0.5", "--variable", "[1, 2, 3, 4]", "--method", "vertex")
    assert rep["result"]["max_gap"] == 0


def test_catalog_lists_everything():
    rep = report("catalog")
    assert "neg-log-tail" in rep["result"]["variables"]
    assert "appendix_b" in rep["result"]["norms"]


def test_unknown_names_exit_two_with_hint(capsys):
    assert call("norm", "--norm", "orlicz:exq")[0] == 2
    assert "did you mean" in capsys.readouterr().err
    assert call("rho", "--measure", "es:2")[0] == 2
    assert call("norm", "--variable", "catalog:nope")[0] == 2
    assert call("bogus")[0] == 2
    assert call()[0] == 2


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nnorm = lp:1\nvariable = [2, 4]\n")
    rep = report("norm", "--config", str(cfg))
    assert rep["result"]["value"] == 3.0
    assert rep["provenance"]["parameters"]["norm"] == "config"
    rep = report("norm", "--config", str(cfg), "--norm", "lp:inf")
    assert rep["result"]["value"] == 4.0
    assert rep["provenance"]["parameters"]["norm"] == "flag"


@pytest.mark.parametrize("text,line,fragment", [
    ("norm = lp:1\nbogus = 3\n", 2, "unknown key"),
    ("seed = 1\n\nseed = 2\n", 3, "duplicate key"),
    ("trials = many\n", 1, "bad value"),
    ("just words\n", 1, "expected"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(UsageError) as info:
        parse_config(text, "f.cfg")
    assert f"f.cfg:{line}:" in str(info.value) and fragment in str(info.value)


def test_parse_range():
    assert parse_range("2..5") == [2, 3, 4, 5]
    assert parse_range("1,3") == [1, 3]
    with pytest.raises(UsageError):
        parse_range("5..2")


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "rirs.cli", "rho", "--variable", "[1, 3]", "--measure", "mean"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["result"]["value"] == -2.0
