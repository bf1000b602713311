import csv
import math
import os

import pytest
from PIL import Image

from lvcert import degree
from lvcert.errors import EXIT_USAGE, SignUnstable
from lvcert.main import build_parser, run
from lvcert.utils_io import read_kv

A1_VIOLATION = "[system]\na11=1\na12=3\na21=3\na22=1\nr1=4\nr2=4\ntau=3\n"
IDENTITY = "[system]\na11=1\na12=0\na21=0\na22=1\nr1=1\nr2=1\ntau=10\n"
RUNNING = "[system]\na11=2\na12=1\na21=1\na22=2\nr1=3\nr2=3\ntau={tau}\n"


def _run(*argv):
    lines = []
    code = run(list(argv), echo=lines.append)
    return code, lines


def test_parser_knows_every_command():
    parser = build_parser()
    for name in ("check", "spectrum", "simulate", "find", "certify"):
        args = parser.parse_args([name, "--config", "x.ini"])
        assert args.command == name
        assert args.perturbation == 0.01
    with pytest.raises(SystemExit) as info:
        parser.parse_args([])
    assert info.value.code == EXIT_USAGE


def test_check_running_example(running_ini, tmp_path):
    code, lines = _run("check", "--config", running_ini, "--out", str(tmp_path))
    assert code == 0
    text = (tmp_path / "hypotheses.txt").read_text(encoding="utf-8")
    assert text.startswith("A0: pass")
    assert "b: 1 1" in text
    assert lines[0].startswith("A0: pass")


def test_check_reports_a1_violation(write_ini, tmp_path):
    code, lines = _run("check", "--config", write_ini(A1_VIOLATION), "--out", str(tmp_path))
    assert code == 1
    assert any("(A1)" in line for line in lines)


def test_missing_config_key_is_a_usage_error(write_ini, tmp_path):
    ini = write_ini("[system]\na11=2\na12=1\na21=1\na22=2\nr1=3\nr2=3\n")
    code, lines = _run("check", "--config", ini, "--out", str(tmp_path))
    assert code == 64
    assert lines[-1].startswith("error:")
    code, _ = _run("spectrum", "--out", str(tmp_path))
    assert code == 64


def test_spectrum_running_example(running_ini, tmp_path):
    code, lines = _run("spectrum", "--config", running_ini, "--out", str(tmp_path))
    assert code == 0
    assert lines[0].startswith("n1=0 n2=1 j=1")
    with open(tmp_path / "catalog.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert (row["branch"], row["k"], row["n"]) == ("2", "1", "1")
    assert float(row["lambda"]) == pytest.approx(0.381972, abs=1e-6)
    assert float(row["period"]) == pytest.approx(2.4, rel=1e-14)
    assert float(row["amplitude"]) > 0.0


@pytest.mark.parametrize("text", ["[system]\na11=2\na12=1\na21=1\na22=2\nr1=3\nr2=3\ntau=0.1\n", IDENTITY])
def test_spectrum_without_window(write_ini, tmp_path, text):
    code, lines = _run("spectrum", "--config", write_ini(text), "--out", str(tmp_path))
    assert code == 2
    assert not (tmp_path / "catalog.csv").exists()


def test_spectrum_output_is_deterministic(running_ini, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run("spectrum", "--config", running_ini, "--out", str(first))[0] == 0
    assert _run("spectrum", "--config", running_ini, "--out", str(second))[0] == 0
    assert (first / "catalog.csv").read_bytes() == (second / "catalog.csv").read_bytes()


def test_existing_output_needs_force(running_ini, tmp_path):
    assert _run("spectrum", "--config", running_ini, "--out", str(tmp_path))[0] == 0
    code, lines = _run("spectrum", "--config", running_ini, "--out", str(tmp_path))
    assert code == 73
    assert "--force" in lines[-1]
    assert _run("spectrum", "--config", running_ini, "--out", str(tmp_path), "--force")[0] == 0


def test_simulate_from_the_exact_equilibrium(running_ini, tmp_path):
    code, lines = _run("simulate", "--config", running_ini, "--out", str(tmp_path), "--perturbation", "0")
    assert code == 0
    assert lines[-1] == "period=nan confidence=0"
    header = (tmp_path / "trajectory.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,u1,u2,du1,du2"


@pytest.mark.slow
def test_simulate_logistic(tmp_path):
    code, lines = _run("simulate", "--logistic", "alpha=1.7", "tau=1", "--out", str(tmp_path))
    assert code == 0
    fields = dict(item.split("=") for item in lines[-1].split())
    assert float(fields["period"]) == pytest.approx(4.0, abs=0.3)
    assert float(fields["confidence"]) > 0.9
    assert os.path.exists(tmp_path / "trajectory.csv")


@pytest.mark.slow
def test_certify_running_example(running_ini, tmp_path):
    code, lines = _run("certify", "--config", running_ini, "--out", str(tmp_path))
    assert code == 0
    assert lines[-1] == "EXISTS: non-stationary periodic solution, k0=1"
    kv = read_kv(tmp_path / "certificate.kv")
    assert list(kv) == ["verdict", "k0", "lambda_lo", "lambda_hi", "n1", "n2", "j", "total_gamma_1"]
    assert kv["k0"] == "1"
    assert abs(int(kv["total_gamma_1"])) == 1
    assert float(kv["lambda_lo"]) == pytest.approx(3.0 / (4.0 * math.pi))
    assert "[verdict]" in (tmp_path / "certificate.txt").read_text(encoding="utf-8")


def test_unstable_sign_maps_to_degree_exit_code(monkeypatch, running_ini, tmp_path):
    def unstable(cand, *args, **kwargs):
        raise SignUnstable(cand.k, 1, -1)

    monkeypatch.setattr(degree, "orbit_index", unstable)
    code, lines = _run("certify", "--config", running_ini, "--out", str(tmp_path))
    assert code == 5
    assert "refinement" in lines[-1]
    assert not (tmp_path / "certificate.kv").exists()


def test_simulate_plot_writes_a_png(running_ini, tmp_path):
    code, _ = _run("simulate", "--config", running_ini, "--out", str(tmp_path), "--perturbation", "0", "--plot")
    assert code == 0
    with Image.open(tmp_path / "trajectory.png") as img:
        assert img.format == "PNG"
        assert img.size[0] > 0


@pytest.mark.parametrize("argv", [["bogus"], ["check", "--k", "many"], ["spectrum", "--unknown"]])
def test_usage_errors_do_not_collide_with_no_window(argv):
    with pytest.raises(SystemExit) as info:
        run(argv, echo=lambda line: None)
    assert info.value.code == EXIT_USAGE != 2


def test_version_and_help_still_exit_cleanly(capsys):
    with pytest.raises(SystemExit) as info:
        run(["--version"])
    assert info.value.code == 0
    assert "lvcert" in capsys.readouterr().out


def test_certify_without_delay_reports_no_window(write_ini, tmp_path):
    code, lines = _run("certify", "--config", write_ini(RUNNING.format(tau=0)), "--out", str(tmp_path))
    assert code == 2
    assert lines[-1].startswith("error: tau = 0")
    assert not (tmp_path / "certificate.txt").exists()
    assert not (tmp_path / "certificate.kv").exists()


@pytest.mark.slow
def test_find_running_example(running_ini, tmp_path):
    code, lines = _run("find", "--config", running_ini, "--out", str(tmp_path))
    assert code in (0, 4)
    orbit = (tmp_path / "orbit.csv").read_text(encoding="utf-8").splitlines()
    assert [line.split("=")[0] for line in orbit[:4]] == ["# lambda", "# period", "# residual", "# K"]
    assert orbit[3] == "# K=32"
    assert orbit[4] == "t,x1,x2"
    assert len(orbit) == 5 + 129
    lam = float(orbit[0].split("=")[1])
    assert 3.0 / (4.0 * math.pi) < lam < 3.0 / (2.0 * math.pi)
    assert float(orbit[1].split("=")[1]) == pytest.approx(2.0 * math.pi * lam, rel=1e-15)

    verification = (tmp_path / "verification.txt").read_text(encoding="utf-8").splitlines()
    assert verification[0].startswith("orbits found: ")
    assert verification[1].startswith(f"lambda={lam:.17g} period=")
    marks = [line for line in verification if line.endswith(("[ok]", "[FAIL]", "[n/a]"))]
    assert len(marks) == 4
    if code == 0:
        assert all(line.endswith("[ok]") for line in marks)
    assert lines == verification


@pytest.mark.slow
def test_simulate_logistic_below_onset(tmp_path):
    code, lines = _run("simulate", "--logistic", "alpha=1.42", "tau=1", "--out", str(tmp_path))
    assert code == 0
    with open(tmp_path / "trajectory.csv", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.DictReader(fh) if float(row["t"]) >= 200.0]
    assert rows
    assert max(abs(float(row["u1"]) - 1.0) for row in rows) < 1e-3


def test_output_formats_select_the_files(write_ini, tmp_path):
    ini = write_ini(RUNNING.format(tau=3) + "[output]\nformats = txt\n")
    code, _ = _run("spectrum", "--config", ini, "--out", str(tmp_path))
    assert code == 0
    assert not (tmp_path / "catalog.csv").exists()
    code, _ = _run("check", "--config", ini, "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "hypotheses.txt").exists()


def test_png_format_turns_plots_on(write_ini, tmp_path):
    ini = write_ini(RUNNING.format(tau=3) + "[solver]\nt_end = 15\n[output]\nformats = csv, png\n")
    code, _ = _run("simulate", "--config", ini, "--out", str(tmp_path), "--perturbation", "0")
    assert code == 0
    assert (tmp_path / "trajectory.csv").exists()
    with Image.open(tmp_path / "trajectory.png") as img:
        assert img.format == "PNG"
