import csv
import io
import subprocess
import sys

import pytest

from qcomm.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, list(csv.DictReader(io.StringIO(out.out))), out


def test_qav_b_example(capsys):
    code, rows, _ = run(capsys, "qav-b", "--resource", "cluster4", "--vetoes", "1000")
    assert code == 0 and rows[0]["outcome"] == "1111" and rows[0]["conclusive"] == "1"


def test_qav_b_all_patterns(capsys):
    _, rows, _ = run(capsys, "qav-b", "--resource", "ghz3", "--vetoes", "all")
    assert len(rows) == 16


def test_qav_a_table(capsys):
    _, rows, _ = run(capsys, "qav-a", "--vetoes", "1111")
    assert [r["outcome"] for r in rows] == ["00", "00", "10"]


def test_qkd_dr_sweep_decreasing(capsys):
    _, rows, _ = run(capsys, "qkd", "--protocol", "dps", "--sweep", "dr", "--cr", "0.5", "--d", "80")
    kr = [float(r["key_rate"]) for r in rows]
    assert len(kr) > 2 and all(b < a for a, b in zip(kr, kr[1:]))


def test_qkd_config_file(capsys, tmp_path):
    cfg = tmp_path / "q.json"
    cfg.write_text('{"protocol": "cow", "sweep": "d", "grid": [40, 80], "dead_time": true}')
    _, rows, _ = run(capsys, "qkd", "--config", str(cfg))
    assert [r["d_km"] for r in rows] == ["40", "80"] and rows[0]["corrected"] == "1"


def test_mqt_analytic(capsys):
    _, rows, _ = run(capsys, "mqt", "--m", "1", "--mode", "analytic")
    assert len(rows) == 16
    assert all(float(r["fidelity_a"]) == 1.0 and float(r["fidelity_b"]) == 1.0 for r in rows)


def test_mqt_sampled_histogram(capsys):
    _, rows, _ = run(capsys, "mqt", "--m", "1", "--payload", "plus", "--mode", "sampled")
    assert [r["receivers"] for r in rows] == ["00", "01", "10", "11"]
    assert sum(int(r["counts"]) for r in rows) == 8192


def test_broadcast_withheld(capsys):
    _, rows, _ = run(capsys, "broadcast", "--variant", "controlled", "--withhold")
    assert rows[0]["status"] == "control not released"


@pytest.mark.parametrize("cmd", [["rio-riho", "--channel", "pi-"], ["rio-ripuo", "--op", "antidiagonal"]])
def test_rio_transcripts(capsys, cmd):
    _, rows, _ = run(capsys, *cmd)
    assert all(float(r["fidelity"]) == 1.0 for r in rows)
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1)


def test_rio_surface(capsys):
    _, rows, _ = run(capsys, "rio-riho", "--surface", "--grid", "4")
    assert len(rows) == 16 and set(rows[0]) == {"z", "D", "theta", "P1Suc", "P2Suc"}


def test_cjrio_without_consent(capsys):
    _, rows, _ = run(capsys, "rio-cjrio", "--no-consent")
    assert rows[0]["status"] == "halted: no consent" and len(rows) == 8


def test_noise_sweep_csv(capsys):
    _, rows, _ = run(capsys, "noise-sweep", "--protocol", "mqt", "--channel", "depolarizing", "--step", "0.5")
    assert [r["p"] for r in rows] == ["0", "0.5", "1"]


def test_tomography(capsys):
    _, rows, _ = run(capsys, "tomography", "--qubits", "2", "--states", "5")
    assert all(float(r["max_error"]) < 1e-9 for r in rows)


def test_out_file_and_env(capsys, tmp_path, monkeypatch):
    target = tmp_path / "x.csv"
    assert main(["qav-a", "--vetoes", "01", "--out", str(target)]) == 0
    assert target.read_text().startswith("resource,")
    monkeypatch.setenv("QCOMM_OUT_DIR", str(tmp_path / "env"))
    assert main(["qav-a", "--vetoes", "01"]) == 0
    assert (tmp_path / "env" / "qav-a.csv").exists()


@pytest.mark.parametrize("argv", [
    ["qkd", "--dr", "0.9", "--sweep", "cr", "--grid", "0.99"],
    ["qav-b", "--vetoes", "10"],
    ["broadcast", "--variant", "plain", "--receivers", "5", "--theta", "9"],
])
def test_validation_errors_exit_nonzero(capsys, argv):
    assert main(argv) != 0
    assert "error" in capsys.readouterr().err


def test_bad_subcommand_usage():
    r = subprocess.run([sys.executable, "-m", "qcomm", "teleport-everything"], capture_output=True, text=True)
    assert r.returncode != 0 and "usage" in r.stderr


def test_same_seed_same_bytes(capsys):
    argv = ["tomography", "--mode", "sampled", "--states", "3", "--seed", "42"]
    main(argv)
    a = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == a
