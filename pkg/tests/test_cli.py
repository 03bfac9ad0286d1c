import csv
import json
import math

import pytest

from mwlab import cli
from mwlab.errors import ValidationError


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def digests(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "run.json"}


def test_parse_quantity_units():
    assert cli.parse_quantity("10um", "length") == pytest.approx(10e-6)
    assert cli.parse_quantity("2kHz", "angular_frequency") == pytest.approx(2 * math.pi * 2e3)
    assert cli.parse_quantity("27nK", "temperature") == pytest.approx(27e-9)
    assert cli.parse_quantity("1.5", "length") == 1.5
    with pytest.raises(ValidationError):
        cli.parse_quantity("3 parsecs", "length")
    with pytest.raises(ValidationError):
        cli.parse_quantity("3 nK", "length")


def test_parse_grid():
    assert cli.parse_grid("0:1:0.25") == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
    assert list(cli.parse_grid("1,2,5")) == [1, 2, 5]
    assert cli.parse_grid("1:3:1ms", "time") == pytest.approx([1e-3, 2e-3, 3e-3])
    with pytest.raises(ValidationError):
        cli.parse_grid("0:1:0")


def test_spectrum_outputs_and_manifest(tmp_path):
    out = tmp_path / "spectrum"
    assert run("twomode", "spectrum", "--N", 3, "--U", 0.4, "--output-dir", out) == 0
    header, rows = read_csv(out / "spectrum.csv")
    assert header == ["index", "energy"] and len(rows) == 4
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["config"]["params"]["N"] == 3
    assert [o["path"] for o in manifest["outputs"]] == ["spectrum.csv"]
    assert cli.verify_manifest(out / "run.json") == []
    (out / "spectrum.csv").write_text("tampered")
    assert cli.verify_manifest(out / "run.json")


def test_verify_manifest_flag(tmp_path, capsys):
    run("meanfield", "frequencies", "--N", 100, "--U", 0.01, "--output-dir", tmp_path)
    assert run("--verify-manifest", tmp_path / "run.json") == 0
    assert "manifest ok" in capsys.readouterr().out


def test_json_format(tmp_path):
    assert run("twomode", "spectrum", "--N", 2, "--format", "json", "--output-dir", tmp_path) == 0
    data = json.loads((tmp_path / "spectrum.json").read_text())
    assert len(data["columns"]["energy"]) == 3


def test_validation_exit_code(tmp_path, capsys):
    assert run("twomode", "spectrum", "--N", 0, "--output-dir", tmp_path / "x") == 2
    assert "validation error" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()
    with pytest.raises(SystemExit) as info:
        run("twomode", "spectrum", "--bogus", 1)
    assert info.value.code == 2


def test_missing_required(tmp_path, capsys):
    assert run("meanfield", "integrate", "--N", 10, "--output-dir", tmp_path) == 2
    assert "params.z0" in capsys.readouterr().err


def test_numerical_failure_rolls_back(tmp_path):
    out = tmp_path / "cone"
    code = run("luttinger", "lightcone", "--t-grid", "1:3:1ms", "--band", 1e-12,
               "--output-dir", out)
    assert code == 3
    assert not out.exists()


def test_dry_run_writes_nothing(tmp_path, capsys):
    out = tmp_path / "dry"
    assert run("fringes", "fdf", "--n", 10, "--dry-run", "--output-dir", out) == 0
    echo = json.loads(capsys.readouterr().out)
    assert echo["dry_run"] and echo["config"]["params"]["n"] == 10
    assert not out.exists()


def test_config_file_and_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nseed = 5\nformat = json\n[params]\nN = 4\nU = 0.3\n")
    out = tmp_path / "cfg"
    assert run("twomode", "spectrum", "--config", ini, "--U", 0.0, "--seed", 9,
               "--output-dir", out) == 0
    cfg = json.loads((out / "run.json").read_text())["config"]
    assert cfg["params"]["N"] == 4 and cfg["params"]["U"] == 0.0 and cfg["seed"] == 9
    assert (out / "spectrum.json").exists()
    bad = tmp_path / "bad.ini"
    bad.write_text("[params]\nNN = 4\n")
    assert run("twomode", "spectrum", "--config", bad, "--output-dir", tmp_path / "b") == 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MWLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("twomode", "spectrum", "--N", 2) == 0
    assert (tmp_path / "env" / "spectrum.csv").exists()


def test_const_override_changes_result(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("optics", "calc", "eikonal", "--V", "6.6e-12eV", "--L", "10cm", "--output-dir", a)
    run("optics", "calc", "eikonal", "--V", "6.6e-12eV", "--L", "10cm", "--const", "HBAR=2.1e-34",
        "--output-dir", b)
    pa = json.loads((a / "calc.json").read_text())["abs_phase"]
    pb = json.loads((b / "calc.json").read_text())["abs_phase"]
    assert pa == pytest.approx(1.0, rel=0.01)
    assert pb == pytest.approx(pa * 1.054571817e-34 / 2.1e-34, rel=1e-9)


def test_optics_calculators(tmp_path):
    out = tmp_path / "tl"
    assert run("optics", "calc", "talbot-lau", "--species", "Na", "--output-dir", out) == 0
    tl = json.loads((out / "calc.json").read_text())
    assert tl["L2"] == tl["L1"] == tl["L_T"] / 2 and tl["d_prime"] == pytest.approx(1e-7, rel=1e-15)
    pole = tl["L_T"] / 4 * 1e3
    assert run("optics", "calc", "talbot-lau", "--species", "Na", "--L1", f"{pole!r}mm",
               "--output-dir", tmp_path / "pole") == 3
    assert run("optics", "calc", "bragg", "--output-dir", tmp_path / "br") == 0
    assert run("optics", "calc", "eikonal", "--output-dir", tmp_path / "e") == 2
    assert run("optics", "table", "--output-dir", tmp_path / "t") == 0
    header, rows = read_csv(tmp_path / "t" / "diffraction.csv")
    assert header[0] == "v" and len(rows) == 16


@pytest.mark.parametrize("argv", [
    ("fringes", "fdf", "--n", 200, "--L", "20um"),
    ("fringes", "synthesize", "--L", "20um", "--noise-sigma", 0.05),
    ("fringes", "fit", "--n-seeds", 3),
    ("luttinger", "equilibrium", "--n-real", 100),
    ("meanfield", "integrate", "--N", 50, "--U", 0.02, "--z0", 0.3, "--t-end", 5),
    ("tof", "pattern", "--species", "Rb-87", "--t", "10ms"),
])
def test_determinism(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*argv, "--seed", 17, "--output-dir", a) == 0
    assert run(*argv, "--seed", 17, "--output-dir", b) == 0
    da, db = digests(a), digests(b)
    assert da and da == db


def test_seed_changes_stochastic_output(tmp_path):
    argv = ("fringes", "fdf", "--n", 200, "--L", "20um")
    run(*argv, "--seed", 1, "--output-dir", tmp_path / "a")
    run(*argv, "--seed", 2, "--output-dir", tmp_path / "b")
    assert digests(tmp_path / "a") != digests(tmp_path / "b")
