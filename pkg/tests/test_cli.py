import json
import shutil
import subprocess

import numpy as np
import pytest

from eitmodes.cli import main
from eitmodes.fileio import read_field


def run(*args):
    return main([str(a) for a in args])


def test_modes(tmp_path, capsys):
    assert run("modes", "--out", tmp_path, "--m", "0,1", "--nmax", "2", "--grid-points", "800") == 0
    out = capsys.readouterr().out
    assert "m=+0 n=1" in out and "m=+1 n=2" in out
    assert (tmp_path / "modes_m1.csv").read_text().startswith("r_m,psi_m1,psi_m2\n")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "modes"
    assert sorted(man["outputs"]) == man["outputs"]
    assert "summary.json" in man["outputs"]


def test_dispersion_and_replay(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("dispersion", "--out", a, "--m", "0", "--nmax", "2", "--delta-steps", "3", "--grid-points", "800") == 0
    header = (a / "dispersion.csv").read_text().splitlines()[0]
    assert header == "delta_s,m,n,beta_m2,slope_hf,slope_fd,vg_mps,vg_over_c"
    assert len((a / "dispersion.csv").read_text().splitlines()) == 1 + 3 * 2
    assert run("replay", a / "manifest.json", "--out", b) == 0
    assert (a / "dispersion.csv").read_bytes() == (b / "dispersion.csv").read_bytes()


def test_channels_flag(tmp_path):
    assert run("dispersion", "--out", tmp_path, "--channels", "1:1,2:1", "--delta-steps", "2", "--grid-points", "800") == 0
    rows = np.loadtxt(tmp_path / "dispersion.csv", delimiter=",", skiprows=1)
    assert {(int(m), int(n)) for m, n in rows[:, 1:3]} == {(1, 1), (2, 1)}


def test_make_field_decompose_propagate(tmp_path, capsys):
    assert run("make-field", "--out", tmp_path, "--kind", "mode", "--m", "1", "--n", "1", "--N", "128") == 0
    fld = read_field(tmp_path / "input.fld")
    assert fld.N == 128 and fld.meta["m"] == 1
    dec = tmp_path / "dec"
    assert run("decompose", "--out", dec, "--field", tmp_path / "input.fld", "--m-max", "1", "--nmax", "2", "--z", "1e-3") == 0
    exp = json.loads((dec / "expansion.json").read_text())
    top = max(exp["terms"], key=lambda t: t["power"])
    assert (top["m"], top["n"]) == (1, 1) and top["power"] > 0.99
    assert read_field(dec / "synthesized.fld").meta["z_m"] == 1e-3
    prop = tmp_path / "prop"
    assert run("propagate", "--out", prop, "--field", tmp_path / "input.fld", "--z-total", "2e-4", "--record-every", "5") == 0
    lines = (prop / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "z_m,power,rms_radius_m,overlap,phase_rad"
    assert len(lines) == 1 + 5
    assert len(list(prop.glob("record_*.fld"))) == 5


def test_gaussian_needs_waist(tmp_path, capsys):
    assert run("make-field", "--out", tmp_path, "--kind", "gaussian") == 2
    assert run("make-field", "--out", tmp_path, "--kind", "gaussian", "--waist", "2e-5", "--N", "64") == 0


@pytest.mark.parametrize(
    "args, code",
    [
        (["modes", "--delta", "1e6"], 3),
        (["modes", "--delta", "0"], 3),
        (["modes", "--m", ""], 2),
        (["modes", "--grid-points", "50"], 2),
        (["dispersion", "--delta-max", "1e5"], 2),
        (["modes", "--config", "/nonexistent/config.yaml"], 2),
    ],
)
def test_exit_codes(tmp_path, capsys, args, code):
    assert run(*args, "--out", tmp_path) == code
    assert "eitmodes" in capsys.readouterr().err


def test_unstable_step_exit(tmp_path, capsys):
    assert run("make-field", "--out", tmp_path, "--N", "128") == 0
    assert run("propagate", "--out", tmp_path / "p", "--field", tmp_path / "input.fld", "--dz", "1e-2") == 4
    err = capsys.readouterr().err
    assert "UnstableStep" in err and "hint" in err


def test_power_loss_exit(tmp_path, capsys):
    assert run("make-field", "--out", tmp_path, "--kind", "gaussian", "--waist", "6e-6", "--N", "128", "--extent", "4e-5") == 0
    args = ["propagate", "--out", tmp_path / "p", "--field", tmp_path / "input.fld", "--delta", "-1e5"]
    args += ["--dz", "1e-6", "--z-total", "6e-4", "--absorber-fraction", "0.3", "--no-records"]
    assert run(*args) == 4
    assert "PowerLoss" in capsys.readouterr().err
    assert run(*args, "--allow-loss") == 0


def test_console_script():
    exe = shutil.which("eitmodes")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "--help"], capture_output=True, text=True, check=True)
    for cmd in ("modes", "dispersion", "decompose", "propagate", "make-field", "replay"):
        assert cmd in res.stdout


def test_negative_values_after_flags():
    from eitmodes.cli import _join_negative_values

    assert _join_negative_values(["modes", "--delta", "-1e6", "--m", "0"]) == ["modes", "--delta=-1e6", "--m", "0"]
    assert _join_negative_values(["--delta-min", "-1e7", "--verbose"]) == ["--delta-min=-1e7", "--verbose"]
    assert _join_negative_values(["--out", "-v"]) == ["--out", "-v"]


def test_negative_delta_range(tmp_path):
    args = ["dispersion", "--out", tmp_path, "--delta-min", "-2e6", "--delta-max", "-1e6", "--delta-steps", "2"]
    assert run(*args, "--grid-points", "800") == 0
    rows = np.loadtxt(tmp_path / "dispersion.csv", delimiter=",", skiprows=1)
    assert set(rows[:, 0]) == {-1e6, -2e6}
