import json

import numpy as np
import pytest

from cptsim import __version__
from cptsim.analysis import read_csv
from cptsim.cli import SCENARIOS, list_scenarios, main


def write(path, text):
    path.write_text(text)
    return str(path)


def test_list_text_and_json(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) - 1 >= 10
    assert all("Fig." in line for line in out[1:])
    assert main(["list", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in rows] == list(SCENARIOS)
    assert len(rows) == len(out) - 1
    assert list_scenarios().splitlines()[1:] == out[1:]


def test_run_fig1a(tmp_path):
    assert main(["run", "--scenario", "fig1a", "--out", str(tmp_path)]) == 0
    header, data = read_csv((tmp_path / "fig1a_atom.csv").read_text())
    assert header == ("delta_p", "re_sigma13", "im_sigma13", "p1", "p2", "p3")
    assert data.shape == (401, 6)
    assert data[0, 0] == -2.0 and data[-1, 0] == 2.0
    assert abs(data[200, 2]) < 1e-8  # transparency at resonance
    manifest = json.loads((tmp_path / "fig1a_manifest.json").read_text())
    assert manifest["version"] == __version__
    assert set(manifest["series"]) == {"atom", "qdm"}
    assert max(manifest["series"]["qdm"]["residuals"]) < 1e-9
    assert manifest["wall_time_s"] > 0


def test_manifest_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--scenario", "fig1c", "--effective-decay", "--out", str(a)]) == 0
    assert main(["run", "--config", str(a / "fig1c_manifest.json"), "--out", str(b), "--workers", "2"]) == 0
    for name in ("atom", "qdm", "qdm_eff"):
        assert (a / f"fig1c_{name}.csv").read_bytes() == (b / f"fig1c_{name}.csv").read_bytes()


def test_negative_rate_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path / "bad.ini", "[run]\nscenario = custom\n[model]\ngamma_31 = -1\n[sweep]\nmin = -1\nmax = 1\npoints = 5\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "gamma_31" in err and ">= 0" in err
    assert not list(tmp_path.glob("*.csv"))


@pytest.mark.parametrize(
    "text,key",
    [
        ("[model]\nfoo = 1\n", "foo"),
        ("[extra]\na = 1\n", "extra"),
        ("[sweep]\npoints = many\n", "points"),
        ("[run]\nscenario = fig9\n", "fig9"),
        ("[run]\nscenario = custom\n[sweep]\nmin = 1\nmax = 0\npoints = 5\n", "min"),
        ("[run]\nscenario = custom\ndecay = custom\n[sweep]\nmin = -1\nmax = 1\npoints = 5\n", "gamma_31"),
        ("[truncation]\nn_max = 0\n", "n_max"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    cfg = write(tmp_path / "c.ini", text)
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert key in capsys.readouterr().err


def test_failed_rows_exit_two(tmp_path):
    cfg = write(tmp_path / "d.ini", "[model]\nomega_p = 0\n[sweep]\naxis = theta\nmin = 0\nmax = 1\npoints = 3\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
    m = json.loads((tmp_path / "custom_manifest.json").read_text())
    assert m["series"]["atom"]["failed_rows"] == [0]
    assert "NonUniqueSteadyState" in m["series"]["atom"]["errors"]["0"]
    _, data = read_csv((tmp_path / "custom_atom.csv").read_text())
    assert np.isnan(data[0, 1:]).all() and np.isfinite(data[1:]).all()


def test_custom_cavity_with_gamma2_width(tmp_path):
    cfg = write(
        tmp_path / "c.ini",
        "[run]\ndecay = qdm\n[model]\nkind = cavity\ntheta = 0.1\ngamma_21 = 0.001\ngamma_2 = 0.001\n"
        "gamma_2_meaning = width\n[sweep]\nmin = -0.5\nmax = 0.5\npoints = 11\n[truncation]\nn_max = 3\n",
    )
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, data = read_csv((tmp_path / "custom_qdm.csv").read_text())
    assert header[-3:] == ("n_mean", "n_norm", "top_fock_pop")
    assert data[:, header.index("n_norm")].max() == 1.0
    m = json.loads((tmp_path / "custom_manifest.json").read_text())
    assert set(m["series"]["qdm"]["n_max"]) == {3}


def test_decay_flag_and_preset_override(tmp_path):
    cfg = write(tmp_path / "c.ini", "[run]\nscenario = fig4c\n[sweep]\nmin = -1\nmax = 1\npoints = 21\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--decay", "atom", "--effective-decay"]) == 0
    names = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert names == ["fig4c_atom.csv", "fig4c_qdm_eff.csv"]


def test_fig2_columns(tmp_path):
    cfg = write(tmp_path / "c.ini", "[run]\nscenario = fig2\n[sweep]\nmin = -0.5\nmax = 0.5\npoints = 5\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, data = read_csv((tmp_path / "fig2_atom_cpt.csv").read_text())
    assert header == ("delta_p", "re_c1", "im_c1", "re_c3", "im_c3", "re_c5", "im_c5", "fit_residual")
    assert len(list(tmp_path.glob("fig2_*.csv"))) == 4


def test_fig5_reduced_grid(tmp_path):
    cfg = write(tmp_path / "c.ini", "[run]\nscenario = fig5b\n[sweep]\nmin = 0.1\nmax = 1.0\npoints = 3\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, data = read_csv((tmp_path / "fig5b_fwhm.csv").read_text())
    assert header == ("theta", "fwhm_atom", "fwhm_qdm")
    assert np.all(np.isfinite(data)) and np.all(data[:, 1:] > 0)
