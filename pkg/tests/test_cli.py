import csv
import io

import pytest

from uvnlos.cli import main
from uvnlos.config import preset_text

COARSE = "\n[quadrature]\nn_theta = 32\nn_psi = 32\nn_nu = 64\nreflection_ny = 48\nreflection_nz = 48\n"


def coarse_config(tmp_path, name):
    text = preset_text(name)
    if "[sweep]" in text:
        head, tail = text.split("[sweep]")
        text = head + COARSE + "\n[sweep]" + tail
    path = tmp_path / f"{name}.cfg"
    path.write_text(text)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_row_count_and_header(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_fig4")
    code, out, _ = run(capsys, "sweep", "-c", cfg, "--rmin", "60", "--rmax", "200", "--steps", "8",
                       "--models", "analytic_approx,mcpt", "--photons", "2000")
    assert code == 0
    assert out.splitlines()[0] == "r_m,model,Q_sca_J,Q_ref_J,L_dB,err_dB,error"
    data = rows(out)
    assert len(data) == 16
    assert [d["model"] for d in data[:2]] == ["analytic_approx", "mcpt"]


def test_no_obstacle_raises_loss(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_fig4")
    args = ["sweep", "-c", cfg, "--steps", "3", "--models", "analytic_approx"]
    _, with_obs, _ = run(capsys, *args)
    _, without, _ = run(capsys, *args, "--no-obstacle")
    for a, b in zip(rows(with_obs), rows(without)):
        assert float(b["L_dB"]) > float(a["L_dB"])


def test_seed_gives_identical_bytes(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_free")
    args = ["sweep", "-c", cfg, "--steps", "2", "--models", "analytic_approx,mcpt", "--photons", "3000",
            "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_floats_have_nine_significant_digits(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_free")
    _, out, _ = run(capsys, "sweep", "-c", cfg, "--steps", "1", "--rmin", "100")
    row = rows(out)[0]
    assert row["L_dB"] == format(float(row["L_dB"]), ".9g")
    assert row["err_dB"] != "" and row["error"] == ""


def test_plot_written(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_free")
    png = tmp_path / "sweep.png"
    code, _, _ = run(capsys, "sweep", "-c", cfg, "--steps", "2", "--plot", str(png))
    assert code == 0 and png.stat().st_size > 1000


def test_validate_pass_and_threshold_failure(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "fig5_alpha5")
    base = ["validate", "-c", cfg, "--rmin", "180", "--steps", "1", "--models", "analytic_approx,analytic_exact"]
    code, out, _ = run(capsys, *base, "--threshold-db", "50")
    assert code == 0 and "PASS" in out
    code, out, _ = run(capsys, *base, "--threshold-db", "0")
    assert code == 1 and "FAIL" in out


def test_validate_with_mcpt_writes_csv_and_plot(tmp_path, capsys):
    cfg = coarse_config(tmp_path, "table1_free")
    out_csv, png = tmp_path / "v.csv", tmp_path / "v.png"
    code, out, _ = run(capsys, "validate", "-c", cfg, "--steps", "2", "--photons", "20000",
                       "--out", str(out_csv), "--plot", str(png))
    assert code == 0, out
    assert len(rows(out_csv.read_text())) == 6
    assert png.exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(preset_text("table1_free").replace("rx_azimuth = 19pi/36", "rx_azimuth = pi/4"))
    code, _, err = run(capsys, "sweep", "-c", str(bad))
    assert code == 2 and "(pi/2, pi)" in err
    code, _, _ = run(capsys, "sweep", "-c", "no_such_preset")
    assert code == 2
    code, _, _ = run(capsys, "sweep", "-c", str(bad).replace("bad", "table1_free"), "--models", "nope")
    assert code == 2


def test_presets_list_and_show(capsys):
    code, out, _ = run(capsys, "presets", "list")
    assert code == 0 and "table1_fig4" in out and len(out.splitlines()) == 10
    code, out, _ = run(capsys, "presets", "show", "fig5_alpha0")
    assert "[obstacle]" in out


def test_weights_dump(capsys):
    code, out, _ = run(capsys, "weights", "-c", "fig5_alpha0", "--n-theta", "3", "--n-psi", "2", "--n-nu", "4")
    data = rows(out)
    assert code == 0 and len(data) == 24
    assert {"s_wei", "exact", "branch"} <= set(data[0])
