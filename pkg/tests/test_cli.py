import csv
import json

import numpy as np
import pytest

from ils3d.cipher import keys_from_hash
from ils3d.cli import EXIT_IO, EXIT_KEY, EXIT_OK, EXIT_VALIDATION, main, parse_grid
from ils3d.dynamics import SPECTRUM_JSON_KEYS
from ils3d.images import read_image, read_key_file, write_image
from ils3d.metrics import npcr

K0 = "26DC1686AA460F215375FE0B468F6F4BD45D067B81BF4BBCF3D73BED5CC1BBD3"
K1 = "26DC1686AA460F215375FE0B468F6F4BD45D067B81BF4BBCF3D73BED5CC1BBD2"


@pytest.fixture
def plain_png(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (17, 9, 3), dtype=np.uint8)
    path = tmp_path / "plain.png"
    write_image(path, img)
    return path, img


def run(*argv):
    return main([str(a) for a in argv])


def test_encrypt_decrypt_derived_key(tmp_path, plain_png):
    src, img = plain_png
    enc, dec = tmp_path / "c.png", tmp_path / "d.png"
    assert run("encrypt", "--in", src, "--out", enc) == EXIT_OK
    key_path = tmp_path / "c.png.key"
    text = key_path.read_text()
    assert len(text.strip()) == 64 and text.endswith("\n")
    assert run("decrypt", "--in", enc, "--out", dec, "--key-file", key_path) == EXIT_OK
    np.testing.assert_array_equal(read_image(dec), img)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["c.png", "c.png.key", "d.png", "plain.png"]


def test_encrypt_decrypt_ppm_raw_key(tmp_path, plain_png):
    src, img = plain_png
    enc, dec = tmp_path / "c.ppm", tmp_path / "d.ppm"
    assert run("encrypt", "--in", src, "--out", enc, "--raw-key", K0) == EXIT_OK
    assert not (tmp_path / "c.ppm.key").exists()
    assert enc.read_bytes().startswith(b"P6")
    assert run("decrypt", "--in", enc, "--out", dec, "--raw-key", K0.lower()) == EXIT_OK
    np.testing.assert_array_equal(read_image(dec), img)


def test_explicit_key_file_location(tmp_path, plain_png):
    src, _ = plain_png
    key = tmp_path / "secret.hex"
    assert run("encrypt", "--in", src, "--out", tmp_path / "c.png", "--key-file", key) == EXIT_OK
    assert len(read_key_file(key)) == 32
    assert not (tmp_path / "c.png.key").exists()


def test_format_override(tmp_path, plain_png):
    src, _ = plain_png
    out = tmp_path / "cipher.bin"
    assert run("encrypt", "--in", src, "--out", out, "--format", "ppm", "--raw-key", K0) == EXIT_OK
    assert out.read_bytes().startswith(b"P6")


@pytest.mark.parametrize("name", ["c.jpg", "c.webp", "c"])
def test_lossy_or_unknown_output_rejected(tmp_path, plain_png, name):
    src, _ = plain_png
    assert run("encrypt", "--in", src, "--out", tmp_path / name) == EXIT_VALIDATION
    assert not (tmp_path / name).exists()


def test_key_errors(tmp_path, plain_png):
    src, _ = plain_png
    enc = tmp_path / "c.png"
    run("encrypt", "--in", src, "--out", enc)
    out = tmp_path / "d.png"
    assert run("decrypt", "--in", enc, "--out", out) == EXIT_KEY
    assert run("decrypt", "--in", enc, "--out", out, "--key-file", tmp_path / "missing.key") == EXIT_KEY
    bad = tmp_path / "bad.key"
    bad.write_text("not a key\n")
    assert run("decrypt", "--in", enc, "--out", out, "--key-file", bad) == EXIT_KEY
    assert run("decrypt", "--in", enc, "--out", out, "--raw-key", "ABCD") == EXIT_KEY
    assert not out.exists()


def test_io_errors(tmp_path, plain_png):
    src, _ = plain_png
    assert run("encrypt", "--in", tmp_path / "none.png", "--out", tmp_path / "c.png") == EXIT_IO
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not an image")
    assert run("encrypt", "--in", junk, "--out", tmp_path / "c.png") == EXIT_IO
    assert run("encrypt", "--in", src, "--out", tmp_path / "no" / "c.png") == EXIT_IO


def test_wrong_key_decrypts_to_noise(tmp_path, astronaut_small):
    src = tmp_path / "p.png"
    write_image(src, astronaut_small)
    enc, dec = tmp_path / "c.png", tmp_path / "d.png"
    run("encrypt", "--in", src, "--out", enc, "--raw-key", K0)
    assert run("decrypt", "--in", enc, "--out", dec, "--raw-key", K1) == EXIT_OK
    assert 99.0 <= npcr(read_image(dec), astronaut_small) <= 100.0


def test_grayscale_input_is_expanded(tmp_path):
    from PIL import Image

    src = tmp_path / "g.png"
    Image.fromarray(np.arange(64, dtype=np.uint8).reshape(8, 8)).save(src)
    enc, dec = tmp_path / "c.png", tmp_path / "d.png"
    assert run("encrypt", "--in", src, "--out", enc) == EXIT_OK
    assert run("decrypt", "--in", enc, "--out", dec, "--key-file", tmp_path / "c.png.key") == EXIT_OK
    out = read_image(dec)
    assert out.shape == (8, 8, 3) and np.all(out[..., 0] == np.arange(64).reshape(8, 8))


# -- analyze ---------------------------------------------------------------


def test_lyapunov_default_set(tmp_path, capsys):
    report = tmp_path / "spec.json"
    assert run("analyze", "lyapunov", "--report", report) == EXIT_OK
    line = capsys.readouterr().out
    lam = [float(v) for v in line.split("(")[1].split(")")[0].split(",")]
    assert all(v > 0 for v in lam)
    doc = json.loads(report.read_text())
    assert tuple(doc) == SPECTRUM_JSON_KEYS
    assert doc["alpha"] == 109.1686 and doc["n_steps"] == 10_000


def test_lyapunov_analytic_and_overrides(tmp_path):
    report = tmp_path / "s.json"
    argv = ["analyze", "lyapunov", "--alpha", "4.5", "--r", "3.85", "--mu", "7.5", "--steps", "500"]
    assert run(*argv, "--jacobian", "analytic", "--x0", "0.2", "--report", report) == EXIT_OK
    doc = json.loads(report.read_text())
    assert doc["seed"][0] == 0.2 and doc["guard_hits"] == 0
    assert abs(sum(doc["lambdas"]) - doc["logdet_mean"]) <= 1e-8


def test_lyapunov_from_key(tmp_path):
    report = tmp_path / "k.json"
    assert run("analyze", "lyapunov", "--raw-key", K0, "--steps", "500", "--report", report) == EXIT_OK
    doc = json.loads(report.read_text())
    keys = keys_from_hash(K0)
    assert (doc["alpha"], doc["r"], doc["mu"]) == (keys.alpha, keys.r, keys.mu)
    assert doc["seed"] == [keys.x0, keys.y0, keys.z0]
    assert run("analyze", "phase", "--raw-key", "ABCD") == EXIT_KEY


def test_lyapunov_too_few_steps():
    assert run("analyze", "lyapunov", "--steps", "50") == EXIT_VALIDATION


def test_bifurcation_single_point(tmp_path):
    out = tmp_path / "scan.csv"
    assert run("analyze", "bifurcation", "--grid", "10:10:1", "--keep", "25", "--out", out) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["param", "coord", "iter", "value"]
    for c in "xyz":
        assert sum(r["coord"] == c for r in rows) == 25
    assert rows[0]["iter"] == "976" and rows[-1]["iter"] == "1000"


def test_bifurcation_mu_sweep(tmp_path):
    out = tmp_path / "scan.csv"
    assert run("analyze", "bifurcation", "--param", "mu", "--grid", "5:6:3", "--steps", "100", "--keep", "10", "--out", out) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert sorted({float(r["param"]) for r in rows}) == [5.0, 5.5, 6.0]


@pytest.mark.parametrize(
    "extra",
    [
        [],
        ["--grid", "6:3:5"],
        ["--grid", "3:6"],
        ["--grid", "3:6:0"],
        ["--param", "r", "--grid", "3.9:4.2:3"],
        ["--grid", "3:6:4", "--keep", "2000"],
    ],
)
def test_bifurcation_invalid(extra, capsys):
    try:
        code = run("analyze", "bifurcation", *extra)
    except SystemExit as e:  # argparse type errors
        code = e.code
    assert code == EXIT_VALIDATION


def test_invalid_params_rejected():
    assert run("analyze", "phase", "--r", "5") == EXIT_VALIDATION
    assert run("analyze", "phase", "--alpha", "-1") == EXIT_VALIDATION
    assert run("analyze", "phase", "--eps", "0.7") == EXIT_VALIDATION


def test_sensitivity_default(tmp_path, capsys):
    out = tmp_path / "sens.csv"
    assert run("analyze", "sensitivity", "--out", out) == EXIT_OK
    msg = capsys.readouterr().out
    assert "delta = 1e-16" in msg
    first = int(msg.rsplit(":", 1)[1])
    assert 1 <= first <= 50
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 150
    assert max(float(r["abs_diff"]) for r in rows) > 0.1


def test_phase_csv(tmp_path):
    out = tmp_path / "phase.csv"
    assert run("analyze", "phase", "--steps", "100", "--seed", "0.1,0.2,0.3", "--out", out) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 100
    assert all(0 <= float(r[c]) <= 1 for r in rows for c in "xyz")


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("3:6:4"), [3, 4, 5, 6])
    assert parse_grid("2.5:2.5:1").tolist() == [2.5]


# -- evaluate --------------------------------------------------------------


def test_evaluate_report(tmp_path, plain_png):
    src, _ = plain_png
    report, hist, enc = tmp_path / "r.json", tmp_path / "h.csv", tmp_path / "c.png"
    argv = ["evaluate", "--in", src, "--report", report, "--histogram", hist, "--out", enc, "--samples", "500"]
    assert run(*argv) == EXIT_OK
    doc = json.loads(report.read_text())
    assert set(doc["entropy"]) == {"r", "g", "b"}
    assert set(doc["correlation"]) == {"h", "v", "d"}
    assert 0.0 <= doc["npcr"] <= 100.0 and 0.0 <= doc["uaci"] <= 100.0
    assert doc["key_space"] == {"nominal_bits": 309, "derived_bits": 96}
    assert doc["differential"]["key_mode"] == "per-plaintext"
    assert len(hist.read_text().splitlines()) == 769
    first = report.read_text()
    assert run(*argv) == EXIT_OK
    assert report.read_text() == first


def test_evaluate_given_cipher(tmp_path, plain_png, capsys):
    src, _ = plain_png
    enc = tmp_path / "c.png"
    run("encrypt", "--in", src, "--out", enc)
    capsys.readouterr()
    assert run("evaluate", "--in", src, "--cipher", enc, "--samples", "300", "--pixel", "2,3", "--value", "1,2,3") == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["differential"]["pixel"] == [2, 3]
    assert doc["differential"]["new_value"] == [1, 2, 3]


def test_evaluate_errors(tmp_path, plain_png):
    src, _ = plain_png
    other = tmp_path / "o.png"
    write_image(other, np.zeros((4, 4, 3), dtype=np.uint8))
    assert run("evaluate", "--in", src, "--cipher", other) == EXIT_VALIDATION
    assert run("evaluate", "--in", src, "--pixel", "99,0") == EXIT_VALIDATION
    assert run("evaluate", "--in", src, "--report", tmp_path / "x" / "r.json") == EXIT_IO
