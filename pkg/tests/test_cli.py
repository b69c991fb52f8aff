import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from grainmorph import synthetic
from grainmorph.cli import (SCHEMA, ConfigError, PipelineConfig, main, parse_config_text,
                            preset_text)
from grainmorph.raster import GreyImage, save_pgm


@pytest.fixture
def fixtures(tmp_path):
    paths = {}
    for name, img in (("dumbbell", synthetic.dumbbell()), ("squares", synthetic.squares()),
                      ("disc", synthetic.disc(8))):
        p = tmp_path / f"{name}.pgm"
        save_pgm(img, p)
        paths[name] = p
    return paths


def scene(out):
    return json.loads((Path(out) / "scene.json").read_text())


def test_dumbbell_two_grains(fixtures, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(fixtures["dumbbell"]), "--out", str(out)]) == 0
    s = scene(out)["scene"]
    assert s["grain_count"] == 2
    lines = (out / "particles.csv").read_text().splitlines()
    assert lines[0] == "id,class,area,length,width,cx,cy,orientation,holes"


def test_three_squares(fixtures, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(fixtures["squares"]), "--out", str(out)]) == 0
    s = scene(out)["scene"]
    assert s["grain_count"] == 3
    assert abs(s["grain_area_fraction"] - 3 * 6.5 ** 2 / 1600) <= 1e-6


def test_stage_gating_contours(fixtures, tmp_path):
    mask = tmp_path / "mask.pgm"
    arr = np.where(synthetic.squares().pixels > 100, 255, 0).astype(np.uint8)
    save_pgm(GreyImage(arr), mask)
    out = tmp_path / "o"
    assert main(["run", str(mask), "--stage", "contours", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["binder_contours.txt", "contours.txt"]
    out2 = tmp_path / "o2"
    assert main(["contours", str(mask), "--out", str(out2)]) == 0
    assert (out2 / "contours.txt").read_text() == (out / "contours.txt").read_text()


def test_stage_chain_matches_full_run(fixtures, tmp_path):
    img = str(fixtures["dumbbell"])
    full = tmp_path / "full"
    assert main(["run", img, "--out", str(full)]) == 0
    s = tmp_path / "s"
    o = str(s)
    assert main(["segment", img, "--out", o]) == 0
    assert main(["contours", str(s / "mask.pgm"), "--out", o]) == 0
    assert main(["mesh", str(s / "contours.txt"), "--out", o]) == 0
    assert main(["skeleton", str(s / "mesh.txt"), "--out", o]) == 0
    assert main(["separate", str(s / "contours.txt"), "--image", img, "--out", o]) == 0
    assert main(["stats", str(s / "refined_contours.txt"), "--image", img,
                 "--binder", str(s / "binder_contours.txt"), "--out", o]) == 0
    assert main(["render", o, "--image", img, "--out", o]) == 0
    for name in ("mask.pgm", "contours.txt", "mesh.txt", "skeleton.txt", "refined_contours.txt",
                 "grey.txt", "final_contours.txt", "particles.csv", "scene.json"):
        assert (s / name).read_bytes() == (full / name).read_bytes(), name
    assert (s / "overlay.svg").read_text().startswith("<?xml")


def test_deterministic_rerun(fixtures, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(fixtures["disc"]), "--preset", "smoothed-pcnn",
                     "--out", str(out)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("segmentation = spectral\ncut_threshold = 12  # comment\nsmoothing = on\n")
    c = PipelineConfig.load(cfg, "original-pcnn", {"cut_threshold": "44"})
    assert c.segmentation == "spectral"      # file beats preset
    assert c.smoothing is True
    assert c.separation.threshold == 44.0    # override beats file
    c = PipelineConfig.load(None, "smoothed-pcnn")
    assert (c.segmentation, c.smoothing) == ("pcnn", True)


def test_config_text_round_trip():
    c = PipelineConfig.load(None, "original-pcnn", {"prune_tau": "2.5"})
    again = PipelineConfig.from_values(parse_config_text(c.to_text()))
    assert again.to_text() == c.to_text()
    assert set(parse_config_text(c.to_text())) == set(SCHEMA) - {"input", "output"}


@pytest.mark.parametrize("text", ["nokey\n", "bogus = 1\n", "dilation = 0.5\n",
                                  "segmentation = magic\n", "smoothing = maybe\n",
                                  "workers = 0\n", "render_layers = nope\n"])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        PipelineConfig.from_values(parse_config_text(text))


def test_presets_exist():
    for name in ("original-spectral", "original-pcnn", "smoothed-spectral", "smoothed-pcnn"):
        assert "segmentation" in parse_config_text(preset_text(name))


def test_exit_codes(fixtures, tmp_path, capsys):
    assert main(["run", str(fixtures["disc"]), "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    assert "error [config]" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("outer 3 0 0 4 4 4\n")
    assert main(["mesh", str(bad), "--out", str(tmp_path / "m")]) == 1
    assert "error [mesh]" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.pgm"), "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--preset", "nope"])
    assert exc.value.code == 2


def test_set_and_out_flags(fixtures, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(fixtures["dumbbell"]), "--set", "cut_threshold=250",
                 "--set", "binder_particles=off", "--out", str(out)]) == 0
    s = scene(out)["scene"]
    assert s["grain_count"] == 1 and s["binder_count"] == 0
    assert "cut_threshold = 250" in (out / "config.txt").read_text()


def test_console_entry_point(fixtures, tmp_path):
    out = tmp_path / "o"
    r = subprocess.run([sys.executable, "-m", "grainmorph.cli", "run", str(fixtures["squares"]),
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert scene(out)["scene"]["grain_count"] == 3
    r = subprocess.run([sys.executable, "-m", "grainmorph.cli", "--help"],
                       capture_output=True, text=True)
    assert "cut_threshold" in r.stdout
