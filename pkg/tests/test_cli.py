import json
import logging
import re

import numpy as np
import pytest
from PIL import Image

from medial_salience import cli, synthetic
from medial_salience.exceptions import ConfigError

from oracles import decode_png


def write_drawing(path, img):
    Image.fromarray(np.where(img.mask, 0, 255).astype(np.uint8)).save(path)
    return str(path)


@pytest.fixture
def inputs(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    slab = write_drawing(d / "slab.png", synthetic.slab(16, 80)[0])
    flare = write_drawing(d / "flare.png", synthetic.linear_flare()[0])
    return d, slab, flare


def run_cli(args, tmp_path, env=None):
    out = tmp_path / "out"
    code = cli.main(args + ["--output", str(out)], environ=env or {})
    return code, out


def png(path):
    return np.asarray(Image.open(path))


def test_resolve_precedence(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("tau = 0.3\nwindow = 4\nmeasures = ribbon,taper\n")
    s = cli.resolve_settings({"window": 6}, str(cfg), {cli.OUTPUT_ENV: "/x"})
    assert s["tau"] == 0.3 and s["window"] == 6 and s["measures"] == ["ribbon", "taper"]
    assert s["output"] == "/x" and s["samples"] == 60 and s["fraction"] == [0.5]
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"tau": 0.2, "disk-radius": 1.5, "output": "/y"}))
    s = cli.resolve_settings({}, str(js), {cli.OUTPUT_ENV: "/x"})
    assert s["tau"] == 0.2 and s["disk_radius"] == 1.5 and s["output"] == "/y"
    sec = tmp_path / "c.cfg"
    sec.write_text("[run]\nsigma = 0\n")
    assert cli.resolve_settings({}, str(sec), {})["sigma"] == 0.0


def test_bad_config_files(tmp_path):
    for name, text in (("a.ini", "colour = red\n"), ("b.json", "[1, 2]"),
                       ("c.json", "{bad"), ("d.ini", "tau = high\n")):
        p = tmp_path / name
        p.write_text(text)
        with pytest.raises(ConfigError):
            cli.resolve_settings({}, str(p), {})
    with pytest.raises(ConfigError):
        cli.resolve_settings({}, str(tmp_path / "missing.ini"), {})


@pytest.mark.parametrize("args", [
    ["salience", "x.png", "--tau", "0.9"],
    ["salience", "x.png", "--window", "0"],
    ["salience", "x.png", "--measures", "curvature"],
    ["compose", "x.png", "--channels", "contours,ribbon"],
    ["split", "x.png", "--fraction", "1.5"],
    ["salience", "x.png", "--jobs", "0"],
    ["salience", "x.png", "--connectivity", "6"],
    ["salience", "x.png", "--tau", "abc"],
    ["frobnicate", "x.png"],
    ["salience"],
])
def test_config_errors_exit_3(args, tmp_path, capsys):
    code, out = run_cli(args, tmp_path)
    assert code == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_duplicate_stems_are_a_config_error(tmp_path, inputs):
    d, slab, _ = inputs
    (d / "sub").mkdir()
    other = write_drawing(d / "sub" / "slab.png", synthetic.slab(10, 40)[0])
    code, _ = run_cli(["stats", slab, other], tmp_path)
    assert code == cli.EXIT_CONFIG


def test_env_var_supplies_output_dir(tmp_path, inputs, monkeypatch):
    _, slab, _ = inputs
    target = tmp_path / "from_env"
    monkeypatch.chdir(tmp_path)
    code = cli.main(["skeletonize", slab], environ={cli.OUTPUT_ENV: str(target)})
    assert code == 0
    assert (target / "slab.skeleton.graph.json").exists()


def test_skeletonize_slab(tmp_path, inputs):
    _, slab, _ = inputs
    code, out = run_cli(["skeletonize", slab], tmp_path)
    assert code == 0
    graph = json.loads((out / "slab.skeleton.graph.json").read_text())
    assert len(graph["branches"]) == 1
    assert png(out / "slab.skeleton.overlay.png").shape == (37, 80, 3)
    echo = json.loads((out / "skeletonize.config.json").read_text())
    assert echo["tau"] == 0.25 and echo["window"] == 5 and echo["samples"] == 60
    assert echo["resolved"]["disk_radius"] == 1.0
    assert "jobs" not in echo and "output" not in echo


def test_salience_outputs(tmp_path, inputs):
    _, slab, flare = inputs
    code, out = run_cli(["salience", slab, flare, "--csv"], tmp_path)
    assert code == 0
    for stem in ("slab", "flare"):
        for m in ("separation", "ribbon", "taper"):
            assert (out / f"{stem}.salience.{m}.png").exists()
            assert (out / f"{stem}.colormap.{m}.png").exists()
        assert (out / f"{stem}.branches.csv").exists()
    rib = png(out / "slab.salience.ribbon.png")
    contours = png(out / "slab.salience.separation.png") > 0
    assert np.all(rib[contours] == 255) and not rib[~contours].any()
    agg = json.loads((out / "salience.aggregate.json").read_text())
    assert [r["name"] for r in agg["records"]] == ["flare", "slab"]
    # every output name follows <stem>.<artifact>.<measure>.png
    for p in out.glob("*.png"):
        assert re.fullmatch(r"(slab|flare)\.[a-z0-9]+\.[a-z-]+\.png", p.name), p.name


def test_measures_flag_limits_outputs(tmp_path, inputs):
    _, slab, _ = inputs
    code, out = run_cli(["salience", slab, "--measures", "taper"], tmp_path)
    assert code == 0
    assert (out / "slab.salience.taper.png").exists()
    assert not (out / "slab.salience.ribbon.png").exists()


def test_partial_and_total_failure(tmp_path, inputs, caplog):
    d, slab, flare = inputs
    bad = d / "broken.png"
    bad.write_bytes(b"\x89PNG\r\n\x1a\n garbage")
    with caplog.at_level(logging.ERROR, logger="medial_salience"):
        code, out = run_cli(["stats", str(d / "*.png")], tmp_path)
    assert code == cli.EXIT_PARTIAL
    assert (out / "slab.stats.json").exists() and (out / "flare.stats.json").exists()
    assert "broken.png" in caplog.text
    report = json.loads((out / "stats.report.json").read_text())
    failed = [r for r in report["images"] if not r["ok"]]
    assert [r["name"] for r in failed] == ["broken"]
    code, _ = run_cli(["stats", str(bad), str(d / "absent.png")], tmp_path)
    assert code == cli.EXIT_FAILED


def test_split_and_compose_use_cache(tmp_path, inputs, caplog):
    _, _, flare = inputs
    code, out = run_cli(["salience", flare], tmp_path)
    assert code == 0
    with caplog.at_level(logging.DEBUG, logger="medial_salience"):
        code, _ = run_cli(["split", flare, "--measures", "ribbon", "--fraction", "0.5",
                           "--fraction", "0.25"], tmp_path)
    assert code == 0 and "using cached salience" in caplog.text
    top = png(out / "flare.top50.ribbon.png") > 0
    bottom = png(out / "flare.bottom50.ribbon.png") > 0
    assert not (top & bottom).any()
    assert abs(int(top.sum()) - int(bottom.sum())) <= 1
    assert (out / "flare.top25.ribbon.png").exists()
    caplog.clear()
    with caplog.at_level(logging.DEBUG, logger="medial_salience"):
        code, _ = run_cli(["compose", flare, "--channels", "contours,ribbon,separation",
                           "--channels", "ribbon,taper,separation"], tmp_path)
    assert code == 0 and "using cached salience" in caplog.text
    a = png(out / "flare.compose.contours-ribbon-separation.png")
    b = png(out / "flare.compose.ribbon-taper-separation.png")
    assert a.shape[2] == 3 and b.shape[2] == 3
    assert np.array_equal(a[..., 0] > 0, top | bottom)


def test_cache_ignored_when_config_changes(tmp_path, inputs, caplog):
    _, _, flare = inputs
    run_cli(["salience", flare], tmp_path)
    with caplog.at_level(logging.DEBUG, logger="medial_salience"):
        code, _ = run_cli(["compose", flare, "--tau", "0.3"], tmp_path)
    assert code == 0 and "using cached salience" not in caplog.text


def test_invert_polarity_and_bit_depth(tmp_path, inputs):
    _, slab, _ = inputs
    code, out = run_cli(["compose", slab, "--invert-polarity", "--bit-depth", "16"], tmp_path)
    assert code == 0
    arr, depth = decode_png(out / "slab.compose.contours-ribbon-separation.png")
    assert depth == 16
    assert arr[0, 0].tolist() == [65535, 65535, 65535]


def test_reconstruct_and_debug(tmp_path, inputs):
    _, _, flare = inputs
    code, out = run_cli(["reconstruct", flare, "--debug"], tmp_path)
    assert code == 0
    info = json.loads((out / "flare.reconstruct.json").read_text())
    assert info["fidelity"] >= 0.95
    assert (out / "flare.reconstruct.boundary.png").exists()
    for name in ("debug.aof.png", "debug.distance.png", "debug.contours.png",
                 "debug.timings.json"):
        assert (out / f"flare.{name}").exists()


def test_rerun_is_byte_identical(tmp_path, inputs):
    _, slab, flare = inputs
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["salience", slab, flare, "--output", str(out)], environ={}) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]
