"""Command-line interface: parsing, profiles, jobs, outputs, exit codes."""

import hashlib
import json

import numpy as np
import pytest

from deeptile.cli import _resolve_loss, _resolve_optim, build_parser, run_cli
from deeptile.image import load_image, make_white_noise, save_image, to_uint8
from deeptile.weights import random_weights, save_weights


@pytest.fixture()
def exemplar_png(tmp_path):
    path = tmp_path / "exemplar.png"
    save_image(make_white_noise(16, 16, seed=0), path)
    return path


def _tile_argv(png, out, *extra):
    return ["tile", "--input", str(png), "--random-weights", "0",
            "--direction", "right", "--iterations", "2", "--lr", "0.01",
            "--out", str(out), *extra]


# ---------------------------------------------------------------- parsing

def test_usage_errors_exit_1(tmp_path, capsys):
    assert run_cli([]) == 1
    assert run_cli(["tile"]) == 1  # missing --input/--direction
    assert run_cli(["tile", "--input", "x.png", "--direction", "sideways"]) == 1
    err = capsys.readouterr().err
    assert "--direction" in err
    assert run_cli(["tile", "--input", "x.png", "--direction", "right",
                    "--no-such-flag"]) == 1
    assert run_cli(["frobnicate"]) == 1


def test_conflicting_weight_sources_exit_1(exemplar_png, tmp_path):
    argv = ["tile", "--input", str(exemplar_png), "--weights", "w.bin",
            "--random-weights", "3", "--direction", "right",
            "--out", str(tmp_path)]
    assert run_cli(argv) == 1


def test_missing_weight_source_exit_1(exemplar_png, tmp_path):
    argv = ["tile", "--input", str(exemplar_png), "--direction", "right",
            "--out", str(tmp_path)]
    assert run_cli(argv) == 1


def test_bad_alpha_and_hole_exit_1(exemplar_png, tmp_path):
    assert run_cli(_tile_argv(exemplar_png, tmp_path, "--alpha", "2.0")) == 1
    assert run_cli(["fill", "--input", str(exemplar_png),
                    "--random-weights", "0", "--hole", "1,2,3",
                    "--out", str(tmp_path)]) == 1


def test_version_exits_0():
    assert run_cli(["--version"]) == 0


def test_help_exits_0():
    assert run_cli(["--help"]) == 0
    assert run_cli(["tile", "--help"]) == 0


# --------------------------------------------------------------- profiles

def test_paper_profile_resolves_documented_defaults():
    parser = build_parser()
    args = parser.parse_args(["tile", "--input", "t.png", "--weights",
                              "w.bin", "--direction", "right",
                              "--profile", "paper"])
    cfg = _resolve_optim(args)
    assert cfg.iterations == 100000
    assert cfg.learning_rate == 0.0005
    assert args.factor_w == 1.0 and args.factor_h == 1.0
    loss = _resolve_loss(args)
    assert loss.layers == ("layer1", "pool1", "pool2", "pool3", "pool4")
    assert loss.weights == (0.2,) * 5


def test_defaults_without_profile_match_paper_settings():
    parser = build_parser()
    args = parser.parse_args(["tile", "--input", "t.png", "--weights",
                              "w.bin", "--direction", "right"])
    cfg = _resolve_optim(args)
    assert cfg.iterations == 100000
    assert cfg.learning_rate == 0.0005


def test_desk_profile_and_explicit_overrides():
    parser = build_parser()
    args = parser.parse_args(["tile", "--input", "t.png", "--weights",
                              "w.bin", "--direction", "right",
                              "--profile", "desk"])
    cfg = _resolve_optim(args)
    assert cfg.iterations == 1000
    assert cfg.learning_rate == 0.01
    args = parser.parse_args(["tile", "--input", "t.png", "--weights",
                              "w.bin", "--direction", "right",
                              "--profile", "desk", "--iterations", "7"])
    cfg = _resolve_optim(args)
    assert cfg.iterations == 7
    assert cfg.learning_rate == 0.01


def test_layer_flags_resolve():
    parser = build_parser()
    args = parser.parse_args(["tile", "--input", "t.png", "--weights",
                              "w.bin", "--direction", "right",
                              "--layers", "layer1,pool2",
                              "--layer-weights", "0.75,0.25"])
    loss = _resolve_loss(args)
    assert loss.layers == ("layer1", "pool2")
    assert loss.weights == (0.75, 0.25)


# --------------------------------------------------------------- tile job

def test_tile_job_writes_outputs(exemplar_png, tmp_path):
    out = tmp_path / "run"
    assert run_cli(_tile_argv(exemplar_png, out)) == 0
    merged = load_image(out / "merged.png")
    tile_img = load_image(out / "tile.png")
    assert merged.shape == (16, 32, 3)
    assert tile_img.shape == (16, 16, 3)
    # the exemplar half survives the encode round trip exactly
    assert np.array_equal(merged[:, :16], load_image(exemplar_png))
    lines = (out / "trace.csv").read_text().strip().split("\n")
    assert lines[0].startswith("iteration,total_loss")
    assert len(lines) == 3  # iterations 1 and 2 logged

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "tile"
    assert manifest["config"]["iterations"] == 2
    assert manifest["config"]["learning_rate"] == 0.01
    assert manifest["config"]["direction"] == "right"
    assert manifest["final_loss"] < manifest["initial_loss"]
    want_sha = hashlib.sha256(exemplar_png.read_bytes()).hexdigest()
    assert manifest["inputs"]["input"]["sha256"] == want_sha
    assert manifest["inputs"]["weights"] == {"random_seed": 0}


def test_tile_job_deterministic_outputs(exemplar_png, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(_tile_argv(exemplar_png, a, "--threads", "1")) == 0
    assert run_cli(_tile_argv(exemplar_png, b, "--threads", "1")) == 0
    assert (a / "merged.png").read_bytes() == (b / "merged.png").read_bytes()


def test_tile_job_checkpoints(exemplar_png, tmp_path):
    out = tmp_path / "ck"
    assert run_cli(_tile_argv(exemplar_png, out,
                              "--checkpoint-every", "1")) == 0
    assert (out / "ckpt_1.png").exists()
    assert (out / "ckpt_2.png").exists()


def test_tile_job_with_weights_file(exemplar_png, tmp_path):
    wpath = tmp_path / "w.bin"
    save_weights(random_weights(1), wpath)
    out = tmp_path / "wf"
    argv = ["tile", "--input", str(exemplar_png), "--weights", str(wpath),
            "--direction", "up", "--iterations", "1", "--lr", "0.01",
            "--out", str(out)]
    assert run_cli(argv) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["inputs"]["weights"]["sha256"] == hashlib.sha256(
        wpath.read_bytes()).hexdigest()


# --------------------------------------------------------------- fill job

def test_fill_job_preserves_context(tmp_path):
    png = tmp_path / "canvas.png"
    save_image(make_white_noise(40, 40, seed=3), png)
    out = tmp_path / "fill"
    argv = ["fill", "--input", str(png), "--random-weights", "0",
            "--hole", "20,20,8,8", "--iterations", "1", "--lr", "0.01",
            "--out", str(out)]
    assert run_cli(argv) == 0
    source = load_image(png)
    filled = load_image(out / "merged.png")
    outside = np.ones((40, 40), bool)
    outside[20:28, 20:28] = False
    assert np.array_equal(filled[outside], source[outside])
    assert not (out / "tile.png").exists()


# ------------------------------------------------------------- expand job

def test_expand_job_runs_plan(tmp_path):
    png = tmp_path / "e.png"
    save_image(make_white_noise(16, 16, seed=4), png)
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps([
        {"direction": "right", "seam_removal": False, "seed": 1},
        {"direction": "right", "seam_removal": False, "seed": 2},
    ]))
    out = tmp_path / "exp"
    argv = ["expand", "--input", str(png), "--random-weights", "0",
            "--plan", str(plan), "--iterations", "1", "--lr", "0.01",
            "--out", str(out)]
    assert run_cli(argv) == 0
    merged = load_image(out / "merged.png")
    assert merged.shape == (16, 48, 3)  # band thickness anchored: 3x width
    lines = (out / "trace.csv").read_text().strip().split("\n")
    assert [row.split(",")[0] for row in lines[1:]] == ["1", "2"]


def test_expand_bad_plan_exits_2(tmp_path, capsys):
    png = tmp_path / "e.png"
    save_image(make_white_noise(16, 16, seed=4), png)
    plan = tmp_path / "plan.json"
    plan.write_text('[{"direction": "right", "warp": 9}]')
    argv = ["expand", "--input", str(png), "--random-weights", "0",
            "--plan", str(plan), "--out", str(tmp_path / "o")]
    assert run_cli(argv) == 2
    assert "unknown keys" in capsys.readouterr().err


# ----------------------------------------------------------- check-weights

def test_check_weights_ok(tmp_path, capsys):
    wpath = tmp_path / "w.bin"
    save_weights(random_weights(0), wpath)
    assert run_cli(["check-weights", "--weights", str(wpath)]) == 0
    out = capsys.readouterr().out
    assert "OK" in out
    assert "conv1_1" in out and "conv4_4" in out


def test_check_weights_corrupt_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"GARBAGE HEADER" + b"\x00" * 64)
    assert run_cli(["check-weights", "--weights", str(bad)]) == 2
    assert "magic" in capsys.readouterr().err


# --------------------------------------------------------- runtime errors

def test_missing_input_exits_2(tmp_path, capsys):
    argv = _tile_argv(tmp_path / "absent.png", tmp_path / "o")
    assert run_cli(argv) == 2


def test_runtime_geometry_error_exits_2(tmp_path, capsys):
    png = tmp_path / "small.png"
    save_image(make_white_noise(24, 24, seed=0), png)
    argv = ["fill", "--input", str(png), "--random-weights", "0",
            "--hole", "20,20,8,8", "--out", str(tmp_path / "o"),
            "--iterations", "1"]
    assert run_cli(argv) == 2
    assert "outside" in capsys.readouterr().err


def test_desk_profile_rejects_small_input_exits_2(tmp_path, capsys):
    png = tmp_path / "tiny.png"
    save_image(make_white_noise(32, 32, seed=0), png)
    argv = ["tile", "--input", str(png), "--random-weights", "0",
            "--direction", "right", "--profile", "desk", "--iterations", "1",
            "--out", str(tmp_path / "o")]
    assert run_cli(argv) == 2
    assert "64" in capsys.readouterr().err
