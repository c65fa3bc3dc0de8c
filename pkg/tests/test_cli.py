"""
Command-line surface: exit codes, outputs and files for every subcommand.
"""

import csv
import json

import cv2
import numpy as np
import pytest
import yaml

from apps.adapters.images.pfm import read_pfm
from apps.adapters.weights.container import load_weights, save_weights
from apps.cli.main import main
from apps.core.services import cenhdr
from apps.core.services.pipeline import tonemap_8bit


@pytest.fixture
def tiny_yaml(tmp_path, tiny_config):
    path = tmp_path / "tiny.yaml"
    data = tiny_config.model_dump(mode="json")
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture
def weights_file(tmp_path, tiny_config):
    path = tmp_path / "tiny.cenh"
    save_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config, path)
    return path


def scene_args(scene):
    return ["--inputs", *(str(scene / f"input_{i}.png") for i in (1, 2, 3)),
            "--exposures", str(scene / "exposure.txt")]


# ─── merge ──────────────────────────────────────────────────────────────────

def test_merge_writes_hdr_and_tonemapped_png(tmp_path, scene_root, weights_file, capsys):
    out, png = tmp_path / "out.pfm", tmp_path / "out.png"
    code = main(["merge", *scene_args(scene_root / "scene_0"), "--weights", str(weights_file),
                 "--out", str(out), "--tonemapped", str(png)])
    assert code == 0
    hdr = read_pfm(out)
    assert hdr.shape == (16, 24, 3)
    rgb = cv2.cvtColor(cv2.imread(str(png)), cv2.COLOR_BGR2RGB)
    assert np.array_equal(rgb, tonemap_8bit(hdr, 5000.0))
    stdout = capsys.readouterr().out
    assert "forward" in stdout and "write_hdr" in stdout


def test_merge_is_bitwise_reproducible(tmp_path, scene_root, weights_file):
    outs = [tmp_path / "a.pfm", tmp_path / "b.pfm"]
    for out in outs:
        assert main(["merge", *scene_args(scene_root / "scene_1"), "--weights", str(weights_file),
                     "--out", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_merge_with_two_inputs_is_a_usage_error(tmp_path, scene_root, weights_file):
    scene = scene_root / "scene_0"
    with pytest.raises(SystemExit) as exc:
        main(["merge", "--inputs", str(scene / "input_1.png"), str(scene / "input_2.png"),
              "--exposures", str(scene / "exposure.txt"), "--weights", str(weights_file),
              "--out", str(tmp_path / "out.pfm")])
    assert exc.value.code == 2
    assert not (tmp_path / "out.pfm").exists()


def test_merge_failure_names_the_stage(tmp_path, scene_root, capsys):
    bad = tmp_path / "bad.cenh"
    bad.write_bytes(b"CENH" + b"\x00" * 20)
    code = main(["merge", *scene_args(scene_root / "scene_0"), "--weights", str(bad),
                 "--out", str(tmp_path / "out.pfm")])
    assert code == 1
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("read_weights:")
    assert not (tmp_path / "out.pfm").exists()


# ─── train ──────────────────────────────────────────────────────────────────

def train_args(tmp_path, scene_root, tiny_yaml, name, *extra):
    return ["train", "--data", str(scene_root), "--out", str(tmp_path / f"{name}.cenh"),
            "--config", str(tiny_yaml), "--epochs", "2", "--seed", "3", "--patch-size", "8",
            "--stride", "8", "--batch-size", "4", "--checkpoint-every", "1", *extra]


def test_train_writes_weights_checkpoints_and_loss_log(tmp_path, scene_root, tiny_yaml, tiny_config):
    assert main(train_args(tmp_path, scene_root, tiny_yaml, "kd", "--alpha", "0.2")) == 0
    weights, config = load_weights(tmp_path / "kd.cenh")
    assert config == tiny_config
    assert (tmp_path / "kd.epoch0000.cenh").exists() and (tmp_path / "kd.epoch0001.cenh").exists()
    rows = (tmp_path / "kd.loss.csv").read_text().splitlines()
    assert rows[0] == "epoch,lr,train_loss"
    assert len(rows) == 3


def test_train_same_seed_gives_identical_loss_logs(tmp_path, scene_root, tiny_yaml):
    for name in ("a", "b"):
        assert main(train_args(tmp_path, scene_root, tiny_yaml, name, "--no-kd")) == 0
    assert (tmp_path / "a.loss.csv").read_bytes() == (tmp_path / "b.loss.csv").read_bytes()
    assert (tmp_path / "a.cenh").read_bytes() == (tmp_path / "b.cenh").read_bytes()


def test_train_without_kd_works_when_teacher_files_are_missing(tmp_path, scene_root, tiny_yaml):
    for scene in ("scene_0", "scene_1"):
        (scene_root / scene / "teacher.pfm").unlink()
    assert main(train_args(tmp_path, scene_root, tiny_yaml, "nokd", "--no-kd")) == 0
    assert main(train_args(tmp_path, scene_root, tiny_yaml, "kd")) == 1


def test_train_on_missing_dataset_exits_1(tmp_path, tiny_yaml, capsys):
    code = main(train_args(tmp_path, tmp_path / "nowhere", tiny_yaml, "x"))
    assert code == 1
    assert "load_dataset:" in capsys.readouterr().err


# ─── eval ───────────────────────────────────────────────────────────────────

def test_eval_prints_table_and_writes_csv(tmp_path, scene_root, weights_file, capsys):
    csv_path = tmp_path / "report.csv"
    assert main(["eval", "--data", str(scene_root), "--weights", str(weights_file), "--csv", str(csv_path)]) == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "scene,mu_psnr,psnr,mu_ssim,ssim"
    assert len(rows) == 1 + 2 + 1
    assert rows[-1].startswith("mean,")
    assert "scene_0" in capsys.readouterr().out


def test_eval_without_valid_scenes_exits_1(tmp_path, weights_file):
    (tmp_path / "empty").mkdir()
    assert main(["eval", "--data", str(tmp_path / "empty"), "--weights", str(weights_file)]) == 1


# ─── profile / bench ────────────────────────────────────────────────────────

def test_profile_default_config(capsys):
    assert main(["profile", "--height", "1060", "--width", "1900"]) == 0
    out = capsys.readouterr().out
    assert "total params: 280237" in out
    assert "total GMACs: 128.50" in out
    assert "128.78" in out


def test_profile_json_and_attention_report(capsys):
    assert main(["profile", "--height", "720", "--width", "1280", "--json", "--attention-report"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["cost"]["total_params"] == 280237
    assert {row["module"] for row in doc["attention"]} == {
        "scram_spatial", "scram_channel", "scram", "ahdrnet_attention"
    }


def test_profile_with_variant_flag(capsys):
    assert main(["profile", "--height", "64", "--width", "64", "--attention", "none", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["cost"]["attention"] == "none"
    assert not any(r["layer"].startswith("scram") for r in doc["cost"]["rows"])


def test_profile_odd_dimension_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["profile", "--height", "1061", "--width", "1900"])
    assert exc.value.code == 2


def test_bench_single_run(weights_file, capsys):
    assert main(["bench", "--height", "8", "--width", "8", "--runs", "1", "--warmup", "0",
                 "--weights", str(weights_file), "--json"]) == 0
    runtime = json.loads(capsys.readouterr().out)["cost"]["runtime"]
    assert runtime["runs"] == 1 and len(runtime["timings_s"]) == 1


def test_bench_random_weights_table(tiny_yaml, capsys):
    assert main(["bench", "--height", "8", "--width", "8", "--runs", "2", "--warmup", "1",
                 "--config", str(tiny_yaml)]) == 0
    out = capsys.readouterr().out
    assert "runtime: 8x8, 2 runs after 1 warm-up" in out


def test_profile_writes_cost_csv(tmp_path, capsys):
    out = tmp_path / "cost.csv"
    assert main(["profile", "--height", "1060", "--width", "1900", "--csv", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["layer", "output_shape", "applications", "params", "macs"]
    by_layer = {r[0]: r for r in rows[1:] if r}
    assert by_layer["conv_E1"][3] == "880"
    assert by_layer["total"][3] == "280237"
    assert round(int(by_layer["total"][4]) / 1e9, 2) == 128.50
    assert "runtime" not in by_layer
    assert "total params: 280237" in capsys.readouterr().out


def test_bench_writes_cost_csv_with_runtime(weights_file, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--height", "8", "--width", "8", "--runs", "2", "--warmup", "0",
                 "--weights", str(weights_file), "--csv", str(out)]) == 0
    rows = [r for r in csv.reader(out.read_text().splitlines()) if r]
    runtime = dict(rows[rows.index(["runtime", "value"]) + 1:])
    assert runtime["runs"] == "2" and runtime["warmup"] == "0"
    assert float(runtime["mean_s"]) > 0
