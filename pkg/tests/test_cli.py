import json
from pathlib import Path

import pytest

from vippipe.cli import dispatch
from vippipe.frame_io import read_clip_dump

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    rc = dispatch(["synth", "--out", str(root), "--seed", "7", "--videos", "6",
                   "--classes", "3", "--length-min", "10", "--length-max", "14",
                   "--height", "24", "--width", "24"])
    assert rc == 0
    return root


def run_json(capsys, argv):
    rc = dispatch(argv)
    out = capsys.readouterr().out
    return rc, json.loads(out)


def test_no_command_is_usage_error():
    assert dispatch([]) == 2


def test_unknown_flag_is_usage_error(synth_dir):
    assert dispatch(["validate", str(synth_dir / "manifest.json"), "--frobnicate"]) == 2


def test_help_snapshot(capsys):
    with pytest.raises(SystemExit) as exc:
        from vippipe.cli import build_parser

        build_parser().parse_args(["--help"])
    assert exc.value.code == 0
    assert capsys.readouterr().out == (DATA / "help_main.txt").read_text()


def test_validate_ok_and_json(synth_dir, capsys):
    manifest = str(synth_dir / "manifest.json")
    assert dispatch(["validate", manifest, "--check-files"]) == 0
    capsys.readouterr()  # discard the human-readable line
    rc, payload = run_json(capsys, ["validate", manifest, "--json"])
    assert rc == 0 and payload == {"ok": True, "violations": []}


def test_validate_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"videos": [{"path": "v", "length": 2, "width": 8, "height": 8,
                                           "frames": [{"index": 5}]}]}))
    rc, payload = run_json(capsys, ["validate", str(bad), "--json"])
    assert rc == 1
    assert not payload["ok"]
    assert any("index out of range" in v["message"] for v in payload["violations"])


def test_validate_missing_file_is_data_error(capsys):
    assert dispatch(["validate", "/nonexistent/manifest.json"]) == 1


def test_plan_requires_manifest():
    assert dispatch(["plan"]) == 2


def test_plan_prints_one_line_per_clip(synth_dir, capsys):
    rc = dispatch(["plan", "--manifest", str(synth_dir / "manifest.json"),
                   "--clip-length", "4", "--num-clips", "1"])
    assert rc == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 6  # one clip per video
    for line in lines:
        clip = json.loads(line)
        assert clip == [0, 1, 2, 3]


def test_plan_json_document(synth_dir, capsys):
    rc, payload = run_json(capsys, ["plan", "--manifest", str(synth_dir / "manifest.json"),
                                    "--clip-length", "5", "--json"])
    assert rc == 0
    assert len(payload["plans"]) == 6
    assert all(len(c) == 5 for entry in payload["plans"] for c in entry["clips"])


def test_synth_deterministic_across_cli_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert dispatch(["synth", "--out", str(out), "--seed", "3", "--videos", "2",
                         "--classes", "2", "--length-min", "6", "--length-max", "8",
                         "--height", "16", "--width", "16"]) == 0
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def write_config(tmp_path, **kwargs) -> Path:
    base = {
        "clip_length": 6, "num_clips": -1, "clip_stride": 0, "clip_offset": 0,
        "resize_shape": [20, 20], "crop_shape": [16, 16], "crop_type": "Random",
        "final_shape": [16, 16], "subtract_mean": "",
        "batch_size": 4, "epoch": 3, "lr": 0.5, "labels": 3, "seed": 7,
        "num_workers": 1, "milestones": [40], "save_dir": str(tmp_path / "results"),
    }
    base.update(kwargs)
    path = tmp_path / "config.yaml"
    path.write_text("\n".join(f"{k}: {json.dumps(v)}" for k, v in base.items()) + "\n")
    return path


def test_dump_items_reload_bit_exact(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "dumped"
    rc, payload = run_json(capsys, ["dump", "--manifest", str(synth_dir / "manifest.json"),
                                    "--config", str(config), "--out", str(out), "--json"])
    assert rc == 0 and payload["items"] > 0
    sidecar = json.loads((out / "items.json").read_text())
    assert len(sidecar["items"]) == payload["items"]
    clip = read_clip_dump(out / "item_000000.vipc")
    assert clip.data.shape == (6, 16, 16, 3)
    first = sidecar["items"][0]
    assert first["indices"] == [0, 1, 2, 3, 4, 5]
    assert first["boxes"] and first["label"] in (0, 1, 2)


def test_dump_set_overrides(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "dumped2"
    rc, payload = run_json(capsys, [
        "dump", "--manifest", str(synth_dir / "manifest.json"), "--config", str(config),
        "--out", str(out), "--set", "clip_length=3", "--json",
    ])
    assert rc == 0
    clip = read_clip_dump(out / "item_000000.vipc")
    assert clip.length == 3


def test_preprocess_writes_sidecar(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "pre"
    rc, payload = run_json(capsys, ["preprocess", "--manifest", str(synth_dir / "manifest.json"),
                                    "--config", str(config), "--out", str(out), "--json"])
    assert rc == 0
    ann = json.loads((out / "annotations.json").read_text())
    assert len(ann["items"]) == payload["items"]
    files = sorted(out.glob("*.vipc"))
    assert len(files) == payload["items"]


def test_train_cli_override_lands_in_snapshot(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path, epoch=1)
    rc, payload = run_json(capsys, [
        "train", "--config", str(config),
        "--json_path", str(synth_dir / "manifest.json"),
        "--lr", "0.01", "--json",
    ])
    assert rc == 0
    run_dir = Path(payload["run_dir"])
    snapshot = (run_dir / "config.snapshot.yaml").read_text()
    assert "lr: 0.01" in snapshot
    assert (run_dir / "logs.jsonl").is_file()


def test_train_usage_error_writes_nothing(tmp_path):
    results = tmp_path / "results"
    assert dispatch(["train"]) == 2
    assert not results.exists()


def test_train_validation_error_writes_nothing(synth_dir, tmp_path):
    config = write_config(tmp_path, epoch=1, loss_type="MSE")  # wrong loss for the classifier
    rc = dispatch(["train", "--config", str(config),
                   "--json_path", str(synth_dir / "manifest.json")])
    assert rc == 1
    assert not (tmp_path / "results").exists()


def test_train_then_eval_checkpoint(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path, epoch=8, crop_type="Center")
    rc, payload = run_json(capsys, ["train", "--config", str(config),
                                    "--json_path", str(synth_dir / "manifest.json"), "--json"])
    assert rc == 0
    ckpt = Path(payload["run_dir"]) / "checkpoints" / "epoch_8.ckpt"
    rc, report = run_json(capsys, [
        "eval", "--config", str(config), "--pretrained", str(ckpt),
        "--json_path", str(synth_dir / "manifest.json"), "--load_type", "val", "--json",
    ])
    assert rc == 0
    assert report["split"] == "val" and 0.0 <= report["value"] <= 1.0


def test_eval_needs_config_or_metric():
    assert dispatch(["eval"]) == 2


# --- direct metric routes ------------------------------------------------


def test_eval_metric_iou(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"box_a": [0, 0, 10, 10], "box_b": [5, 0, 15, 10]}))
    rc, payload = run_json(capsys, ["eval", "--metric", "iou", "--pred", str(pred), "--json"])
    assert rc == 0
    assert abs(payload["value"] - 1.0 / 3.0) < 1e-12


def test_eval_metric_accuracy_inline(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"predictions": [0, 1, 2, 0], "labels": [0, 1, 1, 0]}))
    rc, payload = run_json(capsys, ["eval", "--metric", "accuracy", "--pred", str(pred), "--json"])
    assert rc == 0 and payload["value"] == 0.75


def test_eval_metric_ap_inline(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({
        "detections": [
            {"image_id": "img", "label": 0, "box": [0, 7, 10, 10], "confidence": 0.9},
            {"image_id": "img", "label": 0, "box": [0, 3, 10, 10], "confidence": 0.8},
        ],
        "ground_truth": {"img": [{"label": 0, "xmin": 0, "ymin": 0, "xmax": 10, "ymax": 10}]},
    }))
    rc, payload = run_json(capsys, ["eval", "--metric", "ap", "--pred", str(pred), "--json"])
    assert rc == 0 and payload["value"] == 0.5


def test_eval_metric_nss_cc_inline(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"predicted": [[1, 0], [0, 0]], "fixations": [[1, 0], [0, 0]]}))
    rc, payload = run_json(capsys, ["eval", "--metric", "nss", "--pred", str(pred), "--json"])
    assert rc == 0 and abs(payload["value"] - 1.5) < 1e-12

    pred.write_text(json.dumps({"predicted": [[1, 0], [0, 0]], "gt": [[0, 1], [0, 0]]}))
    rc, payload = run_json(capsys, ["eval", "--metric", "cc", "--pred", str(pred), "--json"])
    assert rc == 0 and abs(payload["value"] + 1.0 / 3.0) < 1e-12


def test_eval_metric_nss_constant_map_fails(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps({"predicted": [[1, 1], [1, 1]], "fixations": [[1, 0], [0, 0]]}))
    assert dispatch(["eval", "--metric", "nss", "--pred", str(pred)]) == 1


def test_eval_metric_accuracy_against_manifest(synth_dir, tmp_path, capsys):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    entries = [{"video": i, "label": v["action_label"]} for i, v in enumerate(manifest["videos"])]
    entries[0]["label"] = (entries[0]["label"] + 1) % 3  # one deliberate miss
    pred = tmp_path / "pred.json"
    pred.write_text(json.dumps(entries))
    rc, payload = run_json(capsys, ["eval", "--metric", "accuracy", "--pred", str(pred),
                                    "--gt", str(synth_dir / "manifest.json"), "--json"])
    assert rc == 0
    assert abs(payload["value"] - 5 / 6) < 1e-12


def test_report_renders_files(synth_dir, tmp_path, capsys):
    config = write_config(tmp_path, epoch=2)
    rc, payload = run_json(capsys, ["train", "--config", str(config),
                                    "--json_path", str(synth_dir / "manifest.json"), "--json"])
    assert rc == 0
    run_dir = payload["run_dir"]
    rc, paths = run_json(capsys, ["report", "--run", run_dir, "--json"])
    assert rc == 0
    for key in ("scalars_csv", "loss_curve", "lr_schedule"):
        assert Path(paths[key]).is_file()
    header = Path(paths["scalars_csv"]).read_text().splitlines()[0]
    assert header == "epoch,step,loss,lr,samples"
