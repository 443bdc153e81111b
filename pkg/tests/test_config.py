import math

import pytest
import yaml

from vippipe.config import (
    RunConfig,
    config_digest,
    config_to_dict,
    load_config,
    parse_overrides,
    save_config_snapshot,
)
from vippipe.engine import schedule_lr
from vippipe.errors import ConfigTypeError, ParseError, UnknownOverride

FULL_FILE = """\
# Preprocessing
clip_length:   16
clip_offset:   0
clip_stride:   0
crop_shape:    [112,112]
crop_type:     Random
final_shape:   [112,112]
num_clips:     -1
random_offset: 0
resize_shape:  [128,171]
subtract_mean: ''

# Experimental Setup
acc_metric:    Accuracy
batch_size:    3
debug:         0
epoch:         30
exp:           exp
gamma:         0.1
grad_max_norm: 10
labels:        51
load_type:     train
loss_type:     M_XENTROPY
lr:            0.0001
milestones:    [10,20]
momentum:      0.9
num_workers:   2
opt:           sgd
preprocess:    default
pretrained:    1
pseudo_batch_loop: 1
rerun:         1
save_dir:      './results'
seed:          999
weight_decay:  0.0005
"""


@pytest.fixture()
def full_config(tmp_path):
    p = tmp_path / "config.yaml"
    p.write_text(FULL_FILE)
    return p


def test_file_values_loaded(full_config):
    cfg = load_config(full_config)
    assert cfg.lr == 0.0001
    assert cfg.milestones == [10, 20]
    assert cfg.labels == 51
    assert cfg.seed == 999
    assert cfg.pretrained == 1
    assert cfg.clip.clip_length == 16
    assert cfg.clip.num_clips == -1
    assert cfg.transform.crop_shape == (112, 112)
    assert cfg.transform.resize_shape == (128, 171)
    assert cfg.transform.subtract_mean is None  # '' disables it
    assert cfg.transform.crop_type == "Random"


def test_cli_override_beats_file(full_config):
    cfg = load_config(full_config, ["lr=0.01"])
    assert cfg.lr == 0.01
    cfg = load_config(full_config, ["milestones=[5, 9]", "crop_type=Center", "epoch=2"])
    assert cfg.milestones == [5, 9]
    assert cfg.transform.crop_type == "Center"
    assert cfg.epoch == 2


def test_no_overrides_equals_file(full_config):
    assert load_config(full_config) == load_config(full_config, [])


def test_unknown_keys_land_in_extras(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("my_custom: 5\nnested_thing: {a: 1}\n")
    cfg = load_config(p)
    assert cfg.extras["my_custom"] == 5
    assert cfg.extras["nested_thing"] == {"a": 1}
    assert cfg.get("my_custom") == 5
    cfg = load_config(p, ["another=hello"])
    assert cfg.extras["another"] == "hello"


def test_defaults_without_file():
    cfg = load_config()
    assert cfg == RunConfig()


def test_env_seed_is_lowest_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("VIPPIPE_SEED", "123")
    assert load_config().seed == 123
    p = tmp_path / "c.yaml"
    p.write_text("seed: 7\n")
    assert load_config(p).seed == 7
    assert load_config(p, ["seed=9"]).seed == 9
    monkeypatch.setenv("VIPPIPE_SEED", "not-a-number")
    with pytest.raises(ConfigTypeError):
        load_config()


def test_malformed_override_rejected():
    with pytest.raises(UnknownOverride):
        parse_overrides(["lr"])
    with pytest.raises(UnknownOverride):
        parse_overrides(["=3"])


def test_type_errors_name_the_key(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("lr: fast\n")
    with pytest.raises(ConfigTypeError, match="lr"):
        load_config(p)
    p.write_text("milestones: [3, oops]\n")
    with pytest.raises(ConfigTypeError, match="milestones"):
        load_config(p)
    p.write_text("crop_shape: [0, 4]\n")
    with pytest.raises(ConfigTypeError, match="crop_shape"):
        load_config(p)


def test_invariant_violations(tmp_path):
    p = tmp_path / "c.yaml"
    for text, key in [
        ("batch_size: 0", "batch_size"),
        ("pseudo_batch_loop: 0", "pseudo_batch_loop"),
        ("epoch: 0", "epoch"),
        ("milestones: [10, 10]", "milestones"),
        ("gamma: -0.5", "gamma"),
        ("rerun: 2", "rerun"),
    ]:
        p.write_text(text + "\n")
        with pytest.raises(ConfigTypeError, match=key):
            load_config(p)


def test_parse_error_on_bad_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("a: [1, 2\n")
    with pytest.raises(ParseError):
        load_config(p)
    p.write_text("- just\n- a list\n")
    with pytest.raises(ParseError):
        load_config(p)


def test_snapshot_reproduces_effective_config(full_config, tmp_path):
    cfg = load_config(full_config, ["lr=0.05", "my_extra=7"])
    snap = tmp_path / "snapshot.yaml"
    save_config_snapshot(cfg, snap)
    again = load_config(snap)
    assert again == cfg
    assert config_digest(again) == config_digest(cfg)
    data = yaml.safe_load(snap.read_text())
    assert data["lr"] == 0.05
    assert data["my_extra"] == 7


def test_snapshot_roundtrip_from_defaults(tmp_path):
    cfg = load_config(None, ["crop_shape=[8,8]", "crop_type=Center", "rotation_degrees=90"])
    snap = save_config_snapshot(cfg, tmp_path / "s.yaml")
    assert load_config(snap) == cfg


def test_config_to_dict_flattens_groups():
    d = config_to_dict(RunConfig())
    assert d["clip_length"] == 16 and d["mode"] == "contiguous"
    assert "crop_shape" not in d  # unset optionals stay omitted
    assert d["random_offset"] == 0


def test_pretrained_values(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("pretrained: ./some/checkpoint.ckpt\n")
    assert load_config(p).pretrained == "./some/checkpoint.ckpt"
    p.write_text("pretrained: 2\n")
    with pytest.raises(ConfigTypeError, match="pretrained"):
        load_config(p)


# --- learning-rate schedule -----------------------------------------------


def test_schedule_lr_milestones():
    assert math.isclose(schedule_lr(1e-4, [10, 20], 0.1, 5), 1e-4)
    assert math.isclose(schedule_lr(1e-4, [10, 20], 0.1, 15), 1e-5)
    assert math.isclose(schedule_lr(1e-4, [10, 20], 0.1, 25), 1e-6)
    assert math.isclose(schedule_lr(1e-4, [10, 20], 0.1, 10), 1e-5)  # boundary counts
    assert schedule_lr(0.5, [], 0.1, 100) == 0.5
