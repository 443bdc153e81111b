"""Training and evaluation engine: pseudo-batch SGD, checkpoints, scalar logs.

Runs are deterministic functions of (config, manifest contents): item
processing is seeded per item, batch order is a seeded permutation per epoch,
and the optimizer walks accumulated gradients in a fixed order. Scalar
records go to an append-only ``logs.jsonl``; Tensorboard is intentionally not
a dependency.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import RunConfig, config_digest, save_config_snapshot
from .dataset import (
    FEATURE_DIM,
    epoch_param_seed,
    eval_param_seed,
    item_example,
    parallel_map_ordered,
    plan_dataset,
)
from .errors import (
    ConfigTypeError,
    DigestMismatchWarning,
    EmptyBatch,
    MissingWeights,
    RunDirectoryExists,
    ShapeMismatch,
    UnknownMetric,
)
from .manifest import DatasetManifest
from .metrics import accuracy
from .micro_models import (
    LINEAR_REGRESSOR,
    LOGISTIC_CLIP_CLASSIFIER,
    MicroModel,
    build_model,
)

DEFAULT_REGISTRY_DIR = "./weights_registry"
_MODEL_LOSS = {LINEAR_REGRESSOR: "MSE", LOGISTIC_CLIP_CLASSIFIER: "M_XENTROPY"}
ENGINE_METRICS = ("Accuracy",)


def schedule_lr(base_lr: float, milestones: Sequence[int], gamma: float, epoch: int) -> float:
    """base_lr * gamma^(number of milestones <= epoch)."""
    passed = sum(1 for m in milestones if m <= epoch)
    return base_lr * gamma**passed


def grad_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so the global L2 norm is at most max_norm.

    A max_norm of 0 disables clipping. Returns the pre-clip norm.
    """
    norm = grad_norm(grads)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def sgd_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    momentum_buffers: dict[str, np.ndarray],
    *,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> None:
    """Classic SGD with momentum; weight decay is added to the gradient."""
    for name, p in params.items():
        g = grads[name] + weight_decay * p
        buf = momentum_buffers.get(name)
        if buf is None:
            buf = np.zeros_like(p)
            momentum_buffers[name] = buf
        buf *= momentum
        buf += g
        p -= lr * buf


def accumulate_step(
    model: MicroModel,
    mini_batches: Sequence[Sequence[tuple[Any, Any]]],
    momentum_buffers: dict[str, np.ndarray],
    cfg: RunConfig,
    *,
    lr: float | None = None,
) -> float:
    """One optimizer step over gradients accumulated across mini-batches.

    Per-sample gradients are summed over every mini-batch and normalized by
    the total sample count, so a pseudo-batch is exactly equivalent to one
    large batch, whatever the mini-batch sizes or per-sample input shapes.
    Clipping happens once, on the accumulated gradient. Returns the mean loss.
    """
    sums = {name: np.zeros_like(p) for name, p in model.params.items()}
    total = 0
    loss_sum = 0.0
    for batch in mini_batches:
        for x, y in batch:
            loss, grads = model.per_sample_loss_grad(x, y)
            for name in sums:
                sums[name] += grads[name]
            loss_sum += loss
            total += 1
    if total == 0:
        raise EmptyBatch("accumulate_step received no samples")
    for name in sums:
        sums[name] /= total
    clip_gradients(sums, cfg.grad_max_norm)
    sgd_update(
        model.params,
        sums,
        momentum_buffers,
        lr=cfg.lr if lr is None else lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
    )
    return loss_sum / total


# ---------------------------------------------------------------------------
# Checkpoints: u32le header length, JSON header, little-endian float64 payload


@dataclass
class Checkpoint:
    model_name: str
    params: dict[str, np.ndarray]
    momentum_buffers: dict[str, np.ndarray]
    epoch: int
    seed: int
    config_digest: str


def params_digest(params: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    return h.hexdigest()


def save_checkpoint(ck: Checkpoint, path: Path | str) -> Path:
    path = Path(path)
    header = {
        "version": 1,
        "model": ck.model_name,
        "epoch": ck.epoch,
        "seed": ck.seed,
        "config_digest": ck.config_digest,
        "params": [{"name": n, "shape": list(a.shape)} for n, a in ck.params.items()],
        "opt": [{"name": n, "shape": list(a.shape)} for n, a in ck.momentum_buffers.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in list(ck.params.values()) + list(ck.momentum_buffers.values())
    )
    path.write_bytes(struct.pack("<I", len(header_bytes)) + header_bytes + payload)
    return path


def load_checkpoint(path: Path | str) -> Checkpoint:
    buf = Path(path).read_bytes()
    (header_len,) = struct.unpack_from("<I", buf, 0)
    header = json.loads(buf[4 : 4 + header_len].decode("utf-8"))
    offset = 4 + header_len

    def take(entries: list[dict]) -> dict[str, np.ndarray]:
        nonlocal offset
        out: dict[str, np.ndarray] = {}
        for entry in entries:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(buf, dtype="<f8", count=count, offset=offset)
            offset += count * 8
            out[entry["name"]] = arr.reshape(shape).astype(np.float64)
        return out

    params = take(header["params"])
    buffers = take(header["opt"])
    return Checkpoint(
        model_name=header["model"],
        params=params,
        momentum_buffers=buffers,
        epoch=int(header["epoch"]),
        seed=int(header["seed"]),
        config_digest=header["config_digest"],
    )


@dataclass(frozen=True)
class PretrainedSpec:
    """How to initialize weights: fresh, canonical registry file, or checkpoint."""

    kind: str  # "fresh" | "canonical" | "checkpoint"
    path: str | None = None

    @classmethod
    def from_config_value(cls, value: int | str) -> "PretrainedSpec":
        if value == 0:
            return cls("fresh")
        if value == 1:
            return cls("canonical")
        if isinstance(value, str) and value:
            return cls("checkpoint", path=value)
        raise ConfigTypeError(f"pretrained: expected 0, 1, or a path, got {value!r}")


def _load_params_into(model: MicroModel, loaded: dict[str, np.ndarray]) -> None:
    for name, p in model.params.items():
        if name not in loaded:
            raise ShapeMismatch(f"checkpoint lacks parameter {name!r}")
        if loaded[name].shape != p.shape:
            raise ShapeMismatch(
                f"parameter {name!r}: checkpoint shape {loaded[name].shape} != model shape {p.shape}"
            )
    for name in model.params:
        model.params[name] = loaded[name].copy()


def resolve_pretrained(
    spec: PretrainedSpec,
    model_name: str,
    seed: int,
    *,
    n_features: int = FEATURE_DIM,
    n_classes: int = 1,
    registry_dir: Path | str | None = None,
    expected_digest: str | None = None,
) -> tuple[MicroModel, dict[str, np.ndarray], int]:
    """Build and initialize a model; returns (model, momentum buffers, start epoch)."""
    model = build_model(model_name, n_features=n_features, n_classes=n_classes)
    if spec.kind == "fresh":
        model.init_params(seed)
        return model, {}, 0
    if spec.kind == "canonical":
        path = Path(registry_dir or DEFAULT_REGISTRY_DIR) / f"{model_name}.ckpt"
        if not path.is_file():
            raise MissingWeights(f"no canonical weights for {model_name!r} at {path}")
        ck = load_checkpoint(path)
        _load_params_into(model, ck.params)
        return model, {}, 0
    path = Path(spec.path or "")
    if not path.is_file():
        raise MissingWeights(f"checkpoint {path} does not exist")
    ck = load_checkpoint(path)
    _load_params_into(model, ck.params)
    if expected_digest is not None and ck.config_digest != expected_digest:
        warnings.warn(
            f"checkpoint config digest {ck.config_digest[:12]} != current {expected_digest[:12]}",
            DigestMismatchWarning,
        )
    buffers = {n: a.copy() for n, a in ck.momentum_buffers.items()}
    return model, buffers, ck.epoch


# ---------------------------------------------------------------------------
# Run directories and loops


def create_run_dir(cfg: RunConfig) -> Path:
    base = Path(cfg.save_dir) / cfg.exp
    if cfg.rerun:
        while True:
            name = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
            run_dir = base / name
            if not run_dir.exists():
                break
        run_dir.mkdir(parents=True)
    else:
        run_dir = base / "run"
        if run_dir.exists():
            raise RunDirectoryExists(
                f"{run_dir} already exists and rerun=0; resume from its checkpoint instead"
            )
        run_dir.mkdir(parents=True)
    return run_dir


def _chunk(seq: list, size: int) -> list[list]:
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def _build_model_for(cfg: RunConfig) -> tuple[MicroModel, dict[str, np.ndarray], int, str]:
    expected_loss = _MODEL_LOSS.get(cfg.model)
    if expected_loss is not None and cfg.loss_type != expected_loss:
        raise ConfigTypeError(f"loss_type: model {cfg.model!r} trains with {expected_loss}, got {cfg.loss_type}")
    digest = config_digest(cfg)
    model, buffers, start_epoch = resolve_pretrained(
        PretrainedSpec.from_config_value(cfg.pretrained),
        cfg.model,
        cfg.seed,
        n_features=FEATURE_DIM,
        n_classes=cfg.labels,
        registry_dir=cfg.extras.get("weights_registry"),
        expected_digest=digest,
    )
    return model, buffers, start_epoch, digest


def train(cfg: RunConfig, manifest: DatasetManifest) -> Path:
    """Run the full training loop; returns the run directory.

    Every epoch: plan clips, load and transform them with per-item seeds,
    batch in a seeded shuffle order, and take one optimizer step per
    ``pseudo_batch_loop`` mini-batches. Scalars land in logs.jsonl and a
    checkpoint is written per epoch.
    """
    if cfg.load_type != "train":
        raise ConfigTypeError(f"load_type: training requires 'train', got {cfg.load_type!r}")
    model, buffers, start_epoch, digest = _build_model_for(cfg)

    items = plan_dataset(manifest, cfg.clip, "train", cfg.seed)
    if not items:
        raise EmptyBatch("no training clips planned; check the manifest split")

    run_dir = create_run_dir(cfg)
    save_config_snapshot(cfg, run_dir / "config.snapshot.yaml")
    (run_dir / "checkpoints").mkdir()
    log_path = run_dir / "logs.jsonl"

    global_step = 0
    with log_path.open("w", encoding="utf-8") as log:
        for epoch in range(start_epoch, cfg.epoch):
            lr = schedule_lr(cfg.lr, cfg.milestones, cfg.gamma, epoch)
            param_seed = epoch_param_seed(cfg.seed, epoch)
            examples = parallel_map_ordered(
                lambda item: item_example(manifest, item, cfg.transform, param_seed),
                items,
                cfg.num_workers,
            )
            order = np.random.default_rng(
                np.random.SeedSequence([cfg.seed, epoch])
            ).permutation(len(examples))
            shuffled = [examples[i] for i in order]
            mini_batches = _chunk(shuffled, cfg.batch_size)
            groups = _chunk(mini_batches, cfg.pseudo_batch_loop)
            for step_index, group in enumerate(groups):
                if cfg.debug and step_index >= 2:
                    break
                loss = accumulate_step(model, group, buffers, cfg, lr=lr)
                record = {
                    "epoch": epoch,
                    "step": global_step,
                    "loss": loss,
                    "lr": lr,
                    "samples": sum(len(b) for b in group),
                }
                log.write(json.dumps(record, sort_keys=True) + "\n")
                global_step += 1
            save_checkpoint(
                Checkpoint(
                    model_name=cfg.model,
                    params=model.params,
                    momentum_buffers=buffers,
                    epoch=epoch + 1,
                    seed=cfg.seed,
                    config_digest=digest,
                ),
                run_dir / "checkpoints" / f"epoch_{epoch + 1}.ckpt",
            )
    return run_dir


def evaluate(
    cfg: RunConfig,
    manifest: DatasetManifest,
    weights: PretrainedSpec | None = None,
    write_dir: Path | str | None = None,
) -> dict[str, Any]:
    """Compute the configured metric over the split named by load_type."""
    if cfg.acc_metric not in ENGINE_METRICS:
        raise UnknownMetric(
            f"unknown metric {cfg.acc_metric!r} for model evaluation; "
            f"engine metrics: {list(ENGINE_METRICS)} (box/saliency metrics run via 'vippipe eval --metric')"
        )
    digest = config_digest(cfg)
    spec = weights or PretrainedSpec.from_config_value(cfg.pretrained)
    model, _, _ = resolve_pretrained(
        spec,
        cfg.model,
        cfg.seed,
        n_features=FEATURE_DIM,
        n_classes=cfg.labels,
        registry_dir=cfg.extras.get("weights_registry"),
        expected_digest=digest,
    )
    items = plan_dataset(manifest, cfg.clip, cfg.load_type, cfg.seed)
    if not items:
        raise EmptyBatch(f"no clips planned for split {cfg.load_type!r}")
    param_seed = eval_param_seed(cfg.seed)
    examples = parallel_map_ordered(
        lambda item: item_example(manifest, item, cfg.transform, param_seed),
        items,
        cfg.num_workers,
    )
    predictions = [model.predict(x) for x, _ in examples]
    labels = [y for _, y in examples]
    value = accuracy(predictions, labels)
    report = {
        "metric": cfg.acc_metric,
        "value": value,
        "split": cfg.load_type,
        "n_items": len(examples),
        "model": cfg.model,
    }
    if write_dir is not None:
        out = Path(write_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return report
