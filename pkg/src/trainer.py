"""
Training and evaluation of ViT + MOHSA models.
Deterministic given the seed: shuffles, augmentation and stochastic depth all
draw from forks of one Rng, and every reduction runs in batch order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np

from config.settings import ConfigurationError, DataError, NumericError, settings
from src.core import NonFiniteError, Rng, backward
from src.data import Dataset, augment_batch, load_cifar10, synthetic_dataset
from src.models import (
    AdamW,
    ModelConfig,
    ModelWeights,
    TrainConfig,
    clip_grad_norm,
    expected_weight_shapes,
    forward,
    init_weights,
    load_model_config,
    loss,
    lr_at,
    predictions,
    render_config,
)
from src.models.config_file import build_config
from src.tools.accounting import count_params, estimate_flops, format_giga, format_millions
from src.utils.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from src.utils.file_manager import FileManager, MetricsRecord, RunPaths, file_manager
from src.utils.logger import RunLogger, performance_logger, run_logger

# Rng fork tags
_SHUFFLE, _AUGMENT, _DROP_PATH = 1000, 2000, 3000


class TrainResult(NamedTuple):
    records: List[MetricsRecord]
    paths: RunPaths
    best_epoch: int
    best_val_acc: float


def _batch_metrics(weights: ModelWeights, cfg: ModelConfig, images: np.ndarray, labels: np.ndarray) -> Tuple[float, int]:
    """(summed cross-entropy, correct count) of one batch, no graph kept."""
    logits = forward(images, weights, cfg)
    value = loss(logits, labels, 0.0).item() * len(labels)
    return value, int(np.sum(predictions(logits) == labels))


def evaluate_dataset(weights: ModelWeights, cfg: ModelConfig, dataset: Dataset, batch_size: int = 256,
                     max_workers: Optional[int] = None) -> Tuple[float, float]:
    """Mean cross-entropy and top-1 accuracy; weights are only read.

    Batches run on a thread pool and their sums are added in batch order, so
    the result does not depend on the worker count.
    """
    if len(dataset) == 0:
        raise DataError(f"Cannot evaluate on an empty dataset ({dataset.name or 'unnamed'})")
    if dataset.num_classes != cfg.num_classes:
        raise ConfigurationError(f"Dataset has {dataset.num_classes} classes, model predicts {cfg.num_classes}")
    frozen = weights.detached()
    batches = list(dataset.batches(batch_size))
    workers = max(1, min(max_workers or settings.max_workers, len(batches)))

    if workers == 1:
        results = [_batch_metrics(frozen, cfg, x, y) for x, y in batches]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _batch_metrics(frozen, cfg, *b), batches))

    total_loss = 0.0
    correct = 0
    for value, hits in results:
        total_loss += value
        correct += hits
    return total_loss / len(dataset), correct / len(dataset)


def restore_weights(ckpt: Checkpoint, cfg: ModelConfig, requires_grad: bool = False) -> ModelWeights:
    """Checkpoint tensors as model weights, after checking every name and shape."""
    expected = expected_weight_shapes(cfg)
    actual = {name: tuple(a.shape) for name, a in ckpt.tensors.items()}
    if actual != expected:
        wrong = sorted(n for n in set(expected) | set(actual) if expected.get(n) != actual.get(n))
        details = ", ".join(f"{n}: have {actual.get(n)}, need {expected.get(n)}" for n in wrong[:6])
        raise CheckpointError(f"Checkpoint does not fit the model config ({len(wrong)} mismatches): {details}")
    return ModelWeights.from_arrays(ckpt.tensors, requires_grad=requires_grad)


class Trainer:
    """Runs one TrainConfig end to end."""

    def __init__(self, train_cfg: TrainConfig, model_cfg: Optional[ModelConfig] = None,
                 train_data: Optional[Dataset] = None, val_data: Optional[Dataset] = None,
                 files: Optional[FileManager] = None, logger: Optional[RunLogger] = None):
        self.train_cfg = train_cfg
        self.model_cfg = model_cfg or load_model_config(train_cfg.model)
        self.files = files or file_manager
        self.logger = logger or run_logger
        self.train_data, self.val_data = self._datasets(train_data, val_data)

    def _datasets(self, train_data: Optional[Dataset], val_data: Optional[Dataset]) -> Tuple[Dataset, Dataset]:
        cfg, mc = self.train_cfg, self.model_cfg
        if not cfg.is_synthetic and (train_data is None or val_data is None):
            if mc.image_size != 32 or mc.num_classes != 10:
                raise ConfigurationError(
                    f"CIFAR-10 needs image_size 32 and 10 classes, model has {mc.image_size} / {mc.num_classes}")
        if train_data is None:
            train_data = (synthetic_dataset(cfg.seed, cfg.synthetic_train, mc.num_classes, mc.image_size,
                                            cfg.synthetic_snr)
                          if cfg.is_synthetic else load_cifar10(cfg.dataset, "train"))
        if val_data is None:
            val_data = (synthetic_dataset(cfg.seed + 1, cfg.synthetic_val, mc.num_classes, mc.image_size,
                                          cfg.synthetic_snr)
                        if cfg.is_synthetic else load_cifar10(cfg.dataset, "test"))
        train_data, val_data = train_data.subset(cfg.limit_train), val_data.subset(cfg.limit_val)
        if len(train_data) == 0 or len(val_data) == 0:
            raise DataError(f"Empty split: {len(train_data)} train / {len(val_data)} val samples")
        return train_data, val_data

    def _check_param_count(self, weights: ModelWeights) -> int:
        measured, expected = weights.num_params(), count_params(self.model_cfg)
        if measured != expected:
            raise NumericError(f"Instantiated model has {measured} parameters, accounting expects {expected}")
        self.logger.log_decision(
            "trainer", f"params={measured} ({format_millions(measured)})",
            f"MACs at {self.model_cfg.image_size}px: {format_giga(estimate_flops(self.model_cfg))}, "
            f"schedule {self.model_cfg.schedule.format()}")
        return measured

    def _checkpoint(self, weights: ModelWeights, epoch: int, **extra) -> Checkpoint:
        return Checkpoint(
            tensors={name: a.copy() for name, a in weights.arrays().items()},
            model=self.model_cfg.model_dump(),
            train=self.train_cfg.model_dump(),
            epoch=epoch,
            extra=extra,
        )

    def _evaluate(self, weights: ModelWeights, dataset: Dataset) -> Tuple[float, float]:
        return evaluate_dataset(weights, self.model_cfg, dataset, self.train_cfg.eval_batch_size)

    def _train_epoch(self, weights: ModelWeights, optimizer: AdamW, epoch: int, step: int,
                     steps_per_epoch: int, total_steps: int, root: Rng) -> Tuple[float, float, float, int]:
        cfg, mc = self.train_cfg, self.model_cfg
        order = root.fork(_SHUFFLE + epoch).permutation(len(self.train_data))
        augment_rng = root.fork(_AUGMENT + epoch)
        drop_rng = root.fork(_DROP_PATH + epoch) if mc.drop_path_rate > 0 else None
        warmup_steps = cfg.warmup_epochs * steps_per_epoch

        total_loss, correct, lr = 0.0, 0, 0.0
        for batch_index, (images, labels) in enumerate(self.train_data.batches(cfg.batch_size, order)):
            lr = lr_at(step, total_steps, warmup_steps, cfg.peak_lr)
            if cfg.augment:
                images = augment_batch(images, augment_rng)
            try:
                weights.zero_grad()
                logits = forward(images, weights, mc, rng=drop_rng)
                value = loss(logits, labels, cfg.label_smoothing)
                backward(value)
                norm = clip_grad_norm(weights.grads(), cfg.grad_clip)
                if not math.isfinite(norm):
                    raise NonFiniteError(f"gradient norm is {norm}")
            except NonFiniteError as e:
                self.logger.log_error("trainer", str(e), f"step {step + 1}, epoch {epoch}, batch {batch_index + 1}")
                raise NonFiniteError(
                    f"Training diverged at step {step + 1} (epoch {epoch}, batch {batch_index + 1}): {e}") from e
            optimizer.step(lr)

            total_loss += value.item() * len(labels)
            correct += int(np.sum(predictions(logits) == labels))
            step += 1
        n = len(self.train_data)
        return total_loss / n, correct / n, lr, step

    def train(self) -> TrainResult:
        cfg, mc = self.train_cfg, self.model_cfg
        paths = self.files.prepare_run(cfg.output_dir)
        self.files.save_text(paths.root / "model.cfg", render_config(mc))
        self.files.save_text(paths.root / "train.cfg", render_config(cfg))

        self.logger.log_action("trainer", "Run started",
                               f"{len(self.train_data)} train / {len(self.val_data)} val samples, "
                               f"policy {mc.policy!r}, targets {mc.targets}, seed {cfg.seed}")
        weights = init_weights(mc, cfg.seed)
        params = self._check_param_count(weights)
        optimizer = AdamW(weights, weight_decay=cfg.weight_decay)

        root = Rng(cfg.seed)
        steps_per_epoch = math.ceil(len(self.train_data) / cfg.batch_size)
        total_steps = cfg.epochs * steps_per_epoch
        self.logger.log_decision("trainer", f"peak lr {cfg.peak_lr:.3e}",
                                 f"{total_steps} steps, {cfg.warmup_epochs * steps_per_epoch} warmup")
        if cfg.warmup_epochs == cfg.epochs:
            self.logger.log_decision("trainer", "no cosine decay", "warmup covers every epoch, lr ends near its peak")

        records: List[MetricsRecord] = []
        best_epoch, best_acc, step = 0, -1.0, 0
        for epoch in range(1, cfg.epochs + 1):
            performance_logger.start_timer("train_epoch")
            train_loss, train_acc, lr, step = self._train_epoch(
                weights, optimizer, epoch, step, steps_per_epoch, total_steps, root)
            if cfg.train_metrics == "eval":
                train_loss, train_acc = self._evaluate(weights, self.train_data)
            train_seconds = performance_logger.end_timer("train_epoch")

            performance_logger.start_timer("evaluate")
            val_loss, val_acc = self._evaluate(weights, self.val_data)
            val_seconds = performance_logger.end_timer("evaluate")

            wall = cfg.timing == "wall"
            epoch_records = [
                MetricsRecord(epoch, "train", train_loss, train_acc, lr, train_seconds if wall else 0.0),
                MetricsRecord(epoch, "val", val_loss, val_acc, lr, val_seconds if wall else 0.0),
            ]
            records.extend(epoch_records)
            for r in epoch_records:
                self.logger.log_metrics("trainer", {**r._asdict(), "measured_seconds":
                                                    train_seconds if r.split == "train" else val_seconds})
            self.files.write_metrics(paths.metrics_csv, records)

            if val_acc > best_acc:
                best_epoch, best_acc = epoch, val_acc
                save_checkpoint(paths.best_checkpoint, self._checkpoint(weights, epoch, val_acc=val_acc))
            save_checkpoint(paths.last_checkpoint, self._checkpoint(weights, epoch))
            self.logger.log_stage_completion(f"epoch {epoch}", train_seconds + val_seconds, "success",
                                             f"train acc {train_acc:.4f}, val acc {val_acc:.4f}")

        self.files.save_json(paths.summary, {
            "model": mc.model_dump(),
            "train": cfg.model_dump(),
            "params": params,
            "macs": estimate_flops(mc),
            "schedule": list(mc.schedule),
            "best_epoch": best_epoch,
            "best_val_acc": best_acc,
            "final": [r._asdict() for r in records[-2:]],
        })
        self.files.save_json(paths.performance, performance_logger.get_performance_summary())
        return TrainResult(records, paths, best_epoch, best_acc)


def train(train_cfg: TrainConfig, model_cfg: Optional[ModelConfig] = None) -> TrainResult:
    return Trainer(train_cfg, model_cfg).train()


def resolve_dataset(spec: Union[str, Dataset], model_cfg: ModelConfig, train_echo: Optional[dict] = None) -> Dataset:
    """A Dataset, "SYNTHETIC" (the run's validation draw), or a CIFAR-10 directory (test split)."""
    if isinstance(spec, Dataset):
        return spec
    if spec.strip().upper() == "SYNTHETIC":
        echo = build_config(TrainConfig, train_echo or {"epochs": 1}, "checkpoint train echo")
        return synthetic_dataset(echo.seed + 1, echo.synthetic_val, model_cfg.num_classes,
                                 model_cfg.image_size, echo.synthetic_snr).subset(echo.limit_val)
    return load_cifar10(spec, "test")


def evaluate(checkpoint, dataset: Union[str, Dataset], batch_size: int = 256) -> MetricsRecord:
    """Load a checkpoint and score it on `dataset`."""
    performance_logger.start_timer("evaluate_checkpoint")
    ckpt = load_checkpoint(checkpoint)
    model_cfg = build_config(ModelConfig, ckpt.model, f"{checkpoint} model echo")
    weights = restore_weights(ckpt, model_cfg)
    data = resolve_dataset(dataset, model_cfg, ckpt.train)
    mean_loss, acc = evaluate_dataset(weights, model_cfg, data, batch_size)
    seconds = performance_logger.end_timer("evaluate_checkpoint")
    run_logger.log_metrics("evaluate", {"checkpoint": str(checkpoint), "epoch": ckpt.epoch,
                                        "loss": mean_loss, "acc": acc, "seconds": seconds})
    return MetricsRecord(ckpt.epoch, "val", mean_loss, acc, 0.0, 0.0)
