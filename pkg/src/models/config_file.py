"""
Flat key = value config files for models and training runs.
Model arguments may also name a preset from settings.model_presets.
"""

from pathlib import Path
from typing import Any, Dict, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.settings import ConfigurationError, settings
from src.models.vit import ModelConfig

SYNTHETIC = "SYNTHETIC"

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class TrainConfig(BaseModel):
    """One training run; `model` is a preset name or a model config path."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(gt=0)
    warmup_epochs: int = Field(default=0, ge=0)
    batch_size: int = Field(default=128, ge=1)
    base_lr: float = Field(default=5e-4, gt=0.0)
    weight_decay: float = Field(default=0.05, ge=0.0)
    seed: int = 42
    dataset: str = SYNTHETIC
    model: str = "vit-micro"
    output_dir: str = "results/runs/default"
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    grad_clip: float = Field(default=5.0, ge=0.0)
    scale_lr: bool = True
    augment: bool = True
    train_metrics: str = "running"
    timing: str = "none"
    eval_batch_size: int = Field(default=256, ge=1)
    limit_train: int = Field(default=0, ge=0)
    limit_val: int = Field(default=0, ge=0)
    synthetic_train: int = Field(default=2000, ge=1)
    synthetic_val: int = Field(default=500, ge=1)
    synthetic_snr: float = Field(default=4.0, gt=0.0)

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.warmup_epochs > self.epochs:
            raise ConfigurationError(f"warmup_epochs {self.warmup_epochs} exceeds epochs {self.epochs}")
        if self.train_metrics not in ("running", "eval"):
            raise ConfigurationError(f"train_metrics must be 'running' or 'eval', got {self.train_metrics!r}")
        if self.timing not in ("none", "wall"):
            raise ConfigurationError(f"timing must be 'none' or 'wall', got {self.timing!r}")
        return self

    @property
    def is_synthetic(self) -> bool:
        return self.dataset.strip().upper() == SYNTHETIC

    @property
    def peak_lr(self) -> float:
        """base_lr scaled linearly with batch/512 when scale_lr is on."""
        return self.base_lr * self.batch_size / 512.0 if self.scale_lr else self.base_lr


def parse_key_values(text: str, source: str = "<text>") -> Dict[str, str]:
    """`key = value` per line; `#` starts a comment; blank lines ignored."""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{number}: empty key")
        if key in values:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(cls: Type[ConfigT], fields: Dict[str, Any], source: str) -> ConfigT:
    """Validate fields into `cls`, reporting problems as ConfigurationError."""
    try:
        return cls(**fields)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<config>'}: {err['msg']}" for err in e.errors())
        raise ConfigurationError(f"{source}: {problems}")


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}")


def load_model_config(ref: str, overrides: Dict[str, Any] = None) -> ModelConfig:
    """Preset name or key=value file -> ModelConfig."""
    if settings.is_preset_available(ref):
        fields: Dict[str, Any] = dict(settings.model_presets[ref])
        source = f"preset {ref}"
    else:
        path = Path(ref)
        if not path.exists():
            raise ConfigurationError(
                f"Model config {ref!r} is neither a file nor a preset ({', '.join(settings.get_available_presets())})")
        fields = dict(parse_key_values(_read(path), str(path)))
        source = str(path)
    fields.update(overrides or {})
    return build_config(ModelConfig, fields, source)


def load_train_config(path: str) -> TrainConfig:
    return build_config(TrainConfig, parse_key_values(_read(Path(path)), path), path)


def render_config(cfg: BaseModel) -> str:
    """key = value text that loads back to an equal config."""
    lines = []
    for key, value in cfg.model_dump().items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
