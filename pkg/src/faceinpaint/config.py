"""Training configuration and the flat key=value config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .discriminator import DiscriminatorConfig
from .generator import GeneratorConfig
from .landmark_net import LandmarkNetConfig
from .losses import LossWeights

ENV_PREFIX = "FACEINPAINT_"


@dataclass(frozen=True)
class TrainConfig:
    image_size: int = 256
    channel_divisor: int = 1
    beta1: float = 0.0
    beta2: float = 0.9
    lr_generator: float = 1e-4
    lr_discriminator: float = 1e-5
    lr_landmark: float = 1e-4
    batch_landmark: int = 16
    batch_inpaint: int = 4
    max_steps: int = 10000
    seed: int = 0
    use_lsta: bool = True
    use_landmark_channel: bool = True
    feature_extractor: str = "vgg"  # "vgg" | "identity"
    weight_perceptual: float = 0.1
    weight_style: float = 250.0
    weight_tv: float = 0.1
    weight_adversarial: float = 0.01
    mask_dir: str = ""
    mask_mode: str = "random"  # "random" | "center"
    log_every: int = 50
    checkpoint_every: int = 0  # 0: final checkpoint only

    def __post_init__(self):
        for name in ("lr_generator", "lr_discriminator", "lr_landmark"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.batch_landmark < 1 or self.batch_inpaint < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.image_size % 32:
            raise ValueError("image_size must be divisible by 32")
        if self.feature_extractor not in ("vgg", "identity"):
            raise ValueError(f"unknown feature extractor {self.feature_extractor!r}")
        if self.mask_mode not in ("random", "center"):
            raise ValueError(f"unknown mask mode {self.mask_mode!r}")

    def landmark_net_config(self) -> LandmarkNetConfig:
        return LandmarkNetConfig(input_size=self.image_size).scaled(self.channel_divisor)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            use_lsta=self.use_lsta,
            use_landmark_channel=self.use_landmark_channel,
            input_size=self.image_size,
        ).scaled(self.channel_divisor)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            use_landmark_channel=self.use_landmark_channel,
            input_size=self.image_size,
        ).scaled(self.channel_divisor)

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            perceptual=self.weight_perceptual,
            style=self.weight_style,
            tv=self.weight_tv,
            adversarial=self.weight_adversarial,
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def desk_profile(**overrides) -> TrainConfig:
    """64x64 profile with quartered channel widths, for smokes and tests.

    Block structure is identical to the full-scale profile. The optimizer
    settings differ from the full-scale defaults: plain momentum-free Adam
    converges far too slowly for the tiny step budgets the smokes allow, so
    the desk profile uses standard Adam moments and higher learning rates.
    """
    base = dict(
        image_size=64,
        channel_divisor=4,
        beta1=0.9,
        beta2=0.999,
        lr_generator=1e-3,
        lr_discriminator=1e-4,
        lr_landmark=3e-3,
        feature_extractor="identity",
        log_every=10,
    )
    base.update(overrides)
    return TrainConfig(**base)


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"invalid boolean for {field.name}: {raw!r}")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines (# comments allowed) into raw strings."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        values[key.strip()] = raw.strip()
    return values


def load_train_config(
    path: str | Path | None = None, env: dict[str, str] | None = None, **overrides
) -> TrainConfig:
    """Build a TrainConfig from a config file, FACEINPAINT_* environment
    overrides, and keyword overrides, in increasing precedence."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values: dict = {}
    if path is not None:
        raw = parse_config_text(Path(path).read_text())
        unknown = set(raw) - set(fields)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: _coerce(fields[k], v) for k, v in raw.items()})
    if env:
        for key, raw in env.items():
            if not key.startswith(ENV_PREFIX):
                continue
            name = key[len(ENV_PREFIX):].lower()
            if name in fields:
                values[name] = _coerce(fields[name], raw)
    values.update(overrides)
    return TrainConfig(**values)
