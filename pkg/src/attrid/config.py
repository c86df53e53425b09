"""Flat key-value experiment configs with dotted section keys."""

from __future__ import annotations

from .data import GenConfig
from .losses import LossWeights
from .trainer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    with open(path) as f:
        return parse_config_text(f.read())


def _get(cfg, key, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc))


def _int_tuple(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _bool(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected boolean, got {s!r}")


def gen_config_from(cfg: dict) -> GenConfig:
    try:
        return GenConfig(
            n_identities=_get(cfg, "gen.n_identities", int, 100),
            images_per_id_per_camera=_get(cfg, "gen.images_per_id_per_camera", int, 4),
            n_cameras=_get(cfg, "gen.n_cameras", int, 2),
            m=_get(cfg, "gen.m", int, 12),
            input_dim=_get(cfg, "gen.input_dim", int, 48),
            camera_noise=_get(cfg, "gen.camera_noise", float, 0.6),
            sample_noise=_get(cfg, "gen.sample_noise", float, 0.3),
            attribute_offset=_get(cfg, "gen.attribute_offset", float, 1.5),
            n_attribute_profiles=_get(cfg, "gen.n_attribute_profiles", int, 16),
            sigma_d=_get(cfg, "gen.sigma_d", float, 0.25),
            shift_noise=_get(cfg, "gen.shift_noise", float, 0.5),
            seed=_get(cfg, "gen.seed", int, 1),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("gen.*", str(exc))


def train_config_from(cfg: dict, seed: int | None = None, mode: str | None = None) -> TrainConfig:
    try:
        return TrainConfig(
            n_bs=_get(cfg, "train.n_bs", int, 64),
            id_pretrain_iters=_get(cfg, "train.id_pretrain_iters", int, 800),
            joint_iters=_get(cfg, "train.joint_iters", int, 5000),
            adapt_iters=_get(cfg, "train.adapt_iters", int, 8000),
            weights=LossWeights(
                lambda1=_get(cfg, "train.lambda1", float, 10.0),
                lambda2=_get(cfg, "train.lambda2", float, 10.0),
            ),
            lr=_get(cfg, "train.lr", float, 0.005),
            beta1=_get(cfg, "train.beta1", float, 0.5),
            beta2=_get(cfg, "train.beta2", float, 0.999),
            epsilon=_get(cfg, "train.epsilon", float, 1e-8),
            seed=seed if seed is not None else _get(cfg, "train.seed", int, 0),
            mode=mode if mode is not None else _get(cfg, "train.mode", str, "tj-aidl"),
            frozen_soft_labels=_get(cfg, "train.frozen_soft_labels", _bool, False),
            mse_reduction=_get(cfg, "train.mse_reduction", str, "mean"),
            backbone_dims=_get(cfg, "model.backbone_dims", _int_tuple, (16, 8)),
            iia_encoder_dims=_get(cfg, "model.iia_encoder_dims", _int_tuple, (12,)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("train.*", str(exc))
