"""Two-branch MLP model with an identity-inferred-attribute encoder-decoder."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import InvalidShapeError, SeededRng, Tensor

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    input_dim: int
    num_identities: int
    num_attributes: int
    backbone_dims: tuple = (128, 64)
    iia_encoder_dims: tuple = (64, 32)  # hidden dims; the latent layer of width m is appended
    shared_backbone: bool = False       # joint-supervision baseline: one backbone, two heads

    def __post_init__(self):
        self.backbone_dims = tuple(int(d) for d in self.backbone_dims)
        self.iia_encoder_dims = tuple(int(d) for d in self.iia_encoder_dims)
        for name in ("input_dim", "num_identities", "num_attributes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"ModelConfig.{name} must be positive")
        if not self.backbone_dims:
            raise ValueError("ModelConfig.backbone_dims must be nonempty")

    @property
    def feature_dim(self) -> int:
        return self.backbone_dims[-1]

    def encoder_layer_dims(self):
        # feature_dim -> hidden... -> m
        return [self.feature_dim, *self.iia_encoder_dims, self.num_attributes]

    def decoder_layer_dims(self):
        # mirror of the encoder, ending back at feature_dim
        return list(reversed(self.encoder_layer_dims()))

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "num_identities": self.num_identities,
            "num_attributes": self.num_attributes,
            "backbone_dims": list(self.backbone_dims),
            "iia_encoder_dims": list(self.iia_encoder_dims),
            "shared_backbone": self.shared_backbone,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=d["input_dim"],
            num_identities=d["num_identities"],
            num_attributes=d["num_attributes"],
            backbone_dims=tuple(d["backbone_dims"]),
            iia_encoder_dims=tuple(d["iia_encoder_dims"]),
            shared_backbone=d.get("shared_backbone", False),
        )


@dataclass
class ForwardOutputs:
    x_id: Tensor
    p_id: Tensor
    att_feature: Tensor
    att_logits: Tensor
    p_att: Tensor
    e_iia: Tensor
    x_rec: Tensor
    p_iia: Tensor


def _init_mlp(params, prefix, dims, rng):
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        params[f"{prefix}.{i}.W"] = Tensor(ad.xavier_uniform(rng, fan_in, fan_out), requires_grad=True)
        params[f"{prefix}.{i}.b"] = Tensor(np.zeros(fan_out), requires_grad=True)


def _mlp(params, prefix, x, n_layers, final_activation):
    h = x
    for i in range(n_layers):
        h = ad.add_bias(ad.matmul(h, params[f"{prefix}.{i}.W"]), params[f"{prefix}.{i}.b"])
        if i < n_layers - 1 or final_activation == "relu":
            h = ad.relu(h)
    return h


class Model:
    """Parameter container plus forward passes for both branches and the IIA module.

    Parameter names are dotted paths; the first path component is the
    update group: id / att / iia_enc / iia_dec.
    """

    GROUPS = ("id", "att", "iia_enc", "iia_dec")

    def __init__(self, config: ModelConfig, rng: SeededRng):
        self.config = config
        self.params: dict[str, Tensor] = {}
        c = config
        backbone = [c.input_dim, *c.backbone_dims]
        _init_mlp(self.params, "id.backbone", backbone, rng)
        _init_mlp(self.params, "id.head", [c.feature_dim, c.num_identities], rng)
        if not c.shared_backbone:
            _init_mlp(self.params, "att.backbone", backbone, rng)
        _init_mlp(self.params, "att.head", [c.feature_dim, c.num_attributes], rng)
        _init_mlp(self.params, "iia_enc", c.encoder_layer_dims(), rng)
        _init_mlp(self.params, "iia_dec", c.decoder_layer_dims(), rng)
        self._n_backbone = len(backbone) - 1
        self._n_enc = len(c.encoder_layer_dims()) - 1

    def group_params(self, *groups):
        out = []
        for name in sorted(self.params):
            if name.split(".", 1)[0] in groups:
                out.append(self.params[name])
        return out

    def all_params(self):
        return [self.params[k] for k in sorted(self.params)]

    def _check_input(self, x: Tensor):
        if x.values.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise InvalidShapeError(
                f"expected batch x {self.config.input_dim} input, got shape {x.shape}")

    def forward_identity(self, x: Tensor):
        self._check_input(x)
        x_id = _mlp(self.params, "id.backbone", x, self._n_backbone, "relu")
        logits = _mlp(self.params, "id.head", x_id, 1, "linear")
        return x_id, ad.softmax_rows(logits)

    def forward_attribute(self, x: Tensor):
        self._check_input(x)
        prefix = "id.backbone" if self.config.shared_backbone else "att.backbone"
        feat = _mlp(self.params, prefix, x, self._n_backbone, "relu")
        logits = _mlp(self.params, "att.head", feat, 1, "linear")
        return feat, logits, ad.sigmoid(logits)

    def forward_iia(self, x_id_detached: Tensor):
        """Encoder-decoder pass; the caller passes a detached identity feature."""
        if x_id_detached.shape[1] != self.config.feature_dim:
            raise InvalidShapeError(
                f"expected batch x {self.config.feature_dim} identity features, "
                f"got shape {x_id_detached.shape}")
        e = _mlp(self.params, "iia_enc", x_id_detached, self._n_enc, "linear")
        x_rec = _mlp(self.params, "iia_dec", e, self._n_enc, "linear")
        return e, x_rec, ad.sigmoid(e)

    def forward_all(self, x: Tensor) -> ForwardOutputs:
        x_id, p_id = self.forward_identity(x)
        att_feature, att_logits, p_att = self.forward_attribute(x)
        e, x_rec, p_iia = self.forward_iia(ad.detach(x_id))
        return ForwardOutputs(x_id, p_id, att_feature, att_logits, p_att, e, x_rec, p_iia)

    def snapshot(self) -> dict:
        return {k: v.values.copy() for k, v in self.params.items()}

    def load_snapshot(self, snap: dict) -> None:
        for k, v in snap.items():
            self.params[k].values = np.array(v, dtype=np.float64)


# ---------------------------------------------------------------------------
# checkpoint I/O: flat versioned JSON map, bit-exact round trip

def save_checkpoint(path, model: Model, extra: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "params": {
            name: {"shape": list(t.values.shape), "data": t.values.reshape(-1).tolist()}
            for name, t in sorted(model.params.items())
        },
    }
    if extra:
        doc["extra"] = extra
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (model, extra); parameter values round-trip bit-exactly."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    config = ModelConfig.from_dict(doc["config"])
    model = Model(config, SeededRng(0))
    if set(doc["params"]) != set(model.params):
        missing = set(model.params) ^ set(doc["params"])
        raise ValueError(f"checkpoint parameter names do not match model: {sorted(missing)}")
    for name, rec in doc["params"].items():
        arr = np.array(rec["data"], dtype=np.float64).reshape(rec["shape"])
        if arr.shape != model.params[name].values.shape:
            raise InvalidShapeError(
                f"checkpoint {name}: shape {arr.shape} vs {model.params[name].values.shape}")
        model.params[name].values = arr
    return model, doc.get("extra", {})
