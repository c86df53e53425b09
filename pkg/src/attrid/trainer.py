"""Two-step training: supervised joint learning on the labelled source domain,
then unsupervised target adaptation from attribute soft pseudo-labels.
Also implements the single-branch / shared-backbone comparison baselines."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import losses as L
from .autodiff import AdamState, ContractViolationError, SeededRng, Tensor, derive_seed
from .data import Dataset, LabelAccessError, batch_stream
from .losses import LossWeights
from .model import Model, ModelConfig

MODES = ("tj-aidl", "independent", "joint-shared", "id-only", "attr-only")


@dataclass
class TrainConfig:
    n_bs: int = 64
    id_pretrain_iters: int = 800
    joint_iters: int = 5000
    adapt_iters: int = 8000
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 0.005
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    mode: str = "tj-aidl"
    frozen_soft_labels: bool = False
    mse_reduction: str = "mean"
    backbone_dims: tuple = (16, 8)
    iia_encoder_dims: tuple = (12,)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        for name in ("id_pretrain_iters", "joint_iters", "adapt_iters"):
            if getattr(self, name) < 0:
                raise ValueError(f"TrainConfig.{name} must be nonnegative")


@dataclass
class TrainReport:
    traces: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    seed: int = 0
    mode: str = "tj-aidl"
    wall_clock: float = 0.0
    model: Model | None = None
    pre_adapt_snapshot: dict | None = None
    label_map: dict | None = None
    optimizer: "GroupOptimizer | None" = None

    def record(self, phase: str, name: str, value: float):
        self.traces.setdefault(f"{phase}.{name}", []).append(float(value))


class GroupOptimizer:
    """One persistent Adam state per parameter group."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.states: dict[str, AdamState] = {}

    def step(self, group: str, params) -> None:
        state = self.states.get(group)
        if state is None:
            state = AdamState(self.cfg.lr, self.cfg.beta1, self.cfg.beta2, self.cfg.epsilon)
            self.states[group] = state
        ad.adam_step(params, state)

    def to_dict(self) -> dict:
        return {
            group: {
                "step_count": s.step_count,
                "m": [a.tolist() for a in (s.m or [])],
                "v": [a.tolist() for a in (s.v or [])],
            }
            for group, s in self.states.items()
        }

    def load_dict(self, d: dict) -> None:
        for group, rec in d.items():
            s = AdamState(self.cfg.lr, self.cfg.beta1, self.cfg.beta2, self.cfg.epsilon)
            s.step_count = int(rec["step_count"])
            if rec["m"]:
                s.m = [np.array(a, dtype=np.float64) for a in rec["m"]]
                s.v = [np.array(a, dtype=np.float64) for a in rec["v"]]
            self.states[group] = s


def _assert_barrier(model: Model, allowed_groups) -> None:
    """Every gradient outside the designated groups must be absent or zero."""
    for name, p in model.params.items():
        group = name.split(".", 1)[0]
        if group in allowed_groups:
            continue
        if p.grad is not None and np.any(p.grad != 0.0):
            raise ContractViolationError(
                f"gradient barrier breached: {name} has nonzero grad during "
                f"update of {allowed_groups}")


def make_label_map(source: Dataset) -> dict:
    return {ident: i + 1 for i, ident in enumerate(sorted({s.identity for s in source.samples}))}


def _batch_arrays(dataset: Dataset, idx, label_map=None):
    feats = np.stack([dataset.samples[i].features for i in idx])
    if label_map is None:
        return Tensor(feats), None, None
    labels = np.array([label_map[dataset.samples[i].identity] for i in idx], dtype=np.int64)
    attrs = np.stack([dataset.samples[i].attributes for i in idx])
    return Tensor(feats), labels, attrs


# ---------------------------------------------------------------------------
# training steps

def identity_step(model: Model, x: Tensor, labels, opt: GroupOptimizer) -> float:
    _, p_id = model.forward_identity(x)
    loss = L.identity_loss(p_id, labels)
    ad.backward(loss)
    _assert_barrier(model, ("id",))
    opt.step("id", model.group_params("id"))
    return loss.item()


def attribute_step(model: Model, x: Tensor, targets, opt: GroupOptimizer) -> float:
    _, logits, _ = model.forward_attribute(x)
    loss = L.attribute_loss(logits, targets)
    ad.backward(loss)
    _assert_barrier(model, ("att",))
    opt.step("att", model.group_params("att"))
    return loss.item()


def joint_train_step(model: Model, x: Tensor, labels, attrs, opt: GroupOptimizer,
                     cfg: TrainConfig, report: TrainReport | None = None) -> dict:
    """One iteration of supervised joint learning: sequential updates of the
    identity branch, the IIA encoder-decoder, and the attribute branch."""
    w = cfg.weights
    out = {}

    # (i) identity branch
    out["loss_id"] = identity_step(model, x, labels, opt)
    if report is not None:
        report.events.append("id")

    # (ii) IIA encoder-decoder; identity features and attribute logits detached
    x_id, _ = model.forward_identity(x)
    x_id_d = ad.detach(x_id)
    _, att_logits, _ = model.forward_attribute(x)
    e, x_rec, _ = model.forward_iia(x_id_d)
    l_att_iia = L.iia_attribute_loss(e, attrs)
    l_rec = L.reconstruction_loss(x_id_d, x_rec, cfg.mse_reduction)
    l_transfer = L.transfer_loss(e, ad.detach(att_logits), cfg.mse_reduction)
    l_iia = L.total_iia_loss(l_att_iia, l_rec, l_transfer, w)
    ad.backward(l_iia)
    _assert_barrier(model, ("iia_enc", "iia_dec"))
    opt.step("iia", model.group_params("iia_enc", "iia_dec"))
    out.update(loss_att_iia=l_att_iia.item(), loss_rec=l_rec.item(),
               loss_transfer_iia=l_transfer.item(), loss_iia_total=l_iia.item())
    if report is not None:
        report.events.append("iia")

    # (iii) attribute branch; latent embedding detached
    _, att_logits, _ = model.forward_attribute(x)
    x_id2, _ = model.forward_identity(x)
    e2, _, _ = model.forward_iia(ad.detach(x_id2))
    l_att = L.attribute_loss(att_logits, attrs)
    l_transfer2 = L.transfer_loss(ad.detach(e2), att_logits, cfg.mse_reduction)
    l_att_total = L.total_attribute_loss(l_att, l_transfer2, w)
    ad.backward(l_att_total)
    _assert_barrier(model, ("att",))
    opt.step("att", model.group_params("att"))
    out.update(loss_att=l_att.item(), loss_transfer_att=l_transfer2.item(),
               loss_att_total=l_att_total.item())
    if report is not None:
        report.events.append("att")
    return out


def adapt_step(model: Model, x: Tensor, opt: GroupOptimizer, cfg: TrainConfig,
               soft_labels=None, report: TrainReport | None = None) -> dict:
    """One adaptation iteration on unlabelled target features.

    Soft pseudo-labels come from the current attribute branch unless supplied
    (frozen-soft-label mode); the identity branch is never updated."""
    w = cfg.weights
    out = {}

    if soft_labels is None:
        _, _, p_att = model.forward_attribute(x)
        soft_labels = p_att.values.copy()
    if report is not None:
        report.events.append("soft-label")

    # IIA update against the soft labels
    x_id, _ = model.forward_identity(x)
    x_id_d = ad.detach(x_id)
    _, att_logits, _ = model.forward_attribute(x)
    e, x_rec, _ = model.forward_iia(x_id_d)
    l_att_iia = L.iia_attribute_loss(e, soft_labels)
    l_rec = L.reconstruction_loss(x_id_d, x_rec, cfg.mse_reduction)
    l_transfer = L.transfer_loss(e, ad.detach(att_logits), cfg.mse_reduction)
    l_iia = L.total_iia_loss(l_att_iia, l_rec, l_transfer, w)
    ad.backward(l_iia)
    _assert_barrier(model, ("iia_enc", "iia_dec"))
    opt.step("iia", model.group_params("iia_enc", "iia_dec"))
    out.update(loss_att_iia=l_att_iia.item(), loss_rec=l_rec.item(),
               loss_transfer_iia=l_transfer.item(), loss_iia_total=l_iia.item())
    if report is not None:
        report.events.append("iia")

    # attribute branch update against the soft labels
    _, att_logits, _ = model.forward_attribute(x)
    x_id2, _ = model.forward_identity(x)
    e2, _, _ = model.forward_iia(ad.detach(x_id2))
    l_att = L.attribute_loss(att_logits, soft_labels)
    l_transfer2 = L.transfer_loss(ad.detach(e2), att_logits, cfg.mse_reduction)
    l_att_total = L.total_attribute_loss(l_att, l_transfer2, w)
    ad.backward(l_att_total)
    _assert_barrier(model, ("att",))
    opt.step("att", model.group_params("att"))
    out.update(loss_att=l_att.item(), loss_transfer_att=l_transfer2.item(),
               loss_att_total=l_att_total.item())
    if report is not None:
        report.events.append("att")
    return out


# ---------------------------------------------------------------------------
# full runs

def build_model(cfg: TrainConfig, source: Dataset) -> Model:
    mc = ModelConfig(
        input_dim=source.input_dim,
        num_identities=source.n_identities(),
        num_attributes=source.m,
        backbone_dims=cfg.backbone_dims,
        iia_encoder_dims=cfg.iia_encoder_dims,
        shared_backbone=(cfg.mode == "joint-shared"),
    )
    return Model(mc, SeededRng(derive_seed(cfg.seed, "init")))


def pretrain_identity(model: Model, source: Dataset, cfg: TrainConfig,
                      opt: GroupOptimizer, report: TrainReport, label_map: dict,
                      stream) -> None:
    if not source.labelled:
        raise LabelAccessError("identity pretraining requires a labelled dataset")
    for _ in range(cfg.id_pretrain_iters):
        x, labels, _ = _batch_arrays(source, next(stream), label_map)
        val = identity_step(model, x, labels, opt)
        report.events.append("id")
        report.record("pretrain", "loss_id", val)


def adapt_model(model: Model, target_view: Dataset, cfg: TrainConfig,
                opt: GroupOptimizer, report: TrainReport, iters: int | None = None) -> None:
    """Step II on a label-stripped target view; labelled input is rejected."""
    if target_view.labelled:
        raise LabelAccessError(
            "adaptation must receive an unlabelled view (use Dataset.unlabelled_view)")
    iters = cfg.adapt_iters if iters is None else iters
    if iters == 0:
        return
    stream = batch_stream(len(target_view), cfg.n_bs, derive_seed(cfg.seed, "adapt"))
    frozen = None
    if cfg.frozen_soft_labels:
        _, _, p = model.forward_attribute(Tensor(target_view.feature_matrix()))
        frozen = p.values.copy()
    for _ in range(iters):
        idx = next(stream)
        x, _, _ = _batch_arrays(target_view, idx)
        soft = frozen[idx] if frozen is not None else None
        comps = adapt_step(model, x, opt, cfg, soft_labels=soft, report=report)
        for name, val in comps.items():
            report.record("adapt", name, val)


def run(cfg: TrainConfig, source: Dataset, target: Dataset | None = None,
        adapt: bool = True) -> TrainReport:
    """Full training per cfg.mode; adaptation applies to tj-aidl only."""
    t0 = time.perf_counter()
    report = TrainReport(seed=cfg.seed, mode=cfg.mode)
    label_map = make_label_map(source)
    report.label_map = label_map
    model = build_model(cfg, source)
    report.model = model
    opt = GroupOptimizer(cfg)
    stream = batch_stream(len(source), cfg.n_bs, derive_seed(cfg.seed, "source"))
    total_iters = cfg.id_pretrain_iters + cfg.joint_iters

    if cfg.mode == "tj-aidl":
        pretrain_identity(model, source, cfg, opt, report, label_map, stream)
        for _ in range(cfg.joint_iters):
            x, labels, attrs = _batch_arrays(source, next(stream), label_map)
            comps = joint_train_step(model, x, labels, attrs, opt, cfg, report)
            for name, val in comps.items():
                report.record("joint", name, val)
        report.pre_adapt_snapshot = model.snapshot()
        if adapt and target is not None:
            adapt_model(model, target.unlabelled_view(), cfg, opt, report)
    elif cfg.mode == "id-only":
        for _ in range(total_iters):
            x, labels, _ = _batch_arrays(source, next(stream), label_map)
            report.record("train", "loss_id", identity_step(model, x, labels, opt))
            report.events.append("id")
    elif cfg.mode == "attr-only":
        for _ in range(total_iters):
            x, _, attrs = _batch_arrays(source, next(stream), label_map)
            report.record("train", "loss_att", attribute_step(model, x, attrs, opt))
            report.events.append("att")
    elif cfg.mode == "independent":
        for _ in range(total_iters):
            x, labels, attrs = _batch_arrays(source, next(stream), label_map)
            report.record("train", "loss_id", identity_step(model, x, labels, opt))
            report.events.append("id")
            report.record("train", "loss_att", attribute_step(model, x, attrs, opt))
            report.events.append("att")
    elif cfg.mode == "joint-shared":
        for _ in range(total_iters):
            x, labels, attrs = _batch_arrays(source, next(stream), label_map)
            _, p_id = model.forward_identity(x)
            _, att_logits, _ = model.forward_attribute(x)
            l_id = L.identity_loss(p_id, labels)
            l_att = L.attribute_loss(att_logits, attrs)
            loss = ad.add(l_id, l_att)
            ad.backward(loss)
            opt.step("all", model.group_params("id", "att"))
            report.record("train", "loss_id", l_id.item())
            report.record("train", "loss_att", l_att.item())
            report.events.append("joint")

    report.wall_clock = time.perf_counter() - t0
    report.optimizer = opt
    return report


def write_metrics_log(report: TrainReport, path) -> None:
    """Line-delimited `iter,loss_name,value` records."""
    with open(path, "w") as f:
        for name in sorted(report.traces):
            for i, val in enumerate(report.traces[name]):
                f.write(f"{i},{name},{val!r}\n")
