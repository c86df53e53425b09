"""Retrieval evaluation: L2 feature matching under the single-query cross-camera
protocol (CMC, mAP), attribute accuracy, and the attribute-consistency score."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import InvalidShapeError, Tensor
from .data import Dataset, LabelAccessError
from .model import Model


@dataclass
class RetrievalReport:
    cmc: np.ndarray
    map: float
    n_queries: int
    n_skipped: int = 0
    consistency: float | None = None
    attribute_accuracy: float | None = None

    def rank(self, k: int) -> float:
        return float(self.cmc[min(k, len(self.cmc)) - 1])


def extract_features(model: Model, dataset: Dataset, mode: str = "tj-aidl") -> np.ndarray:
    """Deployment features in dataset order: the attribute-branch representation,
    except id-only (identity features) and independent (both branches concatenated)."""
    x = Tensor(dataset.feature_matrix())
    if mode == "id-only":
        x_id, _ = model.forward_identity(x)
        return x_id.values.copy()
    if mode == "independent":
        x_id, _ = model.forward_identity(x)
        feat, _, _ = model.forward_attribute(x)
        return np.concatenate([x_id.values, feat.values], axis=1)
    feat, _, _ = model.forward_attribute(x)
    return feat.values.copy()


def single_query_split(dataset: Dataset):
    """Queries are the samples of the lowest-numbered camera; the rest is gallery."""
    cams = dataset.cameras
    qcam = int(cams.min())
    idx = np.arange(len(dataset))
    return idx[cams == qcam], idx[cams != qcam]


def evaluate(features: np.ndarray, identities, cameras, query_idx, gallery_idx) -> RetrievalReport:
    """Single-query retrieval metrics.

    Per query, gallery entries sharing identity AND camera with the query are
    excluded; ranking is by ascending L2 distance with ties broken by gallery
    index. Queries with no relevant gallery item are skipped and counted.
    """
    identities = np.asarray(identities)
    cameras = np.asarray(cameras)
    query_idx = np.asarray(query_idx, dtype=np.int64)
    gallery_idx = np.asarray(gallery_idx, dtype=np.int64)
    if features.shape[0] != identities.shape[0] or features.shape[0] != cameras.shape[0]:
        raise InvalidShapeError(
            f"features rows {features.shape[0]} vs labels {identities.shape[0]}")

    q = features[query_idx]
    g = features[gallery_idx]
    # squared L2 preserves the L2 ordering
    dist = (np.sum(q * q, axis=1)[:, None] + np.sum(g * g, axis=1)[None, :]
            - 2.0 * (q @ g.T))

    n_gallery = len(gallery_idx)
    first_match = np.zeros(n_gallery, dtype=np.int64)
    aps = []
    n_skipped = 0
    for qi, row in zip(query_idx, dist):
        valid = ~((identities[gallery_idx] == identities[qi])
                  & (cameras[gallery_idx] == cameras[qi]))
        order = np.argsort(row, kind="stable")
        order = order[valid[order]]
        rel = identities[gallery_idx[order]] == identities[qi]
        if not rel.any():
            n_skipped += 1
            continue
        ranks = np.flatnonzero(rel) + 1
        first_match[ranks[0] - 1] += 1
        precisions = np.arange(1, len(ranks) + 1) / ranks
        aps.append(precisions.mean())

    n_eval = len(query_idx) - n_skipped
    if n_eval == 0:
        return RetrievalReport(cmc=np.zeros(n_gallery), map=0.0,
                               n_queries=0, n_skipped=n_skipped)
    cmc = np.cumsum(first_match) / n_eval
    return RetrievalReport(cmc=cmc, map=float(np.mean(aps)),
                           n_queries=n_eval, n_skipped=n_skipped)


def evaluate_dataset(model: Model, dataset: Dataset, mode: str = "tj-aidl") -> RetrievalReport:
    features = extract_features(model, dataset, mode)
    query_idx, gallery_idx = single_query_split(dataset)
    report = evaluate(features, dataset.identities, dataset.cameras, query_idx, gallery_idx)
    report.consistency = attribute_consistency(model, dataset)
    if dataset.labelled:
        report.attribute_accuracy = attribute_accuracy(model, dataset)
    return report


def attribute_consistency(model: Model, dataset: Dataset) -> float:
    """Mean squared discrepancy between the attribute branch's probabilities and
    the sigmoid of the latent embedding; lower means better domain fit."""
    x = Tensor(dataset.feature_matrix())
    x_id, _ = model.forward_identity(x)
    _, _, p_att = model.forward_attribute(x)
    _, _, p_iia = model.forward_iia(x_id)
    return float(np.mean((p_iia.values - p_att.values) ** 2))


def attribute_accuracy(model: Model, dataset: Dataset, threshold: float = 0.5) -> float:
    if not dataset.labelled:
        raise LabelAccessError("attribute accuracy requires a labelled dataset")
    _, _, p_att = model.forward_attribute(Tensor(dataset.feature_matrix()))
    pred = p_att.values > threshold
    return float(np.mean(pred == (dataset.attributes > 0.5)))


def report_lines(report: RetrievalReport, ranks=(1, 5, 10, 20)):
    """Flat `metric, value` rows for export."""
    rows = [(f"rank{k}", report.rank(k)) for k in ranks]
    rows.append(("map", report.map))
    rows.append(("n_queries", report.n_queries))
    rows.append(("n_skipped", report.n_skipped))
    if report.consistency is not None:
        rows.append(("consistency", report.consistency))
    if report.attribute_accuracy is not None:
        rows.append(("attribute_accuracy", report.attribute_accuracy))
    return rows
