"""Shared test utilities: tiny model factories and a central finite-difference
gradient checker."""

import numpy as np

from attrid import autodiff as ad
from attrid.autodiff import SeededRng
from attrid.model import Model, ModelConfig


def small_model(seed=0, n_ids=5, m=3, d_in=6, backbone=(5, 4), enc=(4,), shared=False):
    cfg = ModelConfig(input_dim=d_in, num_identities=n_ids, num_attributes=m,
                      backbone_dims=backbone, iia_encoder_dims=enc,
                      shared_backbone=shared)
    return Model(cfg, SeededRng(seed))


def max_fd_error(loss_fn, params):
    """Worst relative error between analytic and central-difference gradients.

    loss_fn rebuilds the compute graph on every call; params are the tensors
    whose gradients the loss is expected to reach.
    """
    ad.zero_grads(params)
    loss = loss_fn()
    ad.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.values)
                for p in params]
    ad.zero_grads(params)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.values.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            h = 1e-6 * max(1.0, abs(flat[i]))
            orig = flat[i]
            flat[i] = orig + h
            hi = loss_fn().item()
            flat[i] = orig - h
            lo = loss_fn().item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * h)
            rel = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]), abs(numeric))
            worst = max(worst, rel)
    return worst
