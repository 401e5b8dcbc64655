"""Adaptive batch normalization: refresh BN statistics from a reference set.

Only the running mean/variance of the normalization layers change; learned
affine parameters and every other weight stay untouched. The reference set
must contain frames of both classes so the refreshed statistics are not
biased toward one of them.
"""

from __future__ import annotations

import copy

import numpy as np
import torch
from torch.nn.modules.batchnorm import _BatchNorm


class ReferenceSetError(ValueError):
    """Reference set does not span both classes."""


def adabn_adapt(model: torch.nn.Module, reference_set) -> torch.nn.Module:
    """Return a copy of ``model`` with BN statistics from the reference set.

    ``reference_set`` is a sequence of (input_array, class_id) pairs with
    class ids 0 (UDS) and 1 (FDS); at least one frame per class is
    required. The reference batch is pushed once through a float64 twin of
    the network in training mode with cumulative BN averaging, so the new
    running statistics are the reference-set batch statistics at full
    accumulation precision; everything except those statistics is copied
    bit-for-bit from the input model.
    """
    reference_set = list(reference_set)
    if len(reference_set) < 2:
        raise ReferenceSetError("need at least two reference frames")
    classes = {int(c) for _, c in reference_set}
    if not {0, 1} <= classes:
        raise ReferenceSetError("reference set must contain both classes")
    twin = copy.deepcopy(model).double()
    for module in twin.modules():
        if isinstance(module, _BatchNorm):
            module.reset_running_stats()
            module.momentum = None  # cumulative average over the single pass
    batch = torch.from_numpy(
        np.stack([np.asarray(x, dtype=np.float64) for x, _ in reference_set])
    )
    twin.train()
    with torch.no_grad():
        twin(batch)
    _refine_to_eval_fixpoint(twin, batch)

    adapted = copy.deepcopy(model)
    twin_bn = {
        name: module
        for name, module in twin.named_modules()
        if isinstance(module, _BatchNorm)
    }
    with torch.no_grad():
        for name, module in adapted.named_modules():
            if isinstance(module, _BatchNorm):
                module.running_mean.copy_(twin_bn[name].running_mean)
                module.running_var.copy_(twin_bn[name].running_var)
                module.num_batches_tracked.copy_(twin_bn[name].num_batches_tracked)
    adapted.eval()
    return adapted


def _refine_to_eval_fixpoint(twin, batch, max_iters: int = 25, tol: float = 1e-11):
    """Iterate stats until they match the eval-mode reference activations.

    Train-mode BN normalizes by the biased batch variance but stores the
    unbiased one, so activations downstream of a BN layer shift by O(1/n)
    between the statistics-gathering pass and deployment. Re-capturing the
    eval-mode inputs and rewriting the statistics converges (layer by
    layer) to the self-consistent values, leaving the reference set exactly
    zero-mean/unit-variance at every normalization input.
    """
    bn_layers = [
        (name, m) for name, m in twin.named_modules() if isinstance(m, _BatchNorm)
    ]
    twin.eval()
    for _ in range(max_iters):
        captured = {}
        hooks = [
            m.register_forward_pre_hook(
                lambda mod, inp, key=name: captured.__setitem__(key, inp[0].detach())
            )
            for name, m in bn_layers
        ]
        with torch.no_grad():
            twin(batch)
        for h in hooks:
            h.remove()
        delta = 0.0
        with torch.no_grad():
            for name, m in bn_layers:
                x = captured[name]
                mean = x.mean(dim=(0, 2, 3))
                # eval normalization divides by sqrt(running_var + eps); store
                # the biased variance minus eps so deployed activations come
                # out exactly unit-variance on the reference set
                var_b = x.var(dim=(0, 2, 3), unbiased=False)
                target_var = torch.clamp(var_b - m.eps, min=0.0)
                delta = max(
                    delta,
                    float((m.running_mean - mean).abs().max()),
                    float((m.running_var - target_var).abs().max()),
                )
                m.running_mean.copy_(mean)
                m.running_var.copy_(target_var)
        if delta < tol:
            break


def normalization_state(model: torch.nn.Module) -> dict:
    """Running statistics of every BN layer, keyed by module name."""
    out = {}
    for name, module in model.named_modules():
        if isinstance(module, _BatchNorm):
            out[name] = {
                "running_mean": module.running_mean.detach().clone(),
                "running_var": module.running_var.detach().clone(),
            }
    return out


def learned_parameters(model: torch.nn.Module) -> dict:
    """All learnable tensors (conv weights plus BN gamma/beta), cloned."""
    return {name: p.detach().clone() for name, p in model.named_parameters()}
