"""Shared oracles and expensive session fixtures (trained desk-scale models)."""
from __future__ import annotations

import numpy as np
import pytest

from tokcascade.numerics import Graph, Tensor, zero_grads


def fd_gradient(loss_fn, param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. every param element.

    loss_fn takes no arguments and must re-run the full forward pass; the
    oracle never touches the recorded graph.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def assert_grads_close(params: dict[str, Tensor], loss_builder, rtol: float = 1e-4,
                       h: float = 1e-5) -> None:
    """Check analytic gradients of a scalar loss against central differences.

    loss_builder() must construct the loss tensor from scratch (so the
    finite-difference probe sees parameter perturbations).
    """
    plist = list(params.values())
    zero_grads(plist)
    with Graph() as g:
        loss = loss_builder()
    g.backward(loss, params=plist)
    analytic = {name: p.grad.copy() for name, p in params.items()}
    zero_grads(plist)

    def forward() -> float:
        val = loss_builder()
        return float(val.data.reshape(()))

    for name, p in params.items():
        numeric = fd_gradient(forward, p, h=h)
        a, n = analytic[name], numeric
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        rel = np.abs(a - n) / denom
        worst = float(rel.max()) if rel.size else 0.0
        assert worst <= rtol, f"gradient mismatch for {name}: max rel err {worst:.3e}"


@pytest.fixture
def fdgrad():
    return fd_gradient


@pytest.fixture
def gradcheck():
    return assert_grads_close
