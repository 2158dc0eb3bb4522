"""Central-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class GradReport:
    max_rel_err: float = 0.0
    offending: list[str] = field(default_factory=list)
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.offending


def rel_err(a: np.ndarray, n: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def grad_check(loss_fn: Callable[[], float], params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
               eps: float = 1e-5, tolerance: float = 1e-4, max_entries: int | None = None,
               seed: int = 0) -> GradReport:
    """Compare ``analytic`` gradients with central differences of ``loss_fn``.

    ``loss_fn`` must re-run the forward pass from the current contents of
    ``params`` (perturbed in place).  ``max_entries`` samples that many
    entries per parameter instead of checking all of them.  Offending ids are
    reported as ``<layer>`` (the text before the last dot).
    """
    report = GradReport()
    rng = np.random.default_rng(seed)
    for name, p in params.items():
        flat = p.reshape(-1)
        a = analytic[name].reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
        num = np.empty(idx.size)
        for n, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + eps
            up = loss_fn()
            flat[i] = old - eps
            down = loss_fn()
            flat[i] = old
            num[n] = (up - down) / (2 * eps)
        err = float(rel_err(a[idx], num).max()) if idx.size else 0.0
        report.per_param[name] = err
        report.max_rel_err = max(report.max_rel_err, err)
        layer = name.rsplit(".", 1)[0]
        if err >= tolerance and layer not in report.offending:
            report.offending.append(layer)
    return report


def check_network(net, inputs, labels, eps: float = 1e-5, tolerance: float = 1e-4,
                  max_entries: int | None = None, seed: int = 0) -> GradReport:
    net.loss_and_grad(inputs, labels)
    analytic = {k: v.copy() for k, v in net.gradients().items()}
    return grad_check(lambda: net.loss(inputs, labels)[0], net.parameters(), analytic,
                      eps, tolerance, max_entries, seed)
