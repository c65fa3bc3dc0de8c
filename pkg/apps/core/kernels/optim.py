"""Adam with bias correction, as a pure function over name-keyed tensors."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from apps.core.errors import GradientError


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update. Inputs are not mutated.

    Moments start at zero for parameters the state has not seen yet.

    Raises:
        GradientError: a parameter has no gradient or a gradient has the wrong shape
    """
    missing = sorted(set(params) - set(grads))
    if missing:
        raise GradientError(f"missing gradient for parameter(s): {', '.join(missing)}")

    t = state.step + 1
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name in sorted(params):
        p = params[name]
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise GradientError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name, np.zeros(p.shape, dtype=np.float64))
        v = state.v.get(name, np.zeros(p.shape, dtype=np.float64))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        new_params[name] = (p.astype(np.float64) - update).astype(p.dtype)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=t, m=new_m, v=new_v)
