"""Adam with a step-decay learning-rate schedule.

Hyperparameters beta1=0.9, beta2=0.999, eps=1e-8 are fixed at the
conventional defaults.  The learning rate is a step function of the
iteration number: lr0 / factor^floor(it / every).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionMismatchError
from .model import Gradients, ModelParams

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class LrSchedule:
    lr0: float = 0.001
    anneal_every: int = 3000
    anneal_factor: float = 2.0

    def __post_init__(self):
        if self.lr0 <= 0 or self.anneal_every <= 0 or self.anneal_factor <= 1:
            raise ArgumentError(
                "need lr0 > 0, anneal_every > 0, anneal_factor > 1"
            )


def lr_at(sched: LrSchedule, iteration: int) -> float:
    if iteration < 0:
        raise ArgumentError(f"iteration must be >= 0, got {iteration}")
    return sched.lr0 / sched.anneal_factor ** (iteration // sched.anneal_every)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        shapes = {
            "w_ih": params.w_ih.shape,
            "w_hh": params.w_hh.shape,
            "b": params.b.shape,
            "w_fc": params.w_fc.shape,
            "b_fc": (),
        }
        return cls(
            m={k: np.zeros(s) for k, s in shapes.items()},
            v={k: np.zeros(s) for k, s in shapes.items()},
        )


def adam_step(
    params: ModelParams, grads: Gradients, state: AdamState, lr: float
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, applied in place."""
    if lr <= 0:
        raise ArgumentError(f"lr must be > 0, got {lr}")
    state.t += 1
    bc1 = 1.0 - BETA1**state.t
    bc2 = 1.0 - BETA2**state.t
    for name in ("w_ih", "w_hh", "b", "w_fc", "b_fc"):
        g = getattr(grads, name)
        g = np.asarray(g, dtype=np.float64)
        theta = np.asarray(getattr(params, name), dtype=np.float64)
        if g.shape != theta.shape:
            raise DimensionMismatchError(
                f"gradient shape {g.shape} != parameter shape {theta.shape} "
                f"for {name}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + EPS)
        if name == "b_fc":
            params.b_fc = float(theta - update)
        else:
            theta -= update
    return params, state
