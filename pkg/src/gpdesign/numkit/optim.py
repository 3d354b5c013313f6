"""Adam and AdaBelief optimizers plus piecewise-constant learning-rate schedules.

Both optimizers share moment bookkeeping; they differ only in the second
moment: Adam accumulates g**2, AdaBelief accumulates (g - m)**2, the squared
surprise relative to the first moment. Defaults beta1=0.9, beta2=0.999,
eps=1e-8 for both.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError


@dataclass
class OptimizerState:
    kind: str = "adam"  # "adam" or "adabelief"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("adam", "adabelief"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


def _ensure_moments(state, params):
    if state.m:
        return
    for block in params:
        state.m.append({k: np.zeros_like(p) for k, p in block.items()})
        state.v.append({k: np.zeros_like(p) for k, p in block.items()})


def optimizer_step(state: OptimizerState, params, grads, lr):
    """Apply one update in place; returns params for convenience.

    params and grads are aligned lists of {name: array} blocks, as produced
    by net.init_params / net.net_backward. A NaN or inf gradient raises
    TrainingDivergedError naming the offending block.
    """
    _ensure_moments(state, params)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for i, (block, gblock) in enumerate(zip(params, grads)):
        for key, p in block.items():
            g = gblock[key]
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError(
                    f"non-finite gradient in parameter block layer{i}.{key} at step {t}"
                )
            m = state.m[i][key]
            v = state.v[i][key]
            m *= b1
            m += (1.0 - b1) * g
            if state.kind == "adam":
                v *= b2
                v += (1.0 - b2) * g * g
            else:
                diff = g - m
                diff *= diff
                v *= b2
                v += (1.0 - b2) * diff
            denom = np.sqrt(v / bc2)
            denom += state.eps
            step_vec = m / bc1
            step_vec /= denom
            step_vec *= lr
            p -= step_vec.astype(p.dtype, copy=False)
    return params


@dataclass(frozen=True)
class LrSchedule:
    """Piecewise-constant schedule: phases of (step_count, learning_rate)."""

    phases: tuple

    def __post_init__(self):
        for steps, rate in self.phases:
            if steps <= 0 or rate <= 0:
                raise ValueError("schedule phases need positive lengths and rates")

    @property
    def total_steps(self) -> int:
        return sum(steps for steps, _ in self.phases)


def lr_at(schedule: LrSchedule, step: int) -> float:
    if step < 0 or step >= schedule.total_steps:
        raise ValueError(f"step {step} outside schedule of {schedule.total_steps} steps")
    acc = 0
    for steps, rate in schedule.phases:
        acc += steps
        if step < acc:
            return rate
    raise AssertionError("unreachable")
