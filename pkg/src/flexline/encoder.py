"""Condensed temporal state features: line occupancy plus one increment row per rule.

Row 0 holds each line's busy time over the plan horizon.  Row ``1 + r``
holds, at the line chosen by rule ``r``, the occupancy that rule's
candidate would add.  Columns past the instance's line count are zero.
"""
from __future__ import annotations

from collections import Counter

import numpy as np

from . import kernels
from .env import EnvState
from .rules import DEFAULT_SWTCT_WEIGHT, N_ACTIONS, picks

DEFAULT_L_MAX = 8
N_ROWS = N_ACTIONS + 1


def encode(state: EnvState, l_max: int = DEFAULT_L_MAX, w_c: float = DEFAULT_SWTCT_WEIGHT,
           stats: Counter | None = None) -> np.ndarray:
    """(11, l_max) feature matrix; pass ``stats`` to count clamped entries."""
    J = state.instance.num_lines
    if J > l_max:
        raise ValueError(f"instance has {J} lines but the encoder is sized for {l_max}")
    flat, timing = picks(state, w_c)
    horizon = state.instance.horizon_hours
    if stats is not None:
        over = int((state.busy / horizon > 1.0).sum())
        over += int(((timing[:, 0] + timing[:, 2]) / horizon > 1.0)[flat >= 0].sum())
        if over:
            stats["clamped"] += over
    x = kernels.get_backend().features(state.busy, flat, timing, J, horizon, l_max)
    return x.reshape(N_ROWS, l_max)


def flatten(matrix: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(matrix).reshape(-1)


def to_csv(matrix: np.ndarray) -> str:
    return "".join(",".join(f"{v:.6f}" for v in row) + "\n" for row in matrix)
