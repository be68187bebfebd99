"""The ten priority dispatching rules that make up the action space."""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from . import kernels
from .env import Candidate, EnvState, is_terminal, make_candidate

DEFAULT_SWTCT_WEIGHT = 2.0


class Rule(IntEnum):
    SCT = 0  # shortest changeover
    SPT = 1  # shortest processing
    STCT = 2  # shortest changeover + processing
    SWTCT = 3  # shortest weighted changeover + processing
    LPT = 4  # longest processing
    LTCT = 5  # longest changeover + processing
    EDD = 6  # earliest due date, then earliest completion
    ECT = 7  # earliest completion
    EST = 8  # earliest start
    SRT = 9  # smallest slack (due - completion)

    @classmethod
    def parse(cls, name: str) -> "Rule":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown rule {name!r}; expected one of {', '.join(r.name for r in cls)}") from None


N_ACTIONS = len(Rule)


def enumerate_candidates(state: EnvState) -> list[Candidate]:
    inst = state.instance
    return [make_candidate(state, i, j)
            for i in state.remaining_jobs
            for j in range(inst.num_lines) if inst.eligible[i, j]]


def picks(state: EnvState, w_c: float = DEFAULT_SWTCT_WEIGHT):
    """Kernel-resolved (flat index, timing) for all rules at once."""
    a = state.instance.arrays
    return kernels.get_backend().rule_picks(a.proc, a.eligible, a.changeover, a.setup, a.release,
                                            a.due, state.last, state.avail, state.remaining, float(w_c))


def candidate_from_pick(state: EnvState, flat: int) -> Candidate:
    i, j = divmod(int(flat), state.instance.num_lines)
    return make_candidate(state, i, j)


def select(rule: Rule | int, state: EnvState, w_c: float = DEFAULT_SWTCT_WEIGHT) -> Candidate:
    if is_terminal(state):
        raise ValueError("no candidates at a terminal state")
    flat, _ = picks(state, w_c)
    return candidate_from_pick(state, flat[int(rule)])


def action_mask(state: EnvState) -> np.ndarray:
    return np.full(N_ACTIONS, not is_terminal(state), dtype=bool)


def run_rule(instance, rule: Rule | int, w_c: float = DEFAULT_SWTCT_WEIGHT, penalty: float | None = None):
    """Dispatch ``instance`` to completion with a single rule; returns the final state."""
    from .env import DEFAULT_PENALTY, reset, step

    pen = DEFAULT_PENALTY if penalty is None else penalty
    state = reset(instance)
    while not is_terminal(state):
        state, _ = step(state, select(rule, state, w_c), pen)
    return state
