"""Monte-Carlo soft shielding.

Before each real dispatch, K policy rollouts are played from the current
state.  A rollout scores -1 as soon as any dispatch it makes is late and +1
if it reaches the end with none.  Each action is then scored by

    G(a) = alpha / (n(a) + 1) * sum_u(a) + (1 - alpha) * v(s'(a)) + beta * pi(a) / (1 + n(a))

and the argmax is dispatched.  Risky actions are discouraged, never removed.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import kernels, nn
from .a2c import observe
from .encoder import DEFAULT_L_MAX
from .env import DEFAULT_PENALTY, EnvState, is_terminal, reset, step
from .instance import Instance
from .rng import sample_index
from .rules import DEFAULT_SWTCT_WEIGHT, N_ACTIONS, action_mask, candidate_from_pick

TRACE_HEADER = "step,action,n,sum_u,v_next,prior,G,chosen"


@dataclass(frozen=True)
class ShieldConfig:
    k: int = 1200
    alpha: float = 0.95
    beta: float = 0.33
    seed: int = 0
    parallel: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass
class RolloutStats:
    n: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    sum_u: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    v_next: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS))
    prior: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS))
    allowed: np.ndarray = field(default_factory=lambda: np.ones(N_ACTIONS, dtype=bool))

    def add(self, first: np.ndarray, outcome: np.ndarray) -> None:
        self.n += np.bincount(first, minlength=N_ACTIONS)
        self.sum_u += np.bincount(first, weights=outcome, minlength=N_ACTIONS).astype(np.int64)


def score(stats: RolloutStats, config: ShieldConfig) -> np.ndarray:
    n = stats.n.astype(np.float64)
    g = (config.alpha / (n + 1.0) * stats.sum_u
         + (1.0 - config.alpha) * stats.v_next
         + config.beta * stats.prior / (1.0 + n))
    return np.where(stats.allowed, g, -np.inf)


def rollout(state: EnvState, policy: nn.NetworkParams, rng, l_max: int = DEFAULT_L_MAX,
            w_c: float = DEFAULT_SWTCT_WEIGHT) -> tuple[int, int]:
    """One simulated episode from ``state`` through the plain environment API.

    ``rng`` only needs a ``random()`` method.  Returns (first action, u).
    """
    if is_terminal(state):
        raise ValueError("cannot roll out from a terminal state")
    flat, x = observe(state, l_max, w_c)
    a = sample_index(nn.policy_forward(policy, x), rng.random())
    first = a
    while True:
        cand = candidate_from_pick(state, flat[a])
        if cand.tardiness_hours > 0:
            return first, -1
        state, _ = step(state, cand)
        if is_terminal(state):
            return first, 1
        flat, x = observe(state, l_max, w_c)
        a = sample_index(nn.policy_forward(policy, x), rng.random())


def next_values(state: EnvState, value: nn.NetworkParams, l_max: int, w_c: float,
                allowed: np.ndarray) -> np.ndarray:
    flat, _ = observe(state, l_max, w_c)
    out = np.zeros(N_ACTIONS)
    seen: dict[int, float] = {}
    for a in np.flatnonzero(allowed):
        f = int(flat[a])
        if f not in seen:
            nxt, _ = step(state, candidate_from_pick(state, f))
            # terminal states carry no future value
            seen[f] = 0.0 if is_terminal(nxt) else nn.value_forward(value, observe(nxt, l_max, w_c)[1])
        out[a] = seen[f]
    return out


def collect(state: EnvState, policy: nn.NetworkParams, value: nn.NetworkParams, config: ShieldConfig,
            l_max: int = DEFAULT_L_MAX, w_c: float = DEFAULT_SWTCT_WEIGHT) -> RolloutStats:
    if is_terminal(state):
        raise ValueError("no decision to make at a terminal state")
    allowed = action_mask(state)
    _, x = observe(state, l_max, w_c)
    prior = nn.policy_forward(policy, x, allowed)
    a = state.instance.arrays
    first, outcome = kernels.get_backend().shield_rollouts(
        a.proc, a.eligible, a.changeover, a.setup, a.release, a.due,
        state.last, state.avail, state.busy, state.remaining,
        w_c, a.horizon, l_max, policy.flat(), policy.dims_array(), prior,
        config.seed, state.step, config.k, config.parallel)
    stats = RolloutStats(prior=prior, allowed=allowed)
    stats.add(first, outcome)
    stats.v_next = next_values(state, value, l_max, w_c, allowed)
    return stats


def shielded_decide(state: EnvState, policy: nn.NetworkParams, value: nn.NetworkParams,
                    config: ShieldConfig, l_max: int = DEFAULT_L_MAX,
                    w_c: float = DEFAULT_SWTCT_WEIGHT) -> int:
    return decide(state, policy, value, config, l_max, w_c)[0]


def decide(state, policy, value, config, l_max=DEFAULT_L_MAX, w_c=DEFAULT_SWTCT_WEIGHT):
    """Like :func:`shielded_decide` but also returns the scores and statistics."""
    stats = collect(state, policy, value, config, l_max, w_c)
    g = score(stats, config)
    return int(np.argmax(g)), g, stats


def shielded_dispatch(instance: Instance, policy: nn.NetworkParams, value: nn.NetworkParams,
                      config: ShieldConfig, l_max: int = DEFAULT_L_MAX, w_c: float = DEFAULT_SWTCT_WEIGHT,
                      penalty: float = DEFAULT_PENALTY, trace: list | None = None) -> EnvState:
    """Shielded dispatch to completion; returns the final state (``.schedule()`` for tasks)."""
    state = reset(instance)
    while not is_terminal(state):
        a, g, stats = decide(state, policy, value, config, l_max, w_c)
        if trace is not None:
            for b in range(N_ACTIONS):
                trace.append((state.step, b, int(stats.n[b]), int(stats.sum_u[b]), float(stats.v_next[b]),
                              float(stats.prior[b]), float(g[b]), int(b == a)))
        flat, _ = observe(state, l_max, w_c)
        state, _ = step(state, candidate_from_pick(state, flat[a]), penalty)
    return state


def trace_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for r in rows:
        buf.write(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]!r},{r[5]!r},{r[6]!r},{r[7]}\n")
    return buf.getvalue()
