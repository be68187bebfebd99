"""Online advantage actor-critic with a soft-updated target value network.

One value update, one policy update and one target update per dispatch.
The TD error is ``delta = v(s) - (r + eta * v'(s'))``; both networks step
along ``-delta * grad``, so the policy ascends the advantage ``-delta``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, nn
from .encoder import DEFAULT_L_MAX
from .env import DEFAULT_PENALTY, EnvState, is_terminal, reset, step
from .instance import GeneratorSpec, Instance, generate
from .rules import DEFAULT_SWTCT_WEIGHT, N_ACTIONS, candidate_from_pick

LOG_HEADER = "episode,return,changeover_total,tardiness_total,overdue_count,mean_abs_td"


@dataclass
class TrainConfig:
    episodes: int = 1000
    eta: float = 0.95
    lam: float = 0.7
    lr_value: float = 3.8e-4
    lr_policy: float = 3.8e-4
    penalty: float = DEFAULT_PENALTY
    seed: int = 0
    instance: Instance | None = None
    generator: GeneratorSpec | None = None
    l_max: int = DEFAULT_L_MAX
    hidden: tuple[int, ...] = (64, 64)
    w_c: float = DEFAULT_SWTCT_WEIGHT

    def check(self) -> None:
        if (self.instance is None) == (self.generator is None):
            raise ValueError("exactly one of instance or generator must be given")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.lr_value <= 0 or self.lr_policy <= 0:
            raise ValueError("learning rates must be positive")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")

    def descriptors(self) -> tuple[nn.Descriptor, nn.Descriptor]:
        n_in = (N_ACTIONS + 1) * self.l_max
        return (nn.Descriptor(n_in, self.hidden, N_ACTIONS), nn.Descriptor(n_in, self.hidden, 1))

    def instance_for(self, episode: int) -> Instance:
        if self.instance is not None:
            return self.instance
        return generate(replace(self.generator, seed=(self.generator.seed + episode) % 2**64))


@dataclass
class EpisodeLog:
    episode: int
    ret: float
    changeover_total: float
    tardiness_total: float
    overdue_count: int
    mean_abs_td: float
    changeovers: tuple[float, ...] = ()

    def csv_row(self) -> str:
        return (f"{self.episode},{self.ret!r},{self.changeover_total!r},{self.tardiness_total!r},"
                f"{self.overdue_count},{self.mean_abs_td!r}")


@dataclass
class EpisodeStats:
    rewards: list[float] = field(default_factory=list)
    td_errors: list[float] = field(default_factory=list)
    changeover_total: float = 0.0
    tardiness_total: float = 0.0
    overdue_count: int = 0
    discounted_return: float = 0.0

    @property
    def ret(self) -> float:
        return math.fsum(self.rewards)


@dataclass
class TrainResult:
    checkpoint: nn.Checkpoint
    log: list[EpisodeLog]

    @property
    def policy(self) -> nn.NetworkParams:
        return self.checkpoint.policy

    @property
    def value(self) -> nn.NetworkParams:
        return self.checkpoint.value

    def log_csv(self) -> str:
        return write_log(self.log)


def write_log(log: list[EpisodeLog]) -> str:
    buf = io.StringIO()
    buf.write(LOG_HEADER + "\n")
    for e in log:
        buf.write(e.csv_row() + "\n")
    return buf.getvalue()


def td_target(r: float, v_next_target: float, eta: float, terminal: bool) -> float:
    return r if terminal else r + eta * v_next_target


def observe(state: EnvState, l_max: int, w_c: float):
    """Rule picks and flattened features for ``state`` in one kernel pass."""
    kb = kernels.get_backend()
    a = state.instance.arrays
    flat, timing = kb.rule_picks(a.proc, a.eligible, a.changeover, a.setup, a.release, a.due,
                                 state.last, state.avail, state.remaining, float(w_c))
    J = state.instance.num_lines
    if J > l_max:
        raise ValueError(f"instance has {J} lines but the encoder is sized for {l_max}")
    x = kb.features(state.busy, flat, timing, J, a.horizon, l_max)
    return flat, x


def _scale(g: nn.NetworkParams, s: float) -> nn.NetworkParams:
    return g.map(lambda a: s * a)


def train(config: TrainConfig, callback=None) -> TrainResult:
    config.check()
    pol_desc, val_desc = config.descriptors()
    init_rng = np.random.default_rng(config.seed)
    theta = nn.init(pol_desc, init_rng)
    w = nn.init(val_desc, init_rng)
    w_target = w.copy()
    p_opt = nn.AdamState.zeros(theta, lr=config.lr_policy)
    v_opt = nn.AdamState.zeros(w, lr=config.lr_value)
    act_rng = np.random.default_rng([config.seed, 1])
    mask = np.ones(N_ACTIONS, dtype=bool)
    log: list[EpisodeLog] = []

    from .rng import sample_index

    for ep in range(config.episodes):
        state = reset(config.instance_for(ep))
        flat, x = observe(state, config.l_max, config.w_c)
        rewards, tds, chgs = [], [], []
        while not is_terminal(state):
            probs = nn.policy_forward(theta, x, mask)
            a = sample_index(probs, act_rng.random())
            cand = candidate_from_pick(state, flat[a])
            state, r = step(state, cand, config.penalty)
            done = is_terminal(state)
            flat2, x2 = observe(state, config.l_max, config.w_c)

            v_now = nn.value_forward(w, x)
            v_next = 0.0 if done else nn.value_forward(w_target, x2)
            delta = v_now - td_target(r, v_next, config.eta, done)

            gw = nn.value_grad(w, x)
            gp = nn.policy_grad_logprob(theta, x, mask, a)
            w, v_opt = nn.adam_step(w, _scale(gw, delta), v_opt)
            theta, p_opt = nn.adam_step(theta, _scale(gp, delta), p_opt)
            w_target = nn.soft_update(w, w_target, config.lam)

            rewards.append(r)
            tds.append(abs(delta))
            chgs.append(cand.changeover_hours)
            flat, x = flat2, x2
        entry = EpisodeLog(ep, math.fsum(rewards), state.changeover_total, state.tardiness_total,
                           state.overdue_count, float(np.mean(tds)) if tds else 0.0, tuple(chgs))
        log.append(entry)
        if callback is not None:
            callback(entry, theta, w)

    meta = {"seed": int(config.seed), "episodes": int(config.episodes), "eta": config.eta,
            "lam": config.lam, "lr_value": config.lr_value, "lr_policy": config.lr_policy,
            "penalty": config.penalty, "l_max": config.l_max, "w_c": config.w_c,
            "act_rng_draws": int(sum(len(e.changeovers) for e in log))}
    ckpt = nn.Checkpoint(theta, w, w_target, p_opt, v_opt, meta)
    return TrainResult(ckpt, log)


def greedy_action(probs: np.ndarray) -> int:
    return int(np.argmax(probs))  # first maximum, i.e. lowest index on ties


def greedy_dispatch(policy: nn.NetworkParams, instance: Instance, l_max: int = DEFAULT_L_MAX,
                    penalty: float = DEFAULT_PENALTY, w_c: float = DEFAULT_SWTCT_WEIGHT,
                    value: nn.NetworkParams | None = None, eta: float = 0.95):
    """Dispatch with ``argmax pi``; returns (schedule, EpisodeStats)."""
    state = reset(instance)
    stats = EpisodeStats()
    flat, x = observe(state, l_max, w_c)
    mask = np.ones(N_ACTIONS, dtype=bool)
    disc = 1.0
    while not is_terminal(state):
        a = greedy_action(nn.policy_forward(policy, x, mask))
        cand = candidate_from_pick(state, flat[a])
        state, r = step(state, cand, penalty)
        done = is_terminal(state)
        flat2, x2 = observe(state, l_max, w_c)
        stats.rewards.append(r)
        stats.discounted_return += disc * r
        disc *= eta
        if value is not None:
            v_next = 0.0 if done else nn.value_forward(value, x2)
            stats.td_errors.append(nn.value_forward(value, x) - td_target(r, v_next, eta, done))
        flat, x = flat2, x2
    stats.changeover_total = state.changeover_total
    stats.tardiness_total = state.tardiness_total
    stats.overdue_count = state.overdue_count
    return state.schedule(), stats
