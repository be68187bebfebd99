"""Vectorized numpy kernels, used when numba is disabled or unavailable.

Per-step work is vectorized over the (job, line) candidate grid; the
rollout loop itself stays in Python, so this path is only practical for
small instances or small rollout counts.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..rng import Stream, sample_index

N_RULES = 10


def _grid(proc, elig, chg, setup, release, last, avail, remaining):
    I, J = proc.shape
    c = chg[(last + 1)[None, :], np.arange(I)[:, None], np.arange(J)[None, :]]
    s = np.maximum(avail[None, :] + c, release[:, None])
    s = np.where((last < 0)[None, :], np.maximum(s, setup[None, :] + c), s)
    valid = elig & remaining[:, None]
    return c, s, valid


def rule_picks(proc, elig, chg, setup, release, due, last, avail, remaining, w_c):
    picks = np.full(N_RULES, -1, np.int64)
    timing = np.zeros((N_RULES, 4))
    c, s, valid = _grid(proc, elig, chg, setup, release, last, avail, remaining)
    if not valid.any():
        return picks, timing
    p = proc
    f = s + p
    cp = c + p
    dd = np.broadcast_to(due[:, None], p.shape)
    inf = np.inf

    def lo(key):
        return int(np.argmin(np.where(valid, key, inf)))

    def hi(key):
        return int(np.argmax(np.where(valid, key, -inf)))

    picks[0] = lo(c)
    picks[1] = lo(p)
    picks[2] = lo(cp)
    picks[3] = lo(w_c * c + p)
    picks[4] = hi(p)
    picks[5] = hi(cp)
    first_due = np.where(valid, dd, inf).min()
    picks[6] = lo(np.where(dd == first_due, f, inf))
    picks[7] = lo(f)
    picks[8] = lo(s)
    picks[9] = lo(dd - f)

    J = p.shape[1]
    i, j = np.divmod(picks, J)
    timing[:, 0] = c[i, j]
    timing[:, 1] = s[i, j]
    timing[:, 2] = p[i, j]
    timing[:, 3] = f[i, j]
    return picks, timing


def features(busy, picks, timing, J, horizon, l_max):
    out = np.zeros((N_RULES + 1, l_max))
    out[0, :J] = np.minimum(busy[:J] / horizon, 1.0)
    has = picks >= 0
    rows = np.nonzero(has)[0]
    out[rows + 1, picks[has] % J] = np.minimum((timing[has, 0] + timing[has, 2]) / horizon, 1.0)
    return out.ravel()


def mlp_forward(flat, dims, x):
    h = np.asarray(x, dtype=np.float64)
    off = 0
    n = len(dims) - 1
    for layer in range(n):
        n_in, n_out = int(dims[layer]), int(dims[layer + 1])
        W = flat[off:off + n_out * n_in].reshape(n_out, n_in)
        b = flat[off + n_out * n_in:off + n_out * n_in + n_out]
        off += n_out * n_in + n_out
        h = W @ h + b
        if layer < n - 1:
            h = np.tanh(h)
    return h


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def _rollout(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
             w_c, horizon, l_max, flat, dims, probs0, seed, t, k):
    J = proc.shape[1]
    last, avail, busy, remaining = last.copy(), avail.copy(), busy.copy(), remaining.copy()
    left = int(remaining.sum())
    rng = Stream(seed, t, k)
    a = sample_index(probs0, rng.random())
    first = a
    picks, timing = rule_picks(proc, elig, chg, setup, release, due, last, avail, remaining, w_c)
    while True:
        i, j = divmod(int(picks[a]), J)
        if timing[a, 3] - due[i] > 0.0:
            return first, -1
        last[j] = i
        avail[j] = timing[a, 3]
        busy[j] += timing[a, 0] + timing[a, 2]
        remaining[i] = False
        left -= 1
        if left == 0:
            return first, 1
        picks, timing = rule_picks(proc, elig, chg, setup, release, due, last, avail, remaining, w_c)
        x = features(busy, picks, timing, J, horizon, l_max)
        probs = softmax(mlp_forward(flat, dims, x))
        a = sample_index(probs, rng.random())


def shield_rollouts(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
                    w_c, horizon, l_max, flat, dims, probs0, seed, t, K, parallel=False):
    args = (proc, elig, chg, setup, release, due, last, avail, busy, remaining,
            float(w_c), float(horizon), int(l_max), flat, dims, probs0, int(seed), int(t))
    if parallel:
        with ThreadPoolExecutor() as ex:
            res = list(ex.map(lambda k: _rollout(*args, k), range(K)))
    else:
        res = [_rollout(*args, k) for k in range(K)]
    first = np.array([r[0] for r in res], dtype=np.int64)
    outcome = np.array([r[1] for r in res], dtype=np.int64)
    return first, outcome


def stream_seed(seed, step, index):
    from ..rng import stream_seed as _s

    return _s(int(seed), int(step), int(index))
