"""numba-compiled kernels. Scalar loops; same contracts as ``_numpy``."""
import numpy as np
from numba import njit, prange

N_RULES = 10

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 2.0 ** -53


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_seed(seed, step, index):
    s = _mix64(np.uint64(seed) + _GOLDEN)
    s = _mix64((s ^ np.uint64(step)) + _GOLDEN)
    return _mix64((s ^ np.uint64(index)) + _GOLDEN)


@njit(cache=True)
def _next_uniform(state):
    state = state + _GOLDEN
    return state, np.float64(_mix64(state) >> _S11) * _TO_UNIT


@njit(cache=True)
def _sample(probs, u):
    c = 0.0
    last = -1
    for a in range(probs.shape[0]):
        p = probs[a]
        if p > 0.0:
            c += p
            last = a
            if u < c:
                return a
    return last


@njit(cache=True)
def rule_picks(proc, elig, chg, setup, release, due, last, avail, remaining, w_c):
    """Resolve all ten dispatching rules in one pass over the candidates.

    Returns ``picks`` (flat ``job * J + line``, -1 when nothing is left) and
    ``timing`` rows of (changeover, start, processing, completion).
    """
    I, J = proc.shape
    picks = np.full(N_RULES, -1, np.int64)
    timing = np.zeros((N_RULES, 4))
    key = np.empty(N_RULES)
    key2 = np.inf  # EDD secondary key
    for i in range(I):
        if not remaining[i]:
            continue
        for j in range(J):
            if not elig[i, j]:
                continue
            c = chg[last[j] + 1, i, j]
            s = avail[j] + c
            if release[i] > s:
                s = release[i]
            if last[j] < 0 and setup[j] + c > s:
                s = setup[j] + c
            p = proc[i, j]
            f = s + p
            flat = i * J + j
            first = picks[0] < 0
            cp = c + p
            # strict comparisons keep the lowest (job, line) on ties
            if first or c < key[0]:
                key[0] = c; picks[0] = flat
            if first or p < key[1]:
                key[1] = p; picks[1] = flat
            if first or cp < key[2]:
                key[2] = cp; picks[2] = flat
            wk = w_c * c + p
            if first or wk < key[3]:
                key[3] = wk; picks[3] = flat
            if first or p > key[4]:
                key[4] = p; picks[4] = flat
            if first or cp > key[5]:
                key[5] = cp; picks[5] = flat
            if first or due[i] < key[6] or (due[i] == key[6] and f < key2):
                key[6] = due[i]; key2 = f; picks[6] = flat
            if first or f < key[7]:
                key[7] = f; picks[7] = flat
            if first or s < key[8]:
                key[8] = s; picks[8] = flat
            sl = due[i] - f
            if first or sl < key[9]:
                key[9] = sl; picks[9] = flat
    for r in range(N_RULES):
        flat = picks[r]
        if flat < 0:
            continue
        i = flat // J
        j = flat - i * J
        c = chg[last[j] + 1, i, j]
        s = avail[j] + c
        if release[i] > s:
            s = release[i]
        if last[j] < 0 and setup[j] + c > s:
            s = setup[j] + c
        timing[r, 0] = c
        timing[r, 1] = s
        timing[r, 2] = proc[i, j]
        timing[r, 3] = s + proc[i, j]
    return picks, timing


@njit(cache=True)
def features(busy, picks, timing, J, horizon, l_max):
    out = np.zeros((N_RULES + 1) * l_max)
    for j in range(J):
        v = busy[j] / horizon
        out[j] = v if v < 1.0 else 1.0
    for r in range(N_RULES):
        if picks[r] >= 0:
            j = picks[r] % J
            v = (timing[r, 0] + timing[r, 2]) / horizon
            out[(r + 1) * l_max + j] = v if v < 1.0 else 1.0
    return out


@njit(cache=True)
def mlp_forward(flat, dims, x):
    h = x.copy()
    off = 0
    n_layers = dims.shape[0] - 1
    for layer in range(n_layers):
        n_in = dims[layer]
        n_out = dims[layer + 1]
        out = np.empty(n_out)
        for o in range(n_out):
            acc = 0.0
            base = off + o * n_in
            for k in range(n_in):
                acc += flat[base + k] * h[k]
            out[o] = acc + flat[off + n_out * n_in + o]
        off += n_out * n_in + n_out
        if layer < n_layers - 1:
            for o in range(n_out):
                out[o] = np.tanh(out[o])
        h = out
    return h


@njit(cache=True)
def softmax(z):
    m = z[0]
    for a in range(1, z.shape[0]):
        if z[a] > m:
            m = z[a]
    e = np.empty(z.shape[0])
    s = 0.0
    for a in range(z.shape[0]):
        e[a] = np.exp(z[a] - m)
        s += e[a]
    for a in range(z.shape[0]):
        e[a] /= s
    return e


@njit(cache=True)
def _rollout(proc, elig, chg, setup, release, due, last0, avail0, busy0, remaining0,
             w_c, horizon, l_max, flat, dims, probs0, seed, t, k):
    I, J = proc.shape
    last = last0.copy()
    avail = avail0.copy()
    busy = busy0.copy()
    remaining = remaining0.copy()
    left = 0
    for i in range(I):
        if remaining[i]:
            left += 1
    state = stream_seed(seed, t, k)
    state, u = _next_uniform(state)
    a = _sample(probs0, u)
    first = a
    picks, timing = rule_picks(proc, elig, chg, setup, release, due, last, avail, remaining, w_c)
    while True:
        flat_ij = picks[a]
        i = flat_ij // J
        j = flat_ij - i * J
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
        state, u = _next_uniform(state)
        a = _sample(probs, u)


@njit(cache=True)
def _rollouts_serial(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
                     w_c, horizon, l_max, flat, dims, probs0, seed, t, K):
    first = np.empty(K, np.int64)
    outcome = np.empty(K, np.int64)
    for k in range(K):
        first[k], outcome[k] = _rollout(proc, elig, chg, setup, release, due, last, avail, busy,
                                        remaining, w_c, horizon, l_max, flat, dims, probs0, seed, t, k)
    return first, outcome


@njit(cache=True, parallel=True)
def _rollouts_parallel(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
                       w_c, horizon, l_max, flat, dims, probs0, seed, t, K):
    first = np.empty(K, np.int64)
    outcome = np.empty(K, np.int64)
    for k in prange(K):
        a, o = _rollout(proc, elig, chg, setup, release, due, last, avail, busy,
                        remaining, w_c, horizon, l_max, flat, dims, probs0, seed, t, k)
        first[k] = a
        outcome[k] = o
    return first, outcome


def shield_rollouts(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
                    w_c, horizon, l_max, flat, dims, probs0, seed, t, K, parallel=False):
    fn = _rollouts_parallel if parallel else _rollouts_serial
    return fn(proc, elig, chg, setup, release, due, last, avail, busy, remaining,
              float(w_c), float(horizon), int(l_max), flat, dims, probs0,
              np.uint64(seed), np.uint64(t), int(K))
