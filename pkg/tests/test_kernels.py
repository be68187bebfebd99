import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexline import kernels, nn
from flexline.env import is_terminal, reset, step
from flexline.instance import GeneratorSpec, generate
from flexline.rng import Stream, sample_index, stream_seed
from flexline.rules import candidate_from_pick, enumerate_candidates

from conftest import specs

NB = kernels.get_backend("numba")
NP = kernels.get_backend("numpy")


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("FLEXLINE_BACKEND", "numpy")
    assert kernels.backend_name() == "numpy"
    monkeypatch.setenv("FLEXLINE_BACKEND", "numba")
    assert kernels.backend_name() == "numba"
    with pytest.raises(ValueError):
        kernels.get_backend("cuda")


def test_stream_seed_matches_kernel():
    for args in [(0, 0, 0), (7, 3, 1199), (2**64 - 1, 60, 5)]:
        assert int(NB.stream_seed(*(np.uint64(v) for v in args))) == stream_seed(*args)
        assert NP.stream_seed(*args) == stream_seed(*args)


def test_stream_uniformity():
    u = np.array([Stream(3, 0, k).random() for k in range(4000)])
    assert ((0 <= u) & (u < 1)).all()
    assert abs(u.mean() - 0.5) < 4 * (1 / np.sqrt(12 * 4000))


def test_sample_index_skips_zeros():
    p = np.array([0.0, 0.5, 0.0, 0.5])
    assert sample_index(p, 0.0) == 1 and sample_index(p, 0.7) == 3
    assert sample_index(p, 1.0) == 3


def _state(spec, seed, steps):
    inst = generate(spec)
    s = reset(inst)
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        if is_terminal(s):
            break
        c = enumerate_candidates(s)
        s, _ = step(s, c[rng.integers(len(c))])
    return s


@settings(max_examples=60)
@given(specs(), st.integers(0, 2**32 - 1), st.integers(0, 10))
def test_backends_agree_on_picks_and_features(spec, seed, steps):
    s = _state(spec, seed, steps)
    a = s.instance.arrays
    args = (a.proc, a.eligible, a.changeover, a.setup, a.release, a.due, s.last, s.avail, s.remaining, 2.0)
    f1, t1 = NB.rule_picks(*args)
    f2, t2 = NP.rule_picks(*args)
    assert np.array_equal(f1, f2)
    assert np.array_equal(t1[f1 >= 0], t2[f2 >= 0])
    x1 = NB.features(s.busy, f1, t1, s.instance.num_lines, a.horizon, 6)
    x2 = NP.features(s.busy, f2, t2, s.instance.num_lines, a.horizon, 6)
    assert np.array_equal(x1, x2)


def test_mlp_forward_matches_nn():
    desc = nn.Descriptor(16, (8, 8), 10)
    p = nn.init(desc, 4)
    x = np.random.default_rng(1).random(16)
    for kb in (NB, NP):
        z = kb.mlp_forward(p.flat(), p.dims_array(), x)
        assert np.allclose(z, nn.logits(p, x), rtol=1e-12, atol=1e-14)


def _rollout_args(inst, policy, seed, K):
    s = reset(inst)
    a = inst.arrays
    from flexline.a2c import observe
    _, x = observe(s, 8, 2.0)
    probs = nn.policy_forward(policy, x)
    return (a.proc, a.eligible, a.changeover, a.setup, a.release, a.due, s.last, s.avail, s.busy,
            s.remaining, 2.0, a.horizon, 8, policy.flat(), policy.dims_array(), probs, seed, 0, K)


def test_rollouts_identical_across_backends_and_reference():
    from flexline import shield
    inst = generate(GeneratorSpec(14, 3, 3, seed=2, lot_range=(5, 20)))
    policy = nn.init(nn.Descriptor(88, (16,), 10), 3)
    args = _rollout_args(inst, policy, 11, 64)
    f1, o1 = NB.shield_rollouts(*args, False)
    f2, o2 = NB.shield_rollouts(*args, True)
    f3, o3 = NP.shield_rollouts(*args, False)
    f4, o4 = NP.shield_rollouts(*args, True)
    for f, o in ((f2, o2), (f3, o3), (f4, o4)):
        assert np.array_equal(f1, f) and np.array_equal(o1, o)
    s = reset(inst)
    for k in (0, 17, 63):
        first, u = shield.rollout(s, policy, Stream(11, 0, k))
        assert (first, u) == (f1[k], o1[k])
    assert set(np.unique(o1)) <= {-1, 1}
