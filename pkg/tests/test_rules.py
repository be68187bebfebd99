import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexline.env import check_constraints, is_terminal, make_candidate, reset, step
from flexline.instance import generate
from flexline.rules import N_ACTIONS, Rule, action_mask, enumerate_candidates, run_rule, select

from conftest import specs

W_C = 2.0


def brute_force(rule, state):
    """Extremal candidate by explicit key comparison; ties go to the lowest (job, line)."""
    due = state.instance.arrays.due
    keys = {
        Rule.SCT: lambda c: c.changeover_hours,
        Rule.SPT: lambda c: c.processing_hours,
        Rule.STCT: lambda c: c.changeover_hours + c.processing_hours,
        Rule.SWTCT: lambda c: W_C * c.changeover_hours + c.processing_hours,
        Rule.LPT: lambda c: -c.processing_hours,
        Rule.LTCT: lambda c: -(c.changeover_hours + c.processing_hours),
        Rule.EDD: lambda c: (due[c.job], c.completion_hours),
        Rule.ECT: lambda c: c.completion_hours,
        Rule.EST: lambda c: c.start_hours,
        Rule.SRT: lambda c: due[c.job] - c.completion_hours,
    }
    key = keys[rule]
    best = None
    for c in enumerate_candidates(state):  # job-major order, strict improvement only
        if best is None or key(c) < key(best):
            best = c
    return best


def random_state(inst, rng, steps):
    s = reset(inst)
    for _ in range(steps):
        if is_terminal(s):
            break
        cands = enumerate_candidates(s)
        s, _ = step(s, cands[rng.integers(len(cands))])
    return s


def test_rule_order():
    assert [r.name for r in Rule] == ["SCT", "SPT", "STCT", "SWTCT", "LPT", "LTCT", "EDD", "ECT", "EST", "SRT"]
    assert N_ACTIONS == 10


def test_parse_case_insensitive():
    assert Rule.parse("swtct") is Rule.SWTCT
    with pytest.raises(ValueError, match="unknown rule"):
        Rule.parse("FIFO")


def test_candidate_enumeration(tiny):
    s = reset(tiny)
    assert [(c.job, c.line) for c in enumerate_candidates(s)] == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    s, _ = step(s, make_candidate(s, 0, 0))
    assert len(enumerate_candidates(s)) == 4


def test_single_candidate(tiny):
    import dataclasses
    inst = dataclasses.replace(tiny, jobs=tiny.jobs[:1], rate=tiny.rate[:1], eligible=np.array([[False, True]]),
                               changeover=tiny.changeover[:2, :1])
    assert len(enumerate_candidates(reset(inst))) == 1


def test_tiny_selections(tiny):
    s = reset(tiny)
    c = select(Rule.SPT, s)
    assert (c.job, c.line, c.processing_hours) == (2, 1, 3.0)
    c = select(Rule.SCT, s)
    assert (c.job, c.line) == (0, 0)
    c = select(Rule.LPT, s)
    assert (c.job, c.line, c.processing_hours) == (1, 1, 20.0)


def test_mask(tiny):
    s = reset(tiny)
    assert action_mask(s).tolist() == [True] * 10
    for job, line in ((1, 1), (0, 0), (2, 0)):
        s, _ = step(s, make_candidate(s, job, line))
    assert action_mask(s).tolist() == [False] * 10
    with pytest.raises(Exception):
        select(Rule.SCT, s)


@settings(max_examples=80)
@given(specs(max_jobs=9), st.integers(0, 2**32 - 1), st.integers(0, 8))
def test_select_matches_brute_force(spec, seed, steps):
    inst = generate(spec)
    s = random_state(inst, np.random.default_rng(seed), steps)
    if is_terminal(s):
        return
    cands = enumerate_candidates(s)
    for rule in Rule:
        got = select(rule, s)
        assert got in cands
        assert got == brute_force(rule, s), rule.name
        assert select(rule, s) == got


@settings(max_examples=25)
@given(specs())
def test_every_rule_yields_feasible_schedules(spec):
    inst = generate(spec)
    for rule in Rule:
        final = run_rule(inst, rule)
        assert is_terminal(final)
        assert check_constraints(inst, final.schedule()).ok
