import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from flexline.env import is_terminal, reset, step
from flexline.instance import GeneratorSpec, generate, tiny1
from flexline.rules import enumerate_candidates

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def tiny():
    return tiny1()


@st.composite
def specs(draw, max_jobs=12, max_lines=4, max_days=4):
    J = draw(st.integers(1, max_lines))
    lo = draw(st.integers(1, J))
    hi = draw(st.integers(lo, J + 2))
    return GeneratorSpec(
        num_jobs=draw(st.integers(1, max_jobs)),
        num_lines=J,
        horizon_days=draw(st.integers(1, max_days)),
        flexibility_range=(lo, hi),
        seed=draw(st.integers(0, 2**64 - 1)),
    )


def random_rollout(inst, rng):
    """Uniformly random feasible dispatch to the end; returns the final state."""
    state = reset(inst)
    while not is_terminal(state):
        cands = enumerate_candidates(state)
        state, _ = step(state, cands[rng.integers(len(cands))])
    return state


@pytest.fixture
def rollout():
    return random_rollout


def small_instance(seed, jobs=6, lines=2, days=2, **kw):
    return generate(GeneratorSpec(jobs, lines, days, seed=seed, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {
    1: "gradient correctness",
    2: "simulator and LP agree",
    3: "oracle optimality",
    4: "reward accounting",
    5: "metric identities",
    6: "desk-scale convergence",
    7: "shield effectiveness",
    8: "shield performance and parallel identity",
    9: "CLI determinism",
    10: "shield score unit suite",
}


def pytest_terminal_summary(terminalreporter):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = rep.nodeid.rsplit("::", 1)[-1]
            if "test_acceptance.py" not in rep.nodeid or not name.startswith("test_criterion_"):
                continue
            k = int(name.split("_")[2])
            if rep.when == "call" or outcome != "passed":
                verdicts[k] = "PASS" if outcome == "passed" and verdicts.get(k) != "FAIL" else "FAIL"
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {k:2d} {verdicts.get(k, 'NOT RUN'):7s} {_CRITERIA[k]}")
