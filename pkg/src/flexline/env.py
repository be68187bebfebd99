"""Residual-scheduling environment.

Jobs are dispatched one at a time onto the end of a line's sequence, each
at its earliest feasible start.  States are values: :func:`step` returns a
new state and never mutates its input, which is what lets the shield branch
thousands of rollouts off one committed state.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .instance import HOURS_PER_DAY, Instance, validate

DEFAULT_PENALTY = 0.28
_TOL = 1e-9


class DispatchError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    job: int
    line: int
    changeover_hours: float
    start_hours: float
    processing_hours: float
    completion_hours: float
    tardiness_hours: float


@dataclass(frozen=True)
class ScheduledTask:
    job: int
    line: int
    position: int
    changeover_hours: float
    start_hours: float
    processing_hours: float
    completion_hours: float
    tardiness_hours: float


@dataclass(frozen=True, eq=False)
class EnvState:
    instance: Instance
    last: np.ndarray  # (J,) last job per line, -1 if empty
    avail: np.ndarray  # (J,) completion of the last task, 0 if empty
    busy: np.ndarray  # (J,) accumulated changeover + processing
    remaining: np.ndarray  # (I,) bool
    tasks: tuple[ScheduledTask, ...] = ()
    overdue_count: int = 0
    changeover_total: float = 0.0
    tardiness_total: float = 0.0

    @property
    def step(self) -> int:
        return len(self.tasks)

    @property
    def remaining_jobs(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.remaining)]

    def line_count(self, line: int) -> int:
        return sum(1 for t in self.tasks if t.line == line)

    def schedule(self) -> list[ScheduledTask]:
        return sorted(self.tasks, key=lambda t: (t.line, t.position))

    def __eq__(self, other):
        if not isinstance(other, EnvState):
            return NotImplemented
        return (
            self.instance is other.instance
            and np.array_equal(self.last, other.last)
            and np.array_equal(self.avail, other.avail)
            and np.array_equal(self.busy, other.busy)
            and np.array_equal(self.remaining, other.remaining)
            and self.tasks == other.tasks
            and self.overdue_count == other.overdue_count
        )

    __hash__ = None


def reset(instance: Instance) -> EnvState:
    problems = validate(instance)
    if problems:
        raise DispatchError(f"invalid instance: {problems[0]}")
    J = instance.num_lines
    return EnvState(
        instance=instance,
        last=np.full(J, -1, dtype=np.int64),
        avail=np.zeros(J),
        busy=np.zeros(J),
        remaining=np.ones(instance.num_jobs, dtype=bool),
    )


def is_terminal(state: EnvState) -> bool:
    return not state.remaining.any()


def make_candidate(state: EnvState, job: int, line: int) -> Candidate:
    inst = state.instance
    if not 0 <= job < inst.num_jobs or not state.remaining[job]:
        raise DispatchError(f"job {job + 1} is not awaiting dispatch")
    if not 0 <= line < inst.num_lines or not inst.eligible[job, line]:
        raise DispatchError(f"job {job + 1} is not eligible on line {line + 1}")
    prev = int(state.last[line])
    changeover = float(inst.changeover[prev + 1, job, line])
    start = max(float(state.avail[line]) + changeover,
                HOURS_PER_DAY * (inst.jobs[job].demand_day - 1))
    if prev < 0:
        start = max(start, inst.lines[line].setup_hours + changeover)
    proc = inst.processing_hours(job, line)
    completion = start + proc
    tardiness = max(0.0, completion - HOURS_PER_DAY * inst.jobs[job].demand_day)
    return Candidate(job, line, changeover, start, proc, completion, tardiness)


def step(state: EnvState, cand: Candidate, penalty: float = DEFAULT_PENALTY) -> tuple[EnvState, float]:
    fresh = make_candidate(state, cand.job, cand.line)
    if fresh != cand:
        raise DispatchError("candidate timing does not match the current state")
    j, i = cand.line, cand.job
    last, avail, busy, remaining = (state.last.copy(), state.avail.copy(),
                                    state.busy.copy(), state.remaining.copy())
    last[j] = i
    avail[j] = cand.completion_hours
    busy[j] += cand.changeover_hours + cand.processing_hours
    remaining[i] = False
    task = ScheduledTask(i, j, state.line_count(j) + 1, cand.changeover_hours, cand.start_hours,
                         cand.processing_hours, cand.completion_hours, cand.tardiness_hours)
    late = cand.tardiness_hours > 0
    new = replace(
        state, last=last, avail=avail, busy=busy, remaining=remaining,
        tasks=state.tasks + (task,),
        overdue_count=state.overdue_count + int(late),
        changeover_total=state.changeover_total + cand.changeover_hours,
        tardiness_total=state.tardiness_total + cand.tardiness_hours,
    )
    return new, reward(cand, penalty)


def reward(cand: Candidate, penalty: float = DEFAULT_PENALTY) -> float:
    return 1.0 / (1.0 + cand.changeover_hours) - (penalty if cand.tardiness_hours > 0 else 0.0)


def totals(schedule) -> tuple[float, float]:
    """(total changeover hours, total tardiness hours) over ``schedule``."""
    return (math.fsum(t.changeover_hours for t in schedule),
            math.fsum(t.tardiness_hours for t in schedule))


# -- MILP feasibility ---------------------------------------------------------


# Constraint families of the position-based model, keyed as in the LP row names
# (e1..e10).  0 marks variable bounds.
FAMILIES = {
    0: "variable bounds",
    1: "at most one job per slot",
    2: "each job dispatched exactly once",
    3: "job only on eligible lines",
    4: "start no earlier than the demand day",
    5: "first slot starts after line setup",
    6: "tardiness at least completion minus due",
    7: "tardiness nonnegative",
    8: "changeover between consecutive slots",
    9: "initial changeover of the first slot",
    10: "next slot starts after completion plus changeover",
}


@dataclass(frozen=True)
class ConstraintViolation:
    equation: int  # key into FAMILIES
    job: int | None
    position: int | None
    line: int | None
    slack: float
    message: str


@dataclass
class Report:
    violations: list[ConstraintViolation] = field(default_factory=list)
    changeover_total: float = 0.0
    tardiness_total: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_equation(self) -> dict[int, list[ConstraintViolation]]:
        out: dict[int, list[ConstraintViolation]] = defaultdict(list)
        for v in self.violations:
            out[v.equation].append(v)
        return dict(out)

    def __str__(self) -> str:
        if self.ok:
            return "feasible"
        return "\n".join(f"eq{v.equation}: {v.message} (slack {v.slack:.6g})" for v in self.violations)


def check_constraints(instance: Instance, schedule) -> Report:
    """Check a schedule against the position-based MILP constraint families.

    Tardiness is recomputed from start times; recorded tardiness and
    completion fields are ignored.  Slots left empty between tasks are
    allowed, exactly as in the model.
    """
    rep = Report()
    I = instance.num_jobs
    arr = instance.arrays

    def bad(eq, t, slack, msg):
        pos = t.position if t is not None else None
        line = t.line + 1 if t is not None else None
        job = t.job + 1 if t is not None else None
        rep.violations.append(ConstraintViolation(eq, job, pos, line, slack, msg))

    def tol(*xs):
        return _TOL * max(1.0, *(abs(x) for x in xs))

    slots: dict[tuple[int, int], list[ScheduledTask]] = defaultdict(list)
    per_job = [0] * I
    for t in schedule:
        slots[(t.line, t.position)].append(t)
        per_job[t.job] += 1

    for (j, r), ts in sorted(slots.items()):
        if len(ts) > 1:  # family 1: one job per slot
            bad(1, ts[1], 1.0 - len(ts), f"slot {r} of line {j + 1} holds {len(ts)} jobs")
    for i, n in enumerate(per_job):  # family 2: each job dispatched once
        if n != 1:
            rep.violations.append(ConstraintViolation(2, i + 1, None, None, float(1 - n),
                                                      f"job {i + 1} dispatched {n} times"))

    ctot = []
    otot = []
    for t in schedule:
        i, j, r = t.job, t.line, t.position
        if not arr.eligible[i, j]:  # family 3: eligibility
            bad(3, t, -1.0, f"job {i + 1} is not eligible on line {j + 1}")
            continue
        if t.start_hours < 0 or t.changeover_hours < 0:
            bad(0, t, min(t.start_hours, t.changeover_hours), "negative start or changeover")
        slack = t.start_hours - arr.release[i]
        if slack < -tol(t.start_hours):  # family 4: not before the demand day
            bad(4, t, slack, f"job {i + 1} starts before its demand day")
        if r == 1:
            slack = t.start_hours - t.changeover_hours - arr.setup[j]
            if slack < -tol(t.start_hours):  # family 5: first slot waits for setup
                bad(5, t, slack, f"line {j + 1} starts before setup completes")
            slack = t.changeover_hours - arr.changeover[0, i, j]
            if slack < -tol(t.changeover_hours):  # family 9: initial changeover
                bad(9, t, slack, f"initial changeover of line {j + 1} too short")
        else:
            prev = slots.get((j, r - 1))
            if prev:
                need = arr.changeover[prev[0].job + 1, i, j]
                slack = t.changeover_hours - need
                if slack < -tol(t.changeover_hours):  # family 8: changeover between consecutive slots
                    bad(8, t, slack, f"changeover into slot {r} of line {j + 1} too short")
        nxt = slots.get((j, r + 1))
        if nxt:
            n = nxt[0]
            slack = n.start_hours - (t.start_hours + arr.proc[i, j] + n.changeover_hours)
            if slack < -tol(n.start_hours):  # family 10: slot order with changeover
                bad(10, t, slack, f"slot {r + 1} of line {j + 1} starts too early")
        ctot.append(t.changeover_hours)
        otot.append(max(0.0, t.start_hours + arr.proc[i, j] - arr.due[i]))  # families 6 and 7
    rep.changeover_total = math.fsum(ctot)
    rep.tardiness_total = math.fsum(otot)
    return rep


# -- schedule files -----------------------------------------------------------

_TASK_KEYS = ("job", "line", "position", "changeover_hours", "start_hours",
              "completion_hours", "tardiness_hours")


def schedule_to_json(schedule) -> str:
    rows = [
        {"job": t.job + 1, "line": t.line + 1, "position": t.position,
         "changeover_hours": t.changeover_hours, "start_hours": t.start_hours,
         "completion_hours": t.completion_hours, "tardiness_hours": t.tardiness_hours}
        for t in sorted(schedule, key=lambda t: (t.line, t.position))
    ]
    return json.dumps(rows, indent=1) + "\n"


def schedule_from_json(text: str, instance: Instance) -> list[ScheduledTask]:
    rows = json.loads(text)
    if not isinstance(rows, list):
        raise DispatchError("schedule file must hold a JSON array")
    out = []
    for n, row in enumerate(rows):
        if not isinstance(row, dict) or set(row) != set(_TASK_KEYS):
            raise DispatchError(f"task {n}: expected keys {', '.join(_TASK_KEYS)}")
        i, j = int(row["job"]) - 1, int(row["line"]) - 1
        if not (0 <= i < instance.num_jobs and 0 <= j < instance.num_lines):
            raise DispatchError(f"task {n}: job or line out of range")
        proc = instance.processing_hours(i, j) if instance.eligible[i, j] else math.nan
        out.append(ScheduledTask(i, j, int(row["position"]), float(row["changeover_hours"]),
                                 float(row["start_hours"]), proc, float(row["completion_hours"]),
                                 float(row["tardiness_hours"])))
    return out
