"""Problem data for distributed flexible assembly line scheduling.

Jobs are single indivisible work orders; each must be run on exactly one
eligible line inside its demand day.  Hours are the only time unit used
anywhere in the package (a day is 24 h).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

HOURS_PER_DAY = 24.0


class InstanceError(ValueError):
    """Raised for malformed instance files or invalid generator specs."""


@dataclass(frozen=True)
class Job:
    id: int
    demand_lot: float
    demand_day: int


@dataclass(frozen=True)
class Line:
    id: int
    setup_hours: float


@dataclass(frozen=True)
class Violation:
    field: str
    index: tuple
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable problem instance.

    ``changeover`` has shape (I+1, I, J): row 0 holds the initial changeover
    into a job on an empty line, row ``i + 1`` the changeover from job ``i``.
    Indices are 0-based internally and 1-based in files and reports.
    """

    jobs: tuple[Job, ...]
    lines: tuple[Line, ...]
    horizon_days: int
    rate: np.ndarray
    eligible: np.ndarray
    changeover: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for attr, dtype in (("rate", np.float64), ("eligible", bool), ("changeover", np.float64)):
            arr = np.array(getattr(self, attr), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "lines", tuple(self.lines))

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @property
    def num_lines(self) -> int:
        return len(self.lines)

    @property
    def horizon_hours(self) -> float:
        return HOURS_PER_DAY * self.horizon_days

    @cached_property
    def arrays(self) -> "InstanceArrays":
        return InstanceArrays.from_instance(self)

    def processing_hours(self, job: int, line: int) -> float:
        return float(self.jobs[job].demand_lot / self.rate[job, line])

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.jobs == other.jobs
            and self.lines == other.lines
            and self.horizon_days == other.horizon_days
            and self.rate.shape == other.rate.shape
            and self.changeover.shape == other.changeover.shape
            and np.array_equal(self.rate, other.rate)
            and np.array_equal(self.eligible, other.eligible)
            and np.array_equal(self.changeover, other.changeover)
        )

    __hash__ = None


@dataclass(frozen=True)
class InstanceArrays:
    """Flat numeric view of an instance consumed by the kernels."""

    proc: np.ndarray  # (I, J) hours, 0 where ineligible
    eligible: np.ndarray  # (I, J) bool
    changeover: np.ndarray  # (I+1, I, J)
    setup: np.ndarray  # (J,)
    release: np.ndarray  # (I,) 24 * (U - 1)
    due: np.ndarray  # (I,) 24 * U
    horizon: float

    @classmethod
    def from_instance(cls, inst: Instance) -> "InstanceArrays":
        I, J = inst.num_jobs, inst.num_lines
        lots = np.array([j.demand_lot for j in inst.jobs], dtype=np.float64)
        days = np.array([j.demand_day for j in inst.jobs], dtype=np.float64)
        proc = np.zeros((I, J))
        elig = inst.eligible.copy()
        for i in range(I):
            for j in range(J):
                if elig[i, j]:
                    proc[i, j] = lots[i] / inst.rate[i, j]
        return cls(
            proc=proc,
            eligible=elig,
            changeover=np.ascontiguousarray(inst.changeover, dtype=np.float64),
            setup=np.array([ln.setup_hours for ln in inst.lines], dtype=np.float64),
            release=HOURS_PER_DAY * (days - 1.0),
            due=HOURS_PER_DAY * days,
            horizon=inst.horizon_hours,
        )


def validate(inst: Instance) -> list[Violation]:
    out: list[Violation] = []
    I, J, D = inst.num_jobs, inst.num_lines, inst.horizon_days
    if not isinstance(D, (int, np.integer)) or D < 1:
        out.append(Violation("horizon_days", (), f"horizon_days must be a positive integer, got {D!r}"))
    for i, job in enumerate(inst.jobs):
        if job.id != i + 1:
            out.append(Violation("jobs.id", (i,), f"job {i + 1} has id {job.id}"))
        if not (math.isfinite(job.demand_lot) and job.demand_lot > 0):
            out.append(Violation("jobs.demand_lot", (i,), f"job {i + 1} demand_lot must be > 0"))
        if not 1 <= job.demand_day <= D:
            out.append(Violation("jobs.demand_day", (i,),
                                 f"job {i + 1} demand_day {job.demand_day} outside 1..{D}"))
    for j, line in enumerate(inst.lines):
        if line.id != j + 1:
            out.append(Violation("lines.id", (j,), f"line {j + 1} has id {line.id}"))
        if not (math.isfinite(line.setup_hours) and line.setup_hours >= 0):
            out.append(Violation("lines.setup_hours", (j,), f"line {j + 1} setup_hours must be >= 0"))
    if inst.rate.shape != (I, J):
        out.append(Violation("rate", (), f"rate has shape {inst.rate.shape}, expected {(I, J)}"))
        return out
    if inst.eligible.shape != (I, J):
        out.append(Violation("eligible", (), f"eligible has shape {inst.eligible.shape}, expected {(I, J)}"))
        return out
    if inst.changeover.shape != (I + 1, I, J):
        out.append(Violation("changeover", (),
                             f"changeover has shape {inst.changeover.shape}, expected {(I + 1, I, J)}"))
        return out
    for i in range(I):
        if not inst.eligible[i].any():
            out.append(Violation("eligible", (i,), f"job {i + 1} has no eligible line"))
        for j in range(J):
            r = inst.rate[i, j]
            if not math.isfinite(r) or r < 0:
                out.append(Violation("rate", (i, j), f"rate[{i + 1}][{j + 1}] must be finite and >= 0"))
            elif inst.eligible[i, j] and r <= 0:
                out.append(Violation("rate", (i, j),
                                     f"rate[{i + 1}][{j + 1}] must be > 0 on an eligible pair"))
    bad = ~np.isfinite(inst.changeover) | (inst.changeover < 0)
    for k, i, j in zip(*np.nonzero(bad)):
        out.append(Violation("changeover", (int(k), int(i), int(j)),
                             f"changeover[{k}][{i + 1}][{j + 1}] must be finite and >= 0"))
    return out


# -- generation ---------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    num_jobs: int
    num_lines: int
    horizon_days: int
    flexibility_range: tuple[int, int] = (1, 10)
    rate_range: tuple[float, float] = (5.0, 20.0)
    changeover_range: tuple[float, float] = (0.5, 6.0)
    initial_changeover_range: tuple[float, float] = (0.5, 3.0)
    setup_range: tuple[float, float] = (0.5, 2.0)
    lot_range: tuple[float, float] = (20.0, 300.0)
    seed: int = 0

    def check(self) -> None:
        for name in ("num_jobs", "num_lines", "horizon_days"):
            if int(getattr(self, name)) < 1:
                raise InstanceError(f"{name} must be a positive integer")
        for name in ("flexibility_range", "rate_range", "changeover_range",
                     "initial_changeover_range", "setup_range", "lot_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise InstanceError(f"{name} is empty: [{lo}, {hi}]")
        lo, _ = self.flexibility_range
        if lo < 1:
            raise InstanceError("flexibility_range lower bound must be >= 1")
        if lo > self.num_lines:
            raise InstanceError(
                f"flexibility_range lower bound {lo} exceeds num_lines {self.num_lines}")
        if self.rate_range[0] <= 0:
            raise InstanceError("rate_range must be strictly positive")
        if self.lot_range[0] <= 0:
            raise InstanceError("lot_range must be strictly positive")
        if min(self.changeover_range[0], self.initial_changeover_range[0], self.setup_range[0]) < 0:
            raise InstanceError("time ranges must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InstanceError("seed must be a 64-bit unsigned integer")

    def effective_flexibility(self) -> tuple[int, int]:
        lo, hi = self.flexibility_range
        return int(lo), int(min(hi, self.num_lines))

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        kw = dict(d)
        for k in list(kw):
            if k.endswith("_range"):
                kw[k] = tuple(kw[k])
        return cls(**kw)


def generate(spec: GeneratorSpec) -> Instance:
    """Draw a seeded instance; all draws are uniform within the configured intervals."""
    spec.check()
    rng = np.random.default_rng(int(spec.seed))
    I, J, D = int(spec.num_jobs), int(spec.num_lines), int(spec.horizon_days)
    flo, fhi = spec.effective_flexibility()
    if fhi < spec.flexibility_range[1]:
        log.info("flexibility upper bound clamped from %d to %d lines", spec.flexibility_range[1], fhi)

    eligible = np.zeros((I, J), dtype=bool)
    counts = rng.integers(flo, fhi + 1, size=I)
    for i in range(I):
        eligible[i, rng.choice(J, size=int(counts[i]), replace=False)] = True
    rate = np.where(eligible, rng.uniform(*spec.rate_range, size=(I, J)), 0.0)
    lots = rng.uniform(*spec.lot_range, size=I)
    days = rng.integers(1, D + 1, size=I)
    changeover = np.empty((I + 1, I, J))
    changeover[0] = rng.uniform(*spec.initial_changeover_range, size=(I, J))
    changeover[1:] = rng.uniform(*spec.changeover_range, size=(I, I, J))
    setup = rng.uniform(*spec.setup_range, size=J)

    return Instance(
        jobs=tuple(Job(i + 1, float(lots[i]), int(days[i])) for i in range(I)),
        lines=tuple(Line(j + 1, float(setup[j])) for j in range(J)),
        horizon_days=D,
        rate=rate,
        eligible=eligible,
        changeover=changeover,
    )


def tiny1() -> Instance:
    """Three jobs on two lines over two days; the shared test fixture."""
    I, J = 3, 2
    changeover = np.full((I + 1, I, J), 2.0)
    changeover[0] = 1.0
    return Instance(
        jobs=(Job(1, 40.0, 1), Job(2, 200.0, 1), Job(3, 30.0, 2)),
        lines=(Line(1, 1.0), Line(2, 1.0)),
        horizon_days=2,
        rate=np.array([[10.0, 8.0], [12.0, 10.0], [6.0, 10.0]]),
        eligible=np.ones((I, J), dtype=bool),
        changeover=changeover,
        name="tiny1",
    )


# -- serialization ------------------------------------------------------------

_KEYS = ("jobs", "lines", "horizon_days", "rate", "eligible", "changeover")


def to_dict(inst: Instance) -> dict:
    return {
        "jobs": [{"id": j.id, "demand_lot": j.demand_lot, "demand_day": j.demand_day} for j in inst.jobs],
        "lines": [{"id": ln.id, "setup_hours": ln.setup_hours} for ln in inst.lines],
        "horizon_days": inst.horizon_days,
        "rate": inst.rate.tolist(),
        "eligible": inst.eligible.tolist(),
        "changeover": inst.changeover.tolist(),
    }


def save(inst: Instance) -> str:
    # json emits repr() floats, which round-trip exactly
    return json.dumps(to_dict(inst), indent=1) + "\n"


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise InstanceError(f"{where}: {msg}")


def _number(x, where: str) -> float:
    _require(isinstance(x, (int, float)) and not isinstance(x, bool), where, "expected a number")
    return float(x)


def _integer(x, where: str) -> int:
    _require(isinstance(x, int) and not isinstance(x, bool), where, "expected an integer")
    return int(x)


def from_dict(d: dict, name: str = "") -> Instance:
    _require(isinstance(d, dict), "<root>", "expected a JSON object")
    for k in _KEYS:
        _require(k in d, k, "missing required field")
    extra = set(d) - set(_KEYS)
    _require(not extra, ",".join(sorted(extra)), "unexpected field")

    jobs = []
    _require(isinstance(d["jobs"], list), "jobs", "expected an array")
    for n, rec in enumerate(d["jobs"]):
        where = f"jobs[{n}]"
        _require(isinstance(rec, dict) and set(rec) == {"id", "demand_lot", "demand_day"},
                 where, "expected {id, demand_lot, demand_day}")
        jobs.append(Job(_integer(rec["id"], where + ".id"),
                        _number(rec["demand_lot"], where + ".demand_lot"),
                        _integer(rec["demand_day"], where + ".demand_day")))
    lines = []
    _require(isinstance(d["lines"], list), "lines", "expected an array")
    for n, rec in enumerate(d["lines"]):
        where = f"lines[{n}]"
        _require(isinstance(rec, dict) and set(rec) == {"id", "setup_hours"},
                 where, "expected {id, setup_hours}")
        lines.append(Line(_integer(rec["id"], where + ".id"),
                          _number(rec["setup_hours"], where + ".setup_hours")))
    horizon = _integer(d["horizon_days"], "horizon_days")
    I, J = len(jobs), len(lines)

    def matrix(key, shape, conv):
        def walk(x, dims, where):
            if not dims:
                return conv(x, where)
            _require(isinstance(x, list) and len(x) == dims[0], where,
                     f"expected an array of length {dims[0]}")
            return [walk(v, dims[1:], f"{where}[{k}]") for k, v in enumerate(x)]
        return walk(d[key], shape, key)

    def boolean(x, where):
        _require(isinstance(x, bool), where, "expected a boolean")
        return x

    rate = np.array(matrix("rate", (I, J), _number), dtype=np.float64).reshape(I, J)
    eligible = np.array(matrix("eligible", (I, J), boolean), dtype=bool).reshape(I, J)
    changeover = np.array(matrix("changeover", (I + 1, I, J), _number), dtype=np.float64).reshape(I + 1, I, J)
    inst = Instance(tuple(jobs), tuple(lines), horizon, rate, eligible, changeover, name=name)
    problems = validate(inst)
    if problems:
        first = problems[0]
        raise InstanceError(f"{first.field}: {first.message}")
    return inst


def load(text: str, name: str = "") -> Instance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"line {e.lineno}: {e.msg}") from None
    return from_dict(d, name=name)


def read(path) -> Instance:
    from pathlib import Path

    p = Path(path)
    return load(p.read_text(encoding="utf-8"), name=p.stem)


def write(inst: Instance, path) -> None:
    from pathlib import Path

    Path(path).write_text(save(inst), encoding="utf-8")
