"""Position-based MILP export (CPLEX LP text) and an exhaustive exact oracle.

Variables, 1-based: ``a_i_r_j`` (job i is the r-th task of line j),
``s_r_j`` (start), ``t_r_j`` (changeover) and ``o_i_r_j`` (overtime).
Binaries exist only for eligible (job, line) pairs.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .env import ScheduledTask, check_constraints, totals
from .instance import Instance, validate


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class MilpExportConfig:
    objective: str = "weighted"  # weighted | lex1 | lex2
    w1: float = 1.0
    w2: float = 1.0
    obj1_bound: float | None = None
    epsilon: float = 1e-6
    positions: int | None = None  # R; defaults to the job count
    big_m: float | None = None  # None = auto

    def __post_init__(self):
        if self.objective not in ("weighted", "lex1", "lex2"):
            raise ExportError(f"unknown objective mode {self.objective!r}")
        if self.w1 < 0 or self.w2 < 0:
            raise ExportError("objective weights must be non-negative")
        if self.objective == "lex2" and self.obj1_bound is None:
            raise ExportError("lex2 needs obj1_bound from the stage-1 solve")


def auto_big_m(instance: Instance) -> float:
    """An upper bound on any start or completion time a schedule can need."""
    a = instance.arrays
    longest = math.fsum(max(a.proc[i, j] for j in range(instance.num_lines) if a.eligible[i, j])
                        for i in range(instance.num_jobs))
    max_c = float(a.changeover.max()) if a.changeover.size else 0.0
    max_setup = float(a.setup.max()) if a.setup.size else 0.0
    return a.horizon + longest + instance.num_jobs * max_c + max_setup


def _num(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _expr(terms) -> str:
    out = []
    for coef, var in terms:
        coef = float(coef)
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1.0 else f"{_num(mag)} {var}"
        out.append(f"{sign} {body}" if out or sign == "-" else body)
    return " ".join(out) if out else "0 " + "dummy"


def export_lp(instance: Instance, config: MilpExportConfig = MilpExportConfig()) -> str:
    problems = validate(instance)
    if problems:
        raise ExportError(f"invalid instance: {problems[0]}")
    I, J = instance.num_jobs, instance.num_lines
    R = config.positions if config.positions is not None else I
    if R * J < I:
        raise ExportError(f"{R} positions on {J} lines cannot hold {I} jobs")
    M = auto_big_m(instance) if config.big_m is None else float(config.big_m)
    if M <= instance.horizon_hours:
        raise ExportError("big-M must exceed the horizon")
    arr = instance.arrays
    elig = [[bool(arr.eligible[i, j]) for j in range(J)] for i in range(I)]
    rs = range(1, R + 1)

    def a(i, r, j):
        return f"a_{i + 1}_{r}_{j + 1}"

    def s(r, j):
        return f"s_{r}_{j + 1}"

    def t(r, j):
        return f"t_{r}_{j + 1}"

    def o(i, r, j):
        return f"o_{i + 1}_{r}_{j + 1}"

    sum_t = [(1.0, t(r, j)) for j in range(J) for r in rs]
    sum_o = [(1.0, o(i, r, j)) for i in range(I) for j in range(J) if elig[i][j] for r in rs]

    lines = ["\\ position-based assignment model", "Minimize"]
    if config.objective == "weighted":
        obj = [(config.w1 * c, v) for c, v in sum_t] + [(config.w2 * c, v) for c, v in sum_o]
    elif config.objective == "lex1":
        obj = sum_t
    else:
        obj = sum_o
    lines.append(" obj: " + _expr(obj))
    lines.append("Subject To")
    rows = []

    for j in range(J):  # family 1: one job per slot
        for r in rs:
            terms = [(1.0, a(i, r, j)) for i in range(I) if elig[i][j]]
            if terms:
                rows.append(f"e1_r{r}_j{j + 1}: {_expr(terms)} <= 1")
    for i in range(I):  # family 2: each job dispatched once
        terms = [(1.0, a(i, r, j)) for j in range(J) if elig[i][j] for r in rs]
        rows.append(f"e2_i{i + 1}: {_expr(terms)} = 1")
    for i in range(I):  # family 3: eligibility
        for j in range(J):
            if elig[i][j]:
                rows.append(f"e3_i{i + 1}_j{j + 1}: {_expr([(1.0, a(i, r, j)) for r in rs])} <= 1")
    for i in range(I):  # family 4: not before the demand day
        for j in range(J):
            if elig[i][j]:
                for r in rs:
                    rows.append(f"e4_i{i + 1}_r{r}_j{j + 1}: {_expr([(1.0, s(r, j)), (-M, a(i, r, j))])}"
                                f" >= {_num(arr.release[i] - M)}")
    for j in range(J):  # family 5: first slot waits for setup
        rows.append(f"e5_j{j + 1}: {_expr([(1.0, s(1, j)), (-1.0, t(1, j))])} >= {_num(arr.setup[j])}")
    for i in range(I):  # family 6: tardiness definition
        for j in range(J):
            if elig[i][j]:
                for r in rs:
                    terms = [(1.0, s(r, j)), (arr.proc[i, j] + M, a(i, r, j)), (-1.0, o(i, r, j))]
                    rows.append(f"e6_i{i + 1}_r{r}_j{j + 1}: {_expr(terms)} <= {_num(arr.due[i] + M)}")
    # family 7 (nonnegativity) lives in the Bounds section
    for j in range(J):  # family 8: changeover from the job at r-1 (k) to the job at r (i)
        for r in range(2, R + 1):
            for i in range(I):
                if not elig[i][j]:
                    continue
                for k in range(I):
                    if k == i or not elig[k][j]:
                        continue
                    terms = [(1.0, t(r, j)), (-M, a(i, r, j)), (-M, a(k, r - 1, j))]
                    rows.append(f"e8_i{i + 1}_k{k + 1}_r{r}_j{j + 1}: {_expr(terms)}"
                                f" >= {_num(arr.changeover[k + 1, i, j] - 2 * M)}")
    for i in range(I):  # family 9: initial changeover
        for j in range(J):
            if elig[i][j]:
                rows.append(f"e9_i{i + 1}_j{j + 1}: {_expr([(1.0, t(1, j)), (-M, a(i, 1, j))])}"
                            f" >= {_num(arr.changeover[0, i, j] - M)}")
    for i in range(I):  # family 10: slot order with changeover
        for j in range(J):
            if elig[i][j]:
                for r in range(1, R):
                    terms = [(1.0, s(r, j)), (arr.proc[i, j] + M, a(i, r, j)),
                             (1.0, t(r + 1, j)), (-1.0, s(r + 1, j))]
                    rows.append(f"e10_i{i + 1}_r{r}_j{j + 1}: {_expr(terms)} <= {_num(M)}")
    if config.objective == "lex2":
        rows.append(f"obj1_bound: {_expr(sum_t)} <= {_num(config.obj1_bound + config.epsilon)}")
    lines.extend(" " + row for row in rows)

    lines.append("Bounds")
    for j in range(J):
        for r in rs:
            lines.append(f" {s(r, j)} >= 0")
            lines.append(f" {t(r, j)} >= 0")
    for i in range(I):
        for j in range(J):
            if elig[i][j]:
                for r in rs:
                    lines.append(f" {o(i, r, j)} >= 0")
    lines.append("Binaries")
    for i in range(I):
        for j in range(J):
            if elig[i][j]:
                for r in rs:
                    lines.append(f" {a(i, r, j)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# -- mechanical substitution --------------------------------------------------

_ROW = re.compile(r"^\s*([A-Za-z_][\w.]*):\s*(.*?)\s*(<=|>=|=)\s*(\S+)\s*$")
_TERM = re.compile(r"([+-])?\s*([0-9.eE+-]+(?:\s+))?([A-Za-z_][\w.]*)")


@dataclass
class LpModel:
    objective: list[tuple[float, str]] = field(default_factory=list)
    rows: list[tuple[str, list[tuple[float, str]], str, float]] = field(default_factory=list)
    lower: dict[str, float] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)

    @property
    def variables(self) -> set[str]:
        vs = {v for _, v in self.objective}
        for _, terms, _, _ in self.rows:
            vs.update(v for _, v in terms)
        return vs | set(self.lower) | set(self.binaries)


def _parse_terms(text: str) -> list[tuple[float, str]]:
    terms = []
    tokens = text.split()
    k = 0
    sign = 1.0
    while k < len(tokens):
        tok = tokens[k]
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            k += 1
            continue
        try:
            coef = float(tok)
            var = tokens[k + 1]
            k += 2
        except ValueError:
            coef, var = 1.0, tok
            k += 1
        terms.append((sign * coef, var))
        sign = 1.0
    return terms


def parse_lp(text: str) -> LpModel:
    model = LpModel()
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            model.objective = _parse_terms(line.split(":", 1)[1])
        elif section == "subject to":
            m = _ROW.match(line)
            if not m:
                raise ValueError(f"cannot parse constraint row: {line}")
            name, lhs, sense, rhs = m.groups()
            model.rows.append((name, _parse_terms(lhs), sense, float(rhs)))
        elif section == "bounds":
            var, _, val = line.split()
            model.lower[var] = float(val)
        elif section == "binaries":
            model.binaries.extend(line.split())
    return model


def evaluate_lp(text: str, values: dict[str, float], tol: float = 1e-7) -> list[str]:
    """Names of rows, bounds or integrality conditions violated by ``values``.

    Variables absent from ``values`` are taken as 0.
    """
    model = parse_lp(text)
    bad = []
    for name, terms, sense, rhs in model.rows:
        lhs = math.fsum(c * values.get(v, 0.0) for c, v in terms)
        scale = tol * max(1.0, abs(rhs), *(abs(c) for c, _ in terms))
        if sense == "<=" and lhs > rhs + scale:
            bad.append(name)
        elif sense == ">=" and lhs < rhs - scale:
            bad.append(name)
        elif sense == "=" and abs(lhs - rhs) > scale:
            bad.append(name)
    for var, lo in model.lower.items():
        if values.get(var, 0.0) < lo - tol:
            bad.append(f"bound:{var}")
    for var in model.binaries:
        if values.get(var, 0.0) not in (0.0, 1.0):
            bad.append(f"binary:{var}")
    return bad


def lp_objective(text: str, values: dict[str, float]) -> float:
    return math.fsum(c * values.get(v, 0.0) for c, v in parse_lp(text).objective)


def schedule_to_lp_values(instance: Instance, schedule, positions: int | None = None) -> dict[str, float]:
    """Map a schedule onto the model's variables, filling unused slots feasibly."""
    R = positions if positions is not None else instance.num_jobs
    arr = instance.arrays
    vals: dict[str, float] = {}
    by_line: dict[int, dict[int, ScheduledTask]] = {j: {} for j in range(instance.num_lines)}
    for t in schedule:
        by_line[t.line][t.position] = t
    for j in range(instance.num_lines):
        frontier = float(arr.setup[j])
        for r in range(1, R + 1):
            t = by_line[j].get(r)
            if t is None:
                vals[f"s_{r}_{j + 1}"] = frontier
                vals[f"t_{r}_{j + 1}"] = 0.0
                continue
            i = t.job
            vals[f"a_{i + 1}_{r}_{j + 1}"] = 1.0
            vals[f"s_{r}_{j + 1}"] = t.start_hours
            vals[f"t_{r}_{j + 1}"] = t.changeover_hours
            done = t.start_hours + arr.proc[i, j]
            vals[f"o_{i + 1}_{r}_{j + 1}"] = max(0.0, done - arr.due[i])
            frontier = done
    return vals


# -- exact oracle -------------------------------------------------------------


@dataclass(frozen=True)
class ExactLimits:
    max_jobs: int = 8
    max_lines: int = 3


@dataclass
class ExactSolution:
    schedule: list[ScheduledTask]
    obj1: float
    obj2: float
    optimal: bool
    explored: int = 0


def exact_solve(instance: Instance, limits: ExactLimits = ExactLimits()) -> ExactSolution:
    """Lexicographic (changeover, tardiness) optimum by exhaustive search.

    Lines are filled in order, each sequence extended job by job, so every
    (assignment, per-line order) pair is visited once.  Branches whose
    partial objectives can no longer beat the incumbent are cut; that is
    exact because both objectives only grow along a branch.
    """
    I, J = instance.num_jobs, instance.num_lines
    if I > limits.max_jobs or J > limits.max_lines:
        raise ExportError(f"instance {I}x{J} exceeds exact-solve limits "
                          f"({limits.max_jobs} jobs, {limits.max_lines} lines)")
    arr = instance.arrays
    proc, elig, chg = arr.proc.tolist(), arr.eligible.tolist(), arr.changeover.tolist()
    setup, release, due = arr.setup.tolist(), arr.release.tolist(), arr.due.tolist()
    best = {"c": math.inf, "o": math.inf, "tasks": None}
    explored = 0
    path: list[tuple] = []

    def dfs(j, last, avail, pos, used, c_sum, o_sum):
        nonlocal explored
        if c_sum > best["c"] or (c_sum == best["c"] and o_sum >= best["o"]):
            return
        if used == (1 << I) - 1:
            explored += 1
            best["c"], best["o"], best["tasks"] = c_sum, o_sum, list(path)
            return
        for i in range(I):
            if used >> i & 1 or not elig[i][j]:
                continue
            c = chg[last + 1][i][j]
            s = max(avail + c, release[i])
            if last < 0:
                s = max(s, setup[j] + c)
            f = s + proc[i][j]
            o = max(0.0, f - due[i])
            path.append(ScheduledTask(i, j, pos, c, s, proc[i][j], f, o))
            dfs(j, i, f, pos + 1, used | (1 << i), c_sum + c, o_sum + o)
            path.pop()
        if j + 1 < J:
            dfs(j + 1, -1, 0.0, 1, used, c_sum, o_sum)

    dfs(0, -1, 0.0, 1, 0, 0.0, 0.0)
    if best["tasks"] is None:
        raise ExportError("no feasible assignment exists")
    sched = sorted(best["tasks"], key=lambda t: (t.line, t.position))
    obj1, obj2 = totals(sched)
    assert check_constraints(instance, sched).ok
    return ExactSolution(sched, obj1, obj2, True, explored)
