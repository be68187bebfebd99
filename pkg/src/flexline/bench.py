"""Daily load metrics, the comparison harness, result tables and Gantt charts."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

from . import instance as inst_mod
from . import nn
from .a2c import TrainConfig, greedy_dispatch, train
from .env import check_constraints
from .instance import GeneratorSpec, Instance
from .rules import Rule, run_rule
from .shield import ShieldConfig, shielded_dispatch

LEARNED = ("a2c", "a2c+shield")
TABLE_COLUMNS = ("instance", "method", "DCL", "DTL", "time")


class BenchError(ValueError):
    pass


def _norm(instance: Instance) -> int:
    return instance.num_lines * instance.horizon_days


def dcl(schedule, instance: Instance) -> float:
    return math.fsum(t.changeover_hours for t in schedule) / _norm(instance)


def dtl(schedule, instance: Instance) -> float:
    return math.fsum(t.tardiness_hours for t in schedule) / _norm(instance)


@dataclass(frozen=True)
class MetricReport:
    instance: str
    method: str
    dcl: float
    dtl: float
    total_changeover: float
    total_tardiness: float
    wall_time_seconds: float
    n: int
    d: int
    job_count: int


def report_for(name: str, method: str, schedule, instance: Instance, seconds: float = 0.0) -> MetricReport:
    chk = check_constraints(instance, schedule)
    if not chk.ok:
        raise BenchError(f"{method} on {name} produced an infeasible schedule: {chk.violations[0].message}")
    return MetricReport(name, method, dcl(schedule, instance), dtl(schedule, instance),
                        math.fsum(t.changeover_hours for t in schedule),
                        math.fsum(t.tardiness_hours for t in schedule),
                        seconds, instance.num_lines, instance.horizon_days, instance.num_jobs)


# -- suite --------------------------------------------------------------------


@dataclass
class SuiteConfig:
    """What to run.  ``instances`` entries are file paths or generator dicts."""

    instances: list = field(default_factory=list)
    methods: list[str] = field(default_factory=lambda: [r.name for r in Rule])
    runs: int = 1
    seed: int = 0
    selection_key: str = "dtl,dcl"
    checkpoint: str | None = None
    train: dict | None = None  # train fresh per instance when given
    shield: dict = field(default_factory=dict)
    timing: bool = False  # off keeps reports byte-identical across runs

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise BenchError(f"unknown suite keys: {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.check()
        return cfg

    def check(self) -> None:
        for m in self.methods:
            if m not in LEARNED:
                try:
                    Rule.parse(m)
                except ValueError:
                    raise BenchError(f"unknown method {m!r}") from None
        if any(m in LEARNED for m in self.methods) and self.checkpoint is None and self.train is None:
            raise BenchError("learned methods need a checkpoint or a train section")
        if self.runs < 1:
            raise BenchError("runs must be >= 1")
        if self.selection_key not in ("dtl,dcl", "dcl,dtl"):
            raise BenchError("selection_key must be 'dtl,dcl' or 'dcl,dtl'")


def load_instances(config: SuiteConfig, base_dir=".") -> list[tuple[str, Instance]]:
    out = []
    for k, entry in enumerate(config.instances):
        if isinstance(entry, str):
            path = Path(base_dir) / entry
            out.append((Path(entry).stem, inst_mod.read(path)))
        elif isinstance(entry, dict):
            d = dict(entry)
            name = d.pop("name", f"gen{k + 1:02d}")
            out.append((name, inst_mod.generate(GeneratorSpec.from_dict(d))))
        else:
            raise BenchError(f"instance entry {k} must be a path or a generator object")
    return out


def _derived_seed(seed: int, instance_idx: int, run: int) -> int:
    return (seed * 1_000_003 + instance_idx * 1009 + run) % 2**63


def _networks(config: SuiteConfig, base_dir, idx: int, instance: Instance):
    if config.train is not None:
        kw = dict(config.train)
        kw.setdefault("seed", _derived_seed(config.seed, idx, 0))
        res = train(TrainConfig(instance=instance, **kw))
        return res.policy, res.value
    ck = nn.Checkpoint.load(Path(base_dir) / config.checkpoint)
    return ck.policy, ck.value


def _run_cell(args):
    config, name, instance, method, idx, nets, t_train = args
    key = (lambda r: (r.dtl, r.dcl)) if config.selection_key == "dtl,dcl" else (lambda r: (r.dcl, r.dtl))
    best, best_sched = None, None
    for run in range(config.runs):
        t0 = time.perf_counter()
        if method == "a2c":
            # greedy dispatch has no randomness, every run repeats the first
            sched, _ = greedy_dispatch(nets[0], instance)
        elif method == "a2c+shield":
            sc = ShieldConfig(**{**config.shield, "seed": _derived_seed(config.seed, idx, run)})
            sched = shielded_dispatch(instance, nets[0], nets[1], sc).schedule()
        else:
            sched = run_rule(instance, Rule.parse(method)).schedule()
        secs = time.perf_counter() - t0 + (t_train if method in LEARNED else 0.0)
        rep = report_for(name, method, sched, instance, secs if config.timing else 0.0)
        if best is None or key(rep) < key(best):
            best, best_sched = rep, sched
    return best, best_sched


def run_suite(config: SuiteConfig, base_dir=".", workers: int = 1, schedules: dict | None = None) -> list[MetricReport]:
    """Best-of-``runs`` report per (instance, method), in config order.

    Learned methods share one set of networks per instance.  ``schedules``,
    when given, receives the selected schedule per (instance name, method).
    """
    config.check()
    insts = load_instances(config, base_dir)
    learned = any(m in LEARNED for m in config.methods)
    cells = []
    for k, (name, inst) in enumerate(insts):
        nets, t_train = None, 0.0
        if learned:
            t0 = time.perf_counter()
            nets = _networks(config, base_dir, k, inst)
            # training counts toward wall time only when done fresh
            t_train = time.perf_counter() - t0 if config.train is not None else 0.0
        cells.extend((config, name, inst, m, k, nets, t_train) for m in config.methods)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    if schedules is not None:
        for cell, (_, sched) in zip(cells, results):
            schedules[(cell[1], cell[3])] = sched
    return [rep for rep, _ in results]


# -- rendering ----------------------------------------------------------------


def _row(r: MetricReport) -> tuple[str, ...]:
    return (r.instance, r.method, f"{r.dcl:.3f}", f"{r.dtl:.3f}", f"{r.wall_time_seconds:.3f}")


def render_table(reports) -> str:
    rows = [TABLE_COLUMNS] + [_row(r) for r in reports]
    widths = [max(len(row[c]) for row in rows) for c in range(len(TABLE_COLUMNS))]
    lines = []
    for k, row in enumerate(rows):
        cells = [v.ljust(w) if c < 2 else v.rjust(w) for c, (v, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in reports:
        w.writerow(_row(r))
    return buf.getvalue()


def reports_json(reports) -> str:
    return json.dumps([asdict(r) for r in reports], indent=1) + "\n"


def gantt_svg(schedule, instance: Instance, width: int = 960, band: int = 36) -> str:
    """One band per line, day gridlines, hatched changeovers, tardy tasks outlined red."""
    left, top, bottom = 60, 20, 30
    horizon = instance.horizon_hours
    end = max([horizon] + [t.completion_hours for t in schedule])
    days = int(math.ceil(end / 24.0))
    span = days * 24.0
    scale = (width - left - 10) / span
    height = top + band * instance.num_lines + bottom

    def x(h):
        return f"{left + h * scale:.3f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" '
        'patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#555" '
        'stroke-width="2"/></pattern></defs>',
        f'<g class="axes" font-family="sans-serif" font-size="10">',
    ]
    for d in range(days + 1):
        gx = x(24.0 * d)
        out.append(f'<line class="grid" x1="{gx}" y1="{top}" x2="{gx}" '
                   f'y2="{top + band * instance.num_lines}" stroke="#ccc"/>')
        out.append(f'<text x="{gx}" y="{height - 10}" text-anchor="middle">{24 * d}</text>')
    for j in range(instance.num_lines):
        y = top + band * j
        out.append(f'<rect class="band" x="{left}" y="{y}" width="{span * scale:.3f}" height="{band}" '
                   f'fill="none" stroke="#888"/>')
        out.append(f'<text x="{left - 6}" y="{y + band / 2 + 4:.1f}" text-anchor="end">'
                   f'L{instance.lines[j].id}</text>')
    out.append("</g>")
    out.append('<g class="tasks" font-family="sans-serif" font-size="9">')
    for t in sorted(schedule, key=lambda t: (t.line, t.position)):
        y = top + band * t.line + 4
        h = band - 8
        if t.changeover_hours > 0:
            out.append(f'<rect class="changeover" x="{x(t.start_hours - t.changeover_hours)}" y="{y}" '
                       f'width="{t.changeover_hours * scale:.3f}" height="{h}" fill="url(#hatch)"/>')
        tardy = t.tardiness_hours > 0
        stroke = 'stroke="#d00" stroke-width="2"' if tardy else 'stroke="#246"'
        cls = "task tardy" if tardy else "task"
        out.append(f'<rect class="{cls}" x="{x(t.start_hours)}" y="{y}" '
                   f'width="{(t.completion_hours - t.start_hours) * scale:.3f}" height="{h}" '
                   f'fill="#8ab" {stroke}><title>{escape(f"job {instance.jobs[t.job].id}")}</title></rect>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
