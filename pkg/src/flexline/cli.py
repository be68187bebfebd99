"""Command-line front end.

Exit codes: 0 success, 1 invalid or infeasible input, 2 usage error.
Data goes to files or stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, instance, milp, nn
from .a2c import TrainConfig, greedy_dispatch, train
from .env import DispatchError, schedule_from_json, schedule_to_json
from .instance import GeneratorSpec, InstanceError
from .rules import Rule, run_rule
from .shield import ShieldConfig, shielded_dispatch, trace_csv

log = logging.getLogger("flexline")

DOMAIN_ERRORS = (InstanceError, DispatchError, milp.ExportError, bench.BenchError, ValueError,
                 KeyError, OSError)


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _read_json(path) -> dict:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(d, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return d


def _metrics_line(schedule, inst) -> str:
    return (f"dcl={bench.dcl(schedule, inst):.3f} dtl={bench.dtl(schedule, inst):.3f} "
            f"changeover={sum(t.changeover_hours for t in schedule):.3f} "
            f"tardiness={sum(t.tardiness_hours for t in schedule):.3f} "
            f"overdue={sum(t.tardiness_hours > 0 for t in schedule)}")


# -- subcommands --------------------------------------------------------------


def cmd_gen(a) -> int:
    d = _read_json(a.spec) if a.spec else {}
    for key, val in (("num_jobs", a.jobs), ("num_lines", a.lines), ("horizon_days", a.days),
                     ("flexibility_range", a.flexibility), ("rate_range", a.rate),
                     ("changeover_range", a.changeover), ("initial_changeover_range", a.initial_changeover),
                     ("setup_range", a.setup), ("lot_range", a.lot)):
        if val is not None:
            d[key] = val
    d["seed"] = a.seed
    missing = [k for k in ("num_jobs", "num_lines", "horizon_days") if k not in d]
    if missing:
        raise ValueError(f"missing generator fields: {', '.join(missing)}")
    instance.write(instance.generate(GeneratorSpec.from_dict(d)), a.out)
    return 0


def cmd_validate(a) -> int:
    try:
        instance.read(a.instance)
    except InstanceError as e:
        print(str(e))
        return 1
    return 0


def cmd_train(a) -> int:
    d = _read_json(a.config) if a.config else {}
    for key in ("episodes", "eta", "lam", "lr_value", "lr_policy", "penalty", "l_max", "w_c"):
        val = getattr(a, key)
        if val is not None:
            d[key] = val
    d["seed"] = a.seed
    if a.instance:
        d["instance"] = a.instance
    unknown = set(d) - {"episodes", "eta", "lam", "lr_value", "lr_policy", "penalty", "seed",
                        "instance", "generator", "l_max", "hidden", "w_c"}
    if unknown:
        raise ValueError(f"unknown train config keys: {', '.join(sorted(unknown))}")
    if isinstance(d.get("instance"), str):
        base = Path(a.config).parent if a.config and not a.instance else Path(".")
        d["instance"] = instance.read(base / d["instance"])
    if isinstance(d.get("generator"), dict):
        d["generator"] = GeneratorSpec.from_dict(d["generator"])
    if "hidden" in d:
        d["hidden"] = tuple(d["hidden"])
    res = train(TrainConfig(**d))
    res.checkpoint.save(a.out)
    if a.log:
        _write(a.log, res.log_csv())
    return 0


def cmd_dispatch(a) -> int:
    ck = nn.Checkpoint.load(a.checkpoint)
    inst = instance.read(a.instance)
    l_max = int(ck.meta.get("l_max", 8))
    sched, _ = greedy_dispatch(ck.policy, inst, l_max=l_max, w_c=float(ck.meta.get("w_c", 2.0)))
    _write(a.out, schedule_to_json(sched))
    print(_metrics_line(sched, inst))
    return 0


def cmd_shield(a) -> int:
    ck = nn.Checkpoint.load(a.checkpoint)
    inst = instance.read(a.instance)
    cfg = ShieldConfig(k=a.k, alpha=a.alpha, beta=a.beta, seed=a.seed, parallel=a.parallel)
    trace = [] if a.trace else None
    final = shielded_dispatch(inst, ck.policy, ck.value, cfg, l_max=int(ck.meta.get("l_max", 8)),
                              w_c=float(ck.meta.get("w_c", 2.0)), trace=trace)
    sched = final.schedule()
    _write(a.out, schedule_to_json(sched))
    if a.trace:
        _write(a.trace, trace_csv(trace))
    print(_metrics_line(sched, inst))
    return 0


def cmd_pdr(a) -> int:
    inst = instance.read(a.instance)
    sched = run_rule(inst, Rule.parse(a.rule)).schedule()
    _write(a.out, schedule_to_json(sched))
    print(_metrics_line(sched, inst))
    return 0


def cmd_export_lp(a) -> int:
    inst = instance.read(a.instance)
    cfg = milp.MilpExportConfig(objective=a.objective, w1=a.w1, w2=a.w2, obj1_bound=a.obj1_bound,
                                epsilon=a.epsilon, positions=a.positions, big_m=a.big_m)
    _write(a.out, milp.export_lp(inst, cfg))
    return 0


def cmd_solve_exact(a) -> int:
    inst = instance.read(a.instance)
    sol = milp.exact_solve(inst)
    if a.out:
        _write(a.out, schedule_to_json(sol.schedule))
    print(f"obj1={sol.obj1:.3f} obj2={sol.obj2:.3f}")
    return 0


def cmd_bench(a) -> int:
    d = _read_json(a.suite)
    d["seed"] = a.seed
    if a.timing:
        d["timing"] = True
    cfg = bench.SuiteConfig.from_dict(d)
    scheds: dict = {}
    reports = bench.run_suite(cfg, Path(a.suite).parent, workers=a.parallel, schedules=scheds)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "reports.csv", bench.render_csv(reports))
    _write(out / "reports.txt", bench.render_table(reports))
    _write(out / "reports.json", bench.reports_json(reports))
    if a.gantt:
        insts = dict(bench.load_instances(cfg, Path(a.suite).parent))
        for (name, method), sched in scheds.items():
            _write(out / f"{name}__{method.replace('+', '_')}.svg", bench.gantt_svg(sched, insts[name]))
    sys.stdout.write(bench.render_table(reports))
    return 0


def cmd_gantt(a) -> int:
    inst = instance.read(a.instance)
    sched = schedule_from_json(Path(a.schedule).read_text(encoding="utf-8"), inst)
    _write(a.out, bench.gantt_svg(sched, inst))
    return 0


# -- parser -------------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexline", description="Flexible line dispatching toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded instance")
    g.add_argument("--spec", help="generator spec JSON; flags override its fields")
    g.add_argument("--jobs", dest="jobs", type=int)
    g.add_argument("--lines", type=int)
    g.add_argument("--days", type=int)
    g.add_argument("--flexibility", type=int, nargs=2, metavar=("LO", "HI"))
    for name in ("rate", "changeover", "initial-changeover", "setup", "lot"):
        g.add_argument(f"--{name}", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--seed", type=_seed, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("instance")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("train", help="train the actor-critic agent")
    t.add_argument("--config", help="train config JSON; flags override its fields")
    t.add_argument("--instance", help="fixed training instance")
    t.add_argument("--episodes", type=int)
    for name in ("eta", "lam", "lr-value", "lr-policy", "penalty", "w-c"):
        t.add_argument(f"--{name}", type=float)
    t.add_argument("--l-max", type=int)
    t.add_argument("--seed", type=_seed, required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="training log CSV path")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("dispatch", help="greedy policy dispatch")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--instance", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dispatch)

    s = sub.add_parser("shield", help="soft-shielded dispatch")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--instance", required=True)
    s.add_argument("--k", type=int, default=1200)
    s.add_argument("--alpha", type=float, default=0.95)
    s.add_argument("--beta", type=float, default=0.33)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--parallel", action="store_true", help="run rollouts on all cores")
    s.add_argument("--trace", help="per-decision trace CSV path")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shield)

    r = sub.add_parser("pdr", help="dispatch with a single rule")
    r.add_argument("--rule", required=True, help=", ".join(x.name for x in Rule))
    r.add_argument("--instance", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_pdr)

    e = sub.add_parser("export-lp", help="write the MILP in CPLEX LP format")
    e.add_argument("--instance", required=True)
    e.add_argument("--objective", choices=("weighted", "lex1", "lex2"), default="weighted")
    e.add_argument("--w1", type=float, default=1.0)
    e.add_argument("--w2", type=float, default=1.0)
    e.add_argument("--obj1-bound", type=float)
    e.add_argument("--epsilon", type=float, default=1e-6)
    e.add_argument("--positions", type=int)
    e.add_argument("--big-m", type=float)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_lp)

    x = sub.add_parser("solve-exact", help="exhaustive optimum for tiny instances")
    x.add_argument("--instance", required=True)
    x.add_argument("--out")
    x.set_defaults(func=cmd_solve_exact)

    b = sub.add_parser("bench", help="run a comparison suite")
    b.add_argument("--suite", required=True)
    b.add_argument("--seed", type=_seed, required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--parallel", type=int, default=1, metavar="N")
    b.add_argument("--timing", action="store_true", help="record wall times (output no longer reproducible)")
    b.add_argument("--gantt", action="store_true", help="also write one SVG per (instance, method)")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("gantt", help="render a schedule as SVG")
    c.add_argument("--schedule", required=True)
    c.add_argument("--instance", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_gantt)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
