"""Compare the numba and pure-numpy kernel backends.

Times the per-state rule scan and a batch of shield rollouts on a
61-job, 4-line instance, checks both backends agree, and prints a table.

    python benchmarks/bench_backends.py --rollouts 200 --repeat 3
"""
import argparse
import time

import numpy as np

from flexline import kernels, nn
from flexline.a2c import TrainConfig, observe
from flexline.env import reset
from flexline.instance import GeneratorSpec, generate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rollouts", type=int, default=200)
    p.add_argument("--scans", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    inst = generate(GeneratorSpec(61, 4, 7, lot_range=(20, 100), changeover_range=(0.2, 0.8),
                                  initial_changeover_range=(0.2, 0.6), seed=args.seed))
    a = inst.arrays
    state = reset(inst)
    pd, _ = TrainConfig(instance=inst).descriptors()
    policy = nn.init(pd, args.seed).map(np.zeros_like)  # uniform: rollouts run long
    _, x = observe(state, 8, 2.0)
    probs = nn.policy_forward(policy, x)
    scan_args = (a.proc, a.eligible, a.changeover, a.setup, a.release, a.due,
                 state.last, state.avail, state.remaining, 2.0)
    roll_args = (a.proc, a.eligible, a.changeover, a.setup, a.release, a.due, state.last, state.avail,
                 state.busy, state.remaining, 2.0, a.horizon, 8, policy.flat(), policy.dims_array(), probs,
                 args.seed, 0, args.rollouts)

    rows = []
    results = {}
    for name in kernels.BACKENDS:
        kb = kernels.get_backend(name)
        kb.rule_picks(*scan_args)  # warm-up (JIT compile on the numba side)
        kb.shield_rollouts(*roll_args[:-1], 2, False)
        t_scan, picks = best_of(lambda: [kb.rule_picks(*scan_args) for _ in range(args.scans)][-1], args.repeat)
        t_roll, roll = best_of(lambda: kb.shield_rollouts(*roll_args, False), args.repeat)
        results[name] = (picks[0], roll)
        rows.append((name, 1e6 * t_scan / args.scans, 1e3 * t_roll / args.rollouts))

    same = (np.array_equal(results["numba"][0], results["numpy"][0])
            and all(np.array_equal(u, v) for u, v in zip(results["numba"][1], results["numpy"][1])))
    print(f"{'backend':8s}  {'rule scan (us)':>14s}  {'rollout (ms)':>12s}")
    for name, scan, roll in rows:
        print(f"{name:8s}  {scan:14.2f}  {roll:12.3f}")
    print(f"speedup   {rows[1][1] / rows[0][1]:14.1f}x {rows[1][2] / rows[0][2]:12.1f}x")
    print(f"outputs identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
