"""Time the compiled trajectory kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--steps 26667] [--groups 16] [--repeat 20]

The inputs come from the built-in scenario, so the sizes match a real run:
``--steps`` samples along the road and ``--groups`` evenly spaced groups.
"""
import argparse
import timeit

import numpy as np

from retf import _kernels_py
from retf.capacity import PhiEvaluator
from retf.rpp import VirtualGroupSet, effective_panel
from retf.simrun import build_scenario, default_config, with_overrides

try:
    from retf import _kernels
except ImportError:
    _kernels = None


def inputs(steps, n_groups):
    sc = build_scenario(with_overrides(default_config(), {"sus": {}})).scenario
    size = sc.array.count // n_groups
    groups = VirtualGroupSet.from_bounds([(k * size, k * size + size - 2) for k in range(n_groups)],
                                         sc.array.count)
    ev = PhiEvaluator(sc, "geometry", 0.0)
    areas = [sc.area(g) for g in groups]
    panels = [effective_panel(g, sc.array) for g in groups]
    xs = np.linspace(0.0, sc.road_length, steps)
    sweep_args = (xs, [a.dra_start for a in areas], [a.dra_end for a in areas], sc.loss.decay, sc.loss.threshold)
    bias, dom = _kernels_py.bias_loss_sweep(*sweep_args)
    q = sc.bs.position
    profile_args = (xs, bias, dom, [p.start.x for p in panels], [p.end.x for p in panels], sc.array.standoff,
                    q.x, q.y, q.z, sc.tv_height, sc.bs.tx_power, sc.loss.pl_intercept_db, sc.loss.pl_exponent,
                    sc.loss.reflection_ratio, *ev._bs_params, *ev._sap_params)
    return sweep_args, profile_args


def best_of(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=26667, help="road samples (a 400 m drive at 1 ms steps)")
    p.add_argument("--groups", type=int, default=16)
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    sweep_args, profile_args = inputs(args.steps, args.groups)
    print(f"{args.steps} steps, {args.groups} groups, best of {args.repeat}")
    print(f"{'kernel':<18}{'python ms':>12}{'compiled ms':>14}{'speed-up':>10}")
    for name, a in (("bias_loss_sweep", sweep_args), ("reflex_profile", profile_args)):
        t_py = best_of(getattr(_kernels_py, name), a, args.repeat)
        if _kernels is None:
            print(f"{name:<18}{1e3 * t_py:>12.3f}{'n/a':>14}{'':>10}")
            continue
        t_c = best_of(getattr(_kernels, name), a, args.repeat)
        print(f"{name:<18}{1e3 * t_py:>12.3f}{1e3 * t_c:>14.3f}{t_py / t_c:>9.1f}x")
    if _kernels is None:
        print("compiled extension not built; reinstall with Cython available")


if __name__ == "__main__":
    main()
