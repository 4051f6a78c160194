"""Compare the compiled kernel backend against the pure-Python fallback.

The backend is chosen at import time, so each timing runs in a child
process: one with the environment untouched (compiled, if built) and one
with CONDWALK_FORCE_PYREF=1. Results must agree bit-for-bit; the table
reports wall time and the speedup of the compiled path.

Usage: python3 benchmarks/bench_kernels.py [--paths N] [--repeat K]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def run_workloads(paths, repeat, seed):
    from condwalk import fixture_path
    from condwalk._kernels import BACKEND
    from condwalk.exact import FLOAT, survival_dp
    from condwalk.martingale import estimate_V_martingale
    from condwalk.mc import estimate_survival
    from condwalk.models import load_model

    finite = load_model(fixture_path("finite4"))
    affine = load_model(fixture_path("affine1d"))

    workloads = {
        "finite_walk_mc": lambda: estimate_survival(
            finite, "-3", 2, 1024, paths, seed=seed).value,
        "affine_walk_mc": lambda: estimate_survival(
            affine, 0.0, 2.0, 1024, paths, seed=seed).value,
        "martingale_mc": lambda: estimate_V_martingale(
            finite, "-3", 2, paths // 4, seed=seed, n_max=8192).value,
        "survival_dp_float": lambda: survival_dp(
            finite.spec, "-3", 2, 2048, FLOAT)[0].p[2048],
    }

    rows = {}
    for name, fn in workloads.items():
        best, value = min((_timed(fn) for _ in range(repeat)),
                          key=lambda t: t[0])
        rows[name] = {"seconds": best, "value": value}
    return {"backend": BACKEND, "rows": rows}


def _timed(fn):
    t0 = time.perf_counter()
    value = fn()
    return time.perf_counter() - t0, value


def run_child(force_pyref, args):
    env = dict(os.environ)
    env.pop("CONDWALK_FORCE_PYREF", None)
    if force_pyref:
        env["CONDWALK_FORCE_PYREF"] = "1"
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--child",
         "--paths", str(args.paths), "--repeat", str(args.repeat),
         "--seed", str(args.seed)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=200_000,
                        help="Monte Carlo sample count per workload")
    parser.add_argument("--repeat", type=int, default=3,
                        help="repeats per workload; best time is kept")
    parser.add_argument("--seed", type=int, default=20260816)
    parser.add_argument("--child", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.child:
        json.dump(run_workloads(args.paths, args.repeat, args.seed),
                  sys.stdout)
        return 0

    compiled = run_child(False, args)
    python = run_child(True, args)
    if compiled["backend"] != "compiled":
        print("compiled backend not built; timing the fallback against "
              "itself", file=sys.stderr)

    header = f"{'workload':<20} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    mismatched = []
    for name, py_row in python["rows"].items():
        c_row = compiled["rows"][name]
        if py_row["value"] != c_row["value"]:
            mismatched.append(name)
        print(f"{name:<20} {py_row['seconds']:>9.3f}s {c_row['seconds']:>9.3f}s"
              f" {py_row['seconds'] / c_row['seconds']:>7.1f}x")
    if mismatched:
        print(f"MISMATCH: backends disagree on {', '.join(mismatched)}",
              file=sys.stderr)
        return 1
    print("backends agree bit-for-bit on all workloads")
    return 0


if __name__ == "__main__":
    sys.exit(main())
