"""Compare the compiled bit-table kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 5]

Each kernel runs on random upper-triangular tables of width ``n``; the
second section times a whole evaluator workload with each backend
swapped in.
"""

from __future__ import annotations

import argparse
import random
import timeit

import numpy as np

from lincheck import _kernels_py, kernels

try:
    from lincheck import _kernels as _compiled
except ImportError:
    _compiled = None


def random_table(rng: random.Random, n: int) -> np.ndarray:
    full = (1 << n) - 1
    return np.array([rng.getrandbits(64) & full & ~((1 << i) - 1) for i in range(n)], dtype=np.uint64)


def kernel_cases(rng: random.Random, n: int) -> dict:
    a, b = random_table(rng, n), random_table(rng, n)
    mask = rng.getrandbits(n)
    return {
        "chop": lambda m: m.chop(a, False, b, False),
        "box": lambda m: m.box(a, True),
        "diamond": lambda m: m.diamond(a, False),
        "omega": lambda m: m.omega(a),
        "runs": lambda m: m.runs(mask, n),
        "from_first": lambda m: m.from_first(mask, n),
    }


def _use(impl) -> None:
    for name in ("chop", "box", "diamond", "omega", "runs", "from_first"):
        setattr(kernels, name, getattr(impl, name))


def evaluator_workload(seed: int) -> float:
    """Evaluate the behaviour of a small Treiber run on every interval of its streams."""
    from lincheck.commands import beh
    from lincheck.executor import Generator
    from lincheck.intervals import Box, Evaluator, Not, aba_pred
    from lincheck.memstate import deref
    from lincheck.stacks import TOP, StackConfig, build_program

    cfg = StackConfig(("p", "q"), (1, 2), script={"p": ("push",), "q": ("pop",)})
    C = build_program("TS", cfg)
    streams = Generator(C, cfg.processes, set(), 32, cfg.valdom).random_walks(seed, 20)
    g = beh(cfg.processes, set(), C)
    no_aba = Box(Not(aba_pred(deref(TOP))))

    def run() -> None:
        for s in streams:
            ev = Evaluator(s)
            ev.table(g)
            ev.table(no_aba)

    return min(timeit.repeat(run, number=1, repeat=3))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled kernels are not built; only the fallback is available")
    impls = {"python": _kernels_py}
    if _compiled is not None:
        impls["cython"] = _compiled

    print(f"kernels on width {args.n} (best of {args.repeat}, {args.number} calls, microseconds per call)")
    print(f"{'kernel':<12}" + "".join(f"{k:>12}" for k in impls) + ("     speedup" if len(impls) > 1 else ""))
    cases = kernel_cases(random.Random(args.seed), args.n)
    for name, fn in cases.items():
        times = {}
        for label, impl in impls.items():
            best = min(timeit.repeat(lambda: fn(impl), number=args.number, repeat=args.repeat))
            times[label] = best / args.number * 1e6
        row = f"{name:<12}" + "".join(f"{times[k]:>12.2f}" for k in impls)
        if len(impls) > 1:
            row += f"{times['python'] / times['cython']:>11.1f}x"
        print(row)

    print("\nevaluator workload (seconds, best of 3)")
    original = {name: getattr(kernels, name) for name in ("chop", "box", "diamond", "omega", "runs", "from_first")}
    try:
        for label, impl in impls.items():
            _use(impl)
            print(f"{label:<12}{evaluator_workload(args.seed):>12.3f}")
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)


if __name__ == "__main__":
    main()
