"""Compare the numba and numpy evaluation backends on random phenotypes.

    python3 benchmarks/bench_eval.py [--rows 2000] [--programs 500] [--depth 8]

Both backends run the same compiled programs; results are checked for
bitwise equality before timings are printed.
"""

import argparse
import random
import time

import numpy as np

from gggp import kernels
from gggp.expr import ast_from_tree, compile_program
from gggp.genotypes import cfg_random_tree
from gggp.grammar import load_grammar


def make_programs(n, depth, n_vars, seed):
    g = load_grammar("nobias.bnf").with_terminals("var", [f"v{i}" for i in range(n_vars)])
    rng = random.Random(seed)
    cols = {f"v{i}": i for i in range(n_vars)}
    # half grow, half full, so both small and bushy programs are timed
    trees = [cfg_random_tree(g, depth, "grow" if i % 2 else "full", rng) for i in range(n)]
    return [compile_program(ast_from_tree(t), cols) for t in trees]


def time_backend(programs, X, backend, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for code, arg, consts in programs:
            kernels.eval_program(code, arg, consts, X, backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--programs", type=int, default=500)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X = np.random.default_rng(args.seed).uniform(0, 100, size=(args.rows, 9))
    programs = make_programs(args.programs, args.depth, 9, args.seed)
    mean_len = np.mean([p[0].size for p in programs])
    print(f"{args.programs} programs (mean length {mean_len:.1f}) x {args.rows} rows")

    backends = ["numpy"] + (["numba"] if kernels.BACKEND == "numba" else [])
    if len(backends) == 2:
        # compile once, outside the timed region
        kernels.eval_program(*programs[0], X, "numba")
        for code, arg, consts in programs:
            a = kernels.eval_program(code, arg, consts, X, "numpy")
            b = kernels.eval_program(code, arg, consts, X, "numba")
            assert np.array_equal(a, b), "backends disagree"
    else:
        print("numba unavailable or disabled; timing numpy only")

    times = {b: time_backend(programs, X, b, args.repeat) for b in backends}
    for b, t in times.items():
        print(f"{b:<6} {t:8.3f} s  {1e6 * t / args.programs:9.1f} us/program")
    if len(times) == 2:
        print(f"speedup {times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
