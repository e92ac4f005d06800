"""Wall-time comparison of the compiled and pure-Python integrator backends.

Runs representative workloads (plain flows, variational flows, the Newton
solvers built on them) with each backend and prints a table with the best
of --repeats timings.  The right-hand sides stay Python callables in both
cases, so the speedup reflects the stepper machinery only; callback
overhead is the shared floor.

Usage: python benchmarks/benchmark_backends.py [--repeats N]
"""

import argparse
import math
import time

from cycleshift import ode
from cycleshift.cycle import find_limit_cycle
from cycleshift.ode import integrate, integrate_with_sensitivity
from cycleshift.perturb import find_periodic_solution
from cycleshift.problems import circle_field, resolve, vdp_field


def case_plain_circle():
    integrate(circle_field(), (0.0, 20.0 * math.pi), [0.0, 1.0], 1e-10)


def case_variational_circle():
    integrate_with_sensitivity(circle_field(), (0.0, 2.0 * math.pi), [0.0, 1.0], 1e-11)


def case_plain_vdp():
    integrate(vdp_field(), (0.0, 6.6633), [2.0, 0.0], 1e-10)


def case_cycle_solve():
    find_limit_cycle(circle_field(), [0.2, 1.1], 6.0)


def make_case_forced():
    paper = resolve("paper-example")

    def case_forced_solution():
        find_periodic_solution(paper.problem, 1e-3, paper.cycle)

    return case_forced_solution


CASES = [
    ("plain flow, circle field, 10 periods", case_plain_circle),
    ("variational flow, one period", case_variational_circle),
    ("plain flow, van der Pol, one period", case_plain_vdp),
    ("limit-cycle Newton solve", case_cycle_solve),
]


def best_time(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = ode.available_backends()
    print(f"backends available: {', '.join(backends)}")
    if "compiled" not in backends:
        print("extension core not built; timing the pure-Python backend only")

    cases = CASES + [("forced periodic solution, eps=1e-3", make_case_forced())]
    original = ode.backend_name()
    results = {}
    try:
        for backend in backends:
            ode.set_default_backend(backend)
            for name, fn in cases:
                fn()  # warm caches before timing
                results[(name, backend)] = best_time(fn, args.repeats)
    finally:
        ode.set_default_backend(original)

    width = max(len(name) for name, _ in cases)
    header = f"{'case':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, _ in cases:
        row = f"{name:<{width}}  "
        for b in backends:
            row += f"{results[(name, b)] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            row += f"{results[(name, 'python')] / results[(name, 'compiled')]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
