"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--steps N]

Covers the per-step hot paths (Crank-Nicolson stepping at several grid
sizes, the adaptive-estimator RK4, the symmetric eigensolve used inside the
certification search) and one short end-to-end closed loop per backend.
"""

import argparse
import time

import numpy as np

from rdreg import bundled_scenario_path
from rdreg._backend import HAVE_NUMBA
from rdreg.cli import synthesize
from rdreg.kernels import loops
from rdreg.numkit import sym_eig
from rdreg.plantsim import CrankNicolsonPlan
from rdreg.regulator import run_closed_loop
from rdreg.scenario import build_exo, build_plant, observer_init, parse_config

BACKENDS = ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


def timeit(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cn(steps):
    rows = []
    for m in (100, 400, 1600):
        w = np.sin(np.linspace(0.0, 3.0, m + 1))
        src = np.cos(np.linspace(0.0, 2.0, m + 1))
        out = np.empty_like(w)
        cells = {}
        for be in BACKENDS:
            plan = CrankNicolsonPlan(1.5, m, 1e-3, backend=be)
            plan.step(w, src, out)  # warm (JIT compile / cache touch)

            def run(plan=plan):
                a, b = w.copy(), out
                for _ in range(steps):
                    plan.step(a, src, b)
                    a, b = b, a

            cells[be] = timeit(run)
        rows.append((f"cn_step M={m} x{steps}", cells))
    return rows


def bench_adaptive(steps):
    cells = {}
    for be in BACKENDS:
        kern = loops.get("adaptive_rk4", be)
        kern(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1e-3, 0.5, 5.0, 10.0)

        def run(kern=kern):
            state = (0.1, 0.2, 0.0, 0.0)
            for k in range(steps):
                state = kern(*state, np.cos(5e-4 * k), np.cos(5e-4 * (k + 1)),
                             1e-3, 0.5, 5.0, 10.0)

        cells[be] = timeit(run)
    return [(f"adaptive_rk4 x{steps}", cells)]


def bench_eig(reps):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((6, 6))
    m = 0.5 * (m + m.T)
    cells = {}
    for be in BACKENDS:
        sym_eig(m, backend=be)

        def run():
            for _ in range(reps):
                sym_eig(m, backend=be)

        cells[be] = timeit(run)
    return [(f"sym_eig 6x6 x{reps}", cells)]


def bench_closed_loop(horizon):
    cfg = parse_config(bundled_scenario_path("paper_a15"))
    _, cert = synthesize(cfg)
    plant, exo_spec = build_plant(cfg), build_exo(cfg)
    cells = {}
    for be in BACKENDS:
        def run():
            run_closed_loop(plant, exo_spec, cert.k_row, cert.l_col,
                            cfg.iota, cfg.kappa0, cfg.kappa1, horizon,
                            eps_hat0=observer_init(cfg), backend=be)

        run()  # warm
        cells[be] = timeit(run, repeat=2)
    return [(f"closed loop, horizon {horizon}s", cells)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000)
    args = parser.parse_args()

    rows = []
    rows += bench_cn(args.steps)
    rows += bench_adaptive(args.steps * 5)
    rows += bench_eig(args.steps)
    rows += bench_closed_loop(2.0)

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{be:>10}" for be in BACKENDS)
    if len(BACKENDS) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, cells in rows:
        line = f"{name:<{width}}  " + "  ".join(f"{cells[be]:>9.4f}s" for be in BACKENDS)
        if len(BACKENDS) == 2:
            line += f"  {cells['numpy'] / cells['numba']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
