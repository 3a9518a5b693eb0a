"""Compare the compiled and pure-Python backends on the hot kernels.

Times the four accelerated primitives through their public wrappers plus a
short end-to-end trial, and prints one table row per (operation, backend)
with the speedup of the compiled path. Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --agents 800 --cells 96 --repeat 7
"""

import argparse
import math
import time

import numpy as np

from torusswarm import (
    AgentState,
    GridSpec,
    HAVE_COMPILED,
    KdeSpec,
    KernelSpec,
    MacroState,
    TrialConfig,
    field_from_function,
    kde_density,
    lax_friedrichs_step,
    pairwise_velocity,
    run_trial,
    sample_agent_inputs,
    scalar_field,
    vector_field,
)


def _time(fn, repeat):
    """Best-of-repeat wall time in seconds (one untimed warmup call)."""
    fn()
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(args):
    rng = np.random.default_rng(args.seed)
    g = GridSpec(2, args.cells)
    pos = rng.uniform(-math.pi, math.pi, size=(args.agents, 2))
    agents = AgentState(pos.copy())
    kernel = KernelSpec(strength=0.05, length_scale=0.5)
    kernel_lim = KernelSpec(strength=0.05, length_scale=0.5,
                            sensing_radius=0.1 * math.pi)
    kde = KdeSpec(bandwidth=0.3, agent_mass=1.0 / args.agents)
    rho = field_from_function(
        g, lambda x1, x2: 2.5 + np.cos(x1) + 0.5 * np.sin(2 * x2))
    vel = vector_field(g, np.cos(g.meshgrid()[1]), np.sin(g.meshgrid()[0]))
    state = MacroState(rho, 0.0)
    dt = 0.2 * g.h  # comfortably inside the stability region

    cases = [
        ("pairwise velocity (full)",
         lambda be: pairwise_velocity(agents, kernel, backend=be)),
        ("pairwise velocity (truncated)",
         lambda be: pairwise_velocity(agents, kernel_lim, truncated=True,
                                      backend=be)),
        ("density estimate (KDE)",
         lambda be: kde_density(pos, kde, g, backend=be)),
        ("transport step (finite volume)",
         lambda be: lax_friedrichs_step(state, vel, dt, backend=be)),
        ("field sampling (bilinear)",
         lambda be: sample_agent_inputs(vel, pos, backend=be)),
    ]
    if not args.skip_trial:
        # dt 5e-4 keeps the Courant number near 0.5 up to ~128 cells
        cfg = TrialConfig(cells=args.cells, steps=args.trial_steps,
                          agents=args.agents, dt=5e-4, plots=False)
        cases.append(
            ("full trial (%d steps)" % args.trial_steps,
             lambda be: run_trial(cfg.with_updates(backend=be))))
    return cases


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=400)
    ap.add_argument("--cells", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trial-steps", type=int, default=20)
    ap.add_argument("--skip-trial", action="store_true",
                    help="only benchmark the individual primitives")
    args = ap.parse_args(argv)

    if not HAVE_COMPILED:
        print("compiled backend not available; timing the Python backend only")
    backends = ["python"] + (["compiled"] if HAVE_COMPILED else [])

    print(f"agents={args.agents} cells={args.cells} repeat={args.repeat}")
    header = f"{'operation':<34}" + "".join(f"{b:>12}" for b in backends)
    if HAVE_COMPILED:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in build_cases(args):
        times = {b: _time(lambda b=b: call(b), args.repeat) for b in backends}
        row = f"{name:<34}" + "".join(
            f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if HAVE_COMPILED:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
