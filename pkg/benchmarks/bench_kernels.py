"""Timing of the hot kernels on both backends.

    python benchmarks/bench_kernels.py [--nodes 801] [--points 400] [--repeat 5]

With ``MUSB_DISABLE_NUMBA=1`` only the numpy rows run.  The pair row folds
nodes symmetric about 0 so each ``exp_mu`` evaluation serves two nodes.
"""

import argparse
import time

import numpy as np

from musb import _kernels as K


def best_of(fn, repeat):
    fn()  # warm-up, includes compilation on the numba path
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=801, help="quadrature nodes (odd keeps a node at 0)")
    ap.add_argument("--points", type=int, default=400, help="complex evaluation points")
    ap.add_argument("--probes", type=int, default=6)
    ap.add_argument("--mu", type=float, default=0.7)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    q = np.linspace(-8.0, 8.0, args.nodes)
    z = rng.uniform(-3, 3, args.points) + 1j * rng.uniform(-3, 3, args.points)
    wp = rng.normal(size=(args.nodes, args.probes)) + 0j
    w = (rng.uniform(-30, 30, 20000) + 1j * rng.uniform(-30, 30, 20000))
    c1, c2 = K.asymptotic_constants(args.mu)
    mu, t = args.mu, args.t

    rows = [("kernel_pass numpy", lambda: K.kernel_pass(z, q, wp, mu, t, backend="numpy")),
            ("exp_mu_array numpy", lambda: K.exp_mu_array(w, mu, backend="numpy"))]
    if K.USE_NUMBA:
        rows += [
            ("kernel_pass numba pairs", lambda: K.kernel_pass(z, q, wp, mu, t, backend="numba")),
            ("kernel_pass numba loop", lambda: K._kernel_pass_loop(z, q, wp, mu, t, c1, c2)),
            ("exp_mu_array numba", lambda: K.exp_mu_array(w, mu, backend="numba")),
        ]
        ref = K.kernel_pass(z, q, wp, mu, t, backend="numpy")
        gap = np.max(np.abs(K.kernel_pass(z, q, wp, mu, t, backend="numba") - ref)) / np.max(np.abs(ref))
        print(f"numba vs numpy kernel_pass peak-relative gap: {gap:.1e}")
    else:
        print("numba disabled; numpy rows only")

    print(f"{args.points} points x {args.nodes} nodes x {args.probes} probes, mu={mu}, t={t}")
    for name, fn in rows:
        print(f"{name:<26s} {best_of(fn, args.repeat) * 1e3:10.2f} ms")


if __name__ == "__main__":
    main()
