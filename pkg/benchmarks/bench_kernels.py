"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from reeb_systole import _fallback

try:
    from reeb_systole import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(4096, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    L = 16
    coeffs = rng.normal(size=(L + 1) ** 2) * 0.05
    y0 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    axes = np.array([0.8, 1.0, 1.4])
    return {
        "basis L=16, 4096 pts": lambda k: k.basis(L, pts),
        "field+grad L=16, 4096 pts": lambda k: k.field_values_grad(coeffs, L, pts),
        "integrate conformal L=16, t=2": lambda k: k.integrate(
            0, coeffs, L, y0, 2.0, 1e-10, 1e-10, 0.0, 10**6, False),
        "integrate ellipsoid, t=200": lambda k: k.integrate(
            1, axes, 0, y0 * np.r_[axes, 1 / axes], 200.0, 1e-10, 1e-10, 0.0, 10**6, False),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    backends = [("python", _fallback)] + ([("compiled", _core)] if _core else [])
    print(f"{'case':34s}" + "".join(f"{name:>12s}" for name, _ in backends) + "     speedup")
    for name, fn in cases().items():
        times = [min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
                 for _, k in backends]
        row = f"{name:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
