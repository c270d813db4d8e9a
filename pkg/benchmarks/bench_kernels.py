"""Time the compiled kernels against the NumPy fallback.

Usage::

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import timeit

import numpy as np

from toeplab import _backend


def cases(size: int):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((size, size))
    a = np.ascontiguousarray(a + a.T)
    c = rng.standard_normal(4 * size)
    t = np.linspace(0.0, 1.0, 8 * size)
    return {
        f"jacobi_eigvalsh n={size}": lambda k: k.jacobi_eigvalsh(a.copy()),
        f"cosine_series {c.size} coeffs x {t.size} pts": lambda k: k.cosine_series(c, t),
        "splitmix_uniforms 1e6": lambda k: k.splitmix_uniforms(12345, 0, 10**6),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64, help="matrix order for the Jacobi case")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = sorted(_backend.BACKENDS)
    if "cython" not in backends:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':<40}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases(args.size).items():
        best = {}
        for b in backends:
            k = _backend.get(b)
            best[b] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        row = f"{name:<40}" + "".join(f"{best[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
