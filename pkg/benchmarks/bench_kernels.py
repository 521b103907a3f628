"""Time the numba kernels against their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is warmed up once per backend, so compilation is excluded, and
the two results are checked to agree before timings are reported.
"""

import argparse
import json
import timeit

import numpy as np

from adiabent import _accel, kernels


def _cases(rng):
    def act(n):
        d = np.sort(rng.uniform(0.0, 10.0, n))
        w = rng.uniform(0.1, 1.0, n)
        return d, w / w.sum()

    d64, w64 = act(64)
    d256, w256 = act(256)
    mus = np.linspace(-50.0, 50.0, 400)
    c = [rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)) for _ in range(4)]
    h = rng.normal(size=(16, 32, 32)) + 1j * rng.normal(size=(16, 32, 32))
    vals, vecs = np.linalg.eigh(h + h.conj().transpose(0, 2, 1))
    psi = rng.normal(size=(32, 4)) + 1j * rng.normal(size=(32, 4))
    return {
        "secular_roots N=256": lambda b: kernels.secular_roots(d256, w256, 3.7, backend=b),
        "secular_roots_grid N=64 x 400": lambda b: kernels.secular_roots_grid(d64, w64, mus, backend=b),
        "lagrange_coefficients N=64 order 8": lambda b: kernels.lagrange_coefficients(d64, w64, 10, 8, backend=b),
        "four_index_sum 16x16": lambda b: kernels.four_index_sum(*c, backend=b),
        "propagate_eig 16 steps, 32x4": lambda b: kernels.propagate_eig(vecs, vals, 0.01, psi.copy(), backend=b),
    }


def _result(x):
    return np.asarray(x[0] if isinstance(x, tuple) else x)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    for name, fn in _cases(np.random.default_rng(0)).items():
        ref, fast = _result(fn("numpy")), _result(fn("numba"))
        scale = max(1.0, float(np.max(np.abs(ref))))
        agree = float(np.max(np.abs(ref - fast))) / scale
        timing = {}
        for b in ("numpy", "numba"):
            number, _ = timeit.Timer(lambda: fn(b)).autorange()
            best = min(timeit.repeat(lambda: fn(b), number=number, repeat=args.repeat))
            timing[b] = best / number
        rows.append({"kernel": name, "numpy_s": timing["numpy"], "numba_s": timing["numba"],
                     "speedup": timing["numpy"] / timing["numba"], "rel_diff": agree})

    print(f"{'kernel':36s} {'numpy':>11s} {'numba':>11s} {'speedup':>8s} {'rel diff':>9s}")
    for r in rows:
        print(f"{r['kernel']:36s} {r['numpy_s']:11.3e} {r['numba_s']:11.3e} {r['speedup']:8.1f} {r['rel_diff']:9.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
