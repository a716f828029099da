"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]
"""

import argparse
import json
import timeit

import numpy as np

from viasnet.kernels import _pykernels

try:
    from viasnet.kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    """(name, args) pairs sized like one desk-profile frame or gaze trace."""
    n = 6000
    t = np.arange(n) / 100.0
    theta = np.cumsum(rng.normal(0, 1e-4, n))
    ux, uy, uz = np.sin(theta), np.zeros(n), np.cos(theta)
    vel = np.abs(rng.normal(10.0, 30.0, n))
    img = rng.integers(0, 256, (90, 160, 3), dtype=np.uint8)
    return [
        ("gaussian_splat", (rng.uniform(0, 96, 40), rng.uniform(0, 56, 40), 56, 96, 2.2)),
        ("auc_rank", (rng.random(200), rng.random(5376))),
        ("angular_velocity", (t, ux, uy, uz)),
        ("fixation_runs", (vel, 30.0, 1)),
        ("channel_histograms", (img, 32)),
    ]


def bench(repeat=20, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for name, args in cases(rng):
        row = {"kernel": name}
        for label, mod in (("python", _pykernels), ("cython", _ckernels)):
            if mod is None:
                row[label] = None
                continue
            fn = getattr(mod, name)
            timer = timeit.Timer(lambda: fn(*args))
            number, _ = timer.autorange()
            row[label] = min(timer.repeat(repeat=repeat, number=number)) / number
        row["speedup"] = row["python"] / row["cython"] if row["cython"] else None
        rows.append(row)
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args(argv)
    rows = bench(args.repeat)
    print(f"{'kernel':<20}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for r in rows:
        cy = f"{r['cython'] * 1e6:14.1f}" if r["cython"] else f"{'n/a':>14}"
        sp = f"{r['speedup']:9.1f}x" if r["speedup"] else f"{'n/a':>10}"
        print(f"{r['kernel']:<20}{r['python'] * 1e6:14.1f}{cy}{sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
