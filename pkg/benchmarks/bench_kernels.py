"""Time the compiled and numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--size 224] [--repeat 5]

Prints best-of-N wall time per call and the speedup. Both backends must
return identical arrays; the script exits 1 if they do not.
"""

import argparse
import sys
import timeit

import numpy as np

from fsk import _pykernels

try:
    from fsk import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, args, repeat: int) -> float:
    number = 3
    times = timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)
    return min(times) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--cell", type=int, default=8)
    ap.add_argument("--bins", type=int, default=9)
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    gray = np.random.default_rng(0).integers(0, 256, (args.size, args.size), dtype=np.uint8)
    cases = {
        "lbp_plane": (gray,),
        "hog_cell_histograms": (gray, args.cell, args.bins),
    }
    ok = True
    print(f"{args.size}x{args.size} gray, best of {args.repeat}")
    print(f"{'kernel':<22}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, call_args in cases.items():
        py_fn, c_fn = getattr(_pykernels, name), getattr(_ckernels, name)
        same = np.array_equal(np.asarray(py_fn(*call_args)), np.asarray(c_fn(*call_args)))
        ok &= same
        t_py = bench(py_fn, call_args, args.repeat)
        t_c = bench(c_fn, call_args, args.repeat)
        flag = "" if same else "  MISMATCH"
        print(f"{name:<22}{1e3 * t_py:>10.3f}{1e3 * t_c:>11.3f}{t_py / t_c:>8.1f}x{flag}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
