"""Compare the numba and pure-numpy variants of the hot kernels.

    python benchmarks/bench_accel.py [--repeat N]

Prints median wall time per call for each variant and the speedup. The
end-to-end row streams 2000 samples through ``extend`` in a subprocess per
backend, since the backend is fixed at import time by NONSTAT_KRR_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nonstat_krr import _accel, _hot
from nonstat_krr.kernels import Kernel

STREAM = """
import time, numpy as np
from nonstat_krr import krr
from nonstat_krr.kernels import Kernel
rng = np.random.default_rng(0)
x = rng.uniform(0, 10, {n}); y = np.sin(x)
g = krr.GammaSchedule()
m = krr.KrrModel.empty(Kernel.gaussian())
m = krr.extend(m, x[0], y[0], g(1))
t0 = time.perf_counter()
for j in range(1, {n}):
    m = krr.extend(m, x[j], y[j], g(j + 1))
print(time.perf_counter() - t0)
"""


def _median(fn, repeat):
    fn()  # warm-up, includes compilation on the numba side
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def _stream(flag, n):
    env = {**os.environ, "NONSTAT_KRR_NUMBA": flag}
    out = subprocess.run([sys.executable, "-c", STREAM.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--stream", type=int, default=2000, help="samples for the streaming row")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(1)
    code = Kernel.gaussian()._code()
    x, a = rng.uniform(0, 10, 2000), rng.uniform(0, 10, 2001)
    n = 2000
    m = rng.normal(size=(n, n))
    L = np.linalg.cholesky(m @ m.T / n + np.eye(n))
    k = rng.normal(size=n)

    cases = [
        ("cross 2000x2001", lambda f: f(x, a, *code), _hot.cross_nb, _hot.cross_np),
        ("gram 2000", lambda f: f(x, *code), _hot.gram_nb, _hot.gram_np),
        ("forward row n=2000", lambda f: f(L, n, k), _hot.forward_row_nb, _hot.forward_row_np),
    ]
    print(f"{'case':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for name, call, fnb, fnp in cases:
        tb = _median(lambda: call(fnb), args.repeat)
        tn = _median(lambda: call(fnp), args.repeat)
        print(f"{name:<24}{tb * 1e3:>12.3f}{tn * 1e3:>12.3f}{tn / tb:>9.2f}")
    sb, sn = _stream("1", args.stream), _stream("0", args.stream)
    print(f"{'stream extend x' + str(args.stream):<24}{sb * 1e3:>12.1f}{sn * 1e3:>12.1f}{sn / sb:>9.2f}")


if __name__ == "__main__":
    main()
