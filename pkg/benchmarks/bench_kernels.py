"""Compare the compiled kernels against the numpy reference.

Runs each hot kernel on realistic batch sizes (one quadrature state per
element, 3x3 Gauss) and reports median wall time per call plus the
speedup of the extension over the numpy path.  Also cross-checks that
both implementations agree to near machine precision on the same
inputs, so a speedup never comes from diverging semantics.

Usage: python3 benchmarks/bench_kernels.py [n_elements]
"""

import sys
import time

import numpy as np

from lamopt import _kernels_py as ref
from lamopt import kernels
from lamopt.quadrature import gauss2d, strain_matrix

try:
    from lamopt import _core as ext
except ImportError:
    ext = None


def median_time(fn, args, repeat=9):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def make_inputs(ne, rng):
    pts, w = gauss2d(3)
    nq = len(w)
    B = strain_matrix(pts)
    lam = mu = 1.0

    # the assembly path feeds flat per-qp fields, shape (ne*nq,)
    alpha = rng.uniform(-np.pi / 2, np.pi / 2, ne * nq)
    m = rng.uniform(1e-3, 1.0 - 1e-3, ne * nq)
    theta = rng.uniform(1e-3, 1.0, ne * nq)
    C = ref.laminate_tensors(alpha, m, theta, lam, mu, 1e-2)
    C = C.reshape(ne, nq, 3, 3)

    ue = rng.standard_normal((ne, 18))
    inv_h = np.full(ne, 8.0)

    sig = rng.standard_normal((ne * nq, 3))
    sig[:: nq] = 0.0  # keep the degenerate branch in play
    return {
        "element_stiffness": (C, B, w),
        "qp_strain": (ue, B, inv_h),
        "stress_to_params": (sig, 13.5, lam, mu),
        "laminate_tensors": (alpha, m, theta, lam, mu, 1e-2),
    }


def check_agreement(name, a, b):
    worst = 0.0
    for x, y in zip(np.atleast_1d(a), np.atleast_1d(b)):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        scale = max(1.0, float(np.abs(x).max()))
        worst = max(worst, float(np.abs(x - y).max()) / scale)
    if worst > 1e-12:
        raise AssertionError(f"{name}: implementations differ ({worst:.2e})")
    return worst


def main():
    ne = int(sys.argv[1]) if len(sys.argv) > 1 else 4096
    rng = np.random.default_rng(0)
    inputs = make_inputs(ne, rng)

    print(f"batch: {ne} elements x 9 quadrature points")
    print(f"compiled extension available: {ext is not None}")
    print(f"dispatch in lamopt.kernels: "
          f"{'compiled' if kernels.USING_COMPILED else 'numpy'}")
    print()
    header = f"{'kernel':<20} {'numpy':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for name, args in inputs.items():
        t_ref = median_time(getattr(ref, name), args)
        if ext is None:
            print(f"{name:<20} {t_ref * 1e3:>10.3f}ms {'n/a':>12} {'n/a':>9}")
            continue
        fn = getattr(ext, name)
        out_ref = getattr(ref, name)(*args)
        out_ext = fn(*args)
        if not isinstance(out_ref, tuple):
            out_ref, out_ext = (out_ref,), (out_ext,)
        check_agreement(name, out_ref, out_ext)
        t_ext = median_time(fn, args)
        print(f"{name:<20} {t_ref * 1e3:>10.3f}ms {t_ext * 1e3:>10.3f}ms "
              f"{t_ref / t_ext:>8.1f}x")

    print()
    print("agreement checked to 1e-12 relative on every output")


if __name__ == "__main__":
    main()
