"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1]

Both variants are imported from the same module, so the environment flag
is not needed here.  The first numba call (compilation or cache load) is
timed separately.
"""
import argparse
import time

import numpy as np

from porous_euler import _jit, _kernels


def _best(f, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        f()
        t.append(time.perf_counter() - t0)
    return min(t)


def _parts(r):
    return r if isinstance(r, tuple) else (r,)


def cases(scale, rng):
    n = int(2000 * scale)
    tx, ty = rng.uniform(-1, 1, (2, n))
    sx, sy = rng.uniform(-1, 1, (2, n // 4))
    g = rng.normal(size=n // 4)
    yield ("blob_velocity", f"{n} targets x {n // 4} blobs",
           lambda k: k(tx, ty, sx, sy, g, 0.02), _kernels.blob_velocity_np, _kernels.blob_velocity_nb)

    n_obs, per = max(2, int(9 * scale)), 64
    th = 2 * np.pi * (np.arange(per + 1) + 0.5) / per
    nodes = 0.11 * np.arange(n_obs)[:, None] + 0.05 * np.exp(1j * th)[None, :]
    a, b = nodes[:, :-1].ravel(), nodes[:, 1:].ravel()
    mid = 0.5 * (a + b)
    nrm = -1j * (b - a) / np.abs(b - a)
    own = np.arange(a.size)
    yield ("panel_normal_matrix", f"{a.size} x {a.size}",
           lambda k: k(mid, nrm, a, b, 1, own), _kernels.panel_normal_matrix_np, _kernels.panel_normal_matrix_nb)

    m, q = int(1500 * scale), int(1000 * scale)
    x = 2.0 + rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m)
    dtx = 1.5 + 0.1j * rng.normal(size=m)
    y = rng.uniform(-0.2, 0.2, q) + 1j * rng.uniform(5, 6, q)
    w = rng.uniform(0, 1, q)
    yield ("cell_sums", f"{m} targets x {q} sources",
           lambda k: k(x, 1.5 * x, dtx, y, 1.5 * y, w, np.log(1.5)), _kernels.cell_sums_np, _kernels.cell_sums_nb)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--scale", type=float, default=1.0)
    args = p.parse_args(argv)
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':22s} {'size':28s} {'numpy [s]':>10s} {'numba [s]':>10s} {'first [s]':>10s} {'speed-up':>9s}")
    for name, size, call, k_np, k_nb in cases(args.scale, rng):
        t0 = time.perf_counter()
        r_nb = call(k_nb)
        first = time.perf_counter() - t0
        r_np = call(k_np)
        for u, v in zip(_parts(r_np), _parts(r_nb)):
            np.testing.assert_allclose(v, u, rtol=1e-9, atol=1e-11)
        t_np = _best(lambda: call(k_np), args.repeat)
        t_nb = _best(lambda: call(k_nb), args.repeat)
        print(f"{name:22s} {size:28s} {t_np:10.4f} {t_nb:10.4f} {first:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
