"""Benchmark the compiled kernels against the numpy fallback.

Run: python benchmarks/bench_kernels.py

Times the two batch-term kernels at minibatch shapes the trainer actually
uses, plus one end-to-end fit with each backend (the backend of the fit is
selected through TILTWEIGH_KERNEL, so the end-to-end rows are produced by
re-executing this script in a subprocess per backend).
"""

import os
import subprocess
import sys
import time

import numpy as np

from tiltweigh._kernels import _fallback

try:
    from tiltweigh._kernels import _core
except ImportError:
    _core = None


def batch(seed, b, k, d):
    rng = np.random.default_rng(seed)
    fq = rng.standard_normal((b, k))
    fq -= fq.mean(axis=1, keepdims=True)
    return (
        np.ascontiguousarray(fq),
        np.ascontiguousarray(rng.standard_normal((b, d))),
        np.ascontiguousarray(rng.standard_normal((b, d))),
        rng.integers(0, k, b),
        np.ascontiguousarray(0.3 * rng.standard_normal((k, d))),
        np.ascontiguousarray(0.3 * rng.standard_normal(k)),
    )


def time_fn(fn, *args, repeat=2000):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    shapes = [(500, 2, 8), (500, 2, 512), (1500, 30, 64), (4096, 3, 2)]
    print(f"{'shape (B,K,d)':>18} {'kernel':>14} {'python':>12} {'compiled':>12} {'speedup':>8}")
    for b, k, d in shapes:
        fq, tq, tp, yp, theta, beta = batch(0, b, k, d)
        rows = [
            ("target terms", lambda impl: impl.tilt_target_terms(fq, tq, theta, beta)),
            ("source terms", lambda impl: impl.tilt_source_terms(tp, yp, theta, beta, 80.0)),
        ]
        for name, call in rows:
            t_py = time_fn(call, _fallback, repeat=500)
            if _core is None:
                print(f"{(b, k, d)!s:>18} {name:>14} {t_py * 1e6:>10.1f}us {'n/a':>12} {'n/a':>8}")
                continue
            t_c = time_fn(call, _core, repeat=500)
            print(
                f"{(b, k, d)!s:>18} {name:>14} {t_py * 1e6:>10.1f}us "
                f"{t_c * 1e6:>10.1f}us {t_py / t_c:>7.1f}x"
            )


def bench_fit():
    import tiltweigh as tw
    from tiltweigh._kernels import BACKEND

    spec = tw.GaussianLdaSpec(
        [0.5, 0.5], [[-1.5] + [0.0] * 7, [1.5] + [0.0] * 7],
        [[-1.2] + [0.0] * 7, [1.8] + [0.0] * 7],
    )
    src, tgt, _, _ = tw.gen_lda(spec, 5000, 5000, 3)
    clf = tw.fit_logistic(src, "l2", 1e-3, 1e-7, 300)
    cfg = tw.ExtraConfig(learning_rate=5e-4, batch_size=500, epochs=100, seed=1)
    tw.fit_extra(clf, src, tgt, cfg)  # warm up
    t0 = time.perf_counter()
    tw.fit_extra(clf, src, tgt, cfg)
    print(f"fit (n=5000, p=8, B=500, 100 epochs) with {BACKEND:>8} backend: "
          f"{time.perf_counter() - t0:.3f}s")


if __name__ == "__main__":
    if len(sys.argv) > 1 and sys.argv[1] == "--fit-only":
        bench_fit()
        sys.exit(0)
    bench_kernels()
    print(flush=True)
    for backend in ("python", ""):
        env = dict(os.environ, TILTWEIGH_KERNEL=backend)
        subprocess.run([sys.executable, __file__, "--fit-only"], env=env, check=True)
