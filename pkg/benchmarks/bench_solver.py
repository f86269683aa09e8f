"""Benchmark the numba kernels against the pure-numpy fallback.

Times the fused loss+gradient kernel and full solver runs on three instance
sizes, once per backend. Run from the repo root:

    python benchmarks/bench_solver.py

The same comparison can be forced process-wide with
COLLAPSE_LAB_BACKEND=numpy|numba.
"""

import os
import time

from collapse_lab import ProblemSpec, SolverConfig, init, run
from collapse_lab._kernels import get_kernels

INSTANCES = [
    ("tiny  K=2 d=3 N=10", ProblemSpec(k=2, d=3, counts=(8, 2), lambda_w=0.01, lambda_h=0.01)),
    ("small K=4 d=6 N=50", ProblemSpec(k=4, d=6, counts=(20, 20, 5, 5), lambda_w=0.005, lambda_h=0.005)),
    ("mid   K=10 d=16 N=1000",
     ProblemSpec(k=10, d=16, counts=(300, 200, 150, 100, 80, 60, 50, 30, 20, 10),
                 lambda_w=1e-4, lambda_h=1e-4)),
]


def bench_kernel(backend, spec, repeats=2000):
    kern = get_kernels(backend)
    w, h = init(spec, seed=0, init_scale=1.0)
    labels = spec.labels()
    kern.loss_and_grads(w, h, labels, spec.lambda_w, spec.lambda_h)  # warmup / JIT
    start = time.perf_counter()
    for _ in range(repeats):
        kern.loss_and_grads(w, h, labels, spec.lambda_w, spec.lambda_h)
    return (time.perf_counter() - start) / repeats


def bench_run(backend, spec, iters=2000):
    previous = os.environ.get("COLLAPSE_LAB_BACKEND")
    os.environ["COLLAPSE_LAB_BACKEND"] = backend
    try:
        cfg = SolverConfig(max_iters=iters, log_interval=iters, seed=0,
                           stop_residual=1e-300)
        run(spec, SolverConfig(max_iters=5, log_interval=5, seed=0))  # warmup / JIT
        start = time.perf_counter()
        run(spec, cfg)
        elapsed = time.perf_counter() - start
    finally:
        if previous is None:
            os.environ.pop("COLLAPSE_LAB_BACKEND", None)
        else:
            os.environ["COLLAPSE_LAB_BACKEND"] = previous
    return elapsed / iters


def main():
    backends = []
    for name in ("numpy", "numba"):
        try:
            get_kernels(name)
            backends.append(name)
        except KeyError:
            print(f"backend {name} unavailable, skipping")

    print(f"{'instance':<26} {'metric':<16} " + " ".join(f"{b:>12}" for b in backends) + f" {'speedup':>9}")
    for label, spec in INSTANCES:
        times = {b: bench_kernel(b, spec) for b in backends}
        ratio = times["numpy"] / times["numba"] if len(backends) == 2 else float("nan")
        print(f"{label:<26} {'loss+grads':<16} "
              + " ".join(f"{times[b] * 1e6:>10.1f}us" for b in backends)
              + f" {ratio:>8.1f}x")
        times = {b: bench_run(b, spec, iters=500 if "mid" in label else 2000) for b in backends}
        ratio = times["numpy"] / times["numba"] if len(backends) == 2 else float("nan")
        print(f"{label:<26} {'adam iteration':<16} "
              + " ".join(f"{times[b] * 1e6:>10.1f}us" for b in backends)
              + f" {ratio:>8.1f}x")


if __name__ == "__main__":
    main()
