"""Shared helpers: random instance generators and one-time kernel warmup."""

import numpy as np
import pytest

from collapse_lab import ProblemSpec, SolverConfig, TwoGroupSpec, run


def random_spec(rng: np.random.Generator, k_max: int = 10, n_max: int = 100) -> ProblemSpec:
    """Random instance with K in [2, k_max], d in [K, K+8], log-uniform decay."""
    k = int(rng.integers(2, k_max + 1))
    d = int(rng.integers(k, k + 9))
    counts = tuple(int(n) for n in rng.integers(1, n_max + 1, size=k))
    lam_w = float(10.0 ** rng.uniform(-4, -1))
    lam_h = float(10.0 ** rng.uniform(-4, -1))
    return ProblemSpec(k=k, d=d, counts=counts, lambda_w=lam_w, lambda_h=lam_h)


def random_two_group(rng: np.random.Generator, collapse_free: bool = True) -> TwoGroupSpec:
    """Random imbalanced two-group spec (R > 1), optionally with no collapse."""
    while True:
        k_a = int(rng.integers(2, 5))
        k_b = int(rng.integers(2, 5))
        n_b = int(rng.integers(2, 30))
        n_a = n_b * int(rng.integers(2, 8))
        lam = float(10.0 ** rng.uniform(-4, -2))
        two = TwoGroupSpec(k_a=k_a, k_b=k_b, n_a=n_a, n_b=n_b, lambda_w=lam, lambda_h=lam)
        if not collapse_free:
            return two
        m_a, m_b = two.margin_pair()
        if m_a > 0 and m_b > 0:
            return two


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the JIT kernels once so timed tests see steady-state speed."""
    spec = ProblemSpec(k=2, d=2, counts=(2, 1), lambda_w=0.05, lambda_h=0.05)
    for method in ("adaptive-moments", "plain-projected-gradient"):
        run(spec, SolverConfig(max_iters=3, log_interval=3, method=method,
                               step_size=1e-3, seed=0))
    return True
