"""Projected first-order minimization of the regularized CE factorization.

Minimizes ``(1/N) sum_k sum_i CE(W h_{k,i}, y_k) + lambda_w/2 ||W||_F^2 +
lambda_h/2 ||H||_F^2`` over (W, H) subject to H >= 0 entrywise. Two methods:
plain projected gradient descent with a fixed step, and adaptive moments
(Adam) with a x0.1 step decay at the halfway iteration. The feasible set is
the nonnegative orthant, so the projection is an entrywise clamp at zero.

Stationarity is measured by a projected-gradient residual that is exact on
the boundary: ``||gW||_F + ||(H - clamp0(H - s * gH)) / s||_F`` for a probe
step s, which reduces to the plain gradient norm at interior points.

Runs are full batch and bit-deterministic for a fixed seed and backend.
Since the objective is non-convex, global-optimum claims are made via a
best-of-seeds protocol (see ``run_best_of``), never from a single run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from ._kernels import get_kernels
from .geometry import ProblemSpec

DEFAULT_PROBE_STEP = 1e-6

# Adaptive-moments schedule: one x0.1 step decay at the halfway iteration.
ADAPTIVE_DECAY_FACTOR = 0.1

PLAIN = "plain-projected-gradient"
ADAPTIVE = "adaptive-moments"


class DivergenceError(RuntimeError):
    """Raised when the running loss exceeds 10x its initial value."""


@dataclass(frozen=True)
class SolverConfig:
    """Run settings for :func:`run`.

    ``method`` is one of ``plain-projected-gradient`` or ``adaptive-moments``.
    The adaptive method uses (beta1, beta2, eps) moments and decays the step
    by x0.1 at ``max_iters // 2``; the plain method keeps ``step_size`` fixed.
    """

    max_iters: int = 50_000
    step_size: float = 1e-2
    method: str = ADAPTIVE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    stop_residual: float = 1e-8
    log_interval: int = 1000
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.method not in (PLAIN, ADAPTIVE):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if not self.stop_residual > 0:
            raise ValueError("stop_residual must be > 0")
        if self.log_interval < 1:
            raise ValueError("log_interval must be >= 1")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be > 0")


@dataclass(frozen=True)
class SolverState:
    """Iterate (w, h) with its iteration number, loss and residual."""

    w: np.ndarray
    h: np.ndarray
    iter: int
    loss: float
    residual: float


@dataclass(frozen=True)
class TrajectorySnapshot:
    iter: int
    loss: float
    residual: float
    report: metrics.MetricsReport


@dataclass
class Trajectory:
    """Metric snapshots at iteration 0, every log interval, and the end."""

    snapshots: list[TrajectorySnapshot] = field(default_factory=list)

    def append(self, snap: TrajectorySnapshot) -> None:
        if self.snapshots and snap.iter <= self.snapshots[-1].iter:
            raise ValueError("snapshot iterations must be strictly increasing")
        self.snapshots.append(snap)


def init(spec: ProblemSpec, seed: int, init_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Random feasible starting point.

    W is zero-mean Gaussian with entry scale ``init_scale / sqrt(d)``; H is
    the absolute value of a draw from the same distribution, so it is
    feasible (and strictly positive almost surely).
    """
    rng = np.random.default_rng(seed)
    scale = init_scale / math.sqrt(spec.d)
    w = scale * rng.standard_normal((spec.k, spec.d))
    h = np.abs(scale * rng.standard_normal((spec.d, spec.n_total)))
    return np.ascontiguousarray(w), np.ascontiguousarray(h)


def _check_shapes(w: np.ndarray, h: np.ndarray, spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    w = np.ascontiguousarray(w, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    if w.shape != (spec.k, spec.d):
        raise ValueError(f"w must be {spec.k}x{spec.d}, got {w.shape}")
    if h.shape != (spec.d, spec.n_total):
        raise ValueError(f"h must be {spec.d}x{spec.n_total}, got {h.shape}")
    return w, h


def objective(w: np.ndarray, h: np.ndarray, spec: ProblemSpec) -> float:
    """Full-batch objective value; requires a feasible (entrywise >= 0) h."""
    w, h = _check_shapes(w, h, spec)
    if h.size and float(h.min()) < 0:
        raise ValueError("h is infeasible: negative entries")
    return float(get_kernels().loss(w, h, spec.labels(), spec.lambda_w, spec.lambda_h))


def gradients(w: np.ndarray, h: np.ndarray, spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of the objective at (w, h)."""
    w, h = _check_shapes(w, h, spec)
    _, gw, gh = get_kernels().loss_and_grads(
        w, h, spec.labels(), spec.lambda_w, spec.lambda_h
    )
    return gw, gh


def _residual_value(gw: np.ndarray, gh: np.ndarray, h: np.ndarray, probe_step: float) -> float:
    moved = np.maximum(h - probe_step * gh, 0.0)
    return float(np.linalg.norm(gw) + np.linalg.norm((h - moved) / probe_step))


def projected_residual(
    w: np.ndarray, h: np.ndarray, spec: ProblemSpec, probe_step: float = DEFAULT_PROBE_STEP
) -> float:
    """Stationarity measure compatible with the H >= 0 constraint.

    ``||gW||_F + ||(H - clamp0(H - probe_step * gH)) / probe_step||_F``;
    at interior points this is just ``||gW||_F + ||gH||_F``, while a zero
    coordinate with positive gradient contributes nothing.
    """
    if not probe_step > 0:
        raise ValueError("probe_step must be > 0")
    w, h = _check_shapes(w, h, spec)
    if h.size and float(h.min()) < 0:
        raise ValueError("h is infeasible: negative entries")
    gw, gh = gradients(w, h, spec)
    return _residual_value(gw, gh, h, probe_step)


def run(spec: ProblemSpec, config: SolverConfig) -> tuple[SolverState, Trajectory]:
    """Minimize the objective from a seeded random start.

    Each iteration is a step followed by the clamp of H at zero; metrics are
    logged at iteration 0, every ``log_interval`` iterations, and at the
    final iterate. Stops once the projected residual drops to
    ``stop_residual`` or after ``max_iters`` iterations. Raises
    :class:`DivergenceError` if the loss exceeds 10x its initial value.
    """
    kern = get_kernels()
    labels = spec.labels()
    w, h = init(spec, config.seed, config.init_scale)
    lam_w, lam_h = spec.lambda_w, spec.lambda_h

    def evaluate():
        value, gw, gh = kern.loss_and_grads(w, h, labels, lam_w, lam_h)
        return float(value), _residual_value(gw, gh, h, DEFAULT_PROBE_STEP)

    trajectory = Trajectory()
    loss0, residual = evaluate()
    trajectory.append(TrajectorySnapshot(0, loss0, residual, metrics.report(w, h, spec)))
    loss = loss0
    it = 0

    adaptive = config.method == ADAPTIVE
    half = config.max_iters // 2
    if adaptive:
        mw, vw = np.zeros_like(w), np.zeros_like(w)
        mh, vh = np.zeros_like(h), np.zeros_like(h)

    while it < config.max_iters and residual > config.stop_residual:
        target = min((it // config.log_interval + 1) * config.log_interval, config.max_iters)
        if adaptive and it < half:
            # keep each chunk on one side of the step-decay boundary
            target = min(target, half)
        steps = target - it
        if adaptive:
            step = config.step_size if it < half else config.step_size * ADAPTIVE_DECAY_FACTOR
            kern.adam_chunk(
                w, h, mw, vw, mh, vh, labels, lam_w, lam_h,
                step, config.beta1, config.beta2, config.eps, it, steps,
            )
        else:
            kern.plain_chunk(w, h, labels, lam_w, lam_h, config.step_size, steps)
        it = target
        loss, residual = evaluate()
        if not math.isfinite(loss) or loss > 10.0 * loss0:
            raise DivergenceError(
                f"divergence at iteration {it}: loss {loss:.6e} exceeds "
                f"10x initial loss {loss0:.6e}; reduce step_size"
            )
        done = it >= config.max_iters or residual <= config.stop_residual
        if it % config.log_interval == 0 or done:
            if h.size and float(h.min()) < 0:  # projection guarantees this
                raise RuntimeError(f"feasibility lost at iteration {it}")
            trajectory.append(
                TrajectorySnapshot(it, loss, residual, metrics.report(w, h, spec))
            )

    state = SolverState(w=w, h=h, iter=it, loss=loss, residual=residual)
    return state, trajectory


def run_best_of(
    spec: ProblemSpec, config: SolverConfig, n_seeds: int
) -> tuple[SolverState, Trajectory, list[tuple[int, float]]]:
    """Run ``n_seeds`` consecutive seeds and keep the lowest-loss run.

    Returns the best (state, trajectory) plus the per-seed final losses.
    This is the protocol behind any global-optimum claim: the objective is
    non-convex, so a single run only certifies an upper bound.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    best: tuple[SolverState, Trajectory] | None = None
    finals: list[tuple[int, float]] = []
    for offset in range(n_seeds):
        seed = config.seed + offset
        state, trajectory = run(spec, replace(config, seed=seed))
        finals.append((seed, state.loss))
        if best is None or state.loss < best[0].loss:
            best = (state, trajectory)
    assert best is not None
    return best[0], best[1], finals
