"""Command-line harness.

    collapse-lab <workflow> --config <path> [--out <dir>] [--seeds N] [--rank-tol X]

Workflows:
    predict     write geometry.json (closed-form minimizer) and grams.csv
    solve       run the first-order solver, write trajectory.csv and
                final_state.json (including the gap to the closed form)
    thresholds  write collapse.json (threshold, per-class flags, ratio bound)
    seli        write seli.json (our Grams vs SELI, gaps, margin-ratio ladder)
    sweep       one solve per imbalance ratio, aggregated into sweep.csv

The config is a single JSON document, e.g.::

    {"K": 2, "d": 3, "counts": [8, 2], "lambda_w": 0.01, "lambda_h": 0.01,
     "solver": {"max_iters": 50000, "step_size": 0.01,
                "method": "adaptive-moments", "log_interval": 1000,
                "seed": 0},
     "sweep": {"ratios": [5, 10, 20, 50], "k_a": 5, "k_b": 5, "n_b": 10}}

``sweep`` must be present exactly when the workflow is ``sweep`` (its per-R
counts are ``[R * n_b] * k_a + [n_b] * k_b``; top-level K/counts are then
unused). Real numbers are serialized with 17 significant digits so every
JSON artifact round-trips doubles losslessly. CSV output is RFC 4180 with
the literal string ``undef`` for undefined metric values.

Exit codes: 0 success, 2 config error, 3 divergence, 4 I/O failure.
COLLAPSE_LAB_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, geometry, metrics, solver

TRAJECTORY_HEADER = ["iter", "loss", "residual", "nc1", "nc2_w_h", "nc2_wwt", "nc2_hth", "nc3_wh"]
SWEEP_HEADER = [
    "R", "status", "loss", "closed_form_gap",
    "nc1", "nc2_w_h", "nc2_wwt", "nc2_hth", "nc3_wh",
    "collapsed", "complete_collapse",
]
GRAMS_HEADER = ["matrix", "row", "col", "value"]
SELI_LAMBDA_LADDER = tuple(10.0 ** (-e) for e in range(2, 11))

WORKFLOWS = ("predict", "solve", "thresholds", "seli", "sweep")

UNDEF = "undef"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# JSON with 17-significant-digit reals (lossless double round-trip)
# ---------------------------------------------------------------------------

def format_real(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite real {x!r}; map it to {UNDEF!r} first")
    return format(float(x), ".17g")


def _emit(obj, indent: int, out: list[str]) -> None:
    pad, pad_in = " " * indent, " " * (indent + 2)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_real(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, out)
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad_in)
            _emit(item, indent + 2, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (key, value) in enumerate(items):
            out.append(pad_in + json.dumps(str(key)) + ": ")
            _emit(value, indent + 2, out)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    out: list[str] = []
    _emit(obj, 0, out)
    out.append("\n")
    return "".join(out)


def _metric_json(value: float | None):
    return value if value is not None and math.isfinite(value) else UNDEF


def _metric_csv(value: float | None) -> str:
    return format_real(value) if value is not None and math.isfinite(value) else UNDEF


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSettings:
    ratios: tuple[float, ...]
    k_a: int
    k_b: int
    n_b: int


@dataclass(frozen=True)
class RunConfig:
    workflow: str
    spec: geometry.ProblemSpec | None
    solver: solver.SolverConfig
    output_dir: Path
    sweep: SweepSettings | None
    seeds: int
    rank_tol: float


_SOLVER_KEYS = {
    "max_iters", "step_size", "method", "beta1", "beta2", "eps",
    "stop_residual", "log_interval", "seed", "init_scale",
}


def _solver_config(raw: dict) -> solver.SolverConfig:
    unknown = set(raw) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
    try:
        return solver.SolverConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc


def _problem_spec(doc: dict) -> geometry.ProblemSpec:
    missing = [key for key in ("K", "d", "counts", "lambda_w", "lambda_h") if key not in doc]
    if missing:
        raise ConfigError(f"config is missing {missing}")
    try:
        return geometry.ProblemSpec(
            k=doc["K"], d=doc["d"], counts=doc["counts"],
            lambda_w=doc["lambda_w"], lambda_h=doc["lambda_h"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad instance: {exc}") from exc


def _sweep_settings(raw) -> SweepSettings:
    if not isinstance(raw, dict):
        raise ConfigError("sweep must be an object with ratios, k_a, k_b, n_b")
    missing = [key for key in ("ratios", "k_a", "k_b", "n_b") if key not in raw]
    if missing:
        raise ConfigError(f"sweep is missing {missing}")
    ratios = tuple(float(r) for r in raw["ratios"])
    if not ratios:
        raise ConfigError("sweep.ratios must be a nonempty list of imbalance ratios")
    k_a, k_b, n_b = int(raw["k_a"]), int(raw["k_b"]), int(raw["n_b"])
    if min(k_a, k_b, n_b) < 1:
        raise ConfigError("sweep group shape entries must be >= 1")
    for r in ratios:
        if r < 1:
            raise ConfigError(f"imbalance ratio {r} must be >= 1")
        if abs(r * n_b - round(r * n_b)) > 1e-9:
            raise ConfigError(f"ratio {r} with n_b={n_b} gives a non-integer majority count")
    return SweepSettings(ratios=ratios, k_a=k_a, k_b=k_b, n_b=n_b)


def load_run_config(path, workflow: str, out_dir, seeds: int, rank_tol: float) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    if seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    if not rank_tol >= 0:
        raise ConfigError("--rank-tol must be >= 0")

    if workflow == "sweep":
        if "sweep" not in doc:
            raise ConfigError("sweep workflow needs a sweep object in the config")
        sweep = _sweep_settings(doc["sweep"])
        if "d" not in doc or "lambda_w" not in doc or "lambda_h" not in doc:
            raise ConfigError("sweep config needs d, lambda_w and lambda_h")
        spec = None
        # early shape validation: d has to accommodate K = k_a + k_b
        if int(doc["d"]) < sweep.k_a + sweep.k_b:
            raise ConfigError(
                f"d={doc['d']} must be >= K={sweep.k_a + sweep.k_b} for the sweep shape"
            )
    else:
        if "sweep" in doc:
            raise ConfigError(f"sweep settings are only valid for the sweep workflow, not {workflow}")
        sweep = None
        spec = _problem_spec(doc)

    cfg = _solver_config(doc.get("solver", {}))
    output = Path(out_dir) if out_dir is not None else Path(doc.get("output_dir", "out"))
    return RunConfig(
        workflow=workflow, spec=spec, solver=cfg, output_dir=output,
        sweep=sweep, seeds=seeds, rank_tol=rank_tol,
    )


def _sweep_problem_spec(doc_d: int, lw: float, lh: float, sweep: SweepSettings, ratio: float):
    n_a = int(round(ratio * sweep.n_b))
    counts = (n_a,) * sweep.k_a + (sweep.n_b,) * sweep.k_b
    return geometry.ProblemSpec(
        k=sweep.k_a + sweep.k_b, d=doc_d, counts=counts, lambda_w=lw, lambda_h=lh
    )


# ---------------------------------------------------------------------------
# Artifact writers / readers
# ---------------------------------------------------------------------------

def _spec_doc(spec: geometry.ProblemSpec) -> dict:
    return {
        "K": spec.k, "d": spec.d, "counts": list(spec.counts),
        "lambda_w": spec.lambda_w, "lambda_h": spec.lambda_h,
    }


def _collapse_doc(report: analysis.CollapseReport) -> dict:
    return {
        "threshold": report.threshold,
        "collapsed": list(report.collapsed),
        "minority_collapse": report.minority_collapse,
        "complete_collapse": report.complete_collapse,
        "minority_ratio_bound": report.minority_ratio_bound,
    }


def write_geometry_json(path: Path, spec: geometry.ProblemSpec,
                        geom: geometry.ClosedFormGeometry,
                        collapse: analysis.CollapseReport) -> None:
    doc = {
        "spec": _spec_doc(spec),
        "m": geom.m,
        "mean_norms_sq": geom.mean_norms_sq,
        "class_means": geom.class_means,
        "classifier": geom.classifier,
        "logits": geom.logits,
        "margins": geom.margins,
        "optimal_loss": geom.optimal_loss,
        "collapse": _collapse_doc(collapse),
    }
    path.write_text(dumps_json(doc), encoding="utf-8")


def load_geometry_json(path) -> tuple[geometry.ProblemSpec, geometry.ClosedFormGeometry]:
    """Parse geometry.json back into a ClosedFormGeometry (bit-exact reals)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    spec_doc = doc["spec"]
    spec = geometry.ProblemSpec(
        k=spec_doc["K"], d=spec_doc["d"], counts=spec_doc["counts"],
        lambda_w=spec_doc["lambda_w"], lambda_h=spec_doc["lambda_h"],
    )
    geom = geometry.ClosedFormGeometry(
        m=np.asarray(doc["m"], dtype=np.float64),
        mean_norms_sq=np.asarray(doc["mean_norms_sq"], dtype=np.float64),
        class_means=np.asarray(doc["class_means"], dtype=np.float64),
        classifier=np.asarray(doc["classifier"], dtype=np.float64),
        logits=np.asarray(doc["logits"], dtype=np.float64),
        margins=np.asarray(doc["margins"], dtype=np.float64),
        optimal_loss=float(doc["optimal_loss"]),
    )
    return spec, geom


def write_grams_csv(path: Path, geom: geometry.ClosedFormGeometry) -> None:
    named = {
        "w_wt": geom.classifier @ geom.classifier.T,
        "ht_h": geom.class_means.T @ geom.class_means,
        "w_hbar": geom.logits,
    }
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRAMS_HEADER)
        for name, gram in named.items():
            for i in range(gram.shape[0]):
                for j in range(gram.shape[1]):
                    writer.writerow([name, i, j, format_real(gram[i, j])])


def write_trajectory_csv(path: Path, trajectory: solver.Trajectory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for snap in trajectory.snapshots:
            rep = snap.report
            writer.writerow([
                snap.iter,
                format_real(snap.loss),
                format_real(snap.residual),
                _metric_csv(rep.nc1),
                _metric_csv(rep.nc2_w_vs_h),
                _metric_csv(rep.nc2_wwt),
                _metric_csv(rep.nc2_hth),
                _metric_csv(rep.nc3_wh),
            ])


def _report_doc(report: metrics.MetricsReport) -> dict:
    return {
        "nc1": _metric_json(report.nc1),
        "nc2_w_h": _metric_json(report.nc2_w_vs_h),
        "nc2_wwt": _metric_json(report.nc2_wwt),
        "nc2_hth": _metric_json(report.nc2_hth),
        "nc3_wh": _metric_json(report.nc3_wh),
    }


def _solve_instance(rc: RunConfig, spec: geometry.ProblemSpec, out_dir: Path) -> dict:
    """Best-of-seeds solve; writes per-run artifacts and returns the summary."""
    state, trajectory, finals = solver.run_best_of(spec, rc.solver, rc.seeds)
    stats = metrics.class_statistics(state.h, spec.counts)
    final_report = metrics.report(state.w, state.h, spec, rc.rank_tol)
    reference = geometry.closed_form_loss(spec)
    summary = {
        "spec": _spec_doc(spec),
        "seeds": [{"seed": seed, "loss": loss} for seed, loss in finals],
        "best_seed": min(finals, key=lambda item: item[1])[0],
        "iterations": state.iter,
        "loss": state.loss,
        "residual": state.residual,
        "closed_form_loss": reference,
        "closed_form_gap": state.loss - reference,
        "metrics": _report_doc(final_report),
        "collapse": _collapse_doc(analysis.collapse_report(spec)),
        "classifier": state.w,
        "class_means": stats.class_means,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out_dir / "trajectory.csv", trajectory)
    (out_dir / "final_state.json").write_text(dumps_json(summary), encoding="utf-8")
    return summary


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------

def cmd_predict(rc: RunConfig) -> None:
    geom = geometry.closed_form_geometry(rc.spec)
    report = analysis.collapse_report(rc.spec)
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    write_geometry_json(rc.output_dir / "geometry.json", rc.spec, geom, report)
    write_grams_csv(rc.output_dir / "grams.csv", geom)


def cmd_solve(rc: RunConfig) -> None:
    _solve_instance(rc, rc.spec, rc.output_dir)


def cmd_thresholds(rc: RunConfig) -> None:
    report = analysis.collapse_report(rc.spec)
    doc = {
        "spec": _spec_doc(rc.spec),
        "m": geometry.margin_constants(rc.spec),
        **_collapse_doc(report),
    }
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    (rc.output_dir / "collapse.json").write_text(dumps_json(doc), encoding="utf-8")


def cmd_seli(rc: RunConfig) -> None:
    spec = rc.spec
    try:
        two = analysis.two_group_from_counts(spec.counts, spec.lambda_w, spec.lambda_h)
        if two.k_a != two.k_b:
            raise ValueError("SELI comparison needs equal group sizes")
        comparison = analysis.seli_compare(two)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    ladder = []
    for lam in SELI_LAMBDA_LADDER:
        try:
            ratio = analysis.m_ratio_limit(two.n_a, two.n_b, two.k, two.n_total, lam)
        except ValueError:
            ratio = None
        ladder.append({"lambda_w": lam, "lambda_h": lam, "m_ratio": _metric_json(ratio)})

    doc = {
        "spec": _spec_doc(spec),
        "two_group": {"k_a": two.k_a, "k_b": two.k_b, "n_a": two.n_a, "n_b": two.n_b,
                      "ratio": two.ratio},
        "m_ratio_at_lambda": _metric_json(comparison.m_ratio_at_lambda),
        "frobenius_gap_w": comparison.frobenius_gap_w,
        "frobenius_gap_h": comparison.frobenius_gap_h,
        "gram_w_ours": comparison.gram_w_ours,
        "gram_h_centered_ours": comparison.gram_h_centered_ours,
        "gram_w_seli": comparison.gram_w_seli,
        "gram_h_seli": comparison.gram_h_seli,
        "gram_w_limit": comparison.gram_w_limit,
        "gram_h_centered_limit": comparison.gram_h_centered_limit,
        "m_ratio_ladder": ladder,
    }
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    (rc.output_dir / "seli.json").write_text(dumps_json(doc), encoding="utf-8")


def _sweep_workers(n_jobs: int) -> int:
    env = os.environ.get("COLLAPSE_LAB_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"COLLAPSE_LAB_THREADS={env!r} is not an integer") from exc
        if cap < 1:
            raise ConfigError("COLLAPSE_LAB_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def cmd_sweep(rc: RunConfig, config_doc: dict) -> None:
    sweep = rc.sweep
    d = int(config_doc["d"])
    lw, lh = float(config_doc["lambda_w"]), float(config_doc["lambda_h"])
    rc.output_dir.mkdir(parents=True, exist_ok=True)

    def run_one(ratio: float):
        spec = _sweep_problem_spec(d, lw, lh, sweep, ratio)
        return _solve_instance(rc, spec, rc.output_dir / f"R_{ratio:g}")

    rows = []
    with ThreadPoolExecutor(max_workers=_sweep_workers(len(sweep.ratios))) as pool:
        futures = {ratio: pool.submit(run_one, ratio) for ratio in sweep.ratios}
        for ratio in sweep.ratios:  # deterministic row order
            try:
                summary = futures[ratio].result()
            except Exception as exc:  # per-run failures become rows, the sweep continues
                rows.append([format_real(ratio), f"error:{type(exc).__name__}"]
                            + [UNDEF] * (len(SWEEP_HEADER) - 2))
                continue
            report, collapse = summary["metrics"], summary["collapse"]
            rows.append([
                format_real(ratio), "ok",
                format_real(summary["loss"]), format_real(summary["closed_form_gap"]),
                *(value if isinstance(value, str) else format_real(value)
                  for value in (report["nc1"], report["nc2_w_h"], report["nc2_wwt"],
                                report["nc2_hth"], report["nc3_wh"])),
                ";".join("1" if flag else "0" for flag in collapse["collapsed"]),
                "1" if collapse["complete_collapse"] else "0",
            ])

    with open(rc.output_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapse-lab",
        description="Closed-form and first-order engines for imbalanced CE feature learning",
    )
    parser.add_argument("workflow", choices=WORKFLOWS)
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help="output directory (default: config output_dir or ./out)")
    parser.add_argument("--seeds", type=int, default=8,
                        help="seeds for best-of-n solve runs (default 8)")
    parser.add_argument("--rank-tol", type=float, default=metrics.DEFAULT_RANK_TOL,
                        help="relative rank cutoff for the between-class covariance pseudo-inverse")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = load_run_config(args.config, args.workflow, args.out, args.seeds, args.rank_tol)
        if args.workflow == "predict":
            cmd_predict(rc)
        elif args.workflow == "solve":
            cmd_solve(rc)
        elif args.workflow == "thresholds":
            cmd_thresholds(rc)
        elif args.workflow == "seli":
            cmd_seli(rc)
        else:
            with open(args.config, "r", encoding="utf-8") as fh:
                cmd_sweep(rc, json.load(fh))
    except ConfigError as exc:
        print(f"collapse-lab: config error: {exc}", file=sys.stderr)
        return 2
    except solver.DivergenceError as exc:
        print(f"collapse-lab: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"collapse-lab: I/O failure: {exc}", file=sys.stderr)
        return 4
    return 0


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
