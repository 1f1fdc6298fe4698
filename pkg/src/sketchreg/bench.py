"""Benchmark harness: synthetic data with a prescribed condition number,
CSV ingestion, ground-truth solves, the relative-error metric, and
multi-seed experiment orchestration."""

import csv
from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from .errors import (
    CsvParseError,
    DegenerateOptimumError,
    OracleDisagreementError,
    RaggedRowsError,
)
from .feasible import FeasibleSet, project_euclidean
from .linalg import qr_thin, tri_solve
from .solvers import SOLVERS, SolveReport, SolverConfig, objective_value, pw_gradient

__all__ = [
    "DatasetSpec",
    "ExperimentResult",
    "gen_synthetic",
    "make_feasible_set",
    "ground_truth",
    "relative_error",
    "negative_error_count",
    "reset_negative_error_count",
    "iterations_to_target",
    "run_experiment",
    "load_csv",
    "save_dataset_csv",
    "write_trace_csv",
]

TRACE_HEADER = ["solver", "seed", "iteration", "elapsed_seconds",
                "objective", "relative_error"]

# Count of negative relative errors clipped to zero (float fuzz below
# the oracle optimum); reset via reset_negative_error_count().
_negative_clips = 0


@dataclass(frozen=True)
class DatasetSpec:
    """Synthetic regression instance: n x d matrix with singular values
    log-uniform in [1, target_kappa], planted Gaussian solution, and
    Gaussian noise on the response."""

    n: int
    d: int
    target_kappa: float = 1.0
    noise_std: float = 0.1
    seed: int = 0
    constraint: str = "none"  # none | l1 | l2

    def __post_init__(self):
        if not self.n > self.d >= 1:
            raise ValueError(f"need n > d >= 1, got n={self.n}, d={self.d}")
        if self.target_kappa < 1.0:
            raise ValueError("target_kappa must be >= 1")
        if self.constraint not in ("none", "l1", "l2"):
            raise ValueError(f"unknown constraint {self.constraint!r}")


def gen_synthetic(spec: DatasetSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build (A, b, planted_x) with b = A @ planted_x + noise.

    The spectrum pins sigma_max = target_kappa and sigma_min = 1 and
    fills the rest log-uniformly, so the measured condition number
    matches the target up to orthogonal-factor rounding.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 7001]))
    n, d = spec.n, spec.d
    left = np.linalg.qr(rng.standard_normal((n, d)), mode="reduced")[0]
    right = np.linalg.qr(rng.standard_normal((d, d)))[0]
    sv = np.ones(d)
    if d >= 2:
        sv[0] = spec.target_kappa
        if d > 2:
            sv[1:-1] = np.exp(rng.uniform(0.0, np.log(spec.target_kappa), size=d - 2))
    a = (left * sv) @ right.T
    planted = rng.standard_normal(d)
    b = a @ planted + spec.noise_std * rng.standard_normal(n)
    return a, b, planted


def relative_error(f_x: float, f_star: float) -> float:
    """(f(x) - f(x*)) / f(x*), clipped at zero.

    Raises DegenerateOptimumError when f_star is ~0 (noiseless data);
    negative quotients (float fuzz) are clipped and counted.
    """
    global _negative_clips
    if f_star <= 1e-14:
        raise DegenerateOptimumError(f"optimal objective {f_star:.3e} is ~0")
    quotient = (f_x - f_star) / f_star
    if quotient < 0.0:
        _negative_clips += 1
        return 0.0
    return quotient


def negative_error_count() -> int:
    return _negative_clips


def reset_negative_error_count() -> None:
    global _negative_clips
    _negative_clips = 0


def solve_unconstrained_qr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct thin-QR least-squares solve (the unconstrained oracle)."""
    q, r = qr_thin(a)
    return tri_solve(r, q.T @ b)


def make_feasible_set(a: np.ndarray, b: np.ndarray, constraint: str,
                      radius_scale: float = 1.0) -> FeasibleSet:
    """Constraint set for a dataset: ball radii come from the
    unconstrained optimum's norm (times ``radius_scale``)."""
    d = a.shape[1]
    if constraint == "none":
        return FeasibleSet.unconstrained(d)
    x_unc = solve_unconstrained_qr(a, b)
    if constraint == "l2":
        return FeasibleSet.l2_ball(radius_scale * float(np.linalg.norm(x_unc)), d)
    if constraint == "l1":
        return FeasibleSet.l1_ball(radius_scale * float(np.sum(np.abs(x_unc))), d)
    raise ValueError(f"unknown constraint {constraint!r}")


def ground_truth(a: np.ndarray, b: np.ndarray, w: FeasibleSet,
                 seed: int = 0) -> tuple[np.ndarray, float]:
    """(x*, f*) for the given constraint set.

    Unconstrained problems use the direct QR solve. Constrained ones run
    a high-accuracy preconditioned gradient descent twice, from zero and
    from a seeded random point; if the two objectives disagree beyond
    1e-10 relative, OracleDisagreementError is raised.
    """
    if w.kind == "unconstrained":
        x_star = solve_unconstrained_qr(a, b)
        return x_star, objective_value(a, b, x_star)
    d = a.shape[1]
    base = SolverConfig(iterations=500, step_size=0.5, seed=seed,
                        record_every=1, objective_tol=1e-13)
    first = pw_gradient(a, b, w, base)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1004]))
    x0_alt = project_euclidean(w, rng.standard_normal(d))
    second = pw_gradient(a, b, w, SolverConfig(
        iterations=500, step_size=0.5, seed=seed + 1, record_every=1,
        objective_tol=1e-13, x0=x0_alt))
    f1 = first.final_objective
    f2 = second.final_objective
    if abs(f1 - f2) > 1e-10 * max(f1, f2, 1e-30):
        raise OracleDisagreementError(
            f"two-start optima differ: {f1!r} vs {f2!r}"
        )
    return (first.final_x, f1) if f1 <= f2 else (second.final_x, f2)


def iterations_to_target(report: SolveReport, target: float) -> int | None:
    """First traced iteration with relative error <= target, or None."""
    for point in report.trace:
        if point.relative_error <= target:
            return point.iteration
    return None


@dataclass
class ExperimentResult:
    """Multi-seed, multi-solver comparison against one ground truth."""

    f_star: float
    sketch_sizes: dict[str, int | None]
    dataset: DatasetSpec | None
    runs: dict[str, list[tuple[int, SolveReport]]] = field(default_factory=dict)

    def best(self, solver: str) -> SolveReport:
        return min((rep for _, rep in self.runs[solver]),
                   key=lambda rep: rep.final_relative_error)

    def median_final_error(self, solver: str) -> float:
        return median(rep.final_relative_error for _, rep in self.runs[solver])


def run_experiment(a: np.ndarray, b: np.ndarray, w: FeasibleSet,
                   solver_configs: dict[str, SolverConfig],
                   seeds=tuple(range(10)), f_star: float | None = None,
                   dataset: DatasetSpec | None = None) -> ExperimentResult:
    """Run each configured solver once per seed against a shared ground
    truth; keeps every run so callers can take best-of or medians."""
    if not solver_configs:
        raise ValueError("no solvers configured")
    if f_star is None:
        _, f_star = ground_truth(a, b, w)
    result = ExperimentResult(
        f_star=f_star,
        sketch_sizes={name: cfg.sketch_size for name, cfg in solver_configs.items()},
        dataset=dataset,
    )
    for name, cfg in solver_configs.items():
        solver_key = name.split("@")[0]  # allow e.g. "hdpwbatch@r=2" aliases
        solve = SOLVERS[solver_key]
        runs = []
        for seed in seeds:
            report = solve(a, b, w, replace(cfg, seed=seed), f_star=f_star)
            runs.append((seed, report))
        result.runs[name] = runs
    return result


def load_csv(path, normalize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset of d+1 comma-separated floats per line; the last
    column is the response b.

    Raises CsvParseError (with the offending line number) on malformed
    values and RaggedRowsError on inconsistent widths. ``normalize``
    rescales each feature column to zero mean and unit variance.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise CsvParseError(f"line {lineno}: need at least 2 columns")
            elif len(parts) != width:
                raise RaggedRowsError(
                    f"line {lineno}: expected {width} columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise CsvParseError(f"line {lineno}: {exc}") from None
    if not rows:
        raise CsvParseError("empty dataset file")
    data = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(data).all():
        raise CsvParseError("dataset contains non-finite values")
    a, b = data[:, :-1], data[:, -1]
    if normalize:
        mean = a.mean(axis=0)
        std = a.std(axis=0)
        std[std == 0.0] = 1.0
        a = (a - mean) / std
    return a, b


def save_dataset_csv(path, a: np.ndarray, b: np.ndarray) -> None:
    """Write rows of d+1 floats at full float64 precision (round-trips
    bit-exactly through load_csv)."""
    data = np.column_stack([a, b])
    np.savetxt(path, data, delimiter=",", fmt="%.17g")


def write_trace_csv(path, reports: list[tuple[str, int, SolveReport]]) -> None:
    """Dump traces as solver,seed,iteration,elapsed_seconds,objective,
    relative_error rows with 12+ significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER)
        for solver, seed, report in reports:
            for pt in report.trace:
                writer.writerow([
                    solver, seed, pt.iteration,
                    f"{pt.elapsed_seconds:.12e}",
                    f"{pt.objective:.12e}",
                    f"{pt.relative_error:.12e}",
                ])
