"""Fitting errors, RMSE summaries and model comparisons.

Histories are keyed by ``(agent, robot)`` where ``agent`` is any label that
identifies one human across the corpus (for example ``"team3.x"``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import MisuseError, TipError
from .inference import (
    AgentHistory,
    FitOptions,
    FitReport,
    ModelVariant,
    estimate_missing,
    fit,
    hold_out_tail,
    impute_series,
)

COMPARISON_COLUMNS = ("agent", "robot", "variant", "mean_error", "final_loglik", "converged")


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    """Per-session ``|mu_k - t_k|``; NaN where the rating was not observed."""

    agent: str
    robot: str
    errors: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.errors, dtype=np.float64)
        seen = e[~np.isnan(e)]
        if np.any(seen < 0) or np.any(seen > 1):
            raise MisuseError("fitting errors must lie in [0, 1]")
        object.__setattr__(self, "errors", e)

    @property
    def mean_error(self) -> float:
        seen = self.errors[~np.isnan(self.errors)]
        return float(seen.mean()) if seen.size else float("nan")


def fitting_error_series(
    report: FitReport, ratings, agent: str = "", robot: str = ""
) -> ErrorSeries:
    mu = np.asarray(report.expected_trust_series)
    t = np.array([np.nan if r is None else r for r in ratings], dtype=np.float64)
    if mu.shape != t.shape:
        raise MisuseError(f"report covers {mu.size} sessions but {t.size} ratings were given")
    return ErrorSeries(agent, robot, np.abs(mu - t))


def rmse(series) -> dict[str, float]:
    """Pooled root-mean-square error per robot over agents and sessions."""
    series = list(series)
    if not series:
        raise MisuseError("rmse needs at least one error series")
    by_robot: dict[str, list[np.ndarray]] = {}
    for s in series:
        by_robot.setdefault(s.robot, []).append(s.errors)
    out = {}
    for robot, errs in sorted(by_robot.items()):
        if len({e.size for e in errs}) != 1:
            raise MisuseError(f"error series for robot {robot} differ in length")
        stacked = np.concatenate(errs)
        stacked = stacked[~np.isnan(stacked)]
        out[robot] = float(math.sqrt(np.mean(stacked * stacked))) if stacked.size else float("nan")
    return out


def holdout_rmse(estimates: dict, truths: dict, k_hat: int) -> dict[str, float]:
    """RMSE over held-out sessions per robot.

    ``estimates`` maps ``(agent, robot)`` to ``[(u, mu_u), ...]`` and ``truths``
    maps the same keys to ``{u: t_u}``. Every key must cover the same last
    ``k_hat`` sessions.
    """
    if k_hat < 1:
        raise MisuseError("k_hat must be positive")
    if set(estimates) != set(truths):
        raise MisuseError("estimates and truths cover different agents")
    if not estimates:
        raise MisuseError("holdout_rmse needs at least one agent")
    index_sets = set()
    sq: dict[str, list[float]] = {}
    for key, pairs in estimates.items():
        est = dict(pairs)
        truth = truths[key]
        if set(est) != set(truth) or len(est) != k_hat:
            raise MisuseError(f"{key}: estimate and truth indices differ or do not number {k_hat}")
        index_sets.add(frozenset(est))
        robot = key[1]
        sq.setdefault(robot, []).extend((est[u] - truth[u]) ** 2 for u in est)
    if len(index_sets) != 1:
        raise MisuseError("agents hold out different session sets")
    return {robot: float(math.sqrt(np.mean(v))) for robot, v in sorted(sq.items())}


def carry_forward_estimates(masked: AgentHistory) -> list[tuple[int, float]]:
    """Baseline that predicts each missing rating by the last observed one."""
    filled = impute_series(masked)
    return [(u, filled.ratings[u]) for u in sorted(masked.missing)]


@dataclass(frozen=True, eq=False)
class HoldoutResult:
    k_hat: int
    estimates: dict
    truths: dict
    baseline: dict
    rmse: dict
    baseline_rmse: dict
    warnings: tuple = ()


def holdout_experiment(
    histories: dict,
    k_hat: int,
    variant: ModelVariant | str = ModelVariant.TIP,
    options: FitOptions | None = None,
) -> HoldoutResult:
    """Withhold the last ``k_hat`` sessions of every history and predict them."""
    estimates, truths, baseline, warnings = {}, {}, {}, []
    for key in sorted(histories):
        masked, truth = hold_out_tail(histories[key], k_hat)
        result = estimate_missing(masked, variant, options)
        held = set(truth)
        estimates[key] = [(u, mu) for u, mu in result.estimates if u in held]
        truths[key] = truth
        baseline[key] = [(u, t) for u, t in carry_forward_estimates(masked) if u in held]
        warnings.extend(f"{key[0]}:{key[1]}: {w}" for w in result.warnings)
    return HoldoutResult(
        k_hat=k_hat,
        estimates=estimates,
        truths=truths,
        baseline=baseline,
        rmse=holdout_rmse(estimates, truths, k_hat),
        baseline_rmse=holdout_rmse(baseline, truths, k_hat),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class ComparisonRow:
    agent: str
    robot: str
    variant: ModelVariant
    mean_error: float
    final_loglik: float
    converged: bool
    failure: str | None = None


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    rows: tuple
    rmse: dict  # variant -> {robot: rmse}
    series: dict  # variant -> [ErrorSeries]

    def mean_error(self, variant: ModelVariant | str) -> float:
        variant = ModelVariant(variant)
        vals = [r.mean_error for r in self.rows if r.variant is variant and r.failure is None]
        return float(np.mean(vals)) if vals else float("nan")

    def pooled_rmse(self, variant: ModelVariant | str) -> float:
        """RMSE over every agent, robot and observed session of one variant."""
        errs = np.concatenate([s.errors for s in self.series[ModelVariant(variant)]])
        errs = errs[~np.isnan(errs)]
        return float(math.sqrt(np.mean(errs * errs)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for r in self.rows:
            writer.writerow(
                (
                    r.agent,
                    r.robot,
                    r.variant.value,
                    repr(r.mean_error),
                    repr(r.final_loglik),
                    "true" if r.converged else "false",
                )
            )
        return buf.getvalue()


def compare_models(
    histories: dict,
    variants=tuple(ModelVariant),
    options: FitOptions | None = None,
) -> ComparisonTable:
    """Fit every history under every variant and tabulate fitting errors.

    Missing ratings are imputed for the fit and excluded from the errors. A
    failed fit yields a row with NaN metrics and the failure message.
    """
    variants = tuple(ModelVariant(v) for v in variants)
    rows = []
    series = {v: [] for v in variants}
    for key in sorted(histories):
        agent, robot = key
        h = histories[key]
        completed = impute_series(h) if not h.complete else h
        observed = [None if k in completed.unobserved else t for k, t in enumerate(completed.ratings)]
        for v in variants:
            try:
                report = fit(completed, v, options)
            except TipError as exc:
                rows.append(ComparisonRow(agent, robot, v, math.nan, math.nan, False, str(exc)))
                continue
            err = fitting_error_series(report, observed, agent, robot)
            series[v].append(err)
            rows.append(
                ComparisonRow(agent, robot, v, err.mean_error, report.final_loglik, report.converged)
            )
    per_robot = {v: rmse(series[v]) if series[v] else {} for v in variants}
    return ComparisonTable(tuple(rows), per_robot, series)
