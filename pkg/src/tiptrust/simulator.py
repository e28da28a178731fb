"""Monte-Carlo engine for the alternating-turn schedule.

In every block human ``x`` interacts with the robot ``m`` times and then human
``y`` interacts ``n`` times. After each direct interaction the acting human
updates experience with performance ``(r, 1 - r)``, reports trust (a Beta draw,
or the mean in ``ExpectedValue`` mode), and the other human immediately makes
an indirect update from that report and draws their own current trust.

A trajectory therefore holds two rows per interaction: the direct event of the
acting human followed by the paired indirect event of the passive one.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .core import TrustParams
from .equilibrium import ScheduleSpec
from .errors import DomainError, MisuseError
from .special import _beta_draw

ACTOR_X, ACTOR_Y = 0, 1
DIRECT, INDIRECT = 0, 1
TAIL_FRACTION = 0.05

TRAJECTORY_COLUMNS = (
    "event_index",
    "block",
    "actor",
    "kind",
    "alpha_x",
    "beta_x",
    "alpha_y",
    "beta_y",
    "reported_trust",
)


class Communication(str, enum.Enum):
    REPORTED_SAMPLE = "sample"
    EXPECTED_VALUE = "expected"


@dataclass(frozen=True)
class SimConfig:
    sched: ScheduleSpec
    params_x: TrustParams
    params_y: TrustParams
    turns: int = 1000
    replicas: int = 1
    seed: int = 0
    communication: Communication = Communication.REPORTED_SAMPLE

    def __post_init__(self):
        if self.turns < 1 or self.replicas < 1:
            raise DomainError("turns and replicas must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "communication", Communication(self.communication))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Per-event record of one replica.

    Array columns have one entry per event; ``initial_trust_x/y`` are the
    trust values both humans hold before the first interaction.
    """

    block: np.ndarray
    actor: np.ndarray
    kind: np.ndarray
    alpha_x: np.ndarray
    beta_x: np.ndarray
    alpha_y: np.ndarray
    beta_y: np.ndarray
    reported_trust: np.ndarray
    initial_trust_x: float
    initial_trust_y: float

    def __len__(self):
        return self.block.size

    @property
    def interactions(self) -> int:
        return self.block.size // 2

    def trust_series(self, agent: str) -> np.ndarray:
        """Trust held by ``agent`` after each interaction."""
        code = ACTOR_X if agent == "x" else ACTOR_Y
        return self.reported_trust[self.actor == code]

    def expected_series(self, agent: str) -> np.ndarray:
        """Expected trust of ``agent`` after each interaction."""
        rows = self.kind == INDIRECT
        if agent == "x":
            a, b = self.alpha_x[rows], self.beta_x[rows]
        else:
            a, b = self.alpha_y[rows], self.beta_y[rows]
        return a / (a + b)

    def same_as(self, other: "Trajectory") -> bool:
        cols = ("block", "actor", "kind", "alpha_x", "beta_x", "alpha_y", "beta_y", "reported_trust")
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in cols) and (
            self.initial_trust_x,
            self.initial_trust_y,
        ) == (other.initial_trust_x, other.initial_trust_y)

    def write_csv(self, target) -> None:
        """Write the trajectory as CSV to a path or text stream."""
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                self._write(fh)
        else:
            self._write(target)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    def _write(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        actors = ("x", "y")
        kinds = ("direct", "indirect")
        for i in range(len(self)):
            writer.writerow(
                (
                    i,
                    int(self.block[i]),
                    actors[self.actor[i]],
                    kinds[self.kind[i]],
                    repr(float(self.alpha_x[i])),
                    repr(float(self.beta_x[i])),
                    repr(float(self.alpha_y[i])),
                    repr(float(self.beta_y[i])),
                    repr(float(self.reported_trust[i])),
                )
            )


@njit(cache=True)
def _report(a, b, expected, rng):
    if expected:
        return a / (a + b)
    return _beta_draw(a, b, rng)


@njit(cache=True)
def _run_kernel(m, n, r, t_xy, t_yx, px, py, turns, expected, rng):
    rows = 2 * turns * (m + n)
    block = np.empty(rows, np.int64)
    actor = np.empty(rows, np.int8)
    kind = np.empty(rows, np.int8)
    ax_out = np.empty(rows)
    bx_out = np.empty(rows)
    ay_out = np.empty(rows)
    by_out = np.empty(rows)
    rep = np.empty(rows)

    ax, bx = px[0], px[1]
    ay, by = py[0], py[1]
    tx = _report(ax, bx, expected, rng)
    ty = _report(ay, by, expected, rng)
    t0x, t0y = tx, ty
    r_bar = 1.0 - r
    row = 0
    for blk in range(turns):
        for step in range(m + n):
            x_acts = step < m
            if x_acts:
                ax += px[2] * r
                bx += px[3] * r_bar
                tx = _report(ax, bx, expected, rng)
                reported = tx
            else:
                ay += py[2] * r
                by += py[3] * r_bar
                ty = _report(ay, by, expected, rng)
                reported = ty
            block[row] = blk
            actor[row] = ACTOR_X if x_acts else ACTOR_Y
            kind[row] = DIRECT
            ax_out[row], bx_out[row], ay_out[row], by_out[row] = ax, bx, ay, by
            rep[row] = reported
            row += 1

            if x_acts:
                gap = tx - ty
                if gap >= 0.0:
                    ay += py[4] * t_yx * gap
                else:
                    by -= py[5] * t_yx * gap
                ty = _report(ay, by, expected, rng)
                passive = ty
            else:
                gap = ty - tx
                if gap >= 0.0:
                    ax += px[4] * t_xy * gap
                else:
                    bx -= px[5] * t_xy * gap
                tx = _report(ax, bx, expected, rng)
                passive = tx
            block[row] = blk
            actor[row] = ACTOR_Y if x_acts else ACTOR_X
            kind[row] = INDIRECT
            ax_out[row], bx_out[row], ay_out[row], by_out[row] = ax, bx, ay, by
            rep[row] = passive
            row += 1
    return block, actor, kind, ax_out, bx_out, ay_out, by_out, rep, t0x, t0y


def replica_rng(seed: int, replica_index: int) -> np.random.Generator:
    """Independent stream for one replica, keyed by ``(seed, replica_index)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replica_index)]))


def run_schedule(cfg: SimConfig, replica_index: int = 0) -> Trajectory:
    sched = cfg.sched
    rng = replica_rng(cfg.seed, replica_index)
    out = _run_kernel(
        sched.m,
        sched.n,
        float(sched.r),
        float(sched.trust_x_in_y),
        float(sched.trust_y_in_x),
        cfg.params_x.as_array(),
        cfg.params_y.as_array(),
        cfg.turns,
        cfg.communication is Communication.EXPECTED_VALUE,
        rng,
    )
    block, actor, kind, ax, bx, ay, by, rep, t0x, t0y = out
    return Trajectory(block, actor, kind, ax, bx, ay, by, rep, float(t0x), float(t0y))


@dataclass(frozen=True)
class MonteCarloSummary:
    """Cross-replica statistics of the final stretch of each trajectory.

    ``mean_*`` averages trust over the last 5% of interactions and over
    replicas, ``sd_*`` is the cross-replica standard deviation of the final
    trust value, and ``drift_*`` compares the replica-averaged trust over the
    last 5% against the preceding 5%.
    """

    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    drift_x: float
    drift_y: float
    mean_abs_gap: float
    window: int
    replicas: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tail_window(interactions: int) -> int:
    return max(1, int(math.ceil(TAIL_FRACTION * interactions)))


def monte_carlo_limit(cfg: SimConfig) -> MonteCarloSummary:
    interactions = cfg.turns * (cfg.sched.m + cfg.sched.n)
    w = tail_window(interactions)
    sums = {a: np.zeros(interactions) for a in "xy"}
    finals = {a: np.empty(cfg.replicas) for a in "xy"}
    tail_means = {a: np.empty(cfg.replicas) for a in "xy"}
    gaps = np.empty(cfg.replicas)
    for i in range(cfg.replicas):
        traj = run_schedule(cfg, i)
        series = {a: traj.trust_series(a) for a in "xy"}
        for a in "xy":
            sums[a] += series[a]
            finals[a][i] = series[a][-1]
            tail_means[a][i] = series[a][-w:].mean()
        gaps[i] = np.abs(series["x"][-w:] - series["y"][-w:]).mean()

    def drift(total):
        avg = total / cfg.replicas
        if interactions < 2 * w:
            return float("nan")
        return float(abs(avg[-w:].mean() - avg[-2 * w : -w].mean()))

    sd = lambda v: float(v.std(ddof=1)) if v.size > 1 else 0.0
    return MonteCarloSummary(
        mean_x=float(tail_means["x"].mean()),
        mean_y=float(tail_means["y"].mean()),
        sd_x=sd(finals["x"]),
        sd_y=sd(finals["y"]),
        drift_x=drift(sums["x"]),
        drift_y=drift(sums["y"]),
        mean_abs_gap=float(gaps.mean()),
        window=w,
        replicas=cfg.replicas,
    )


@dataclass(frozen=True, eq=False)
class Diagnostics:
    rolling_mean_x: np.ndarray
    rolling_var_x: np.ndarray
    rolling_mean_y: np.ndarray
    rolling_var_y: np.ndarray
    gap: np.ndarray

    def tail_gap(self, fraction: float = TAIL_FRACTION) -> float:
        w = max(1, int(math.ceil(fraction * self.gap.size)))
        return float(self.gap[-w:].mean())


def _rolling(series: np.ndarray, window: int):
    view = np.lib.stride_tricks.sliding_window_view(series, window)
    # shift by the window's first value so constant windows give exactly zero
    shifted = view - view[:, :1]
    shift_mean = shifted.mean(axis=1)
    var = np.maximum((shifted * shifted).mean(axis=1) - shift_mean * shift_mean, 0.0)
    return view[:, 0] + shift_mean, var


def convergence_diagnostics(traj: Trajectory, window: int) -> Diagnostics:
    """Rolling mean and variance of both trust series plus the ``|t_x - t_y|`` gap."""
    tx = traj.trust_series("x")
    ty = traj.trust_series("y")
    if window < 1 or window > tx.size:
        raise MisuseError(f"window {window} does not fit a trajectory of {tx.size} interactions")
    mx, vx = _rolling(tx, window)
    my, vy = _rolling(ty, window)
    return Diagnostics(mx, vx, my, vy, np.abs(tx - ty))
