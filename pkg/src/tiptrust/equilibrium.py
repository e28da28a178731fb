"""Long-run trust equilibrium of two humans alternating on one robot.

Each block, human ``x`` works ``m`` times with the robot and ``y`` works ``n``
times; after every interaction the acting human tells the other one their
trust. With constant robot reliability ``r`` both trusts converge, and the
limits solve a pair of rational equations. Multiplying those out and writing
``z = 1 - y`` gives two quadratics, solved here by Newton's method and, as an
independent check, by a refining grid search over the unit square.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TrustParams
from .errors import DomainError, MisuseError, NoEquilibriumError

NEWTON_MAX_ITER = 200
NEWTON_TOL = 1e-10
ITERATE_CLAMP = 1e-9
GRID_ACCEPT = 1e-4


class Case(str, enum.Enum):
    CASE_ONE = "case_one"
    CASE_TWO = "case_two"
    CLOSED_FORM_N0 = "closed_form_n0"
    CLOSED_FORM_M0 = "closed_form_m0"


@dataclass(frozen=True)
class ScheduleSpec:
    """Alternating schedule: ``m`` turns for x, ``n`` for y, reliability ``r``."""

    m: int
    n: int
    r: float
    trust_x_in_y: float = 1.0
    trust_y_in_x: float = 1.0

    def __post_init__(self):
        for name in ("m", "n"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.m == 0 and self.n == 0:
            raise DomainError("m and n cannot both be zero")
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"reliability must lie in (0, 1), got {self.r!r}")
        for name in ("trust_x_in_y", "trust_y_in_x"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {value!r}")

    @property
    def degenerate(self) -> bool:
        return self.m == 0 or self.n == 0


@dataclass(frozen=True)
class LongRunGains:
    """Per-block experience gains of both humans."""

    S_x: float
    F_x: float
    S_hat_x: float
    F_hat_x: float
    S_y: float
    F_y: float
    S_hat_y: float
    F_hat_y: float


@dataclass(frozen=True)
class Equilibrium:
    t_x: float
    t_y: float
    case_used: Case
    residual: float
    method: str
    iterations: int = 0
    fallback: bool = False
    # other interior roots found by the grid search, if any
    alternatives: tuple = field(default=())


def long_run_gains(
    params_x: TrustParams, params_y: TrustParams, sched: ScheduleSpec
) -> LongRunGains:
    m, n, r = sched.m, sched.n, sched.r
    r_bar = 1.0 - r
    return LongRunGains(
        S_x=m * params_x.s * r,
        F_x=m * params_x.f * r_bar,
        S_hat_x=n * sched.trust_x_in_y * params_x.s_hat,
        F_hat_x=n * sched.trust_x_in_y * params_x.f_hat,
        S_y=n * params_y.s * r,
        F_y=n * params_y.f * r_bar,
        S_hat_y=m * sched.trust_y_in_x * params_y.s_hat,
        F_hat_y=m * sched.trust_y_in_x * params_y.f_hat,
    )


def select_case(g: LongRunGains) -> Case:
    """Case one when x gains relatively more trust per turn than y (ties included)."""
    if g.S_x * g.F_y >= g.F_x * g.S_y:
        return Case.CASE_ONE
    return Case.CASE_TWO


def _coefficients(g: LongRunGains, case: Case):
    """Coefficients ``(A, S1, F1, B, S2, F2)`` of the quadratic system.

    f1(u, z) = A u^2 + A z u + (F1 + S1 - A) u - S1
    f2(u, z) = B z^2 + B z u + (S2 + F2 - B) z - F2

    Case one: u = t_x, z = 1 - t_y. Case two swaps the roles of x and y.
    """
    if case is Case.CASE_ONE:
        return g.F_hat_x, g.S_x, g.F_x, g.S_hat_y, g.S_y, g.F_y
    if case is Case.CASE_TWO:
        return g.F_hat_y, g.S_y, g.F_y, g.S_hat_x, g.S_x, g.F_x
    raise MisuseError(f"no polynomial system for {case}")


def _system(coef, u, z):
    a, s1, f1, b, s2, f2 = coef
    r1 = a * u * u + a * z * u + (f1 + s1 - a) * u - s1
    r2 = b * z * z + b * z * u + (s2 + f2 - b) * z - f2
    return r1, r2


def _jacobian(coef, u, z):
    a, s1, f1, b, s2, f2 = coef
    return (
        2.0 * a * u + a * z + f1 + s1 - a,
        a * u,
        b * z,
        2.0 * b * z + b * u + s2 + f2 - b,
    )


def _to_trust(case: Case, u: float, z: float) -> tuple[float, float]:
    if case is Case.CASE_ONE:
        return u, 1.0 - z
    return 1.0 - z, u


def _from_trust(case: Case, t_x: float, t_y: float) -> tuple[float, float]:
    if case is Case.CASE_ONE:
        return t_x, 1.0 - t_y
    return t_y, 1.0 - t_x


def system_residual(g: LongRunGains, t_x: float, t_y: float, case: Case | None = None) -> float:
    """Max absolute value of the two polynomial equations at ``(t_x, t_y)``."""
    case = select_case(g) if case is None else case
    coef = _coefficients(g, case)
    u, z = _from_trust(case, t_x, t_y)
    r1, r2 = _system(coef, u, z)
    return max(abs(r1), abs(r2))


def case_equation_residual(g: LongRunGains, t_x: float, t_y: float, case: Case) -> float:
    """Residual of the equilibrium equations in their original rational form."""
    if case is Case.CASE_ONE:
        e1 = g.S_x * (1.0 - t_x) / t_x - g.F_hat_x * (t_x - t_y) - g.F_x
        e2 = g.F_y * t_y / (1.0 - t_y) - g.S_hat_y * (t_x - t_y) - g.S_y
    elif case is Case.CASE_TWO:
        e1 = g.F_x * t_x / (1.0 - t_x) - g.S_hat_x * (t_y - t_x) - g.S_x
        e2 = g.S_y * (1.0 - t_y) / t_y - g.F_hat_y * (t_y - t_x) - g.F_y
    else:
        raise MisuseError(f"no rational system for {case}")
    return max(abs(e1), abs(e2))


def closed_form_degenerate(params: TrustParams, sched: ScheduleSpec) -> Equilibrium:
    """Equilibrium when only one human works with the robot.

    With ``n = 0`` pass x's parameters; with ``m = 0`` pass y's. Both humans
    end at ``s r / (f (1 - r) + s r)`` of the directly interacting human.
    """
    if not sched.degenerate:
        raise MisuseError("closed form applies only when m = 0 or n = 0")
    r = sched.r
    positive = params.s * r
    negative = params.f * (1.0 - r)
    if positive + negative <= 0:
        raise DomainError("direct gains must be positive for the closed form")
    t = positive / (negative + positive)
    case = Case.CLOSED_FORM_N0 if sched.n == 0 else Case.CLOSED_FORM_M0
    residual = abs(positive * (1.0 - t) - negative * t)
    return Equilibrium(t_x=t, t_y=t, case_used=case, residual=residual, method="closed_form")


def newton_solve(g: LongRunGains, sched: ScheduleSpec) -> Equilibrium:
    """Newton iteration from (0.5, 0.5) with iterates clamped inside the square.

    Falls back to :func:`grid_oracle` (flagged via ``fallback``) if the
    Jacobian is singular or the iteration does not reach the tolerance.
    """
    if sched.degenerate:
        raise MisuseError("newton_solve needs m > 0 and n > 0; use closed_form_degenerate")
    case = select_case(g)
    coef = _coefficients(g, case)
    lo, hi = ITERATE_CLAMP, 1.0 - ITERATE_CLAMP
    u = z = 0.5
    for it in range(1, NEWTON_MAX_ITER + 1):
        r1, r2 = _system(coef, u, z)
        j11, j12, j21, j22 = _jacobian(coef, u, z)
        det = j11 * j22 - j12 * j21
        if not math.isfinite(det) or abs(det) < 1e-14:
            break
        du = (j22 * r1 - j12 * r2) / det
        dz = (j11 * r2 - j21 * r1) / det
        u = min(max(u - du, lo), hi)
        z = min(max(z - dz, lo), hi)
        if max(abs(du), abs(dz)) < 1e-15:
            break
        r1, r2 = _system(coef, u, z)
        if max(abs(r1), abs(r2)) < 1e-14:
            break
    residual = max(abs(v) for v in _system(coef, u, z))
    if residual < NEWTON_TOL:
        t_x, t_y = _to_trust(case, u, z)
        return Equilibrium(
            t_x=t_x, t_y=t_y, case_used=case, residual=residual, method="newton", iterations=it
        )
    found = grid_oracle(g, sched)
    return Equilibrium(
        t_x=found.t_x,
        t_y=found.t_y,
        case_used=found.case_used,
        residual=found.residual,
        method="grid",
        iterations=it,
        fallback=True,
        alternatives=found.alternatives,
    )


def _grid_values(coef, u, z):
    r1, r2 = _system(coef, u, z)
    return np.maximum(np.abs(r1), np.abs(r2))


def _local_minima(values: np.ndarray, limit: int) -> list[tuple[int, int]]:
    padded = np.pad(values, 1, constant_values=np.inf)
    core = padded[1:-1, 1:-1]
    is_min = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            shifted = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            is_min &= core <= shifted
    idx = np.argwhere(is_min)
    order = np.argsort(values[is_min], kind="stable")
    return [tuple(idx[k]) for k in order[:limit]]


def _refine(coef, u0, z0, h, rounds=3, points=401, width=4.0):
    u, z = u0, z0
    for _ in range(rounds):
        half = width * h
        us = np.clip(np.linspace(u - half, u + half, points), 0.0, 1.0)
        zs = np.clip(np.linspace(z - half, z + half, points), 0.0, 1.0)
        uu, zz = np.meshgrid(us, zs, indexing="ij")
        vals = _grid_values(coef, uu, zz)
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        u, z = float(us[i]), float(zs[j])
        h = 2.0 * half / (points - 1)
    return u, z, float(_grid_values(coef, u, z))


def grid_oracle(
    g: LongRunGains, sched: ScheduleSpec | None = None, coarse: int = 201, margin: float = 1e-6
) -> Equilibrium:
    """Brute-force root search over the whole unit square.

    Every local minimum of ``max(|f1|, |f2|)`` on a coarse grid is refined by
    three rounds of grid shrinkage. Roots on the boundary of the square are
    artefacts of clearing denominators and are discarded; if several interior
    roots survive, the best is returned and the rest are listed in
    ``alternatives``.
    """
    case = select_case(g)
    coef = _coefficients(g, case)
    axis = np.linspace(0.0, 1.0, coarse)
    uu, zz = np.meshgrid(axis, axis, indexing="ij")
    values = _grid_values(coef, uu, zz)
    h = 1.0 / (coarse - 1)
    roots = []
    for i, j in _local_minima(values, limit=12):
        u, z, res = _refine(coef, axis[i], axis[j], h)
        if res >= GRID_ACCEPT:
            continue
        if min(u, z, 1.0 - u, 1.0 - z) < margin:
            continue
        if any(abs(u - ru) < 1e-4 and abs(z - rz) < 1e-4 for ru, rz, _ in roots):
            continue
        roots.append((u, z, res))
    if not roots:
        raise NoEquilibriumError("no equilibrium located in the unit square")
    roots.sort(key=lambda item: item[2])
    u, z, res = roots[0]
    t_x, t_y = _to_trust(case, u, z)
    alternatives = tuple(_to_trust(case, ru, rz) for ru, rz, _ in roots[1:])
    return Equilibrium(
        t_x=t_x, t_y=t_y, case_used=case, residual=res, method="grid", alternatives=alternatives
    )


def solve_equilibrium(
    params_x: TrustParams, params_y: TrustParams, sched: ScheduleSpec, method: str = "newton"
) -> Equilibrium:
    """Route to the closed form for one-sided schedules, otherwise to a solver."""
    if sched.n == 0:
        return closed_form_degenerate(params_x, sched)
    if sched.m == 0:
        return closed_form_degenerate(params_y, sched)
    gains = long_run_gains(params_x, params_y, sched)
    if method == "newton":
        return newton_solve(gains, sched)
    if method == "grid":
        return grid_oracle(gains, sched)
    raise MisuseError(f"unknown method {method!r}; expected 'newton' or 'grid'")
