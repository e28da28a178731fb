"""Maximum-likelihood fitting of trust parameters from session histories.

For one (human, robot) pair the experience after session ``k`` is linear in the
parameters::

    alpha_k = alpha0 + s * P_k + s_hat * Q_k
    beta_k  = beta0  + f * Pbar_k + f_hat * Qbar_k

where ``P``/``Pbar`` accumulate the robot's success/failure measures over
direct sessions and ``Q``/``Qbar`` accumulate the discounted positive/negative
gaps between the teammate's trust and our previous rating over indirect
sessions. The log-likelihood of the ratings is therefore concave in the
parameters and is maximised by projected gradient ascent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import TrustParams, clamp_rating
from .errors import DomainError, MisuseError, NumericError
from .special import _digamma, _log_gamma

PARAM_FLOOR = 1e-6


class ModelVariant(str, enum.Enum):
    TIP = "tip"
    DIRECT_ONLY = "direct"
    INDIRECT_ONLY = "indirect"

    @property
    def free_mask(self) -> np.ndarray:
        if self is ModelVariant.DIRECT_ONLY:
            return np.array([True, True, True, True, False, False])
        if self is ModelVariant.INDIRECT_ONLY:
            return np.array([True, True, False, False, True, True])
        return np.ones(6, dtype=bool)


def _tuple_of_optional(values, name):
    out = []
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            out.append(None)
        else:
            out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class AgentHistory:
    """Everything needed to fit one human's trust in one robot.

    All sequences run over sessions ``0..K``. ``direct[k]`` marks sessions in
    which the human worked with the robot (``p``/``p_bar`` then hold its
    performance); in the remaining sessions ``peer_trust`` (the teammate's
    trust in the robot) and ``trust_in_peer`` drive the indirect update.
    ``None`` marks a missing rating. Ratings are clamped on construction.
    ``imputed`` records which own ratings were filled in by carry-forward.
    """

    ratings: tuple
    direct: tuple
    p: tuple
    p_bar: tuple
    peer_trust: tuple
    trust_in_peer: tuple
    imputed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        n = len(self.ratings)
        for name in ("direct", "p", "p_bar", "peer_trust", "trust_in_peer"):
            if len(getattr(self, name)) != n:
                raise DomainError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if n == 0:
            raise DomainError("history needs at least the initial rating")
        for name in ("ratings", "peer_trust", "trust_in_peer"):
            values = _tuple_of_optional(getattr(self, name), name)
            object.__setattr__(
                self, name, tuple(None if v is None else clamp_rating(v) for v in values)
            )
        object.__setattr__(self, "p", _tuple_of_optional(self.p, "p"))
        object.__setattr__(self, "p_bar", _tuple_of_optional(self.p_bar, "p_bar"))
        object.__setattr__(self, "direct", tuple(bool(d) for d in self.direct))
        object.__setattr__(self, "imputed", frozenset(int(u) for u in self.imputed))
        if self.ratings[0] is None:
            raise DomainError("the initial rating (session 0) must be observed")
        if self.direct[0]:
            raise DomainError("session 0 carries ratings only")
        for k in self.direct_set:
            if self.p[k] is None or self.p_bar[k] is None:
                raise DomainError(f"direct session {k} has no performance record")

    @property
    def K(self) -> int:
        return len(self.ratings) - 1

    @property
    def direct_set(self) -> frozenset:
        return frozenset(k for k in range(1, len(self.direct)) if self.direct[k])

    @property
    def indirect_set(self) -> frozenset:
        return frozenset(k for k in range(1, len(self.direct)) if not self.direct[k])

    @property
    def missing(self) -> frozenset:
        """Sessions whose own rating is missing."""
        return frozenset(k for k, t in enumerate(self.ratings) if t is None)

    @property
    def unobserved(self) -> frozenset:
        """Sessions excluded from the likelihood: missing now or imputed earlier."""
        return self.missing | self.imputed

    @property
    def complete(self) -> bool:
        if self.missing:
            return False
        return all(
            self.peer_trust[k] is not None and self.trust_in_peer[k] is not None
            for k in self.indirect_set
        )

    def ratings_array(self) -> np.ndarray:
        return np.array([np.nan if t is None else t for t in self.ratings])


@dataclass(frozen=True, eq=False)
class SufficientSums:
    """Cumulative sums ``P, Pbar, Q, Qbar`` for sessions ``0..K``."""

    P: np.ndarray
    P_bar: np.ndarray
    Q: np.ndarray
    Q_bar: np.ndarray

    def experience(self, theta) -> tuple[np.ndarray, np.ndarray]:
        th = _theta_array(theta)
        alpha = th[0] + th[2] * self.P + th[4] * self.Q
        beta = th[1] + th[3] * self.P_bar + th[5] * self.Q_bar
        return alpha, beta

    def coefficient_matrices(self) -> np.ndarray:
        """Per-session 6x5 matrices mapping digamma/log terms to the gradient."""
        K1 = self.P.size
        C = np.zeros((K1, 6, 5))
        C[:, 0] = [1.0, -1.0, 0.0, 1.0, 0.0]
        C[:, 1] = [1.0, 0.0, -1.0, 0.0, 1.0]
        for row, (cum, pos) in enumerate(
            ((self.P, True), (self.P_bar, False), (self.Q, True), (self.Q_bar, False)), start=2
        ):
            C[:, row, 0] = cum
            if pos:
                C[:, row, 1] = -cum
                C[:, row, 3] = cum
            else:
                C[:, row, 2] = -cum
                C[:, row, 4] = cum
        return C


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, TrustParams):
        return theta.as_array()
    return np.asarray(theta, dtype=np.float64)


def build_sufficient_sums(h: AgentHistory) -> SufficientSums:
    if not h.complete:
        raise MisuseError("history has missing ratings; call impute_series first")
    K1 = h.K + 1
    P = np.zeros(K1)
    P_bar = np.zeros(K1)
    Q = np.zeros(K1)
    Q_bar = np.zeros(K1)
    for k in range(1, K1):
        P[k], P_bar[k], Q[k], Q_bar[k] = P[k - 1], P_bar[k - 1], Q[k - 1], Q_bar[k - 1]
        if h.direct[k]:
            P[k] += h.p[k]
            P_bar[k] += h.p_bar[k]
        else:
            gap = h.peer_trust[k] - h.ratings[k - 1]
            if gap >= 0:
                Q[k] += h.trust_in_peer[k] * gap
            else:
                Q_bar[k] -= h.trust_in_peer[k] * gap
    return SufficientSums(P, P_bar, Q, Q_bar)


def impute_series(h: AgentHistory) -> AgentHistory:
    """Fill missing ratings with the most recent observed value of the same series."""
    for name in ("ratings", "peer_trust", "trust_in_peer"):
        if getattr(h, name)[0] is None:
            raise DomainError(f"initial {name} value (session 0) is missing")

    def carry(values):
        out = list(values)
        for j in range(1, len(out)):
            if out[j] is None:
                out[j] = out[j - 1]
        return tuple(out)

    return AgentHistory(
        ratings=carry(h.ratings),
        direct=h.direct,
        p=h.p,
        p_bar=h.p_bar,
        peer_trust=carry(h.peer_trust),
        trust_in_peer=carry(h.trust_in_peer),
        imputed=h.imputed | h.missing,
    )


def hold_out_tail(h: AgentHistory, k_hat: int) -> tuple[AgentHistory, dict[int, float]]:
    """Withhold the last ``k_hat`` sessions' ratings (own, peer, trust in peer).

    Returns the masked history and the withheld own ratings keyed by session.
    """
    if not 1 <= k_hat <= h.K:
        raise MisuseError(f"holdout size must lie in [1, {h.K}], got {k_hat}")
    held = range(h.K - k_hat + 1, h.K + 1)
    truths = {}
    ratings, peer, tip = list(h.ratings), list(h.peer_trust), list(h.trust_in_peer)
    for u in held:
        if ratings[u] is None:
            raise MisuseError(f"session {u} has no rating to hold out")
        truths[u] = ratings[u]
        ratings[u] = peer[u] = tip[u] = None
    masked = AgentHistory(
        ratings=tuple(ratings),
        direct=h.direct,
        p=h.p,
        p_bar=h.p_bar,
        peer_trust=tuple(peer),
        trust_in_peer=tuple(tip),
        imputed=h.imputed,
    )
    return masked, truths


@njit(cache=True)
def _loglik(theta, P, Pb, Q, Qb, logt, log1mt, w):
    total = 0.0
    for k in range(P.size):
        if w[k] == 0.0:
            continue
        a = theta[0] + theta[2] * P[k] + theta[4] * Q[k]
        b = theta[1] + theta[3] * Pb[k] + theta[5] * Qb[k]
        if not (a > 0.0 and b > 0.0):
            return -np.inf
        total += w[k] * (
            _log_gamma(a + b)
            - _log_gamma(a)
            - _log_gamma(b)
            + (a - 1.0) * logt[k]
            + (b - 1.0) * log1mt[k]
        )
    return total


@njit(cache=True)
def _grad(theta, C, P, Pb, Q, Qb, logt, log1mt, w, out):
    v = np.empty(5)
    out[:] = 0.0
    for k in range(P.size):
        if w[k] == 0.0:
            continue
        a = theta[0] + theta[2] * P[k] + theta[4] * Q[k]
        b = theta[1] + theta[3] * Pb[k] + theta[5] * Qb[k]
        v[0] = _digamma(a + b)
        v[1] = _digamma(a)
        v[2] = _digamma(b)
        v[3] = logt[k]
        v[4] = log1mt[k]
        for i in range(6):
            acc = 0.0
            for j in range(5):
                acc += C[k, i, j] * v[j]
            out[i] += w[k] * acc


@njit(cache=True)
def _ascend(theta, free, lower, C, P, Pb, Q, Qb, logt, log1mt, w, max_iter, tol, c1, step0, spectral, trace):
    g = np.empty(6)
    g_prev = np.empty(6)
    theta_prev = np.empty(6)
    trial = np.empty(6)
    H = _loglik(theta, P, Pb, Q, Qb, logt, log1mt, w)
    trace[0] = H
    n_trace = 1
    converged = False
    it = 0
    step_init = step0
    while it < max_iter:
        _grad(theta, C, P, Pb, Q, Qb, logt, log1mt, w, g)
        pg = 0.0
        for i in range(6):
            if free[i]:
                d = abs(max(theta[i] + g[i], lower[i]) - theta[i])
                if d > pg:
                    pg = d
        if pg < tol:
            converged = True
            break
        if spectral and it > 0:
            # Barzilai-Borwein length from the last accepted move; H is concave so -s.y >= 0
            ss = 0.0
            sy = 0.0
            for i in range(6):
                if free[i]:
                    si = theta[i] - theta_prev[i]
                    ss += si * si
                    sy -= si * (g[i] - g_prev[i])
            step_init = ss / sy if sy > 0.0 else 1e10
            step_init = min(max(step_init, 1e-10), 1e10)
        step = step_init
        accepted = False
        while step > 1e-20:
            slope = 0.0
            for i in range(6):
                trial[i] = theta[i]
                if free[i]:
                    trial[i] = max(theta[i] + step * g[i], lower[i])
                    slope += g[i] * (trial[i] - theta[i])
            Ht = _loglik(trial, P, Pb, Q, Qb, logt, log1mt, w)
            if Ht >= H + c1 * slope and Ht > H:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        theta_prev[:] = theta
        g_prev[:] = g
        theta[:] = trial
        H = Ht
        it += 1
        trace[n_trace] = H
        n_trace += 1
    return it, converged, n_trace


def _weights(h: AgentHistory) -> np.ndarray:
    w = np.ones(h.K + 1)
    for u in h.unobserved:
        w[u] = 0.0
    return w


def _log_terms(ratings) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(ratings, dtype=np.float64)
    return np.log(t), np.log1p(-t)


def log_likelihood(theta, sums: SufficientSums, ratings, observed=None) -> float:
    """Sum of Beta log-densities of the ratings under the experience implied by ``theta``.

    ``observed`` optionally restricts the sum to a boolean mask of sessions.
    """
    logt, log1mt = _log_terms(ratings)
    w = np.ones(logt.size) if observed is None else np.asarray(observed, dtype=np.float64)
    th = _theta_array(theta)
    return float(_loglik(th, sums.P, sums.P_bar, sums.Q, sums.Q_bar, logt, log1mt, w))


def gradient(theta, sums: SufficientSums, ratings, observed=None) -> np.ndarray:
    """Analytic gradient in the order (alpha0, beta0, s, f, s_hat, f_hat)."""
    logt, log1mt = _log_terms(ratings)
    w = np.ones(logt.size) if observed is None else np.asarray(observed, dtype=np.float64)
    th = _theta_array(theta)
    out = np.empty(6)
    C = sums.coefficient_matrices()
    _grad(th, C, sums.P, sums.P_bar, sums.Q, sums.Q_bar, logt, log1mt, w, out)
    return out


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 100_000
    tol: float = 1e-6
    armijo_c: float = 1e-4
    initial_step: float = 1.0
    floor: float = PARAM_FLOOR
    theta0: tuple | None = None
    # "spectral": Barzilai-Borwein trial step; "fixed": every line search starts at initial_step
    step_rule: str = "spectral"

    def __post_init__(self):
        if self.step_rule not in ("spectral", "fixed"):
            raise MisuseError(f"unknown step rule {self.step_rule!r}")


@dataclass(frozen=True, eq=False)
class FitReport:
    theta_star: TrustParams
    loglik_trajectory: np.ndarray
    expected_trust_series: np.ndarray
    iterations: int
    converged: bool
    model_variant: ModelVariant

    @property
    def final_loglik(self) -> float:
        return float(self.loglik_trajectory[-1])

    def to_dict(self) -> dict:
        return {
            "model": self.model_variant.value,
            "theta": self.theta_star.to_dict(),
            "final_loglik": self.final_loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "expected_trust": [float(v) for v in self.expected_trust_series],
        }


def fit(
    h: AgentHistory,
    variant: ModelVariant | str = ModelVariant.TIP,
    options: FitOptions | None = None,
) -> FitReport:
    """Maximise the log-likelihood of ``h`` over the variant's free parameters.

    Sessions in ``h.imputed`` are left out of the likelihood but still feed
    the experience sums. Ablated parameters stay exactly zero.
    """
    variant = ModelVariant(variant)
    options = options or FitOptions()
    sums = build_sufficient_sums(h)
    free = variant.free_mask
    theta = np.ones(6) if options.theta0 is None else _theta_array(options.theta0).copy()
    theta[~free] = 0.0
    theta[free] = np.maximum(theta[free], options.floor)
    lower = np.full(6, options.floor)
    logt, log1mt = _log_terms([t for t in h.ratings])
    w = _weights(h)
    C = sums.coefficient_matrices()
    args = (sums.P, sums.P_bar, sums.Q, sums.Q_bar, logt, log1mt, w)
    start = _loglik(theta, *args)
    if not math.isfinite(start):
        raise NumericError(
            f"log-likelihood is not finite at the starting point "
            f"(theta={theta.tolist()}, ratings={h.ratings})"
        )
    trace = np.empty(options.max_iter + 1)
    iterations, converged, n_trace = _ascend(
        theta,
        free,
        lower,
        C,
        *args,
        options.max_iter,
        options.tol,
        options.armijo_c,
        options.initial_step,
        options.step_rule == "spectral",
        trace,
    )
    theta_star = TrustParams.from_array(theta)
    alpha, beta = sums.experience(theta)
    return FitReport(
        theta_star=theta_star,
        loglik_trajectory=trace[:n_trace].copy(),
        expected_trust_series=alpha / (alpha + beta),
        iterations=int(iterations),
        converged=bool(converged),
        model_variant=variant,
    )


@dataclass(frozen=True, eq=False)
class EstimateResult:
    estimates: tuple
    report: FitReport
    warnings: tuple = ()


def estimate_missing(
    h: AgentHistory,
    variant: ModelVariant | str = ModelVariant.TIP,
    options: FitOptions | None = None,
) -> EstimateResult:
    """Fit on the observed sessions and predict each missing rating by its expected trust."""
    completed = impute_series(h)
    warnings = []
    if len(completed.unobserved) >= completed.K:
        warnings.append("only the initial rating is observed; the fit is underdetermined")
    report = fit(completed, variant, options)
    mu = report.expected_trust_series
    estimates = tuple((u, float(mu[u])) for u in sorted(completed.unobserved))
    return EstimateResult(estimates=estimates, report=report, warnings=tuple(warnings))
