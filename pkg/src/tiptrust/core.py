"""Trust state and the two experience-update rules.

A human's trust in a robot is Beta(alpha, beta) distributed, where alpha and
beta accumulate positive and negative experience. Experience grows through
direct interaction with the robot and through a teammate's communicated trust.
All types here are immutable; updates return new values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DomainError
from .special import beta_logpdf, beta_sample

RATING_FLOOR = 1e-4
RATING_CEIL = 1.0 - 1e-4

PARAM_NAMES = ("alpha0", "beta0", "s", "f", "s_hat", "f_hat")


def clamp_rating(value: float) -> float:
    """Clamp a reported rating into ``[1e-4, 1 - 1e-4]``.

    Ratings of exactly 0 or 1 are legal on the questionnaire scale but have
    infinite Beta log-density.
    """
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise DomainError(f"trust rating must lie in [0, 1], got {value!r}")
    return min(max(value, RATING_FLOOR), RATING_CEIL)


@dataclass(frozen=True)
class ExperiencePair:
    """Cumulative positive (``alpha``) and negative (``beta``) experience."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0) or not (
            math.isfinite(self.alpha) and math.isfinite(self.beta)
        ):
            raise DomainError(
                f"experience must be finite and positive, got ({self.alpha}, {self.beta})"
            )

    @property
    def variance(self) -> float:
        total = self.alpha + self.beta
        return self.alpha * self.beta / (total * total * (total + 1.0))


@dataclass(frozen=True)
class TrustParams:
    """One human's trust parameters towards one robot.

    ``alpha0``/``beta0`` are prior experience, ``s``/``f`` the unit direct
    gains on success/failure and ``s_hat``/``f_hat`` the unit indirect gains.
    The direct gains may be zero only to encode the indirect-only ablation;
    configuration loaders insist on strictly positive ``s`` and ``f``.
    """

    alpha0: float = 1.0
    beta0: float = 1.0
    s: float = 1.0
    f: float = 1.0
    s_hat: float = 0.0
    f_hat: float = 0.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {value!r}")
        if self.alpha0 <= 0 or self.beta0 <= 0:
            raise DomainError("alpha0 and beta0 must be positive")

    @property
    def prior(self) -> ExperiencePair:
        return ExperiencePair(self.alpha0, self.beta0)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "TrustParams":
        values = [float(v) for v in values]
        if len(values) != len(PARAM_NAMES):
            raise DomainError(f"expected {len(PARAM_NAMES)} parameters, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class PerformanceObservation:
    """Success measure ``p`` and failure measure ``p_bar`` of one interaction.

    By default ``p_bar`` must equal ``1 - p`` (within 1e-9); pass
    ``independent=True`` to allow any pair in the unit square.
    """

    p: float
    p_bar: float | None = None
    independent: bool = False

    def __post_init__(self):
        if self.p_bar is None:
            object.__setattr__(self, "p_bar", 1.0 - self.p)
        for name in ("p", "p_bar"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
        if not self.independent and abs(self.p + self.p_bar - 1.0) > 1e-9:
            raise DomainError(f"p + p_bar must equal 1, got {self.p} + {self.p_bar}")


def expected_trust(e: ExperiencePair) -> float:
    return e.alpha / (e.alpha + e.beta)


def direct_update(
    e: ExperiencePair, params: TrustParams, obs: PerformanceObservation
) -> ExperiencePair:
    """Add ``s * p`` to alpha and ``f * p_bar`` to beta."""
    return ExperiencePair(e.alpha + params.s * obs.p, e.beta + params.f * obs.p_bar)


def indirect_update(
    e: ExperiencePair,
    params: TrustParams,
    own_prev_trust: float,
    peer_trust: float,
    trust_in_peer: float,
) -> ExperiencePair:
    """Update experience from a teammate's communicated trust.

    The gap between the peer's trust and our own previous trust, discounted by
    our trust in the peer, feeds alpha when positive and beta when negative.
    """
    gap = peer_trust - own_prev_trust
    if gap >= 0:
        return ExperiencePair(e.alpha + params.s_hat * trust_in_peer * gap, e.beta)
    return ExperiencePair(e.alpha, e.beta - params.f_hat * trust_in_peer * gap)


def log_beta_pdf(t: float, e: ExperiencePair) -> float:
    """Beta log-density of a (clamped) rating under experience ``e``."""
    return beta_logpdf(t, e.alpha, e.beta)


def sample_beta(e: ExperiencePair, rng: np.random.Generator) -> float:
    """Draw a reported trust value from Beta(e.alpha, e.beta)."""
    return beta_sample(e.alpha, e.beta, rng)
