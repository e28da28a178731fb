"""Synthetic two-human, two-robot experiments.

Each session the two humans are paired with the two robots by a uniformly
random bijection, every robot completes ``tasks_per_session`` tasks with a
Binomial number of correct choices, each human updates trust in the robot
they used from its performance, then updates trust in the other robot from
the teammate's freshly reported rating. Reported ratings are Beta draws,
rounded to six decimals and kept inside the clamping range so the fitter
sees exactly the inputs the generator used.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ExperiencePair,
    PerformanceObservation,
    TrustParams,
    clamp_rating,
    direct_update,
    expected_trust,
    indirect_update,
    sample_beta,
)
from .dataio import HUMANS, PAIRS, RATING_KEYS, ROBOTS, ExperimentDataset, SessionRecord
from .errors import DomainError

DEFAULT_TRUE_PARAMS = TrustParams(alpha0=3.0, beta0=2.0, s=8.0, f=14.0, s_hat=12.0, f_hat=12.0)
DRIFT_CONCENTRATION = 50.0


class PeerTrustMode(str, enum.Enum):
    CONSTANT = "constant"
    DRIFT = "drift"


def _default_params():
    return {pair: DEFAULT_TRUE_PARAMS for pair in PAIRS}


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``params`` maps ``"x:A"``-style keys to the true parameters of each pair.
    ``peer_trust`` gives the level of ``t^{x,y}`` and ``t^{y,x}``; in drift
    mode each session's value is a Beta draw with that mean.
    ``fixed_assignment`` pins human ``x`` to one robot for every session.
    """

    sessions: int = 15
    tasks_per_session: int = 10
    reliability_A: float = 0.9
    reliability_B: float = 0.6
    params: dict = field(default_factory=_default_params)
    peer_trust: tuple = (0.8, 0.8)
    peer_mode: PeerTrustMode = PeerTrustMode.CONSTANT
    seed: int = 0
    fixed_assignment: str | None = None

    def __post_init__(self):
        if self.sessions < 1 or self.tasks_per_session < 1:
            raise DomainError("sessions and tasks_per_session must be positive")
        for name in ("reliability_A", "reliability_B"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        missing = set(PAIRS) - set(self.params)
        if missing:
            raise DomainError(f"params missing for {sorted(missing)}")
        for v in self.peer_trust:
            if not 0.0 < v < 1.0:
                raise DomainError(f"peer trust level must lie in (0, 1), got {v}")
        if self.fixed_assignment not in (None, "A", "B"):
            raise DomainError("fixed_assignment must be None, 'A' or 'B'")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        object.__setattr__(self, "peer_mode", PeerTrustMode(self.peer_mode))
        object.__setattr__(self, "peer_trust", tuple(float(v) for v in self.peer_trust))


@dataclass(frozen=True, eq=False)
class SyntheticExperiment:
    dataset: ExperimentDataset
    expected: dict  # pair -> expected-trust array over sessions 0..K


def _report(e: ExperiencePair, rng) -> float:
    return clamp_rating(round(sample_beta(e, rng), 6))


def _peer_level(cfg: SynthConfig, idx: int, rng) -> float:
    level = cfg.peer_trust[idx]
    if cfg.peer_mode is PeerTrustMode.CONSTANT:
        return level
    c = DRIFT_CONCENTRATION
    return clamp_rating(round(float(rng.beta(level * c, (1.0 - level) * c)), 6))


def generate_experiment(cfg: SynthConfig) -> SyntheticExperiment:
    """Run the generator and also return the true expected-trust series."""
    rng = np.random.default_rng(cfg.seed)
    exp = {pair: cfg.params[pair].prior for pair in PAIRS}
    mu = {pair: [expected_trust(exp[pair])] for pair in PAIRS}
    current = {pair: _report(exp[pair], rng) for pair in PAIRS}
    peer = {"x:y": _peer_level(cfg, 0, rng), "y:x": _peer_level(cfg, 1, rng)}
    records = [SessionRecord(0, ratings=tuple({**current, **peer}[k] for k in RATING_KEYS))]
    reliability = {"A": cfg.reliability_A, "B": cfg.reliability_B}

    for k in range(1, cfg.sessions + 1):
        if cfg.fixed_assignment is not None:
            robot_x = cfg.fixed_assignment
        else:
            robot_x = ROBOTS[int(rng.integers(2))]
        robot_y = ROBOTS[1] if robot_x == ROBOTS[0] else ROBOTS[0]
        correct = {r: int(rng.binomial(cfg.tasks_per_session, reliability[r])) for r in ROBOTS}
        peer = {"x:y": _peer_level(cfg, 0, rng), "y:x": _peer_level(cfg, 1, rng)}
        assigned = {"x": robot_x, "y": robot_y}
        previous = dict(current)

        for human in HUMANS:
            pair = f"{human}:{assigned[human]}"
            obs = PerformanceObservation(correct[assigned[human]] / cfg.tasks_per_session)
            exp[pair] = direct_update(exp[pair], cfg.params[pair], obs)
            current[pair] = _report(exp[pair], rng)

        for human in HUMANS:
            mate = HUMANS[1] if human == HUMANS[0] else HUMANS[0]
            robot = assigned[mate]
            pair = f"{human}:{robot}"
            exp[pair] = indirect_update(
                exp[pair],
                cfg.params[pair],
                own_prev_trust=previous[pair],
                peer_trust=current[f"{mate}:{robot}"],
                trust_in_peer=peer[f"{human}:{mate}"],
            )
            current[pair] = _report(exp[pair], rng)

        for pair in PAIRS:
            mu[pair].append(expected_trust(exp[pair]))
        records.append(
            SessionRecord(
                k,
                robot_x,
                robot_y,
                correct["A"],
                correct["B"],
                tuple({**current, **peer}[key] for key in RATING_KEYS),
            )
        )

    dataset = ExperimentDataset(tuple(records), cfg.tasks_per_session)
    return SyntheticExperiment(dataset, {pair: np.array(v) for pair, v in mu.items()})


def generate_synthetic(cfg: SynthConfig) -> ExperimentDataset:
    return generate_experiment(cfg).dataset
