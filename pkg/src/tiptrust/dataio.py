"""Session-log CSV files and parameter JSON documents.

A dataset covers one team (humans ``x`` and ``y``, robots ``A`` and ``B``).
Row ``k`` holds the robot assignment and each robot's number of correct
choices in session ``k`` plus the six trust ratings reported after it.
Session 0 carries the initial ratings only. Missing ratings are empty cells.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .core import PARAM_NAMES, TrustParams
from .errors import ConfigError, DomainError, ParseError
from .inference import AgentHistory

HEADER = (
    "session",
    "robot_x",
    "robot_y",
    "correct_A",
    "correct_B",
    "t_x_A",
    "t_x_B",
    "t_y_A",
    "t_y_B",
    "t_x_y",
    "t_y_x",
)
RATING_KEYS = ("x:A", "x:B", "y:A", "y:B", "x:y", "y:x")
HUMANS = ("x", "y")
ROBOTS = ("A", "B")
PAIRS = ("x:A", "x:B", "y:A", "y:B")


def _other(value: str, pool: tuple[str, str]) -> str:
    return pool[1] if value == pool[0] else pool[0]


@dataclass(frozen=True)
class SessionRecord:
    session: int
    robot_x: str | None = None
    robot_y: str | None = None
    correct_A: int | None = None
    correct_B: int | None = None
    ratings: tuple = (None,) * 6

    def rating(self, trustor: str, trustee: str) -> float | None:
        return self.ratings[RATING_KEYS.index(f"{trustor}:{trustee}")]

    def robot_of(self, human: str) -> str | None:
        return self.robot_x if human == "x" else self.robot_y

    def correct(self, robot: str) -> int | None:
        return self.correct_A if robot == "A" else self.correct_B


@dataclass(frozen=True)
class ExperimentDataset:
    sessions: tuple
    tasks_per_session: int = 10

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        if not self.sessions:
            raise DomainError("dataset needs at least session 0")
        if self.tasks_per_session < 1:
            raise DomainError("tasks_per_session must be positive")
        for idx, rec in enumerate(self.sessions):
            _check_record(rec, idx, self.tasks_per_session)

    @property
    def K(self) -> int:
        return len(self.sessions) - 1

    def history(self, agent: str, robot: str) -> AgentHistory:
        """Extract the fitting inputs of ``agent``'s trust in ``robot``.

        Ratings are clamped away from 0 and 1 at this point.
        """
        if agent not in HUMANS or robot not in ROBOTS:
            raise DomainError(f"unknown pair {agent}:{robot}")
        peer = _other(agent, HUMANS)
        ratings, direct, p, p_bar, peer_trust, trust_in_peer = [], [], [], [], [], []
        for rec in self.sessions:
            ratings.append(rec.rating(agent, robot))
            peer_trust.append(rec.rating(peer, robot))
            trust_in_peer.append(rec.rating(agent, peer))
            is_direct = rec.session > 0 and rec.robot_of(agent) == robot
            direct.append(is_direct)
            if is_direct:
                share = rec.correct(robot) / self.tasks_per_session
                p.append(share)
                p_bar.append(1.0 - share)
            else:
                p.append(None)
                p_bar.append(None)
        return AgentHistory(
            ratings=tuple(ratings),
            direct=tuple(direct),
            p=tuple(p),
            p_bar=tuple(p_bar),
            peer_trust=tuple(peer_trust),
            trust_in_peer=tuple(trust_in_peer),
        )

    def histories(self) -> dict[str, AgentHistory]:
        return {pair: self.history(*pair.split(":")) for pair in PAIRS}

    def with_ratings(self, key: str, values) -> "ExperimentDataset":
        """Copy of the dataset with one rating column replaced."""
        col = RATING_KEYS.index(key)
        sessions = []
        for rec, v in zip(self.sessions, values):
            ratings = list(rec.ratings)
            ratings[col] = v
            sessions.append(
                SessionRecord(
                    rec.session, rec.robot_x, rec.robot_y, rec.correct_A, rec.correct_B, tuple(ratings)
                )
            )
        return ExperimentDataset(tuple(sessions), self.tasks_per_session)


def _check_record(rec: SessionRecord, idx: int, tasks: int, line: int | None = None):
    def fail(msg):
        if line is None:
            raise DomainError(f"session {idx}: {msg}")
        raise ParseError(msg, line)

    if rec.session != idx:
        fail(f"expected session {idx}, found {rec.session}")
    if len(rec.ratings) != 6:
        fail("expected six ratings")
    for key, value in zip(RATING_KEYS, rec.ratings):
        if value is None:
            if idx == 0:
                fail(f"initial rating t_{key.replace(':', '_')} is missing")
            continue
        if not (math.isfinite(value) and 0.0 <= value <= 1.0):
            fail(f"rating t_{key.replace(':', '_')}={value!r} outside [0, 1]")
    fields = (rec.robot_x, rec.robot_y, rec.correct_A, rec.correct_B)
    if idx == 0:
        if any(v is not None for v in fields):
            fail("session 0 must not carry assignment or performance")
        return
    if rec.robot_x not in ROBOTS or rec.robot_y not in ROBOTS or rec.robot_x == rec.robot_y:
        fail(f"assignment {rec.robot_x!r}/{rec.robot_y!r} is not a bijection onto A/B")
    for name in ("correct_A", "correct_B"):
        value = getattr(rec, name)
        if value is None or not 0 <= value <= tasks:
            fail(f"{name} must be an integer in [0, {tasks}], got {value!r}")


def _parse_rows(reader, tasks):
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise ParseError(f"header must be {','.join(HEADER)}", 1)
    sessions = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", lineno)
        cells = [c.strip() for c in row]
        try:
            session = int(cells[0])
        except ValueError:
            raise ParseError(f"session index {cells[0]!r} is not an integer", lineno) from None
        robots = [c or None for c in cells[1:3]]
        counts = []
        for name, cell in zip(HEADER[3:5], cells[3:5]):
            if not cell:
                counts.append(None)
                continue
            try:
                counts.append(int(cell))
            except ValueError:
                raise ParseError(f"{name}={cell!r} is not an integer", lineno) from None
        ratings = []
        for name, cell in zip(HEADER[5:], cells[5:]):
            if not cell:
                ratings.append(None)
                continue
            try:
                ratings.append(float(cell))
            except ValueError:
                raise ParseError(f"{name}={cell!r} is not a number", lineno) from None
        rec = SessionRecord(session, robots[0], robots[1], counts[0], counts[1], tuple(ratings))
        _check_record(rec, len(sessions), tasks, line=lineno)
        sessions.append(rec)
    if not sessions:
        raise ParseError("no session rows", 2)
    return ExperimentDataset(tuple(sessions), tasks)


def parse_dataset(source, tasks_per_session: int = 10) -> ExperimentDataset:
    """Read a dataset from a path, a text/binary stream, or raw bytes."""
    if isinstance(source, (bytes, bytearray)):
        return _parse_rows(csv.reader(io.StringIO(source.decode("utf-8"))), tasks_per_session)
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return _parse_rows(csv.reader(fh), tasks_per_session)
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return _parse_rows(csv.reader(io.StringIO(data)), tasks_per_session)


def _fmt_rating(v):
    return "" if v is None else f"{v:.6f}"


def _fmt_opt(v):
    return "" if v is None else str(v)


def dataset_to_csv(d: ExperimentDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for rec in d.sessions:
        writer.writerow(
            [
                rec.session,
                _fmt_opt(rec.robot_x),
                _fmt_opt(rec.robot_y),
                _fmt_opt(rec.correct_A),
                _fmt_opt(rec.correct_B),
                *(_fmt_rating(v) for v in rec.ratings),
            ]
        )
    return buf.getvalue()


def write_dataset(d: ExperimentDataset, path) -> None:
    """Write the canonical CSV form (ratings to six decimals) to ``path``."""
    Path(path).write_text(dataset_to_csv(d), newline="")


def _parse_params_entry(key: str, entry) -> TrustParams:
    if not isinstance(entry, dict):
        raise ConfigError("expected an object with the six parameters", f"pairs.{key}")
    values = {}
    for name in PARAM_NAMES:
        where = f"pairs.{key}.{name}"
        if name not in entry:
            raise ConfigError("missing", where)
        value = entry[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", where)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError("must be finite", where)
        if name in ("alpha0", "beta0", "s", "f") and value <= 0:
            raise ConfigError(f"must be positive, got {value}", where)
        if value < 0:
            raise ConfigError(f"must be non-negative, got {value}", where)
        values[name] = value
    extra = set(entry) - set(PARAM_NAMES)
    if extra:
        raise ConfigError(f"unknown fields {sorted(extra)}", f"pairs.{key}")
    return TrustParams(**values)


def params_from_dict(doc) -> dict[str, TrustParams]:
    if not isinstance(doc, dict) or not isinstance(doc.get("pairs"), dict):
        raise ConfigError('expected {"pairs": {...}}', "pairs")
    out = {}
    for key, entry in doc["pairs"].items():
        parts = key.split(":")
        if len(parts) != 2 or not all(parts):
            raise ConfigError("pair keys look like 'x:A'", f"pairs.{key}")
        out[key] = _parse_params_entry(key, entry)
    return out


def params_to_dict(params: dict[str, TrustParams]) -> dict:
    return {"pairs": {key: p.to_dict() for key, p in params.items()}}


def load_params(path) -> dict[str, TrustParams]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return params_from_dict(doc)


def save_params(params: dict[str, TrustParams], path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params), indent=2, sort_keys=True) + "\n")
