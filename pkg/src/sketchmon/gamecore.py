"""Session lifecycle: roles, phrase sampling, timing, guesses, feedback.

A session is an event-sourced state machine: every accepted mutation
appends to its event log, and replaying a persisted log reconstructs the
terminal state exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from sketchmon.strokes import Point, Stroke, stroke_from_obj, stroke_to_obj

DEFAULT_TIME_LIMIT_S = 120.0
DEFAULT_CAPACITY = 50


class Role(str, Enum):
    DRAWER = "drawer"
    GUESSER = "guesser"


class PartOfSpeech(str, Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJECTIVE = "adjective"


class SessionState(str, Enum):
    WAITING = "waiting"
    ACTIVE = "active"
    WON_BY_GUESS = "won_by_guess"
    TIMED_OUT = "timed_out"


TERMINAL_STATES = (SessionState.WON_BY_GUESS, SessionState.TIMED_OUT)


class FeedbackKind(str, Enum):
    THUMBS_UP = "thumbs_up"
    THUMBS_DOWN = "thumbs_down"
    QUESTION = "question"
    HIGHLIGHT_PING = "highlight_ping"


# which role may send which feedback
FEEDBACK_SENDER = {
    FeedbackKind.THUMBS_UP: Role.DRAWER,
    FeedbackKind.THUMBS_DOWN: Role.DRAWER,
    FeedbackKind.HIGHLIGHT_PING: Role.DRAWER,
    FeedbackKind.QUESTION: Role.GUESSER,
}


class GuessOutcome(str, Enum):
    PENDING = "pending"
    WON = "won"


class GameRuleError(Exception):
    """An event was rejected: wrong role, wrong state, or unknown session."""


@dataclass
class PhraseEntry:
    phrase: str
    part_of_speech: PartOfSpeech
    selection_count: int = 0


class PhraseDictionary:
    """Guess-phrase pool with usage-balanced sampling.

    A phrase is drawn with weight 1/(1 + selection_count), so rarely used
    phrases surface more often and coverage evens out over many sessions.
    """

    def __init__(self, entries: list[PhraseEntry]):
        if len({e.phrase for e in entries}) != len(entries):
            raise ValueError("phrases must be unique")
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def default(cls) -> "PhraseDictionary":
        raw = json.loads(
            resources.files("sketchmon").joinpath("data/phrases.json").read_text()
        )
        return cls([PhraseEntry(e["phrase"], PartOfSpeech(e["pos"])) for e in raw])

    def sample(self, rng: random.Random | int | None = None) -> str:
        if not self.entries:
            raise ValueError("cannot sample from an empty dictionary")
        if not isinstance(rng, random.Random):
            rng = random.Random(rng)
        weights = [1.0 / (1 + e.selection_count) for e in self.entries]
        entry = rng.choices(self.entries, weights=weights, k=1)[0]
        entry.selection_count += 1
        return entry.phrase


def sample_phrase(dictionary: PhraseDictionary, rng_seed: random.Random | int | None = None) -> str:
    return dictionary.sample(rng_seed)


@dataclass
class GuessRecord:
    text: str
    timestamp: float
    confirmed: bool = False


@dataclass
class FeedbackEvent:
    kind: FeedbackKind
    timestamp: float
    point: Optional[Point] = None


class GameSession:
    """One drawer/guesser episode.

    State transitions only WAITING -> ACTIVE -> {WON_BY_GUESS, TIMED_OUT};
    strokes, guesses and feedback are accepted while ACTIVE only.
    """

    def __init__(
        self,
        session_id: str,
        drawer_id: str,
        guesser_id: str,
        target_phrase: str,
        time_limit_s: float = DEFAULT_TIME_LIMIT_S,
        auto_confirm: bool = False,
    ):
        self.session_id = session_id
        self.drawer_id = drawer_id
        self.guesser_id = guesser_id
        self.target_phrase = target_phrase
        self.time_limit_s = time_limit_s
        self.auto_confirm = auto_confirm
        self.state = SessionState.WAITING
        self.started_at: float | None = None
        self.strokes: list[Stroke] = []
        self.guesses: list[GuessRecord] = []
        self.feedback_events: list[FeedbackEvent] = []
        self.events: list[dict] = []

    # -- helpers ---------------------------------------------------------------

    def role_of(self, player_id: str) -> Role:
        if player_id == self.drawer_id:
            return Role.DRAWER
        if player_id == self.guesser_id:
            return Role.GUESSER
        raise GameRuleError(f"player {player_id!r} is not in session {self.session_id}")

    @property
    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    def _require_active(self) -> None:
        if self.state is not SessionState.ACTIVE:
            raise GameRuleError(f"session {self.session_id} is {self.state.value}, not active")

    def _log(self, event: dict) -> None:
        self.events.append(event)

    # -- lifecycle ---------------------------------------------------------------

    def activate(self, now: float) -> None:
        if self.state is not SessionState.WAITING:
            raise GameRuleError("session already started")
        self.state = SessionState.ACTIVE
        self.started_at = now
        self._log(
            {
                "type": "start",
                "t": now,
                "drawer": self.drawer_id,
                "guesser": self.guesser_id,
                "target": self.target_phrase,
                "time_limit_s": self.time_limit_s,
                "auto_confirm": self.auto_confirm,
            }
        )

    def tick(self, now: float) -> Optional[SessionState]:
        """Move an overdue active session to TIMED_OUT; idempotent otherwise."""
        if self.state is not SessionState.ACTIVE:
            return None
        assert self.started_at is not None
        if now - self.started_at > self.time_limit_s:
            self.state = SessionState.TIMED_OUT
            self._log({"type": "timeout", "t": now})
            return SessionState.TIMED_OUT
        return None

    def end_disconnected(self, player_id: str, now: float) -> None:
        """A dropped connection ends the game; recorded in the session log."""
        if self.is_terminal:
            return
        self.state = SessionState.TIMED_OUT
        self._log({"type": "disconnect", "t": now, "player": player_id})

    # -- gameplay ---------------------------------------------------------------

    def add_stroke(self, player_id: str, stroke: Stroke, now: float) -> None:
        self._require_active()
        if self.role_of(player_id) is not Role.DRAWER:
            raise GameRuleError("only the drawer draws")
        if self.strokes and stroke.timestamp_ms < self.strokes[-1].timestamp_ms:
            raise GameRuleError("stroke timestamps must not decrease")
        if any(s.stroke_id == stroke.stroke_id for s in self.strokes):
            raise GameRuleError(f"duplicate stroke id {stroke.stroke_id}")
        self.strokes.append(stroke)
        self._log({"type": "stroke", "t": now, "stroke": stroke_to_obj(stroke)})

    def submit_guess(self, player_id: str, text: str, now: float) -> GuessOutcome:
        self._require_active()
        if self.role_of(player_id) is not Role.GUESSER:
            raise GameRuleError("only the guesser guesses")
        self.guesses.append(GuessRecord(text=text, timestamp=now))
        self._log({"type": "guess", "t": now, "text": text})
        if self.auto_confirm and text.casefold() == self.target_phrase.casefold():
            return self._win(len(self.guesses) - 1, now)
        return GuessOutcome.PENDING

    def confirm_guess(self, player_id: str, guess_index: int, now: float) -> GuessOutcome:
        """Drawer accepts a guess as correct, ending the game."""
        self._require_active()
        if self.role_of(player_id) is not Role.DRAWER:
            raise GameRuleError("only the drawer confirms guesses")
        if not (0 <= guess_index < len(self.guesses)):
            raise GameRuleError(f"no guess at index {guess_index}")
        return self._win(guess_index, now)

    def _win(self, guess_index: int, now: float) -> GuessOutcome:
        self.guesses[guess_index].confirmed = True
        self.state = SessionState.WON_BY_GUESS
        self._log({"type": "won", "t": now, "guess_index": guess_index})
        return GuessOutcome.WON

    def record_feedback(
        self,
        player_id: str,
        kind: FeedbackKind,
        now: float,
        point: Optional[Point] = None,
    ) -> None:
        self._require_active()
        if self.role_of(player_id) is not FEEDBACK_SENDER[kind]:
            raise GameRuleError(f"{kind.value} not allowed for this role")
        if kind is FeedbackKind.HIGHLIGHT_PING and point is None:
            raise GameRuleError("highlight ping needs a canvas point")
        self.feedback_events.append(FeedbackEvent(kind=kind, timestamp=now, point=point))
        event = {"type": "feedback", "t": now, "kind": kind.value}
        if point is not None:
            event["point"] = [point.x, point.y]
        self._log(event)

    def record_alert(self, alert_obj: dict, now: float) -> None:
        """Alerts land in the session log regardless of game state."""
        self._log({"type": "alert", "t": now, "alert": alert_obj})

    def record_outcome(self, summary: dict, now: float) -> None:
        self._log({"type": "outcome", "t": now, **summary})

    # -- persistence ---------------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "session_id": self.session_id,
            "target": self.target_phrase,
            "roles": {"drawer": self.drawer_id, "guesser": self.guesser_id},
            "time_limit_s": self.time_limit_s,
            "state": self.state.value,
            "events": list(self.events),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=1))

    @classmethod
    def replay(cls, record: dict) -> "GameSession":
        """Rebuild a session by applying its event log in order."""
        events = record["events"]
        start = next(e for e in events if e["type"] == "start")
        session = cls(
            session_id=record["session_id"],
            drawer_id=record["roles"]["drawer"],
            guesser_id=record["roles"]["guesser"],
            target_phrase=record["target"],
            time_limit_s=record.get("time_limit_s", DEFAULT_TIME_LIMIT_S),
            auto_confirm=start.get("auto_confirm", False),
        )
        for event in events:
            kind = event["type"]
            if kind == "start":
                session.activate(event["t"])
            elif kind == "stroke":
                session.add_stroke(session.drawer_id, stroke_from_obj(event["stroke"]), event["t"])
            elif kind == "guess":
                session.submit_guess(session.guesser_id, event["text"], event["t"])
            elif kind == "won":
                if session.state is SessionState.ACTIVE:
                    session._win(event["guess_index"], event["t"])
            elif kind == "timeout":
                session.state = SessionState.TIMED_OUT
                session._log(event)
            elif kind == "disconnect":
                session.end_disconnected(event["player"], event["t"])
            elif kind == "feedback":
                point = Point(*event["point"]) if "point" in event else None
                session.record_feedback(
                    session.drawer_id
                    if FEEDBACK_SENDER[FeedbackKind(event["kind"])] is Role.DRAWER
                    else session.guesser_id,
                    FeedbackKind(event["kind"]),
                    event["t"],
                    point,
                )
            elif kind == "alert":
                session.record_alert(event["alert"], event["t"])
            elif kind == "outcome":
                session._log(event)
            else:
                raise ValueError(f"unknown event type {kind!r}")
        # replaying appends identical events; keep the original log verbatim
        session.events = list(events)
        return session

    @classmethod
    def load(cls, path: str | Path) -> "GameSession":
        return cls.replay(json.loads(Path(path).read_text()))


class SessionRegistry:
    """The single serialized authority over all sessions."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self.sessions: dict[str, GameSession] = {}
        self._next_id = 0

    def live_count(self) -> int:
        return sum(1 for s in self.sessions.values() if not s.is_terminal)

    def create(
        self,
        drawer_id: str,
        guesser_id: str,
        target_phrase: str,
        now: float,
        time_limit_s: float = DEFAULT_TIME_LIMIT_S,
        auto_confirm: bool = False,
    ) -> GameSession:
        if self.live_count() >= self.capacity:
            raise GameRuleError(f"registry at capacity ({self.capacity} live sessions)")
        session_id = f"sess-{self._next_id:06d}"
        self._next_id += 1
        session = GameSession(
            session_id, drawer_id, guesser_id, target_phrase, time_limit_s, auto_confirm
        )
        self.sessions[session_id] = session
        session.activate(now)
        return session

    def get(self, session_id: str) -> GameSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise GameRuleError(f"unknown session {session_id!r}") from None

    def tick_all(self, now: float) -> list[GameSession]:
        """Returns sessions that timed out on this tick."""
        return [s for s in self.sessions.values() if s.tick(now) is not None]
