"""Alert generation: detection history per session, rules, dedup, outcomes.

Detections stream in per session; a rule base decides which categories
raise violations. A raised alert suppresses re-alerts on overlapping boxes
for the rest of the session (whether or not it is later dismissed as a
false alarm), so persistent canvas content alerts once.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from sketchmon.detector.boxes import iou
from sketchmon.detector.types import Category, DetectionBox
from sketchmon.pipeline.workers import DetectionResult

DEDUP_IOU = 0.5


class RuleAction(Enum):
    RAISE_VIOLATION = "raise_violation"
    RECORD_ONLY = "record_only"


@dataclass(frozen=True)
class Rule:
    categories: frozenset[Category]
    action: RuleAction


class RuleBase:
    """Ordered category rules; first match wins, then the default action."""

    def __init__(self, rules: list[Rule], default: RuleAction = RuleAction.RECORD_ONLY):
        self.rules = rules
        self.default = default

    @classmethod
    def text_violations(cls) -> "RuleBase":
        """Deployment default: only text raises, everything else records."""
        return cls([Rule(frozenset({Category.TEXT}), RuleAction.RAISE_VIOLATION)])

    def action_for(self, category: Category) -> RuleAction:
        for rule in self.rules:
            if category in rule.categories:
                return rule.action
        return self.default


class AlertState(Enum):
    RAISED = "raised"
    DISMISSED_FALSE_ALARM = "dismissed_false_alarm"


@dataclass
class Alert:
    alert_id: int
    session_id: str
    kind: str  # only "rule_violation" today
    boxes: tuple[DetectionBox, ...]
    raised_at: float
    state: AlertState = AlertState.RAISED
    manual: bool = False  # guesser-flag alerts carry no boxes

    def to_obj(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "kind": self.kind,
            "boxes": [
                {
                    "cx": b.cx,
                    "cy": b.cy,
                    "w": b.w,
                    "h": b.h,
                    "category": b.category.value,
                    "conf": b.confidence,
                }
                for b in self.boxes
            ],
            "ts": self.raised_at,
            "state": self.state.value,
            "manual": self.manual,
        }


@dataclass
class BoxRecord:
    box: DetectionBox
    first_seen: float
    alerted: bool = False
    dismissed: bool = False


@dataclass
class SessionRecord:
    last_seq: int = -1
    boxes: list[BoxRecord] = field(default_factory=list)
    alerts: dict[int, Alert] = field(default_factory=dict)
    corroborations: int = 0
    fp: int = 0
    fn: int = 0
    open: bool = True


class OutcomeLedger:
    """Global monotone counters matching the deployment bookkeeping:
    a dismissed alert is a false positive, a guesser flag without an active
    alert a false negative, and an alert surviving to session end a true
    positive."""

    def __init__(self):
        self.true_positive = 0
        self.false_positive = 0
        self.false_negative = 0

    def to_obj(self) -> dict:
        tp, fp, fn = self.true_positive, self.false_positive, self.false_negative
        obj = {"tp": tp, "fp": fp, "fn": fn}
        if tp + fp:
            obj["precision"] = tp / (tp + fp)
        if tp + fn:
            obj["recall"] = tp / (tp + fn)
        return obj


class AlertError(Exception):
    pass


class AlertEngine:
    """Record table + rule base + ledger behind one per-engine lock."""

    def __init__(
        self,
        rules: RuleBase | None = None,
        on_alert: Optional[Callable[[Alert], None]] = None,
        clock: Callable[[], float] = time.time,
        dedup_iou: float = DEDUP_IOU,
    ):
        self.rules = rules or RuleBase.text_violations()
        self.on_alert = on_alert
        self.clock = clock
        self.dedup_iou = dedup_iou
        self.ledger = OutcomeLedger()
        self._sessions: dict[str, SessionRecord] = {}
        self._next_alert_id = 1
        self._lock = threading.Lock()

    # -- session lifecycle ------------------------------------------------------

    def session_open(self, session_id: str) -> None:
        with self._lock:
            self._sessions.setdefault(session_id, SessionRecord())

    def _record(self, session_id: str) -> SessionRecord:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise AlertError(f"unknown session {session_id!r}") from None

    # -- detection intake ---------------------------------------------------------

    def ingest(self, result: DetectionResult) -> list[Alert]:
        """Apply one detection result; returns newly raised alerts.

        Results at or below the last processed snapshot_seq are stale and
        dropped, which both orders out-of-order completions and makes
        replayed results idempotent.
        """
        with self._lock:
            record = self._record(result.session_id)
            if result.snapshot_seq <= record.last_seq or not record.open:
                return []
            record.last_seq = result.snapshot_seq
            if result.error:
                return []
            now = self.clock()
            raised: list[Alert] = []
            for box in result.boxes:
                entry = BoxRecord(box=box, first_seen=now)
                if self.rules.action_for(box.category) is RuleAction.RAISE_VIOLATION:
                    if self._is_novel(record, box):
                        entry.alerted = True
                        alert = self._raise(record, result.session_id, (box,), now)
                        raised.append(alert)
                record.boxes.append(entry)
        for alert in raised:
            self._notify(alert)
        return raised

    def _is_novel(self, record: SessionRecord, box: DetectionBox) -> bool:
        """Novel = overlaps no previously alerted box (dismissed included:
        a dismissed false alarm must not re-alert)."""
        b = (box.cx, box.cy, box.w, box.h)
        for entry in record.boxes:
            if not entry.alerted:
                continue
            other = (entry.box.cx, entry.box.cy, entry.box.w, entry.box.h)
            if iou(b, other) >= self.dedup_iou:
                return False
        return True

    def _raise(
        self,
        record: SessionRecord,
        session_id: str,
        boxes: tuple[DetectionBox, ...],
        now: float,
        manual: bool = False,
    ) -> Alert:
        alert = Alert(
            alert_id=self._next_alert_id,
            session_id=session_id,
            kind="rule_violation",
            boxes=boxes,
            raised_at=now,
            manual=manual,
        )
        self._next_alert_id += 1
        record.alerts[alert.alert_id] = alert
        return alert

    def _notify(self, alert: Alert) -> None:
        if self.on_alert is not None:
            self.on_alert(alert)

    # -- manual mechanisms ----------------------------------------------------------

    def false_alarm(self, session_id: str, alert_id: int) -> None:
        """Drawer dismisses an alert; its boxes never re-alert."""
        with self._lock:
            record = self._record(session_id)
            alert = record.alerts.get(alert_id)
            if alert is None:
                raise AlertError(f"unknown alert {alert_id} in session {session_id!r}")
            if alert.state is not AlertState.RAISED:
                raise AlertError(f"alert {alert_id} already dismissed")
            alert.state = AlertState.DISMISSED_FALSE_ALARM
            for entry in record.boxes:
                if entry.alerted and any(
                    iou(
                        (entry.box.cx, entry.box.cy, entry.box.w, entry.box.h),
                        (b.cx, b.cy, b.w, b.h),
                    )
                    >= self.dedup_iou
                    for b in alert.boxes
                ):
                    entry.dismissed = True
            if not alert.manual:
                record.fp += 1
                self.ledger.false_positive += 1

    def guesser_flag(self, session_id: str) -> Optional[Alert]:
        """Guesser reports a violation.

        Without an active (undismissed) alert this is a miss: the false
        negative counts and a manual alert (no boxes) goes to the drawer.
        With one, it corroborates the alert.
        """
        with self._lock:
            record = self._record(session_id)
            if not record.open:
                raise AlertError(f"session {session_id!r} already closed")
            active = [
                a
                for a in record.alerts.values()
                if a.state is AlertState.RAISED and not a.manual
            ]
            if active:
                record.corroborations += 1
                return None
            record.fn += 1
            self.ledger.false_negative += 1
            alert = self._raise(record, session_id, (), self.clock(), manual=True)
        self._notify(alert)
        return alert

    def session_close(self, session_id: str) -> dict:
        """Final accounting: surviving automatic alerts become true positives."""
        with self._lock:
            record = self._record(session_id)
            if not record.open:
                raise AlertError(f"session {session_id!r} already closed")
            record.open = False
            tp = sum(
                1
                for a in record.alerts.values()
                if a.state is AlertState.RAISED and not a.manual
            )
            self.ledger.true_positive += tp
            return {
                "tp": tp,
                "fp": record.fp,
                "fn": record.fn,
                "corroborations": record.corroborations,
            }

    def active_alerts(self, session_id: str) -> list[Alert]:
        with self._lock:
            record = self._record(session_id)
            return [a for a in record.alerts.values() if a.state is AlertState.RAISED]

    def ledger_dump(self) -> dict:
        with self._lock:
            return self.ledger.to_obj()
