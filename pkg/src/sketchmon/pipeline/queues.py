"""Bounded hand-off queues with per-session supersession.

A queue never blocks its producer: when a newer item shares a supersession
key with a pending one, the stale item is dropped; when the queue is full
otherwise, the globally oldest pending item is dropped. Every drop is
counted, so enqueued == dequeued + dropped holds at all times.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from queue import Empty
from typing import Callable, Generic, Optional, TypeVar

T = TypeVar("T")


class _Poison:
    def __repr__(self) -> str:
        return "<poison>"


POISON = _Poison()


class QueueClosed(Exception):
    pass


@dataclass(frozen=True)
class QueueStats:
    enqueued: int
    dequeued: int
    dropped: int
    depth: int


class WorkQueue(Generic[T]):
    def __init__(
        self,
        capacity: int,
        supersede_key: Optional[Callable[[T], object]] = None,
        name: str = "queue",
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.name = name
        self._supersede_key = supersede_key
        self._items: deque = deque()
        self._cond = threading.Condition()
        self._closed = False
        self._enqueued = 0
        self._dequeued = 0
        self._dropped = 0

    def put(self, item: T) -> None:
        with self._cond:
            if self._closed:
                raise QueueClosed(self.name)
            if not isinstance(item, _Poison):
                self._enqueued += 1  # poison pills stay out of the accounting
            key = (
                self._supersede_key(item)
                if self._supersede_key is not None and not isinstance(item, _Poison)
                else None
            )
            if key is not None:
                for i, pending in enumerate(self._items):
                    if not isinstance(pending, _Poison) and self._supersede_key(pending) == key:
                        del self._items[i]
                        self._dropped += 1
                        break
            if len(self._items) >= self.capacity:
                # full despite supersession: shed the oldest non-poison item
                for i, pending in enumerate(self._items):
                    if not isinstance(pending, _Poison):
                        del self._items[i]
                        self._dropped += 1
                        break
                else:
                    self._dropped += 1  # nothing sheddable; drop the new item
                    self._cond.notify()
                    return
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> T:
        with self._cond:
            if not self._cond.wait_for(lambda: self._items or self._closed, timeout):
                raise Empty
            if not self._items:
                raise QueueClosed(self.name)
            item = self._items.popleft()
            if not isinstance(item, _Poison):
                self._dequeued += 1
            return item

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def depth(self) -> int:
        with self._cond:
            return len(self._items)

    @property
    def stats(self) -> QueueStats:
        with self._cond:
            return QueueStats(self._enqueued, self._dequeued, self._dropped, len(self._items))
