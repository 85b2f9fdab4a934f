"""In-process publish-subscribe fabric.

Topics are named channels with a declared payload schema. Sensor-style
topics use bounded drop-oldest queues (losing a stale tick is normal);
instruction topics are declared reliable and refuse to drop, erroring on
the publishing side instead. Sequence numbers are gapless per
(publisher, topic) pair, so subscribers can audit ordering.
"""

from __future__ import annotations

import json
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

_TOPIC_NAME_RE = re.compile(r"^(/[a-z0-9_]+)+$")

SENSOR_QUEUE_CAPACITY = 64
RELIABLE_QUEUE_CAPACITY = 16

SchemaValidator = Callable[[Any], bool]


class BusError(Exception):
    pass


class UnknownTopicError(BusError):
    pass


class SchemaConflictError(BusError):
    pass


class SchemaMismatchError(BusError):
    pass


class TopicOverflowError(BusError):
    """A reliable topic's queue is full; the publish was refused."""


@dataclass(frozen=True)
class TopicDecl:
    name: str
    schema_id: str
    reliable: bool = False
    capacity: int = SENSOR_QUEUE_CAPACITY


@dataclass(frozen=True)
class MessageEnvelope:
    topic: str
    seq: int
    timestamp: float
    publisher: str
    payload: Any


@dataclass
class _Topic:
    decl: TopicDecl
    subscribers: list["Subscription"] = field(default_factory=list)
    seq_by_publisher: dict[str, int] = field(default_factory=dict)


class Subscription:
    """Per-subscriber bounded queue; poll() and drain() never block."""

    def __init__(self, bus: "MessageBus", topic: str, capacity: int, reliable: bool):
        self._bus = bus
        self.topic = topic
        self.reliable = reliable
        self._capacity = capacity
        self._queue: deque[MessageEnvelope] = deque()
        self.dropped = 0
        self.closed = False

    def _offer(self, envelope: MessageEnvelope) -> None:
        if len(self._queue) >= self._capacity:
            if self.reliable:
                raise TopicOverflowError(
                    f"reliable topic {self.topic} subscriber queue full ({self._capacity})"
                )
            self._queue.popleft()
            self.dropped += 1
        self._queue.append(envelope)

    def poll(self) -> MessageEnvelope | None:
        with self._bus._lock:
            return self._queue.popleft() if self._queue else None

    def drain(self) -> list[MessageEnvelope]:
        with self._bus._lock:
            items = list(self._queue)
            self._queue.clear()
            return items

    def __len__(self) -> int:
        return len(self._queue)

    def unsubscribe(self) -> None:
        self._bus._remove_subscription(self)
        self.closed = True


class MessageBus:
    """Internally synchronized topic registry and router."""

    def __init__(self, timestamper: Callable[[], float] | None = None):
        self._lock = threading.Lock()
        self._topics: dict[str, _Topic] = {}
        self._schemas: dict[str, SchemaValidator] = {}
        self._taps: list[Callable[[MessageEnvelope], None]] = []
        self._timestamper = timestamper or time.time

    def register_schema(self, schema_id: str, validator: SchemaValidator) -> None:
        self._schemas[schema_id] = validator

    def declare_topic(self, name: str, schema_id: str, *, reliable: bool = False,
                      capacity: int | None = None) -> TopicDecl:
        if not _TOPIC_NAME_RE.match(name):
            raise BusError(f"invalid topic name {name!r}")
        if capacity is None:
            capacity = RELIABLE_QUEUE_CAPACITY if reliable else SENSOR_QUEUE_CAPACITY
        with self._lock:
            existing = self._topics.get(name)
            if existing is not None:
                if existing.decl.schema_id != schema_id:
                    raise SchemaConflictError(
                        f"topic {name} already declared with schema {existing.decl.schema_id!r}"
                    )
                return existing.decl
            decl = TopicDecl(name=name, schema_id=schema_id, reliable=reliable, capacity=capacity)
            self._topics[name] = _Topic(decl=decl)
            return decl

    def publish(self, topic: str, payload: Any, publisher: str = "default") -> int:
        with self._lock:
            entry = self._topics.get(topic)
            if entry is None:
                raise UnknownTopicError(f"topic {topic} not declared")
            validator = self._schemas.get(entry.decl.schema_id)
            if validator is not None and not validator(payload):
                raise SchemaMismatchError(
                    f"payload does not conform to schema {entry.decl.schema_id!r} on {topic}"
                )
            seq = entry.seq_by_publisher.get(publisher, 0) + 1
            envelope = MessageEnvelope(
                topic=topic, seq=seq, timestamp=self._timestamper(),
                publisher=publisher, payload=payload,
            )
            # Reliable topics must not partially deliver: check room first.
            if entry.decl.reliable:
                for sub in entry.subscribers:
                    if len(sub._queue) >= sub._capacity:
                        raise TopicOverflowError(
                            f"reliable topic {topic} subscriber queue full ({sub._capacity})"
                        )
            entry.seq_by_publisher[publisher] = seq
            for sub in entry.subscribers:
                sub._offer(envelope)
            for tap in self._taps:
                tap(envelope)
            return seq

    def subscribe(self, topic: str) -> Subscription:
        with self._lock:
            entry = self._topics.get(topic)
            if entry is None:
                raise UnknownTopicError(f"topic {topic} not declared")
            sub = Subscription(self, topic, entry.decl.capacity, entry.decl.reliable)
            entry.subscribers.append(sub)
            return sub

    def attach_tap(self, tap: Callable[[MessageEnvelope], None]) -> None:
        """Debug hook: called with every published envelope (inside the lock)."""
        self._taps.append(tap)

    def attach_jsonl_tap(self, stream) -> None:
        """Debug tap that dumps every envelope to `stream` as JSON Lines."""

        def tap(envelope: MessageEnvelope) -> None:
            stream.write(json.dumps({
                "topic": envelope.topic, "seq": envelope.seq,
                "timestamp": envelope.timestamp, "publisher": envelope.publisher,
                "payload": envelope.payload,
            }, sort_keys=True, default=str) + "\n")

        self._taps.append(tap)

    def _remove_subscription(self, sub: Subscription) -> None:
        with self._lock:
            entry = self._topics.get(sub.topic)
            if entry is not None and sub in entry.subscribers:
                entry.subscribers.remove(sub)
