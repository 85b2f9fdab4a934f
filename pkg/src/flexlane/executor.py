"""Parameter overrides with backup and timed rollback.

The executor owns the only write path to the parameter store. Submitting a
program starts a validation task; only on activation is the parameter
written, and the pre-write value is snapshotted so expiry (or cancel)
restores it exactly. The change log records every write with its cause, so
audits can prove that non-activated instructions never touched the store.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .autoir import AutoIRProgram
from .clock import Clock
from .registry import ConfigValue, ParamPath, ParamRegistry
from .rules import (
    InstructionValidator,
    RuleBase,
    StatusUnavailableError,
    VehicleStatus,
)

STATE_PENDING = "Pending"
STATE_VALIDATING = "Validating"
STATE_ACTIVE = "Active"
STATE_EXPIRED = "Expired"
STATE_REJECTED = "Rejected"
STATE_FAILED = "Failed"

TERMINAL_STATES = frozenset({STATE_EXPIRED, STATE_REJECTED, STATE_FAILED})

REASON_CANCELLED = "Cancelled"
REASON_STATUS_UNAVAILABLE = "StatusUnavailable"


class ParamStoreError(Exception):
    pass


class UnknownPathError(ParamStoreError):
    pass


class ValueRejectedError(ParamStoreError):
    """The value does not satisfy the path's descriptor."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ConflictPendingError(Exception):
    """Another instruction is already validating or active on the same path."""


@dataclass(frozen=True)
class ParamSnapshot:
    path: ParamPath
    original: ConfigValue
    taken_at: float


@dataclass(frozen=True)
class ChangeLogEntry:
    t: float
    path: ParamPath
    old: ConfigValue
    new: ConfigValue
    cause: str
    note: str | None = None

    def to_dict(self) -> dict:
        doc = {"t": self.t, "path": "/".join(self.path), "old": self.old,
               "new": self.new, "cause": self.cause}
        if self.note is not None:
            doc["note"] = self.note
        return doc


class _InMemoryBackend:
    def __init__(self, defaults: dict[ParamPath, ConfigValue]):
        self._values = dict(defaults)

    def get(self, path: ParamPath) -> ConfigValue:
        return self._values[path]

    def set(self, path: ParamPath, value: ConfigValue) -> None:
        self._values[path] = value


class ParamStore:
    """Registry-checked live parameter map with an append-only change log.

    A pluggable backend lets the store wrap an external component's live
    parameters (e.g. the simulator's); the default backend is an in-memory
    map seeded with registry defaults.
    """

    def __init__(self, registry: ParamRegistry, clock: Clock, backend=None):
        self.registry = registry
        self._clock = clock
        self._backend = backend if backend is not None else _InMemoryBackend(registry.defaults())
        self._log: list[ChangeLogEntry] = []
        self._lock = threading.Lock()

    def read(self, path: ParamPath) -> ConfigValue:
        if self.registry.lookup(*path) is None:
            raise UnknownPathError("/".join(path))
        return self._backend.get(path)

    def write(self, path: ParamPath, value: ConfigValue, cause: str,
              note: str | None = None) -> tuple[ConfigValue, ConfigValue]:
        """Set a parameter; returns (old, new). The write and its log entry
        happen atomically under the store lock."""
        descriptor = self.registry.lookup(*path)
        if descriptor is None:
            raise UnknownPathError("/".join(path))
        problem = descriptor.check(value)
        if problem is not None:
            raise ValueRejectedError(descriptor.violation_code(value) or "TypeMismatch", problem)
        with self._lock:
            old = self._backend.get(path)
            self._backend.set(path, value)
            self._log.append(ChangeLogEntry(
                t=self._clock.now(), path=path, old=old, new=value, cause=cause, note=note,
            ))
            return old, value

    def snapshot(self, path: ParamPath) -> ParamSnapshot:
        return ParamSnapshot(path=path, original=self.read(path), taken_at=self._clock.now())

    def change_log(self) -> list[ChangeLogEntry]:
        with self._lock:
            return list(self._log)

    def export_change_log_jsonl(self) -> str:
        return "\n".join(json.dumps(entry.to_dict(), sort_keys=True) for entry in self.change_log())

    def serialize(self) -> str:
        """Canonical JSON of the live values (byte-exact comparisons)."""
        doc = {"/".join(path): self._backend.get(path) for path, _ in self.registry.paths()}
        return json.dumps(doc, sort_keys=True)


@dataclass
class InstructionRecord:
    id: str
    program: AutoIRProgram
    state: str
    created_at: float
    snapshot: ParamSnapshot | None = None
    activated_at: float | None = None
    expires_at: float | None = None
    reason: str | None = None
    validator: InstructionValidator | None = field(default=None, repr=False)

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


@dataclass(frozen=True)
class ExecutorEvent:
    t: float
    instruction_id: str
    kind: str
    data: dict


class ReconfigExecutor:
    """Single-writer override engine driven by periodic tick() calls.

    submit() runs the first validation poll immediately; subsequent polls
    and expiries happen on tick(). All store writes funnel through here.
    """

    def __init__(self, store: ParamStore, rule_base: RuleBase,
                 status_source: Callable[[], VehicleStatus], clock: Clock,
                 poll_period: float = 0.1):
        self.store = store
        self.rule_base = rule_base
        self.status_source = status_source
        self.clock = clock
        self.poll_period = poll_period
        self._records: dict[str, InstructionRecord] = {}
        self._order: list[str] = []
        self._events: list[ExecutorEvent] = []
        self._counter = 0

    # -- submission ---------------------------------------------------------

    def submit(self, program: AutoIRProgram) -> str:
        now = self.clock.now()
        for record in self._records.values():
            if record.state in (STATE_VALIDATING, STATE_ACTIVE) and record.program.path == program.path:
                raise ConflictPendingError(
                    f"instruction {record.id} already {record.state.lower()} on {'/'.join(program.path)}"
                )
        self._counter += 1
        iid = f"ins-{self._counter:04d}"
        record = InstructionRecord(id=iid, program=program, state=STATE_PENDING, created_at=now)
        self._records[iid] = record
        self._order.append(iid)
        record.validator = InstructionValidator(
            program, self.rule_base, self.clock, poll_period=self.poll_period,
        )
        record.state = STATE_VALIDATING
        self._emit(record, "submitted", {"path": "/".join(program.path)})
        if record.validator.rule is not None:
            self._emit(record, "rule_found", _rule_summary(record.validator.rule))
        self._advance_validation(record, now)
        return iid

    # -- periodic driving ---------------------------------------------------

    def tick(self) -> list[ExecutorEvent]:
        """Advance validations and expiries to the clock's current time;
        returns the events emitted during this call."""
        now = self.clock.now()
        before = len(self._events)
        for iid in list(self._order):
            record = self._records[iid]
            if record.state == STATE_VALIDATING:
                self._advance_validation(record, now)
            if record.state == STATE_ACTIVE and record.expires_at is not None and now >= record.expires_at - 1e-9:
                self._restore(record, STATE_EXPIRED, None)
                self._emit(record, "expired", {})
        return self._events[before:]

    def _advance_validation(self, record: InstructionRecord, now: float) -> None:
        validator = record.validator
        assert validator is not None
        validator.check_deadline(now)
        if validator.outcome is None and validator.poll_due(now):
            try:
                status: VehicleStatus | None = self.status_source()
            except Exception:
                status = None
            try:
                validator.feed(now, status)
            except StatusUnavailableError:
                record.state = STATE_FAILED
                record.reason = REASON_STATUS_UNAVAILABLE
                self._emit(record, "failed", {"reason": record.reason})
                return
            validator.check_deadline(now)
        outcome = validator.outcome
        if outcome is None:
            return
        if outcome.activated:
            self._activate(record, outcome.effective_timer or record.program.timer, now)
        else:
            record.state = STATE_REJECTED
            record.reason = outcome.reason
            self._emit(record, "rejected", {"reason": outcome.reason,
                                            "polls": len(outcome.polls)})

    def _activate(self, record: InstructionRecord, effective_timer: float, now: float) -> None:
        program = record.program
        try:
            record.snapshot = self.store.snapshot(program.path)
            old, new = self.store.write(program.path, program.config_action, cause=record.id)
        except ParamStoreError as exc:
            record.state = STATE_FAILED
            record.reason = type(exc).__name__
            self._emit(record, "failed", {"reason": record.reason, "detail": str(exc)})
            return
        record.state = STATE_ACTIVE
        record.activated_at = now
        record.expires_at = now + effective_timer
        self._emit(record, "activated", {
            "effective_timer": effective_timer, "old": old, "new": new,
            "path": "/".join(program.path),
        })

    def _restore(self, record: InstructionRecord, final_state: str, reason: str | None) -> None:
        snapshot = record.snapshot
        assert snapshot is not None
        current = self.store.read(snapshot.path)
        note = "overwrite" if current != snapshot.original else None
        self.store.write(snapshot.path, snapshot.original, cause=f"restore:{record.id}", note=note)
        record.state = final_state
        record.reason = reason
        self._emit(record, "restored", {"path": "/".join(snapshot.path),
                                        "value": snapshot.original,
                                        "overwrote_manual_change": note is not None})

    # -- queries ------------------------------------------------------------

    def get(self, iid: str) -> InstructionRecord:
        return self._records[iid]

    def records(self) -> list[InstructionRecord]:
        return [self._records[iid] for iid in self._order]

    def all_terminal(self) -> bool:
        return all(record.terminal for record in self._records.values())

    def active_overrides(self) -> list[dict]:
        """Read-only view of live overrides with remaining seconds."""
        now = self.clock.now()
        out = []
        for iid in self._order:
            record = self._records[iid]
            if record.state == STATE_ACTIVE and record.expires_at is not None:
                out.append({
                    "instruction_id": record.id,
                    "path": "/".join(record.program.path),
                    "value": record.program.config_action,
                    "remaining": max(0.0, record.expires_at - now),
                })
        return out

    def drain_events(self) -> list[ExecutorEvent]:
        events, self._events = self._events, []
        return events

    # -- manual control (operator extension, not part of the core loop) -----

    def cancel(self, iid: str) -> None:
        """Cancel early: active overrides restore immediately; validating
        instructions are rejected. No-op for terminal records."""
        record = self._records[iid]
        if record.state == STATE_ACTIVE:
            self._restore(record, STATE_EXPIRED, REASON_CANCELLED)
            self._emit(record, "cancelled", {})
        elif record.state == STATE_VALIDATING:
            record.state = STATE_REJECTED
            record.reason = REASON_CANCELLED
            self._emit(record, "cancelled", {})

    def _emit(self, record: InstructionRecord, kind: str, data: dict) -> None:
        self._events.append(ExecutorEvent(
            t=self.clock.now(), instruction_id=record.id, kind=kind, data=data,
        ))


def apply_override(store: ParamStore, path: ParamPath, value: ConfigValue,
                   cause: str = "manual") -> ParamSnapshot:
    """Snapshot-then-write as one atomic step; returns the backup snapshot."""
    with store._lock:
        descriptor = store.registry.lookup(*path)
        if descriptor is None:
            raise UnknownPathError("/".join(path))
        problem = descriptor.check(value)
        if problem is not None:
            raise ValueRejectedError(descriptor.violation_code(value) or "TypeMismatch", problem)
        old = store._backend.get(path)
        snapshot = ParamSnapshot(path=path, original=old, taken_at=store._clock.now())
        store._backend.set(path, value)
        store._log.append(ChangeLogEntry(
            t=store._clock.now(), path=path, old=old, new=value, cause=cause,
        ))
    return snapshot


def _rule_summary(rule) -> dict:
    cond = rule.conditions
    return {
        "motion_state": cond.motion_state,
        "speed_min": cond.speed_min,
        "speed_max": None if cond.speed_max == float("inf") else cond.speed_max,
        "required": sorted(cond.required_perceptions),
        "forbidden": sorted(cond.forbidden_perceptions),
        "timer_cap": rule.timer_cap,
    }
