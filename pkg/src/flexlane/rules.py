"""Safety rule base and instruction validation.

Every reconfiguration request must first find its rule (exact tree descent
on module/node/param) and then satisfy that rule's conditions against live
vehicle status. A request whose path has no rule is ignored outright; one
whose conditions never become true within its lifetime is dropped when the
lifetime ends. The rule base also keeps a flat copy of its entries so the
tree search can be checked against a plain linear scan.
"""

from __future__ import annotations

import gc
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .autoir import AutoIRProgram
from .clock import Clock
from .registry import ParamPath

MOTION_DRIVING = "Driving"
MOTION_STOPPED = "Stopped"
MOTION_ANY = "Any"

TAG_TRAFFIC_LIGHT = "TrafficLightDetected"
TAG_OBSTACLE = "ObstacleDetected"
TAG_PEDESTRIAN = "PedestrianDetected"

REASON_NO_RULE = "NoRule"
REASON_CONDITIONS_NEVER_MET = "ConditionsNeverMet"
REASON_EXPIRED = "Expired"

POLL_PERIOD_S = 0.1
STATUS_UNAVAILABLE_AFTER_S = 1.0


class RuleBaseError(Exception):
    pass


class RuleParseError(RuleBaseError):
    pass


class DuplicatePathError(RuleBaseError):
    pass


class BadConditionError(RuleBaseError):
    pass


class StatusUnavailableError(Exception):
    """The status source kept failing for longer than the tolerance window."""


@dataclass(frozen=True)
class VehicleStatus:
    """Live snapshot the rules condition on."""

    motion_state: str
    speed: float
    perceptions: frozenset[str] = frozenset()
    stop_reason: str | None = None


@dataclass(frozen=True)
class ConditionSet:
    motion_state: str = MOTION_ANY
    speed_min: float = 0.0
    speed_max: float = math.inf
    required_perceptions: frozenset[str] = frozenset()
    forbidden_perceptions: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.speed_min > self.speed_max:
            raise BadConditionError(f"speed_min {self.speed_min} exceeds speed_max {self.speed_max}")
        overlap = self.required_perceptions & self.forbidden_perceptions
        if overlap:
            raise BadConditionError(f"perceptions both required and forbidden: {sorted(overlap)}")


@dataclass(frozen=True)
class Rule:
    search_index: ParamPath
    conditions: ConditionSet
    timer_cap: float | None = None

    def __post_init__(self) -> None:
        if any(not part for part in self.search_index):
            raise BadConditionError("search index components must be non-empty")
        if self.timer_cap is not None and not self.timer_cap > 0:
            raise BadConditionError(f"timer_cap must be positive, got {self.timer_cap}")


class RuleBase:
    """Tree-indexed rules plus the flat entry list used as the search oracle."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self._tree: dict[str, dict[str, dict[str, Rule]]] = {}
        self.entries: list[Rule] = []
        for rule in rules:
            self.add(rule)

    def add(self, rule: Rule) -> None:
        module, node, param = rule.search_index
        params = self._tree.setdefault(module, {}).setdefault(node, {})
        if param in params:
            raise DuplicatePathError(f"duplicate rule for {module}/{node}/{param}")
        params[param] = rule
        self.entries.append(rule)

    def lookup(self, path: ParamPath) -> Rule | None:
        module, node, param = path
        nodes = self._tree.get(module)
        if nodes is None:
            return None
        params = nodes.get(node)
        if params is None:
            return None
        return params.get(param)

    def __len__(self) -> int:
        return len(self.entries)


def load_rule_base(source: str | Path | dict) -> RuleBase:
    """Load rules from a JSON document (path, text, or parsed dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RuleParseError(f"rule file is not valid JSON: {exc}") from exc
    raw_rules = doc.get("rules")
    if not isinstance(raw_rules, list):
        raise RuleParseError("rule document must carry a 'rules' list")
    base = RuleBase()
    for i, raw in enumerate(raw_rules):
        try:
            base.add(_rule_from_dict(raw))
        except (KeyError, TypeError, ValueError) as exc:
            raise RuleParseError(f"rule #{i}: {exc}") from exc
    return base


def _rule_from_dict(raw: dict) -> Rule:
    cond = raw.get("conditions", {})
    speed_max = cond.get("speed_max")
    conditions = ConditionSet(
        motion_state=cond.get("motion_state", MOTION_ANY),
        speed_min=float(cond.get("speed_min", 0.0)),
        speed_max=math.inf if speed_max is None else float(speed_max),
        required_perceptions=frozenset(cond.get("required", ())),
        forbidden_perceptions=frozenset(cond.get("forbidden", ())),
    )
    timer_cap = raw.get("timer_cap")
    return Rule(
        search_index=(raw["module"], raw["node"], raw["param"]),
        conditions=conditions,
        timer_cap=float(timer_cap) if timer_cap is not None else None,
    )


def search_rule(rule_base: RuleBase, program: AutoIRProgram) -> Rule | None:
    """Exact descent on (module, node, param); None when any level misses."""
    return rule_base.lookup(program.path)


def search_rule_linear(rule_base: RuleBase, program: AutoIRProgram) -> Rule | None:
    """Brute-force scan over the flat entry list (oracle for search_rule)."""
    for rule in rule_base.entries:
        if rule.search_index == program.path:
            return rule
    return None


def match_conditions(rule: Rule, status: VehicleStatus) -> bool:
    cond = rule.conditions
    if cond.motion_state != MOTION_ANY and cond.motion_state != status.motion_state:
        return False
    if not (cond.speed_min <= status.speed <= cond.speed_max):
        return False
    if not cond.required_perceptions <= status.perceptions:
        return False
    if cond.forbidden_perceptions & status.perceptions:
        return False
    return True


@dataclass(frozen=True)
class PollRecord:
    t: float
    matched: bool


@dataclass(frozen=True)
class ValidationOutcome:
    activated: bool
    reason: str | None
    decided_at: float
    effective_timer: float | None = None
    polls: tuple[PollRecord, ...] = ()


class InstructionValidator:
    """Stepped form of the validation loop.

    One instance validates one instruction. Callers drive it either from a
    blocking loop (validate_instruction) or cooperatively from an executor
    tick. Polls are due every poll_period starting at submission; the
    deadline check happens before each poll, so the no-match outcome lands
    within one poll period of the lifetime's end.
    """

    def __init__(self, program: AutoIRProgram, rule_base: RuleBase, clock: Clock,
                 poll_period: float = POLL_PERIOD_S,
                 unavailable_after: float = STATUS_UNAVAILABLE_AFTER_S):
        self.program = program
        self.rule = search_rule(rule_base, program)
        self.poll_period = poll_period
        self.unavailable_after = unavailable_after
        self.started_at = clock.now()
        self.deadline = self.started_at + program.timer
        self.next_poll_at = self.started_at
        self.polls: list[PollRecord] = []
        self._first_failure_at: float | None = None
        self.outcome: ValidationOutcome | None = None
        if self.rule is None:
            self.outcome = ValidationOutcome(
                activated=False, reason=REASON_NO_RULE, decided_at=self.started_at,
            )

    @property
    def finished(self) -> bool:
        return self.outcome is not None

    def poll_due(self, now: float) -> bool:
        return self.outcome is None and now >= self.next_poll_at - 1e-9

    def check_deadline(self, now: float) -> None:
        if self.outcome is not None or now < self.deadline - 1e-9:
            return
        reason = REASON_CONDITIONS_NEVER_MET if self.polls else REASON_EXPIRED
        self.outcome = ValidationOutcome(
            activated=False, reason=reason, decided_at=now, polls=tuple(self.polls),
        )

    def feed(self, now: float, status: VehicleStatus | None) -> None:
        """Consume one status fetch (None = the fetch failed)."""
        if self.outcome is not None:
            return
        self.next_poll_at += self.poll_period
        if status is None:
            if self._first_failure_at is None:
                self._first_failure_at = now
            elif now - self._first_failure_at > self.unavailable_after:
                raise StatusUnavailableError(
                    f"status source failing for over {self.unavailable_after} s"
                )
            return
        self._first_failure_at = None
        matched = match_conditions(self.rule, status) if self.rule else False
        self.polls.append(PollRecord(t=now, matched=matched))
        if matched:
            effective = self.program.timer
            if self.rule is not None and self.rule.timer_cap is not None:
                effective = min(effective, self.rule.timer_cap)
            self.outcome = ValidationOutcome(
                activated=True, reason=None, decided_at=now,
                effective_timer=effective, polls=tuple(self.polls),
            )


def validate_instruction(program: AutoIRProgram, rule_base: RuleBase,
                         status_source: Callable[[], VehicleStatus], clock: Clock,
                         poll_period: float = POLL_PERIOD_S) -> ValidationOutcome:
    """Blocking validation: poll status at 1/poll_period until the conditions
    match (activated) or the program's lifetime elapses (not activated).

    Raises StatusUnavailableError when status fetches keep failing for more
    than a second.
    """
    validator = InstructionValidator(program, rule_base, clock, poll_period=poll_period)
    while validator.outcome is None:
        now = clock.now()
        validator.check_deadline(now)
        if validator.outcome is not None:
            break
        try:
            status: VehicleStatus | None = status_source()
        except Exception:
            status = None
        validator.feed(now, status)
        if validator.outcome is not None:
            break
        clock.sleep(poll_period)
    return validator.outcome


@dataclass(frozen=True)
class LatencyStats:
    rounds: int
    max_ms: float
    mean_ms: float
    p99_ms: float


def bench_rule_matching(rule_base: RuleBase, probes: list[AutoIRProgram],
                        iterations: int, status: VehicleStatus | None = None) -> LatencyStats:
    """Measure search+match rounds against a fixed status.

    One round is search_rule plus (when a rule is found) match_conditions.
    GC is paused during measurement so the numbers reflect the matching
    path, not allocator housekeeping; no rules are allocated inside rounds.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not probes:
        raise ValueError("at least one probe program is required")
    if status is None:
        status = VehicleStatus(motion_state=MOTION_STOPPED, speed=0.0,
                               perceptions=frozenset({TAG_TRAFFIC_LIGHT}))
    samples_ns: list[int] = [0] * iterations
    n_probes = len(probes)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        perf = time.perf_counter_ns
        for i in range(iterations):
            probe = probes[i % n_probes]
            t0 = perf()
            rule = rule_base.lookup(probe.path)
            if rule is not None:
                match_conditions(rule, status)
            samples_ns[i] = perf() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    samples_ns.sort()
    total = sum(samples_ns)
    p99_index = min(iterations - 1, int(0.99 * (iterations - 1) + 0.999999))
    return LatencyStats(
        rounds=iterations,
        max_ms=samples_ns[-1] / 1e6,
        mean_ms=total / iterations / 1e6,
        p99_ms=samples_ns[p99_index] / 1e6,
    )
