"""AutoIR: the structured instruction record and its textual form.

An AutoIR program names one stack parameter (module / node / param), the
value to assign, and how long the override lives. The canonical text form
is five `key: value` lines in fixed order:

    moduleSelect: perception
    nodeSelect: traffic_light_classifier_node
    paramSelect: use_flag
    configAction: FALSE
    Timer: 10

Key names are matched case-insensitively on parse; identifiers and values
keep their case. A JSON object with the same keys is accepted as an
alternate wire form. `Timer` may be omitted and defaults to 10 seconds.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .registry import ConfigValue, ParamDescriptor, ParamPath, ParamRegistry

DEFAULT_TIMER_S = 10.0

_IDENTIFIER_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_TOKEN_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

_FIELD_ORDER = ("moduleSelect", "nodeSelect", "paramSelect", "configAction", "Timer")
_FIELD_BY_LOWER = {name.lower(): name for name in _FIELD_ORDER}

ISSUE_UNKNOWN_MODULE = "UnknownModule"
ISSUE_UNKNOWN_NODE = "UnknownNode"
ISSUE_UNKNOWN_PARAM = "UnknownParam"
ISSUE_TYPE_MISMATCH = "TypeMismatch"
ISSUE_OUT_OF_RANGE = "OutOfRange"
ISSUE_BAD_TIMER = "BadTimer"


class AutoIRError(Exception):
    """Base class for AutoIR parsing and coercion failures."""


class AutoIRSyntaxError(AutoIRError):
    """The document is not a well-formed AutoIR text or object."""


class MissingFieldError(AutoIRError):
    def __init__(self, field_name: str):
        super().__init__(f"mandatory field {field_name} is missing")
        self.field_name = field_name


class BadValueError(AutoIRError):
    """A field value is outside its grammar (e.g. non-positive timer)."""


class TypeMismatchError(AutoIRError):
    """A raw value cannot be coerced to the descriptor's declared type."""


@dataclass(frozen=True)
class AutoIRProgram:
    """One parameter override: target path, value, and lifetime in seconds.

    Constructors (parse_autoir, the tests' builders) are responsible for the
    field invariants: lowercase identifiers and a positive timer.
    validate_program re-checks the timer so hand-built programs are caught.
    """

    module_select: str
    node_select: str
    param_select: str
    config_action: ConfigValue
    timer: float = DEFAULT_TIMER_S

    @property
    def path(self) -> ParamPath:
        return (self.module_select, self.node_select, self.param_select)


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[ValidationIssue, ...] = ()

    def codes(self) -> list[str]:
        return [issue.code for issue in self.issues]


def parse_autoir(text: str) -> AutoIRProgram:
    """Parse canonical text (or a JSON object) into an AutoIRProgram.

    Raises AutoIRSyntaxError for malformed documents, MissingFieldError when
    one of the four mandatory fields is absent, and BadValueError when the
    timer is not a positive number.
    """
    if not isinstance(text, str) or not text.strip():
        raise AutoIRSyntaxError("empty document")
    stripped = text.strip()
    if stripped.startswith("{"):
        fields = _fields_from_json(stripped)
    else:
        fields = _fields_from_lines(stripped)

    for name in ("moduleSelect", "nodeSelect", "paramSelect", "configAction"):
        if name not in fields:
            raise MissingFieldError(name)

    module = _require_identifier("moduleSelect", fields["moduleSelect"])
    node = _require_identifier("nodeSelect", fields["nodeSelect"])
    param = _require_identifier("paramSelect", fields["paramSelect"])
    action = _guess_config_value(fields["configAction"])
    timer = _parse_timer(fields.get("Timer"))
    return AutoIRProgram(module, node, param, action, timer)


def serialize_autoir(program: AutoIRProgram) -> str:
    """Render the canonical text form (fixed key order, one field per line)."""
    return "\n".join(
        [
            f"moduleSelect: {program.module_select}",
            f"nodeSelect: {program.node_select}",
            f"paramSelect: {program.param_select}",
            f"configAction: {_format_value(program.config_action)}",
            f"Timer: {_format_number(program.timer)}",
        ]
    )


def validate_program(program: AutoIRProgram, registry: ParamRegistry) -> ValidationReport:
    """Check a program against the registry; reports every violated constraint.

    Pure: identical inputs always produce identical reports. Unknown path
    components stop descent (an unknown module cannot have known nodes) but
    independent checks such as the timer are still reported.
    """
    issues: list[ValidationIssue] = []
    path = f"{program.module_select}/{program.node_select}/{program.param_select}"

    if not registry.has_module(program.module_select):
        issues.append(ValidationIssue(path, ISSUE_UNKNOWN_MODULE, f"unknown module {program.module_select!r}"))
    elif not registry.has_node(program.module_select, program.node_select):
        issues.append(ValidationIssue(path, ISSUE_UNKNOWN_NODE, f"unknown node {program.node_select!r}"))
    else:
        descriptor = registry.lookup(*program.path)
        if descriptor is None:
            issues.append(ValidationIssue(path, ISSUE_UNKNOWN_PARAM, f"unknown parameter {program.param_select!r}"))
        else:
            problem = descriptor.check(program.config_action)
            if problem is not None:
                code = descriptor.violation_code(program.config_action) or ISSUE_TYPE_MISMATCH
                issues.append(ValidationIssue(path, code, problem))

    if not isinstance(program.timer, (int, float)) or type(program.timer) is bool or not program.timer > 0:
        issues.append(ValidationIssue(path, ISSUE_BAD_TIMER, f"timer must be positive, got {program.timer!r}"))

    return ValidationReport(ok=not issues, issues=tuple(issues))


def coerce_config_value(raw: str, descriptor: ParamDescriptor) -> ConfigValue:
    """Coerce raw text into the descriptor's declared type.

    TRUE/FALSE (any case) become booleans, decimal literals become numbers,
    anything else is matched against the enum token set. Raises
    TypeMismatchError when the text cannot be coerced.
    """
    text = raw.strip()
    if descriptor.value_type == "boolean":
        if text.upper() == "TRUE":
            return True
        if text.upper() == "FALSE":
            return False
        raise TypeMismatchError(f"{raw!r} is not a boolean literal")
    if descriptor.value_type == "number":
        if _NUMBER_RE.match(text):
            return float(text)
        raise TypeMismatchError(f"{raw!r} is not a numeric literal")
    if descriptor.value_type == "enum":
        if text in descriptor.tokens:
            return text
        raise TypeMismatchError(f"{raw!r} is not one of {sorted(descriptor.tokens)}")
    raise TypeMismatchError(f"descriptor has unknown type {descriptor.value_type!r}")


def _fields_from_lines(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise AutoIRSyntaxError(f"line {lineno}: expected 'key: value', got {line.strip()!r}")
        canonical = _FIELD_BY_LOWER.get(key.strip().lower())
        if canonical is None:
            raise AutoIRSyntaxError(f"line {lineno}: unknown key {key.strip()!r}")
        if canonical in fields:
            raise AutoIRSyntaxError(f"line {lineno}: duplicate key {canonical}")
        fields[canonical] = value.strip()
    return fields


def _fields_from_json(text: str) -> dict[str, object]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AutoIRSyntaxError(f"invalid JSON object form: {exc}") from exc
    if not isinstance(doc, dict):
        raise AutoIRSyntaxError("JSON form must be an object")
    fields: dict[str, object] = {}
    for key, value in doc.items():
        canonical = _FIELD_BY_LOWER.get(str(key).strip().lower())
        if canonical is None:
            raise AutoIRSyntaxError(f"unknown key {key!r}")
        if canonical in fields:
            raise AutoIRSyntaxError(f"duplicate key {canonical}")
        fields[canonical] = value
    return fields


def _require_identifier(field_name: str, value: object) -> str:
    if not isinstance(value, str):
        raise AutoIRSyntaxError(f"{field_name} must be text, got {type(value).__name__}")
    ident = value.strip()
    if not _IDENTIFIER_RE.match(ident):
        raise AutoIRSyntaxError(f"{field_name} {ident!r} is not a lowercase identifier")
    return ident


def _guess_config_value(value: object) -> ConfigValue:
    """Registry-free typing of a configAction literal (validated later)."""
    if type(value) is bool:
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if text.upper() == "TRUE":
            return True
        if text.upper() == "FALSE":
            return False
        if _NUMBER_RE.match(text):
            return float(text)
        if _TOKEN_RE.match(text):
            return text
        raise AutoIRSyntaxError(f"configAction {value!r} is neither boolean, number, nor token")
    raise AutoIRSyntaxError(f"configAction has unsupported type {type(value).__name__}")


def _parse_timer(value: object | None) -> float:
    if value is None or (isinstance(value, str) and not value.strip()):
        return DEFAULT_TIMER_S
    if type(value) is bool:
        raise BadValueError(f"Timer must be a positive number, got {value!r}")
    if isinstance(value, (int, float)):
        timer = float(value)
    elif isinstance(value, str) and _NUMBER_RE.match(value.strip()):
        timer = float(value.strip())
    else:
        raise BadValueError(f"Timer must be a positive number, got {value!r}")
    if not timer > 0:
        raise BadValueError(f"Timer must be positive, got {timer}")
    return timer


def _format_value(value: ConfigValue) -> str:
    if type(value) is bool:
        return "TRUE" if value else "FALSE"
    if isinstance(value, (int, float)):
        return _format_number(float(value))
    return str(value)


def _format_number(value: float) -> str:
    # Shortest decimal that round-trips: integral floats drop the point.
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
