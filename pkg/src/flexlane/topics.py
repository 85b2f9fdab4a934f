"""Topic names and payload schemas shared by the stack's components."""

from __future__ import annotations

from .bus import MessageBus

TOPIC_USER_INSTRUCTION = "/flex/user_instruction"
TOPIC_AUTOIR = "/flex/autoir"

TOPIC_MOTION_STATE = "/sim/api/motion/state"
TOPIC_VELOCITY = "/sim/vehicle/status/velocity_status"
TOPIC_OBJECTS = "/sim/perception/object_recognition/detection/objects"
TOPIC_TRAFFIC_ROIS = "/sim/perception/traffic_light_recognition/traffic_light/detection/rois"

STATUS_TOPICS = (TOPIC_MOTION_STATE, TOPIC_VELOCITY, TOPIC_OBJECTS, TOPIC_TRAFFIC_ROIS)


def _is_text_payload(payload) -> bool:
    return isinstance(payload, dict) and isinstance(payload.get("text"), str) and bool(payload["text"])


SCHEMAS = {
    "flex.utterance": _is_text_payload,
    "flex.autoir_text": _is_text_payload,
    "flex.motion_state": lambda p: isinstance(p, dict) and p.get("state") in ("Driving", "Stopped"),
    "flex.velocity": lambda p: isinstance(p, dict) and isinstance(p.get("speed"), (int, float)),
    "flex.objects": lambda p: isinstance(p, dict) and isinstance(p.get("objects"), list),
    "flex.traffic_rois": lambda p: isinstance(p, dict) and isinstance(p.get("rois"), list),
}


def register_schemas(bus: MessageBus) -> None:
    for schema_id, validator in SCHEMAS.items():
        bus.register_schema(schema_id, validator)


def declare_instruction_topics(bus: MessageBus) -> None:
    bus.declare_topic(TOPIC_USER_INSTRUCTION, "flex.utterance", reliable=True)
    bus.declare_topic(TOPIC_AUTOIR, "flex.autoir_text", reliable=True)


def declare_status_topics(bus: MessageBus) -> None:
    bus.declare_topic(TOPIC_MOTION_STATE, "flex.motion_state")
    bus.declare_topic(TOPIC_VELOCITY, "flex.velocity")
    bus.declare_topic(TOPIC_OBJECTS, "flex.objects")
    bus.declare_topic(TOPIC_TRAFFIC_ROIS, "flex.traffic_rois")
