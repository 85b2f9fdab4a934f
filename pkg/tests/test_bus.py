from __future__ import annotations

import random

import pytest

from flexlane.bus import (
    MessageBus,
    SchemaConflictError,
    SchemaMismatchError,
    TopicOverflowError,
    UnknownTopicError,
)


@pytest.fixture()
def bus():
    b = MessageBus()
    b.register_schema("any", lambda payload: True)
    b.register_schema("text", lambda payload: isinstance(payload, dict)
                      and isinstance(payload.get("text"), str))
    return b


def test_declare_and_redeclare(bus):
    decl = bus.declare_topic("/flex/user_instruction", "text", reliable=True)
    assert decl.reliable and decl.capacity == 16
    again = bus.declare_topic("/flex/user_instruction", "text", reliable=True)
    assert again == decl  # idempotent
    with pytest.raises(SchemaConflictError):
        bus.declare_topic("/flex/user_instruction", "any")


def test_invalid_topic_name(bus):
    for bad in ("no_slash", "/Upper", "/double//slash", "/trailing/"):
        with pytest.raises(Exception):
            bus.declare_topic(bad, "any")


def test_publish_order_and_seq(bus):
    bus.declare_topic("/sim/status", "any")
    sub = bus.subscribe("/sim/status")
    for i in range(3):
        bus.publish("/sim/status", {"i": i})
    received = sub.drain()
    assert [env.seq for env in received] == [1, 2, 3]
    assert [env.payload["i"] for env in received] == [0, 1, 2]


def test_unknown_topic(bus):
    with pytest.raises(UnknownTopicError):
        bus.publish("/nowhere", {})
    with pytest.raises(UnknownTopicError):
        bus.subscribe("/nowhere")


def test_schema_mismatch(bus):
    bus.declare_topic("/flex/user_instruction", "text", reliable=True)
    with pytest.raises(SchemaMismatchError):
        bus.publish("/flex/user_instruction", {"wrong": 1})


def test_two_publishers_interleaving_fifo(bus):
    # Oracle: whatever the interleaving, each subscriber sees every
    # publisher's messages in that publisher's own publish order.
    bus.declare_topic("/sim/mixed", "any")
    sub = bus.subscribe("/sim/mixed")
    rng = random.Random(7)
    sent = {"a": [], "b": []}
    for i in range(60):
        who = rng.choice(["a", "b"])
        bus.publish("/sim/mixed", {"n": i}, publisher=who)
        sent[who].append(i)
    got = {"a": [], "b": []}
    for env in sub.drain():
        got[env.publisher].append(env.payload["n"])
    assert got == sent


def test_overflow_drops_oldest_and_counts(bus):
    bus.declare_topic("/sim/fast", "any")
    sub = bus.subscribe("/sim/fast")
    for i in range(100):
        bus.publish("/sim/fast", {"i": i})
    assert sub.dropped == 36
    kept = [env.payload["i"] for env in sub.drain()]
    assert kept == list(range(36, 100))  # newest 64 retained


def test_reliable_topic_errors_on_overflow(bus):
    bus.declare_topic("/flex/user_instruction", "text", reliable=True)
    sub = bus.subscribe("/flex/user_instruction")
    for i in range(16):
        bus.publish("/flex/user_instruction", {"text": f"m{i}"})
    with pytest.raises(TopicOverflowError):
        bus.publish("/flex/user_instruction", {"text": "one too many"})
    assert len(sub.drain()) == 16  # nothing lost, nothing partial


def test_unsubscribe_leaves_publisher_unaffected(bus):
    bus.declare_topic("/sim/status", "any")
    sub = bus.subscribe("/sim/status")
    sub.unsubscribe()
    assert bus.publish("/sim/status", {"i": 1}) == 1


def test_cross_topic_isolation(bus):
    bus.declare_topic("/sim/a", "any")
    bus.declare_topic("/sim/b", "any")
    sub_a = bus.subscribe("/sim/a")
    sub_b = bus.subscribe("/sim/b")
    for i in range(100):  # overflow /sim/a only
        bus.publish("/sim/a", {"i": i})
    bus.publish("/sim/b", {"i": 0})
    assert sub_a.dropped == 36
    assert sub_b.dropped == 0 and len(sub_b.drain()) == 1


def test_jsonl_tap_dumps_envelopes(bus):
    import io
    import json as json_mod

    bus.declare_topic("/sim/status", "any")
    stream = io.StringIO()
    bus.attach_jsonl_tap(stream)
    bus.publish("/sim/status", {"i": 1}, publisher="sim")
    bus.publish("/sim/status", {"i": 2}, publisher="sim")
    lines = [json_mod.loads(line) for line in stream.getvalue().splitlines()]
    assert [doc["seq"] for doc in lines] == [1, 2]
    assert lines[0]["topic"] == "/sim/status"
    assert lines[0]["payload"] == {"i": 1}


def test_fifo_over_randomized_schedules():
    # Smaller sibling of the acceptance-level 1000-schedule sweep.
    for seed in range(50):
        rng = random.Random(seed)
        bus = MessageBus()
        bus.register_schema("any", lambda p: True)
        bus.declare_topic("/sim/x", "any", capacity=10_000)
        subs = [bus.subscribe("/sim/x") for _ in range(rng.randint(1, 3))]
        publishers = [f"p{i}" for i in range(rng.randint(1, 4))]
        sent = {p: [] for p in publishers}
        for i in range(rng.randint(1, 200)):
            who = rng.choice(publishers)
            bus.publish("/sim/x", {"n": i}, publisher=who)
            sent[who].append(i)
        for sub in subs:
            got = {p: [] for p in publishers}
            for env in sub.drain():
                got[env.publisher].append(env.payload["n"])
            assert got == sent
