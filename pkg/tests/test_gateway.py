from __future__ import annotations

import time

import pytest
from starlette.testclient import TestClient

from flexlane.gateway import create_app


@pytest.fixture()
def client():
    app = create_app(scenario="malfunctioning_traffic_light", tick_hz=100.0)
    with TestClient(app) as c:
        yield c


def wait_for_stage(client, request_id, stage, timeout=10.0):
    deadline = time.time() + timeout
    events = []
    while time.time() < deadline:
        events = client.get(f"/api/trace/{request_id}").json()["events"]
        if any(e["stage"] == stage for e in events):
            return events
        time.sleep(0.05)
    raise AssertionError(f"stage {stage!r} never appeared; saw "
                         f"{[e['stage'] for e in events]}")


class TestHttpSurface:
    def test_scenarios_listing(self, client):
        doc = client.get("/api/scenarios").json()
        assert "malfunctioning_traffic_light" in doc["scenarios"]
        assert doc["active"] == "malfunctioning_traffic_light"

    def test_world_geometry(self, client):
        doc = client.get("/api/world").json()
        assert doc["map"]["stop_lines"][0]["light"] == "TL1"
        assert doc["stage_index"]["relevance"] == 1

    def test_empty_instruction_is_400(self, client):
        response = client.post("/api/instruction", json={"text": "   "})
        assert response.status_code == 400
        assert response.json()["detail"][0]["path"] == "text"

    def test_malformed_body_is_400(self, client):
        response = client.post("/api/instruction", json={"nope": 1})
        assert response.status_code == 400

    def test_unknown_trace_is_404(self, client):
        assert client.get("/api/trace/req-9999").status_code == 404

    def test_scenario_switch_resets_world(self, client):
        response = client.post("/api/scenario", json={"name": "pedestrian_margin"})
        assert response.status_code == 200
        assert client.get("/api/scenarios").json()["active"] == "pedestrian_margin"
        assert client.post("/api/scenario", json={"name": "nope"}).status_code == 400


class TestInstructionFlow:
    def test_irrelevant_ends_at_verdict(self, client):
        response = client.post("/api/instruction", json={"text": "Tell me a joke."})
        events = response.json()["events"]
        stages = [e["stage"] for e in events]
        assert stages == ["injected", "relevance"]
        assert events[-1]["data"]["relevant"] is False

    def test_pedestrian_margin_round_trip(self, client):
        client.post("/api/scenario", json={"name": "pedestrian_margin"})
        response = client.post("/api/instruction",
                               json={"text": "Keep a larger distance from him"})
        assert response.status_code == 200
        request_id = response.json()["id"]
        events = wait_for_stage(client, request_id, "override")
        override = next(e for e in events if e["stage"] == "override")
        assert override["data"]["path"] == \
            "planning/behavior_velocity_planner_node/stop_margin"
        assert override["data"]["new"] == 3.0
        decision = next(e for e in events if e["stage"] == "decision")
        assert decision["data"]["activated"] is True

    def test_trace_indices_allow_client_side_reordering(self, client):
        client.post("/api/scenario", json={"name": "restricted_lane_cruising"})
        response = client.post("/api/instruction",
                               json={"text": "Try to change to the leftmost lane."})
        request_id = response.json()["id"]
        events = wait_for_stage(client, request_id, "decision")
        indices = [e["stage_index"] for e in events]
        assert indices == sorted(indices)


class TestStateFeed:
    def test_two_clients_receive_every_frame(self, client):
        with client.websocket_connect("/ws/state") as ws_a, \
                client.websocket_connect("/ws/state") as ws_b:
            frames_a = [ws_a.receive_json() for _ in range(20)]
            frames_b = [ws_b.receive_json() for _ in range(20)]
        for frames in (frames_a, frames_b):
            seqs = [f["seq"] for f in frames]
            assert seqs == list(range(seqs[0], seqs[0] + 20))  # gapless fan-out
        # overlapping window carries identical content for both clients
        common = set(f["seq"] for f in frames_a) & set(f["seq"] for f in frames_b)
        by_seq_a = {f["seq"]: f for f in frames_a}
        by_seq_b = {f["seq"]: f for f in frames_b}
        for seq in common:
            assert by_seq_a[seq] == by_seq_b[seq]

    def test_frames_carry_world_and_overrides(self, client):
        client.post("/api/scenario", json={"name": "restricted_lane_cruising"})
        response = client.post("/api/instruction",
                               json={"text": "Try to change to the leftmost lane."})
        wait_for_stage(client, response.json()["id"], "override")
        with client.websocket_connect("/ws/state") as ws:
            frame = ws.receive_json()
            assert frame["scenario"] == "restricted_lane_cruising"
            assert {"lane_id", "offset", "speed"} <= frame["vehicle"].keys()
            if frame["overrides"]:
                (entry,) = frame["overrides"]
                assert entry["path"] == "planning/mission_planner/lane_prefer"
                assert 0 <= entry["remaining"] <= 10.0

    def test_countdown_decreases(self, client):
        client.post("/api/scenario", json={"name": "restricted_lane_cruising"})
        response = client.post("/api/instruction",
                               json={"text": "Try to change to the leftmost lane."})
        wait_for_stage(client, response.json()["id"], "override")
        with client.websocket_connect("/ws/state") as ws:
            remaining = []
            while len(remaining) < 3:
                frame = ws.receive_json()
                if frame["overrides"]:
                    remaining.append(frame["overrides"][0]["remaining"])
        assert remaining[0] > remaining[-1]
