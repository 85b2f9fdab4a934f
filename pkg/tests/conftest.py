from __future__ import annotations

import pytest

from flexlane.assets import shipped_kb_index, shipped_rule_base
from flexlane.autoir import AutoIRProgram
from flexlane.clock import ScriptedClock
from flexlane.registry import shipped_registry


@pytest.fixture(scope="session")
def registry():
    return shipped_registry()


@pytest.fixture()
def rule_base():
    return shipped_rule_base()


@pytest.fixture(scope="session")
def kb_index():
    return shipped_kb_index()


@pytest.fixture()
def clock():
    return ScriptedClock()


def make_program(module="perception", node="traffic_light_classifier_node",
                 param="use_flag", action=False, timer=10.0) -> AutoIRProgram:
    return AutoIRProgram(module, node, param, action, timer)


TRAFFIC_LIGHT_PROGRAM_TEXT = """\
moduleSelect: perception
nodeSelect: traffic_light_classifier_node
paramSelect: use_flag
configAction: FALSE
Timer: 10"""

LANE_PREFER_PROGRAM_TEXT = """\
moduleSelect: planning
nodeSelect: mission_planner
paramSelect: lane_prefer
configAction: LEFT
Timer: 10"""
