"""flexlane: a human-instructable, dynamically reconfigurable driving-stack
sandbox.

Natural-language utterances are gated for driving relevance, translated into
structured parameter-override programs via retrieval over a curated
knowledge base, checked against a safety rule base and live vehicle status,
and applied as timer-scoped overrides on a deterministic lane-graph
simulator that restores the original values when the timer expires.
"""

__version__ = "0.1.0"
