"""flexlane command line: run scenarios, evaluate translation, bench rules,
draft rules from simulation, and serve the live gateway.

Exit codes: 0 success, 2 scenario predicates unmet, 3 bad input.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import harness
from .assets import golden_dataset_path
from .sim.scenarios import BadScriptError, UnknownScenarioError, scenario_names

EXIT_SCENARIO_FAILED = 2
EXIT_INPUT_ERROR = 3


def _fail_input(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_INPUT_ERROR)


@click.group()
def main() -> None:
    """Human-instructable driving-stack sandbox."""


@main.command()
@click.argument("scenario")
@click.option("--instruction", default=None, help="Utterance to inject at the scripted point.")
@click.option("--provider", default="mock", show_default=True, type=click.Choice(["mock", "http"]))
@click.option("--horizon", default=None, type=float, help="Override the scenario horizon (s).")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Write the transcript JSON here.")
def run(scenario: str, instruction: str | None, provider: str,
        horizon: float | None, out: str | None) -> None:
    """Run SCENARIO (built-in name or script file) and report the outcome."""
    try:
        transcript = harness.run_scenario(scenario, instruction=instruction,
                                          provider=provider, horizon=horizon)
    except (UnknownScenarioError, BadScriptError, harness.InputError) as exc:
        _fail_input(str(exc))
        return
    if out:
        transcript.write(out)
    click.echo(f"scenario: {transcript.scenario}")
    click.echo(f"instruction: {transcript.instruction or '(none)'}")
    if transcript.program_text:
        click.echo("autoir:")
        for line in transcript.program_text.splitlines():
            click.echo(f"  {line}")
    for check in transcript.outcome["checks"]:
        mark = "ok" if check["ok"] else "FAIL"
        click.echo(f"  [{mark}] {check['name']} value={check['value']}")
    click.echo(f"success: {transcript.success}  (wall {transcript.wall_seconds:.2f}s)")
    if not transcript.success:
        sys.exit(EXIT_SCENARIO_FAILED)


@main.command("eval")
@click.option("--dataset", default=None, type=click.Path(dir_okay=False),
              help="Golden dataset (JSONL); defaults to the shipped one.")
@click.option("--kb", default="curated", show_default=True,
              help="'curated', 'manual', or a path to a KB directory / manual file.")
@click.option("--provider", default="mock", show_default=True, type=click.Choice(["mock", "http"]))
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Write the report JSON here.")
def eval_cmd(dataset: str | None, kb: str, provider: str, out: str | None) -> None:
    """Per-field translation accuracy against the golden dataset."""
    dataset_path = Path(dataset) if dataset else golden_dataset_path()
    try:
        report = harness.evaluate_dataset(dataset_path, kb=kb, provider=provider)
    except harness.InputError as exc:
        _fail_input(str(exc))
        return
    doc = report.to_dict()
    for key, value in doc.items():
        click.echo(f"{key}: {value}")
    if out:
        Path(out).write_text(json.dumps(doc, indent=2), encoding="utf-8")


@main.command()
@click.option("--rules", default=50, show_default=True, type=int)
@click.option("--rounds", default=100_000, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def bench(rules: int, rounds: int, out: str | None) -> None:
    """Rule search + condition matching latency."""
    try:
        stats = harness.bench(rules=rules, rounds=rounds)
    except harness.InputError as exc:
        _fail_input(str(exc))
        return
    doc = {"rules": rules, "rounds": stats.rounds, "max_ms": stats.max_ms,
           "mean_ms": stats.mean_ms, "p99_ms": stats.p99_ms}
    for key, value in doc.items():
        click.echo(f"{key}: {value}")
    if out:
        Path(out).write_text(json.dumps(doc, indent=2), encoding="utf-8")


@main.command("record-rule")
@click.argument("scenario")
@click.argument("autoir_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
def record_rule(scenario: str, autoir_file: str, out: str) -> None:
    """Draft a rule from the vehicle status at SCENARIO's injection point."""
    try:
        draft = harness.record_rule(scenario, autoir_file, out)
    except (UnknownScenarioError, BadScriptError, harness.InputError) as exc:
        _fail_input(str(exc))
        return
    except harness.InjectionNeverReachedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SCENARIO_FAILED)
        return
    click.echo(json.dumps(draft, indent=2))


@main.command()
@click.option("--port", default=8700, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--scenario", default="malfunctioning_traffic_light", show_default=True)
@click.option("--provider", default="mock", show_default=True, type=click.Choice(["mock", "http"]))
@click.option("--tick-hz", default=10.0, show_default=True, type=float,
              help="Driver rate; each tick advances the world by 0.1 s.")
@click.option("--static", "static_dir", default=None, type=click.Path(file_okay=False),
              help="Serve a built web console from this directory.")
def serve(port: int, host: str, scenario: str, provider: str,
          tick_hz: float, static_dir: str | None) -> None:
    """Serve the live state/instruction gateway (and optionally the console)."""
    import uvicorn

    from .gateway import create_app

    if scenario not in scenario_names():
        _fail_input(f"unknown scenario {scenario!r}; available: {', '.join(scenario_names())}")
        return
    if tick_hz <= 0:
        _fail_input("tick-hz must be positive")
        return
    app = create_app(scenario=scenario, provider=provider, tick_hz=tick_hz,
                     static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
