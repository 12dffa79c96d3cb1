"""Command line entry points: validate maps, run scenarios and suites, serve.

The scenario commands run the deterministic pipeline in-process; ``serve``
hosts the session service (and the web console, when its build output is
found) for interactive clients.  Exit code 0 means every expectation in
the executed scenarios held.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .scenario import (
    ScenarioError,
    load_scenario,
    report_metrics,
    run_scenario,
    run_suite,
)
from .topomap import MapError, load_map, reverse_edge_warnings, validate_geometry


@click.group()
def main():
    """Assisted-navigation toolkit: maps, scenario runs, suites, service."""


@main.group("map")
def map_group():
    """Map file utilities."""


@map_group.command("validate")
@click.argument("map_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--tol", default=1e-6, show_default=True, help="Relative geometric tolerance.")
def map_validate(map_file: Path, tol: float):
    """Check MAP v1 syntax and geometric consistency."""
    try:
        topo = load_map(map_file)
    except MapError as exc:
        click.echo(f"PARSE ERROR: {exc}", err=True)
        sys.exit(1)
    violations = validate_geometry(topo, rel_tol=tol)
    warnings = reverse_edge_warnings(topo)
    for warning in warnings:
        click.echo(f"warning: {warning}")
    if violations:
        for violation in violations:
            click.echo(f"VIOLATION: {violation.describe()}", err=True)
        click.echo(f"{map_file}: {len(violations)} geometric violation(s)", err=True)
        sys.exit(1)
    click.echo(
        f"{map_file}: OK ({len(topo.nodes)} nodes, {len(topo.edges)} edges"
        + (f", {len(warnings)} warning(s)" if warnings else "")
        + ")"
    )


@main.command("run")
@click.option("--scenario", "scenario_file", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--report", "report_file", type=click.Path(dir_okay=False, path_type=Path), help="Write the full run report (JSON).")
@click.option("--transcript/--no-transcript", default=False, help="Print the transcript to stdout.")
def run_cmd(scenario_file: Path, seed: int, report_file: Path | None, transcript: bool):
    """Run one scenario file with one seed."""
    try:
        spec = load_scenario(scenario_file)
        report = run_scenario(spec, seed, base_dir=scenario_file.parent)
    except ScenarioError as exc:
        click.echo(f"ERROR: {exc}", err=True)
        sys.exit(2)
    if report.skipped:
        click.echo(f"SKIPPED: {report.skip_reason}")
        sys.exit(0)
    if transcript:
        for entry in report.transcript:
            click.echo(json.dumps(entry, sort_keys=True))
    click.echo(f"scenario {report.scenario} seed {seed}: success={report.success}")
    if report.detected_kidnap is not None:
        click.echo(f"  detected_kidnap={report.detected_kidnap} recovered={report.recovered}")
    if report.confusion is not None:
        click.echo(f"  hazard confusion: {report.confusion}")
    click.echo(f"  route_length={report.route_length:g} m")
    if report_file is not None:
        report_file.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        click.echo(f"report written to {report_file}")
    if report.expectation_failures:
        for failure in report.expectation_failures:
            click.echo(f"EXPECTATION FAILED: {failure}", err=True)
        sys.exit(1)


@main.command("suite")
@click.option("--dir", "directory", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--reps", default=1, show_default=True, type=int)
@click.option("--seed-base", default=0, show_default=True, type=int)
@click.option("--report", "report_file", type=click.Path(dir_okay=False, path_type=Path), help="Write the machine-readable suite report (JSON).")
def suite_cmd(directory: Path, reps: int, seed_base: int, report_file: Path | None):
    """Run every scenario in a directory and print the metrics tables."""
    try:
        suite = run_suite(directory, repetitions=reps, seed_base=seed_base)
    except ScenarioError as exc:
        click.echo(f"ERROR: {exc}", err=True)
        sys.exit(2)
    click.echo(suite.text, nl=False)
    if report_file is not None:
        payload = {
            "metrics": suite.metrics,
            "runs": [r.model_dump(exclude={"transcript"}) for r in suite.reports],
        }
        report_file.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"report written to {report_file}")
    if not suite.passed():
        failures = [
            f"{r.scenario} (seed {r.seed}): {'; '.join(r.expectation_failures)}"
            for r in suite.reports
            if not r.passed()
        ]
        for failure in failures:
            click.echo(f"EXPECTATION FAILED: {failure}", err=True)
        sys.exit(1)


@main.command("serve")
@click.option("--map", "map_files", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--store", "store_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Pre-built environment store for the first map.")
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--gateway", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--console", "console_dir", type=click.Path(file_okay=False, path_type=Path), help="Directory with the built web console (served at /).")
def serve_cmd(map_files, store_file, port, host, gateway, console_dir):
    """Host the session service (and console) over HTTP."""
    import uvicorn

    from .service import create_app
    from .vector_store import load_store

    maps = {}
    for map_file in map_files:
        topo = load_map(map_file)
        maps[topo.name] = topo
    env_stores = {}
    if store_file is not None:
        first = load_map(map_files[0])
        env_stores[first.name] = load_store(store_file)
    if console_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console_dir = candidate if candidate.is_dir() else None
    app = create_app(maps, gateway_mode=gateway, static_dir=console_dir, env_stores=env_stores)
    click.echo(f"serving maps {sorted(maps)} on http://{host}:{port} (gateway: {gateway})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
