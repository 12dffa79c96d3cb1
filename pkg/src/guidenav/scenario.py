"""Declarative scenarios: load, validate, run, and report.

A scenario file is one JSON object describing map, stores, starting pose,
scripted user input, fault injections, objects, preferences, gateway mode,
ablation toggles, and (optionally) expected outcomes.  Runs are
deterministic per (spec, seed): the transcript of two identical runs is
byte-identical.  Suites aggregate per-scenario and overall rates into a
machine-readable report plus a fixed-format text table (navigation
success, localization error detection/recovery, hazard confusion cells).
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

from .agent import SessionPrefs
from .engine import EngineError, GuidanceSession
from .gateway import ConfusionConfig, GatewayError, MockGateway, RemoteConfig, RemoteGateway
from .simulator import Kidnap, Pose, SimWorld, WorldObject, build_environment_store
from .topomap import TopoMap, load_map
from .vector_store import DEFAULT_DIM, load_store


class ScenarioError(ValueError):
    pass


class KidnapSpec(BaseModel):
    kind: Literal["kidnap"] = "kidnap"
    trigger_leg: int = Field(ge=1)
    teleport_to: str
    new_heading: int = 0


class NoiseSpec(BaseModel):
    kind: Literal["noise"] = "noise"
    sigma: float = Field(ge=0.0)


FaultSpec = Union[KidnapSpec, NoiseSpec]


class ObjectSpec(BaseModel):
    label: str
    edge: tuple[str, str]
    hazardous: bool


class ScriptStep(BaseModel):
    say: Optional[str] = None
    decide: Optional[Literal["proceed", "reroute"]] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.say is None) == (self.decide is None):
            raise ValueError("each script step needs exactly one of 'say' or 'decide'")
        return self


class StoreSpec(BaseModel):
    path: Optional[str] = None
    sigma: float = Field(default=0.0, ge=0.0)


class PrefsSpec(BaseModel):
    avoid_tags: list[str] = Field(default_factory=list)
    speed_mps: float = 1.0
    verbosity: Literal["brief", "detailed"] = "brief"
    arrival_threshold: float = 0.85
    reloc_threshold: float = 0.80

    def to_prefs(self) -> SessionPrefs:
        return SessionPrefs(
            avoid_tags=frozenset(self.avoid_tags),
            speed_mps=self.speed_mps,
            verbosity=self.verbosity,
            arrival_threshold=self.arrival_threshold,
            reloc_threshold=self.reloc_threshold,
        )


class AblationSpec(BaseModel):
    no_system_prompt: bool = False
    no_planner: bool = False


class ConfusionSpec(BaseModel):
    fp: float = Field(default=0.0, ge=0.0, le=1.0)
    fn: float = Field(default=0.0, ge=0.0, le=1.0)


class ExpectedSpec(BaseModel):
    goal_node: Optional[str] = None
    should_detect_kidnap: Optional[bool] = None
    should_recover: Optional[bool] = None
    hazard_ground_truth: Optional[bool] = None


class ScenarioSpec(BaseModel):
    name: str
    map_path: str
    store: StoreSpec = StoreSpec()
    start_node: str
    start_heading: int = 0
    script: list[ScriptStep] = Field(default_factory=list)
    faults: list[FaultSpec] = Field(default_factory=list)
    objects: list[ObjectSpec] = Field(default_factory=list)
    aliases: dict[str, str] = Field(default_factory=dict)
    prefs: PrefsSpec = PrefsSpec()
    gateway: Literal["mock", "remote"] = "mock"
    confusion: Optional[ConfusionSpec] = None
    ablations: AblationSpec = AblationSpec()
    expected: Optional[ExpectedSpec] = None
    dim: int = DEFAULT_DIM

    @model_validator(mode="after")
    def _heading_quantized(self):
        if self.start_heading not in (0, 90, 180, 270):
            raise ValueError("start_heading must be one of 0/90/180/270")
        return self


class RunReport(BaseModel):
    scenario: str
    seed: int
    skipped: bool = False
    skip_reason: Optional[str] = None
    success: bool = False
    detected_kidnap: Optional[bool] = None
    recovered: Optional[bool] = None
    confusion: Optional[dict[str, int]] = None
    route_length: float = 0.0
    expectation_failures: list[str] = Field(default_factory=list)
    transcript: list[dict] = Field(default_factory=list)

    def passed(self) -> bool:
        return self.skipped or not self.expectation_failures


class SuiteReport(BaseModel):
    reports: list[RunReport]
    text: str
    metrics: dict

    def passed(self) -> bool:
        return all(report.passed() for report in self.reports)


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from None
    try:
        return ScenarioSpec.model_validate(data)
    except Exception as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def resolve_map_path(map_path: str, base_dir: Path | None = None) -> TopoMap:
    """Load a map by path; ``builtin:<name>`` resolves packaged fixtures."""
    if map_path.startswith("builtin:"):
        name = map_path.split(":", 1)[1]
        ref = resources.files("guidenav").joinpath("fixtures", "maps", f"{name}.map")
        if not ref.is_file():
            raise ScenarioError(f"unknown builtin map {name!r}")
        from .topomap import parse_map

        return parse_map(ref.read_text(encoding="utf-8"), name=name)
    path = Path(map_path)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise ScenarioError(f"map file not found: {path}")
    return load_map(path)


def _build_gateway(spec: ScenarioSpec, seed: int):
    if spec.gateway == "remote":
        config = RemoteConfig.from_env()
        return RemoteGateway(config)
    confusion = None
    if spec.confusion is not None:
        confusion = ConfusionConfig(fp=spec.confusion.fp, fn=spec.confusion.fn, seed=seed)
    return MockGateway(confusion=confusion)


def run_scenario(spec: ScenarioSpec, seed: int, base_dir: Path | None = None) -> RunReport:
    """Execute one scenario deterministically and check its expectations."""
    if spec.ablations.no_system_prompt and spec.gateway == "mock":
        return RunReport(
            scenario=spec.name,
            seed=seed,
            skipped=True,
            skip_reason="no_system_prompt is a remote-only ablation; the mock gateway does not consume the prompt",
        )
    try:
        gateway = _build_gateway(spec, seed)
    except GatewayError as exc:
        return RunReport(scenario=spec.name, seed=seed, skipped=True, skip_reason=str(exc))

    topo = resolve_map_path(spec.map_path, base_dir)
    if spec.start_node not in topo.nodes:
        raise ScenarioError(f"start node {spec.start_node!r} is not on map {topo.name!r}")
    for alias_from, alias_to in spec.aliases.items():
        for node in (alias_from, alias_to):
            if node not in topo.nodes:
                raise ScenarioError(f"alias references unknown node {node!r}")

    sigma = 0.0
    kidnaps = []
    for fault in spec.faults:
        if isinstance(fault, NoiseSpec):
            sigma = fault.sigma
        else:
            kidnaps.append(Kidnap(fault.trigger_leg, fault.teleport_to, fault.new_heading))

    if spec.store.path is not None:
        store_path = Path(spec.store.path)
        if not store_path.is_absolute() and base_dir is not None:
            store_path = base_dir / store_path
        env_store = load_store(store_path)
    else:
        env_store = build_environment_store(
            topo, dim=spec.dim, sigma=spec.store.sigma, aliases=spec.aliases, seed=seed
        )

    world = SimWorld(
        topo=topo,
        pose=Pose(spec.start_node, spec.start_heading),
        objects=[WorldObject(o.label, o.edge, o.hazardous) for o in spec.objects],
        kidnaps=kidnaps,
        sigma=sigma,
        seed=seed,
        aliases=dict(spec.aliases),
        dim=spec.dim,
    )
    session = GuidanceSession(
        topo=topo,
        env_store=env_store,
        gateway=gateway,
        world=world,
        prefs=spec.prefs.to_prefs(),
        no_planner=spec.ablations.no_planner,
    )

    notes: list[str] = []
    for step in spec.script:
        if session.closed:
            notes.append("script continued after the session closed")
            break
        if step.say is not None:
            session.post_utterance(step.say)
        else:
            prompt_id = session.open_prompt()
            if prompt_id is None:
                notes.append(f"decision {step.decide!r} arrived with no open prompt")
                continue
            try:
                session.post_decision(prompt_id, step.decide)
            except EngineError as exc:  # pragma: no cover - guarded above
                notes.append(str(exc))

    return _build_report(spec, seed, session, notes)


def _build_report(spec: ScenarioSpec, seed: int, session: GuidanceSession, notes: list[str]) -> RunReport:
    results = [e for e in session.log if e["type"] == "session_result"]
    success = bool(results) and results[-1]["data"]["success"]
    if spec.expected is not None and spec.expected.goal_node is not None:
        success = success and session.world.pose.node == spec.expected.goal_node

    has_kidnap = any(isinstance(f, KidnapSpec) for f in spec.faults)
    detected = None
    recovered = None
    if has_kidnap:
        detected = any(
            e["type"] == "phase_change" and e["data"]["phase"] == "recovering" for e in session.log
        )
        recovered = (
            any(e["type"] == "recovery" and e["data"].get("matches_truth", False) for e in session.log)
            and success
        )

    confusion = None
    if session.hazard_trials:
        confusion = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
        for trial in session.hazard_trials:
            if trial.ground_truth and trial.verdict_hazardous:
                confusion["tp"] += 1
            elif trial.ground_truth:
                confusion["fn"] += 1
            elif trial.verdict_hazardous:
                confusion["fp"] += 1
            else:
                confusion["tn"] += 1

    failures = list(notes)
    expected = spec.expected
    if expected is not None:
        if expected.goal_node is not None:
            if session.world.pose.node != expected.goal_node:
                failures.append(
                    f"expected to end at {expected.goal_node}, ended at {session.world.pose.node}"
                )
            if not success:
                failures.append("expected a successful arrival; the session did not succeed")
        if expected.should_detect_kidnap is not None and detected != expected.should_detect_kidnap:
            failures.append(f"expected detect_kidnap={expected.should_detect_kidnap}, observed {detected}")
        if expected.should_recover is not None and recovered != expected.should_recover:
            failures.append(f"expected recover={expected.should_recover}, observed {recovered}")
        if expected.hazard_ground_truth is not None:
            gts = {trial.ground_truth for trial in session.hazard_trials}
            if gts != {expected.hazard_ground_truth}:
                failures.append(
                    f"expected hazard ground truth {expected.hazard_ground_truth}, observed trials {sorted(gts)}"
                )

    return RunReport(
        scenario=spec.name,
        seed=seed,
        success=success,
        detected_kidnap=detected,
        recovered=recovered,
        confusion=confusion,
        route_length=session.world.odometer,
        expectation_failures=failures,
        transcript=session.log,
    )


def run_suite(directory, repetitions: int = 1, seed_base: int = 0) -> SuiteReport:
    """Run every ``*.json`` scenario in a directory ``repetitions`` times.

    The run seed for scenario index ``i``, repetition ``r`` is
    ``seed_base + 1000 * i + r`` so scenarios draw decorrelated streams
    while staying exactly reproducible.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise ScenarioError(f"no scenario files (*.json) found in {directory}")
    if repetitions < 1:
        raise ScenarioError("repetitions must be >= 1")
    reports = []
    for index, path in enumerate(paths):
        spec = load_scenario(path)
        for rep in range(repetitions):
            seed = seed_base + 1000 * index + rep
            reports.append(run_scenario(spec, seed, base_dir=path.parent))
    text, metrics = report_metrics(reports)
    return SuiteReport(reports=reports, text=text, metrics=metrics)


def _pct(numerator: int, denominator: int) -> str:
    if denominator == 0:
        return "n/a"
    return f"{numerator}/{denominator} ({100.0 * numerator / denominator:.1f}%)"


def report_metrics(reports: list[RunReport]) -> tuple[str, dict]:
    """Aggregate run reports into a text table and a metrics dict.

    Aggregation is order-independent: counts are summed and rows are
    sorted by scenario name.
    """
    active = [r for r in reports if not r.skipped]
    skipped = [r for r in reports if r.skipped]

    by_scenario: dict[str, list[RunReport]] = {}
    for report in active:
        by_scenario.setdefault(report.scenario, []).append(report)

    nav_lines = []
    total_runs = 0
    total_success = 0
    for name in sorted(by_scenario):
        runs = by_scenario[name]
        successes = sum(1 for r in runs if r.success)
        total_runs += len(runs)
        total_success += successes
        nav_lines.append(f"  {name}  {_pct(successes, len(runs))}")

    kidnap_runs = [r for r in active if r.detected_kidnap is not None]
    detected = sum(1 for r in kidnap_runs if r.detected_kidnap)
    recovered = sum(1 for r in kidnap_runs if r.recovered)

    cells = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    hazard_trials = 0
    for report in active:
        if report.confusion:
            for key in cells:
                cells[key] += report.confusion[key]
            hazard_trials += sum(report.confusion.values())
    potential = cells["tp"] + cells["fn"]
    non_potential = cells["fp"] + cells["tn"]

    lines = ["== Navigation success =="]
    lines.extend(nav_lines)
    lines.append(f"  TOTAL  {_pct(total_success, total_runs)}")
    lines.append("")
    lines.append("== Localization errors ==")
    lines.append(f"  detection  {_pct(detected, len(kidnap_runs))}")
    lines.append(f"  recovery   {_pct(recovered, len(kidnap_runs))}")
    lines.append("")
    lines.append("== Hazard detection ==")
    lines.append("  scenario_class        trials  TP  FP  FN  TN")
    lines.append(
        f"  potential_hazard      {potential:>6}  {cells['tp']:>2}   0  {cells['fn']:>2}   0"
    )
    lines.append(
        f"  non_potential_hazard  {non_potential:>6}   0  {cells['fp']:>2}   0  {cells['tn']:>2}"
    )
    lines.append(
        f"  total                 {hazard_trials:>6}  {cells['tp']:>2}  {cells['fp']:>2}  {cells['fn']:>2}  {cells['tn']:>2}"
    )
    if skipped:
        lines.append("")
        lines.append("== Skipped ==")
        for report in sorted(skipped, key=lambda r: (r.scenario, r.seed)):
            lines.append(f"  {report.scenario}  {report.skip_reason}")
    text = "\n".join(lines) + "\n"

    metrics = {
        "navigation": {
            "runs": total_runs,
            "successes": total_success,
            "per_scenario": {
                name: {
                    "runs": len(runs),
                    "successes": sum(1 for r in runs if r.success),
                }
                for name, runs in sorted(by_scenario.items())
            },
        },
        "localization": {
            "runs": len(kidnap_runs),
            "detected": detected,
            "recovered": recovered,
        },
        "hazard": {
            "trials": hazard_trials,
            "potential_trials": potential,
            "non_potential_trials": non_potential,
            **cells,
        },
        "skipped": len(skipped),
    }
    return text, metrics


def transcript_bytes(report: RunReport) -> bytes:
    """Canonical transcript serialization used by determinism checks."""
    return json.dumps(report.transcript, sort_keys=True, separators=(",", ":")).encode("utf-8")
