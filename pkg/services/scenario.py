"""
Scenario - One manifest bundling sources, constraints, platform and SDK

A manifest is a `kind: Scenario` document whose `spec` names every input
file relative to the manifest. Loading only reads the manifest and checks
that the files exist; compiling runs the shared check pipeline that every
command starts from.
"""

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import yaml
from loguru import logger

from config.data import SEED_ENV, settings
from config.settings_constants import SOLVER_KEYS
from rdsl_core.constraints import API_VERSION, ConstraintSet, parse_constraints, resolve_references
from rdsl_core.elaborator import elaborate, expand_siblings
from rdsl_core.errors import RdslError, ScenarioError
from rdsl_core.frontend import Diagnostic, SourceUnit, parse_sources, validate_unit
from rdsl_core.graph import TaskGraph
from rdsl_core.platform import PlatformDesc, import_patterns_xml, parse_platform
from rdsl_core.schedule import Objective, ObjectiveKind, SolverConfig
from rdsl_core.sdk import SdkCatalog, parse_sdk_meta
from rdsl_core.symbols import SymbolTable, symbols_from_mapping
from utils.colors import Colors
from utils.functions import resolve_path

SCENARIO_KIND = "Scenario"
LIST_KEYS = ("sources", "constraints", "sdk")


class InvalidSources(RdslError):
    """Source validation found errors; the diagnostics say where."""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        first = diagnostics[0]
        super().__init__(f"{len(diagnostics)} error(s) in sources, first: {first.code}: {first.message}")


@dataclass(frozen=True)
class Scenario:
    path: Path
    name: str
    top: str
    sources: Tuple[Path, ...]
    constraints: Tuple[Path, ...]
    platform: Path
    sdk: Tuple[Path, ...]
    platform_patterns_xml: Optional[Path] = None
    symbols: Mapping[str, int] = field(default_factory=dict)
    symbols_origin: str = "manifest"
    arrivals: Mapping[str, int] = field(default_factory=dict)
    objective: Objective = Objective()
    solver: Mapping[str, object] = field(default_factory=dict)
    period_variable: str = "modem_period"


@dataclass(frozen=True)
class CompiledScenario:
    scenario: Scenario
    unit: SourceUnit
    symbols: SymbolTable
    platform: PlatformDesc
    catalog: SdkCatalog
    graph: TaskGraph
    constraints: ConstraintSet
    warnings: Tuple[Diagnostic, ...] = ()

    @property
    def objective(self) -> Objective:
        return self.scenario.objective


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(e.strerror or str(e), str(path)) from None


def _paths(manifest: Path, spec: dict, key: str) -> Tuple[Path, ...]:
    value = spec.get(key)
    if value is None:
        raise ScenarioError(f"spec.{key} is missing", str(manifest))
    values = value if isinstance(value, list) else [value]
    paths = tuple(resolve_path(manifest, str(v)) for v in values)
    for path in paths:
        if not path.is_file():
            raise ScenarioError(f"spec.{key} names a missing file '{path}'", str(manifest))
    return paths


def _int_map(value, what: str, manifest: Path) -> Dict[str, int]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError(f"{what} must be a mapping", str(manifest))
    result = {}
    for name, number in value.items():
        if isinstance(number, bool) or not isinstance(number, int):
            raise ScenarioError(f"{what}.{name} must be an integer, got {number!r}", str(manifest))
        result[str(name)] = number
    return result


def load_scenario(path) -> Scenario:
    """Read a manifest and check that every file it names exists."""
    manifest = Path(path)
    if not manifest.is_file():
        raise ScenarioError("manifest not found", str(manifest))
    try:
        doc = yaml.safe_load(_read(manifest))
    except yaml.YAMLError as e:
        raise ScenarioError(f"invalid YAML: {e}", str(manifest)) from None
    if not isinstance(doc, dict) or doc.get("kind") != SCENARIO_KIND:
        raise ScenarioError(f"expected a '{SCENARIO_KIND}' document", str(manifest))
    if str(doc.get("apiVersion", API_VERSION)) != API_VERSION:
        raise ScenarioError(f"unsupported apiVersion '{doc['apiVersion']}'", str(manifest))
    spec = doc.get("spec")
    if not isinstance(spec, dict):
        raise ScenarioError("spec is missing", str(manifest))
    top = spec.get("top")
    if not isinstance(top, str) or not top:
        raise ScenarioError("spec.top must name exactly one flow", str(manifest))

    symbols = spec.get("symbols")
    origin = "manifest"
    if isinstance(symbols, str):
        symbols_path = resolve_path(manifest, symbols)
        if not symbols_path.is_file():
            raise ScenarioError(f"spec.symbols names a missing file '{symbols_path}'", str(manifest))
        try:
            symbols = yaml.safe_load(_read(symbols_path))
        except yaml.YAMLError as e:
            raise ScenarioError(f"invalid YAML: {e}", str(symbols_path)) from None
        origin = symbols_path.name

    objective_doc = spec.get("objective") or {}
    try:
        objective = Objective(
            ObjectiveKind.parse(objective_doc.get("kind", ObjectiveKind.MIN_ACTIVE_PERIOD.value)),
            tuple(str(s) for s in objective_doc.get("sinks") or ()),
        )
    except RdslError as e:
        raise ScenarioError(str(e), str(manifest)) from None

    xml = spec.get("platform_patterns_xml")
    metadata = doc.get("metadata") or {}
    return Scenario(
        path=manifest,
        name=str(metadata.get("name", manifest.parent.name)),
        top=top,
        sources=_paths(manifest, spec, "sources"),
        constraints=_paths(manifest, spec, "constraints") if spec.get("constraints") else (),
        platform=_paths(manifest, spec, "platform")[0],
        sdk=_paths(manifest, spec, "sdk"),
        platform_patterns_xml=_paths(manifest, spec, "platform_patterns_xml")[0] if xml else None,
        symbols=_int_map(symbols, "spec.symbols", manifest),
        symbols_origin=origin,
        arrivals=_int_map(spec.get("arrivals"), "spec.arrivals", manifest),
        objective=objective,
        solver=dict(spec.get("solver") or {}),
        period_variable=str(spec.get("period_variable") or settings()["period_variable"]),
    )


def compile_scenario(scenario: Scenario, options: Optional[dict] = None) -> CompiledScenario:
    """Parse, validate, elaborate and resolve constraints.

    Raises the first RdslError found; validation errors come back together
    as InvalidSources.
    """
    options = settings(options)
    unit = parse_sources({str(p): _read(p) for p in scenario.sources})
    diagnostics = validate_unit(unit)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise InvalidSources(errors)
    warnings = tuple(d for d in diagnostics if d.severity != "error")
    for diagnostic in warnings:
        logger.warning(f"{Colors.WARNING}[CHECK] {diagnostic}{Colors.RESET}")

    symbols = symbols_from_mapping(scenario.symbols, scenario.symbols_origin)
    extra = import_patterns_xml(_read(scenario.platform_patterns_xml)) if scenario.platform_patterns_xml else ()
    platform = parse_platform(_read(scenario.platform), extra)
    metas = []
    for path in scenario.sdk:
        metas += parse_sdk_meta(_read(path), symbols, platform)
    catalog = SdkCatalog.ground(metas, symbols, int(options["guard_action_cost"]))

    graph = elaborate(unit, scenario.top, symbols, catalog, scenario.arrivals, int(options["max_call_depth"]))
    graph = expand_siblings(graph, platform)
    docs = []
    for path in scenario.constraints:
        docs += parse_constraints(_read(path))
    constraints = resolve_references(docs, symbols, graph.labels, scenario.period_variable)
    hyperperiod = constraints.hyperperiod()
    if hyperperiod is None:
        logger.warning(
            f"{Colors.WARNING}[CHECK] no value for '{scenario.period_variable}', the period is unbounded{Colors.RESET}"
        )
    graph = graph.with_hyperperiod(hyperperiod)
    if scenario.objective.sinks:
        graph.resolve_sinks(scenario.objective.sinks)
    logger.info(f"[CHECK] '{scenario.name}': {len(graph.tasks)} tasks, hyperperiod {hyperperiod}")
    return CompiledScenario(scenario, unit, symbols, platform, catalog, graph, constraints, warnings)


def seed_from_env() -> Optional[int]:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{SEED_ENV} must be an integer, got '{raw}'") from None


def solver_config(
    compiled: CompiledScenario,
    seed: Optional[int] = None,
    objective: Optional[ObjectiveKind] = None,
    options: Optional[dict] = None,
) -> SolverConfig:
    """Settings, then the manifest's solver section, then RDSLC_SEED, then flags."""
    manifest = {SOLVER_KEYS[k]: v for k, v in compiled.scenario.solver.items() if k in SOLVER_KEYS}
    unknown = sorted(set(compiled.scenario.solver) - set(SOLVER_KEYS))
    if unknown:
        logger.warning(f"{Colors.WARNING}[CHECK] ignoring solver keys: {', '.join(unknown)}{Colors.RESET}")
    merged = settings({**manifest, **(options or {})})
    env_seed = seed_from_env()
    if env_seed is not None:
        merged["solver_seed"] = env_seed
    if seed is not None:
        merged["solver_seed"] = seed
    target = compiled.objective
    if objective is not None and objective is not target.kind:
        target = replace(target, kind=objective)
    workers = merged["solver_workers"]
    try:
        return SolverConfig(
            seed=int(merged["solver_seed"]),
            restarts=int(merged["solver_restarts"]),
            iterations=int(merged["solver_iterations"]),
            initial_temperature=float(merged["solver_initial_temperature"]),
            cooling=float(merged["solver_cooling"]),
            time_budget=float(merged["solver_time_budget"]),
            workers=None if workers in (None, "", 0) else int(workers),
            objective=target,
        )
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"invalid solver setting: {e}", str(compiled.scenario.path)) from None
