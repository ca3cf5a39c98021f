import argparse
import sys
from pathlib import Path

import setproctitle
from loguru import logger

from config.data import APP_NAME, LOG_LEVEL, TOOL_VERSION, VERIFY_PERIODS, VERIFY_SEEDS
from modules.comparison import emit_comparison, serialize_comparison
from modules.gantt import GanttFormat, emit_gantt, occupancy_track
from modules.schedule_config import emit_schedule_config, parse_schedule_config
from rdsl_core.errors import Infeasible, RdslError, ScenarioError, ScheduleMismatch
from rdsl_core.schedule import ObjectiveKind
from rdsl_core.scheduler import baseline_schedule, solve
from rdsl_core.verifier import reconcile, serialize_report, simulate_timeline, verify
from services.scenario import InvalidSources, compile_scenario, load_scenario, solver_config
from utils.colors import plain_output
from utils.functions import OutputError, key_values, strip_ansi, write_outputs

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


def setup_logging(verbose: bool = False) -> None:
    logger.remove()
    level = "DEBUG" if verbose else LOG_LEVEL
    if plain_output():
        logger.add(lambda message: sys.stderr.write(strip_ansi(message)), level=level, format="{level}: {message}")
    else:
        logger.add(sys.stderr, level=level, format="<level>{level}</level>: {message}")


def emit(pairs: dict) -> None:
    sys.stdout.write(key_values(pairs))


def _compile(args):
    return compile_scenario(load_scenario(args.scenario))


def _read_schedule(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(e.strerror or str(e), path) from None
    return parse_schedule_config(text)


def _charts(schedule, compiled) -> dict:
    graph = reconcile(schedule, compiled.graph)
    trace = simulate_timeline(schedule, graph)
    return {
        "timeline.svg": emit_gantt(trace, GanttFormat.SVG, occupancy_track(schedule, graph, compiled.platform)),
        "timeline.txt": emit_gantt(trace, GanttFormat.TEXT),
    }


def cmd_check(args) -> int:
    compiled = _compile(args)
    for warning in compiled.warnings:
        emit({"warning": str(warning)})
    emit(
        {
            "status": "ok",
            "scenario": compiled.scenario.name,
            "tasks": len(compiled.graph.tasks),
            "buffers": len(compiled.graph.buffers),
            "hyperperiod": compiled.graph.hyperperiod,
        }
    )
    return EXIT_OK


def _objective(args):
    return ObjectiveKind.parse(args.objective) if getattr(args, "objective", None) else None


def cmd_solve(args) -> int:
    compiled = _compile(args)
    config = solver_config(compiled, args.seed, _objective(args))
    graph, platform, constraints = compiled.graph, compiled.platform, compiled.constraints
    baseline = baseline_schedule(graph, platform, constraints, config.objective)
    if args.baseline:
        schedule = baseline
    else:
        schedule = solve(graph, platform, constraints, config)
    report = emit_comparison(baseline, schedule, config.objective)
    files = {
        "schedule.yaml": emit_schedule_config(schedule),
        "report.yaml": serialize_comparison(report),
        **_charts(schedule, compiled),
    }
    write_outputs(args.out, files)
    emit(
        {
            "objective": config.objective.kind.value,
            "seed": config.seed,
            "value": schedule.objective_value,
            "baseline": baseline.objective_value,
            "improvement": f"{report.percent}%",
            "out": args.out,
        }
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.periods is not None and args.periods < 1:
        emit({"error": f"--periods must be positive, got {args.periods}"})
        return EXIT_USAGE
    compiled = _compile(args)
    schedule = _read_schedule(args.schedule)
    periods = args.periods or int(VERIFY_PERIODS)
    first_seed = args.seed if args.seed is not None else schedule.seed
    reports = [
        verify(schedule, compiled.graph, compiled.platform, compiled.constraints, periods, first_seed + offset)
        for offset in range(max(1, int(VERIFY_SEEDS)))
    ]
    report = next((r for r in reports if not r.passed), reports[-1])
    out = args.out or str(Path(args.schedule).with_name("verify.yaml"))
    write_outputs(Path(out).parent, {Path(out).name: serialize_report(report)})
    emit({"verdict": report.verdict, "periods": periods, "seed": report.seed, "violations": len(report.violations)})
    for violation in report.violations:
        emit(
            {
                "violation": f"{violation.kind.value} at={violation.at} period={violation.period} "
                f"subjects={','.join(violation.subjects)}"
            }
        )
    return EXIT_OK if report.passed else EXIT_DIAGNOSTICS


def cmd_render(args) -> int:
    compiled = _compile(args)
    schedule = _read_schedule(args.schedule)
    out = args.out or str(Path(args.schedule).parent)
    write_outputs(out, _charts(schedule, compiled))
    emit({"rendered": out})
    return EXIT_OK


def cmd_compare(args) -> int:
    compiled = _compile(args)
    config = solver_config(compiled, args.seed, _objective(args))
    graph, platform, constraints = compiled.graph, compiled.platform, compiled.constraints
    baseline = baseline_schedule(graph, platform, constraints, config.objective)
    optimized = solve(graph, platform, constraints, config)
    report = emit_comparison(baseline, optimized, config.objective)
    files = {"report.yaml": serialize_comparison(report), "report.txt": report.table()}
    write_outputs(args.out, files)
    emit(report.key_values())
    if args.table:
        sys.stdout.write(report.table())
    return EXIT_OK


def cmd_graph(args) -> int:
    sys.stdout.write(_compile(args).graph.to_jsonl())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description="Compile, schedule and verify RDSL scenarios.")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {TOOL_VERSION}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="parse, validate and elaborate a scenario")
    check.add_argument("scenario")
    check.set_defaults(func=cmd_check)

    solve_cmd = commands.add_parser("solve", help="search for a schedule and write it out")
    solve_cmd.add_argument("scenario")
    solve_cmd.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    solve_cmd.add_argument("--seed", type=int)
    solve_cmd.add_argument("--out", default="out")
    solve_cmd.add_argument("--baseline", action="store_true", help="write the greedy baseline instead")
    solve_cmd.set_defaults(func=cmd_solve)

    verify_cmd = commands.add_parser("verify", help="replay a schedule over many periods")
    verify_cmd.add_argument("scenario")
    verify_cmd.add_argument("schedule")
    verify_cmd.add_argument("--periods", type=int)
    verify_cmd.add_argument("--seed", type=int)
    verify_cmd.add_argument("--out")
    verify_cmd.set_defaults(func=cmd_verify)

    render = commands.add_parser("render", help="draw the timing charts of a schedule")
    render.add_argument("scenario")
    render.add_argument("schedule")
    render.add_argument("--out")
    render.set_defaults(func=cmd_render)

    compare = commands.add_parser("compare", help="baseline against optimized, as a table")
    compare.add_argument("scenario")
    compare.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    compare.add_argument("--seed", type=int)
    compare.add_argument("--out", default="out")
    compare.add_argument("--table", action="store_true", help="also print the table")
    compare.set_defaults(func=cmd_compare)

    graph = commands.add_parser("graph", help="dump the elaborated graph as JSON lines")
    graph.add_argument("scenario")
    graph.set_defaults(func=cmd_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except (ScenarioError, ScheduleMismatch, OutputError) as e:
        emit({"error": strip_ansi(str(e))})
        return EXIT_USAGE
    except Infeasible as e:
        emit({"infeasible": e.cause, "detail": e.detail})
        return EXIT_INFEASIBLE
    except InvalidSources as e:
        for diagnostic in e.diagnostics:
            emit({"diagnostic": str(diagnostic)})
        return EXIT_DIAGNOSTICS
    except RdslError as e:
        emit({"error": f"{e.code}: {e}"})
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    setproctitle.setproctitle(APP_NAME)
    sys.exit(main())
