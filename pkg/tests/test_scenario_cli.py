import json
from dataclasses import replace
from pathlib import Path

import pytest
import yaml

from builders import CHAIN_SOURCE, period_text, sdk_text, small_platform
from main import EXIT_DIAGNOSTICS, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main
from modules.schedule_config import emit_schedule_config, parse_schedule_config
from rdsl_core.errors import ScenarioError
from rdsl_core.schedule import ObjectiveKind
from services.scenario import InvalidSources, compile_scenario, load_scenario, seed_from_env, solver_config

CHAIN_FUNCTIONS = {"f_0": (2, 64), "f_1": (3, 64), "f_2": (4, 64)}


def write_scenario(directory: Path, source: str = CHAIN_SOURCE, period: int = 20, **spec) -> Path:
    platform = small_platform()
    (directory / "chain.rdsl").write_text(source)
    (directory / "platform.yaml").write_text(yaml.safe_dump(platform))
    (directory / "sdk.yaml").write_text(sdk_text(CHAIN_FUNCTIONS, platform))
    (directory / "constraints.yaml").write_text(period_text(period))
    manifest = {
        "apiVersion": "rdsl/v0",
        "kind": "Scenario",
        "metadata": {"name": "chain"},
        "spec": {
            "top": "chain",
            "sources": ["chain.rdsl"],
            "constraints": "constraints.yaml",
            "platform": "platform.yaml",
            "sdk": "sdk.yaml",
            "solver": {"restarts": 1, "iterations": 50},
            **spec,
        },
    }
    path = directory / "scenario.yaml"
    path.write_text(yaml.safe_dump(manifest))
    return path


def output_pairs(text: str) -> dict:
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


class TestLoadScenario:
    def test_bundled_manifest(self):
        scenario = load_scenario(Path(__file__).parent.parent / "scenarios" / "mmimo" / "scenario.yaml")
        assert scenario.name == "mmimo_uplink_high_doppler"
        assert [p.name for p in scenario.sources] == ["mmimo_uplink.rdsl", "chest_high_doppler.rdsl"]
        assert scenario.objective.kind is ObjectiveKind.MIN_LATENCY
        assert scenario.objective.sinks == ("ul_tb",)
        assert scenario.symbols_origin == "symbols.yaml"

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "nope.yaml")

    @pytest.mark.parametrize(
        "text",
        [
            "kind: [\n",
            "apiVersion: rdsl/v0\nkind: Platform\nspec: {}\n",
            "apiVersion: rdsl/v9\nkind: Scenario\nspec: {top: chain}\n",
            "apiVersion: rdsl/v0\nkind: Scenario\n",
            "apiVersion: rdsl/v0\nkind: Scenario\nspec: {sources: [chain.rdsl]}\n",
        ],
    )
    def test_rejected_manifests(self, tmp_path, text):
        path = tmp_path / "scenario.yaml"
        path.write_text(text)
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_missing_named_file(self, tmp_path):
        path = write_scenario(tmp_path)
        (tmp_path / "sdk.yaml").unlink()
        with pytest.raises(ScenarioError, match="spec.sdk"):
            load_scenario(path)

    def test_symbols_must_be_integers(self, tmp_path):
        with pytest.raises(ScenarioError, match="spec.symbols.N"):
            load_scenario(write_scenario(tmp_path, symbols={"N": "four"}))

    def test_arrivals_must_be_integers(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(write_scenario(tmp_path, arrivals={"x": True}))


class TestCompile:
    def test_chain(self, tmp_path):
        compiled = compile_scenario(load_scenario(write_scenario(tmp_path, arrivals={"x": 2})))
        assert compiled.graph.task_ids() == ("stage_0", "stage_1", "stage_2")
        assert compiled.graph.hyperperiod == 20
        assert compiled.graph.buffer("x").arrival == 2

    def test_validation_errors_come_together(self, tmp_path):
        broken = CHAIN_SOURCE.replace("stage_1(a, b)", "stage_1(a, nowhere)")
        with pytest.raises(InvalidSources) as info:
            compile_scenario(load_scenario(write_scenario(tmp_path, source=broken)))
        assert "UndeclaredStream" in {d.code for d in info.value.diagnostics}

    def test_bundled_warnings(self, srs):
        assert "UnassignedOutput" in {d.code for d in srs.warnings}


class TestSolverConfig:
    def test_manifest_section(self, srs):
        config = solver_config(srs)
        assert (config.restarts, config.iterations) == (2, 300)
        assert config.objective == srs.objective

    def test_options_beat_the_manifest(self, srs):
        assert solver_config(srs, options={"solver_restarts": 5}).restarts == 5

    def test_seed_precedence(self, srs, monkeypatch):
        monkeypatch.setenv("RDSLC_SEED", "7")
        assert seed_from_env() == 7
        assert solver_config(srs).seed == 7
        assert solver_config(srs, seed=9).seed == 9

    def test_bad_seed_variable(self, monkeypatch):
        monkeypatch.setenv("RDSLC_SEED", "soon")
        with pytest.raises(ScenarioError):
            seed_from_env()

    def test_objective_flag(self, mmimo):
        config = solver_config(mmimo, objective=ObjectiveKind.MIN_ACTIVE_PERIOD)
        assert config.objective.kind is ObjectiveKind.MIN_ACTIVE_PERIOD
        assert config.objective.sinks == ("ul_tb",)


class TestMain:
    def test_check(self, tmp_path, capsys):
        assert main(["check", str(write_scenario(tmp_path))]) == EXIT_OK
        pairs = output_pairs(capsys.readouterr().out)
        assert pairs["status"] == "ok"
        assert pairs["tasks"] == "3"
        assert pairs["hyperperiod"] == "20"

    def test_solve_verify_render(self, tmp_path, capsys):
        manifest = str(write_scenario(tmp_path))
        out = tmp_path / "out"
        assert main(["solve", manifest, "--out", str(out), "--seed", "1"]) == EXIT_OK
        pairs = output_pairs(capsys.readouterr().out)
        assert pairs["value"] == "9"
        assert pairs["seed"] == "1"
        for name in ("schedule.yaml", "report.yaml", "timeline.svg", "timeline.txt"):
            assert (out / name).is_file()

        assert main(["verify", manifest, str(out / "schedule.yaml"), "--periods", "5"]) == EXIT_OK
        assert output_pairs(capsys.readouterr().out)["verdict"] == "PASS"
        assert yaml.safe_load((out / "verify.yaml").read_text())["verdict"] == "PASS"

        charts = tmp_path / "charts"
        assert main(["render", manifest, str(out / "schedule.yaml"), "--out", str(charts)]) == EXIT_OK
        assert (charts / "timeline.svg").is_file()

    def test_verify_reports_violations(self, tmp_path, capsys):
        manifest = str(write_scenario(tmp_path))
        out = tmp_path / "out"
        assert main(["solve", manifest, "--out", str(out), "--baseline"]) == EXIT_OK
        schedule = parse_schedule_config((out / "schedule.yaml").read_text())
        early = tuple(replace(s, start=4, finish=8) if s.task == "stage_2" else s for s in schedule.slots)
        broken = tmp_path / "broken.yaml"
        broken.write_text(emit_schedule_config(replace(schedule, slots=early)))
        capsys.readouterr()
        assert main(["verify", manifest, str(broken), "--periods", "3"]) == EXIT_DIAGNOSTICS
        text = capsys.readouterr().out
        assert "verdict: FAIL" in text
        assert "violation: READ_BEFORE_DEFINE" in text

    def test_verify_needs_positive_periods(self, tmp_path, capsys):
        manifest = str(write_scenario(tmp_path))
        assert main(["verify", manifest, "unused.yaml", "--periods", "0"]) == EXIT_USAGE

    def test_compare_table(self, tmp_path, capsys):
        manifest = str(write_scenario(tmp_path))
        assert main(["compare", manifest, "--out", str(tmp_path / "cmp"), "--table"]) == EXIT_OK
        text = capsys.readouterr().out
        assert "kpi: Active period" in text
        assert "| KPI" in text
        assert (tmp_path / "cmp" / "report.txt").is_file()

    def test_graph_dump(self, tmp_path, capsys):
        assert main(["graph", str(write_scenario(tmp_path))]) == EXIT_OK
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 7
        assert [r["id"] for r in records if r["kind"] == "task"] == ["stage_0", "stage_1", "stage_2"]

    def test_infeasible_period(self, tmp_path, capsys):
        assert main(["solve", str(write_scenario(tmp_path, period=8)), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
        assert output_pairs(capsys.readouterr().out)["infeasible"] == "period"

    def test_invalid_sources(self, tmp_path, capsys):
        broken = CHAIN_SOURCE.replace("stage_1(a, b)", "stage_1(a, nowhere)")
        assert main(["check", str(write_scenario(tmp_path, source=broken))]) == EXIT_DIAGNOSTICS
        assert "diagnostic: " in capsys.readouterr().out

    def test_unguarded_optional_read_is_not_solved(self, tmp_path, capsys):
        guarded = CHAIN_SOURCE.replace(
            "modifier stage_1(in src, out dst)\n  f_1(src, dst)",
            "modifier stage_1(in src, out dst)\n  guarded{first}{\n"
            "    (src != EMPTY) : f_1(src, dst)\n    TRUE : f_2(src, dst)\n  }",
        )
        assert guarded != CHAIN_SOURCE
        manifest = str(write_scenario(tmp_path, source=guarded))
        assert main(["solve", manifest, "--out", str(tmp_path / "out")]) == EXIT_DIAGNOSTICS
        assert "error: UnguardedRead: arm 1 of 'stage_1'" in capsys.readouterr().out
        assert not (tmp_path / "out" / "schedule.yaml").exists()

    def test_missing_manifest(self, tmp_path, capsys):
        assert main(["check", str(tmp_path / "missing.yaml")]) == EXIT_USAGE
        assert "error: manifest not found" in capsys.readouterr().out

    def test_usage_errors(self, capsys):
        assert main([]) == EXIT_USAGE
        assert main(["solve", "x.yaml", "--objective", "speed"]) == EXIT_USAGE
