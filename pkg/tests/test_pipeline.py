"""Pipeline and CLI tests on small scripted fixtures."""

import json

import pytest

from execrank.cli import main
from execrank.llm_client import DisabledTransport, ScriptRule, ScriptedTransport
from execrank.pipeline import (
    ConfigError,
    ExperimentConfig,
    ExperimentRunner,
    method_from_name,
    run_experiment,
)
from execrank.report import emit_report

from conftest import make_task_record, write_suite

CORRECT = "def f(x):\n    return x + 1"
WRONG = "def f(x):\n    return x - 1"


def fenced(code):
    return f"```python\n{code}\n```"


def small_suite(tmp_path, with_empty_trial=False):
    records = [
        make_task_record(
            task_id="cli-task", entry="f",
            trial=["assert f(1) == 2"],
            evals=[("assert f(2) == 3", "original"), ("assert f(3) == 4", "extended")],
            prompt='def f(x):\n    """Add one. cli-task"""\n',
        )
    ]
    if with_empty_trial:
        record = make_task_record(
            task_id="no-trial", entry="f",
            trial=[],
            evals=[("assert f(2) == 3", "original"), ("assert f(3) == 4", "extended")],
            prompt='def f(x):\n    """Add one. no-trial"""\n',
        )
        record["trial_tests"] = []
        records.append(record)
    return write_suite(tmp_path / "suite.jsonl", records)


def transport_for(completions, greedy=CORRECT):
    return ScriptedTransport(
        [
            ScriptRule(match=("###feedback",), completions=["cannot fix"], greedy=True),
            ScriptRule(match=(), completions=[fenced(greedy)],
                       token_logprobs=[[-0.1]], greedy=True),
            ScriptRule(match=(), completions=[fenced(c) for c in completions],
                       token_logprobs=[[-1.0]] * len(completions), greedy=False),
        ]
    )


def config_for(tmp_path, suite, **overrides):
    settings = dict(
        suite_path=str(suite),
        model_id="mock-model",
        candidate_counts=(1, 2),
        methods=(method_from_name("greedy"), method_from_name("filter+mbr_exec")),
        repetitions=1,
        base_seed=3,
        per_test_timeout=2.0,
        cache_dir=str(tmp_path / "cache"),
        workers=2,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


class TestRunExperiment:
    def test_four_repetitions_reported_individually(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite, repetitions=4,
                            methods=(method_from_name("greedy"),))
        report = run_experiment(config, transport=transport_for([CORRECT, WRONG]))
        accuracy = report.methods["greedy"]["accuracy"]
        assert accuracy["original"] == [1.0, 1.0, 1.0, 1.0]
        assert report.to_dict()["methods"]["greedy"]["mean_accuracy"]["original"] == 1.0

    def test_pass_at_k_series_covers_all_counts(self, tmp_path):
        suite = small_suite(tmp_path)
        counts = (1, 5, 10, 20, 25, 50)
        pool = [CORRECT if i % 2 == 0 else WRONG for i in range(50)]
        config = config_for(tmp_path, suite, candidate_counts=counts,
                            methods=(method_from_name("filter+mbr_exec"),))
        report = run_experiment(config, transport=transport_for(pool))
        for partition in ("original", "extended"):
            series = report.pass_at_k[partition]
            assert sorted(series, key=int) == ["1", "5", "10", "20", "25", "50"]
            values = [series[str(k)][0] for k in counts]
            assert values == sorted(values)  # more draws can only help
            assert values[0] == pytest.approx(0.5)  # 25 of 50 correct
            assert len(series["1"]) == config.repetitions

    def test_random_baseline_is_expected_value(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite,
                            methods=(method_from_name("random"),))
        report = run_experiment(config, transport=transport_for([CORRECT, WRONG]))
        assert report.methods["random"]["accuracy"]["original"] == [0.5]

    def test_task_without_trial_tests_quarantined(self, tmp_path):
        suite = small_suite(tmp_path, with_empty_trial=True)
        config = config_for(tmp_path, suite,
                            methods=(method_from_name("filter+mbr_exec"),))
        report = run_experiment(config, transport=transport_for([CORRECT, WRONG]))
        assert len(report.quarantined) == 1
        assert report.quarantined[0]["task_id"] == "no-trial"
        # The healthy task still aggregates: its winner is the correct one.
        assert report.methods["filter+mbr_exec"]["accuracy"]["original"] == [1.0]

    def test_phases_build_up_the_cache(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite)
        runner = ExperimentRunner(config, transport=transport_for([CORRECT, WRONG]))
        assert runner.run(phase="generate") is None
        # Everything after generation is sandbox + cache work, so a dead
        # endpoint must be able to finish the run.
        offline = ExperimentRunner(config, transport=DisabledTransport())
        report = offline.run(phase="report")
        assert report.methods["filter+mbr_exec"]["accuracy"]["original"] == [1.0]

    def test_self_debug_default_applies_to_methods(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(
            tmp_path, suite, self_debug="sdmulti",
            methods=(method_from_name("filter+mbr_exec"),),
        )
        runner = ExperimentRunner(config, transport=transport_for([CORRECT, WRONG]))
        assert runner.methods[0].self_debug == "sdmulti"

    def test_unknown_method_name_rejected(self):
        with pytest.raises(ConfigError):
            method_from_name("filter+banana")

    def test_generation_failure_quarantines_task(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite)
        # A transport with no rules rejects every request.
        report = run_experiment(config, transport=ScriptedTransport([]))
        assert len(report.quarantined) == 1
        assert "ScriptError" in report.quarantined[0]["error"]

    def test_eval_test_count_limits_signature_inputs(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite, eval_test_count=1)
        runner = ExperimentRunner(config, transport=transport_for([CORRECT, WRONG]))
        task = runner.suite.tasks[0]
        tests = runner._signature_tests(task)
        assert [(t.partition, t.index) for t in tests] == [("original", 0)]
        # Accuracy still uses the full partitions regardless of m.
        report = runner.run()
        assert report.methods["filter+mbr_exec"]["accuracy"]["extended"] == [1.0]


class TestEmitReport:
    @pytest.fixture
    def report(self, tmp_path):
        suite = small_suite(tmp_path)
        config = config_for(tmp_path, suite)
        return run_experiment(config, transport=transport_for([CORRECT, WRONG]))

    def test_json_single_file(self, report, tmp_path):
        paths = emit_report(report, "json", tmp_path / "out.json")
        assert len(paths) == 1
        data = json.loads(paths[0].read_text())
        assert data["method_order"] == ["greedy", "filter+mbr_exec"]

    def test_csv_methods_in_config_order(self, report, tmp_path):
        main_csv, series_csv = emit_report(report, "csv", tmp_path / "out.csv")
        lines = main_csv.read_text().splitlines()
        assert lines[0] == "method,repetition,accuracy_original,accuracy_extended"
        assert lines[1].startswith("greedy,0,")
        assert lines[2].startswith("filter+mbr_exec,0,")
        series_lines = series_csv.read_text().splitlines()
        assert series_lines[0] == "partition,k,repetition,pass_at_k"
        assert len(series_lines) == 1 + 2 * 2  # two partitions x two k values

    def test_table_has_one_row_per_method(self, report, tmp_path):
        path, = emit_report(report, "table", tmp_path / "out.txt")
        text = path.read_text()
        assert "greedy" in text and "filter+mbr_exec" in text

    def test_unknown_format_rejected(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, "xml", tmp_path / "out.xml")


class TestCli:
    def _write_script(self, tmp_path):
        rules = [
            {"match": ["###feedback"], "completions": ["cannot fix"], "greedy": True},
            {"match": ["cli-task"], "completions": [fenced(CORRECT)],
             "token_logprobs": [[-0.1]], "greedy": True},
            {"match": ["cli-task"], "completions": [fenced(CORRECT), fenced(WRONG)],
             "token_logprobs": [[-1.0], [-1.0]], "greedy": False},
        ]
        path = tmp_path / "script.json"
        path.write_text(json.dumps(rules), encoding="utf-8")
        return path

    def _write_config(self, tmp_path, suite):
        config = {
            "suite_path": str(suite),
            "model_id": "mock-model",
            "candidate_counts": [1, 2],
            "methods": ["greedy", "filter+mbr_exec"],
            "repetitions": 1,
            "per_test_timeout": 2.0,
            "cache_dir": str(tmp_path / "cache"),
            "workers": 2,
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        return path

    def test_run_writes_report(self, tmp_path, capsys):
        suite = small_suite(tmp_path)
        code = main([
            "run", "--config", str(self._write_config(tmp_path, suite)),
            "--scripted-endpoint", str(self._write_script(tmp_path)),
            "--out", str(tmp_path / "report.json"), "--format", "json",
        ])
        assert code == 0
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["methods"]["greedy"]["mean_accuracy"]["original"] == 1.0

    def test_select_prints_selections(self, tmp_path, capsys):
        suite = small_suite(tmp_path)
        code = main([
            "select", "--config", str(self._write_config(tmp_path, suite)),
            "--scripted-endpoint", str(self._write_script(tmp_path)),
        ])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["cli-task"]["filter+mbr_exec"][0]["chosen_index"] == 0

    def test_staged_commands_then_offline_report(self, tmp_path):
        suite = small_suite(tmp_path)
        config = str(self._write_config(tmp_path, suite))
        script = str(self._write_script(tmp_path))
        for command in ("generate", "execute", "debug"):
            assert main([command, "--config", config,
                         "--scripted-endpoint", script]) == 0
        # No endpoint flag at all: report must come purely from the cache.
        assert main([
            "report", "--config", config,
            "--out", str(tmp_path / "offline.json"), "--format", "json",
        ]) == 0
        assert (tmp_path / "offline.json").exists()

    def test_config_error_exit_code(self, tmp_path):
        assert main(["run", "--suite", str(tmp_path / "missing.jsonl"),
                     "--model", "m"]) == 1

    def test_missing_model_is_config_error(self, tmp_path):
        suite = small_suite(tmp_path)
        assert main(["run", "--suite", str(suite)]) == 1

    def test_cold_cache_without_endpoint_is_infrastructure_error(self, tmp_path):
        suite = small_suite(tmp_path)
        config = self._write_config(tmp_path, suite)
        # No --base-url and no scripted endpoint: the disabled transport
        # trips as soon as generation is needed.
        assert main(["report", "--config", str(config),
                     "--out", str(tmp_path / "r.json")]) == 2

    def test_quarantine_exit_code(self, tmp_path, capsys):
        suite = small_suite(tmp_path, with_empty_trial=True)
        config = {
            "suite_path": str(suite),
            "model_id": "mock-model",
            "candidate_counts": [1, 2],
            "methods": ["filter+mbr_exec"],
            "repetitions": 1,
            "per_test_timeout": 2.0,
            "cache_dir": str(tmp_path / "cache"),
            "workers": 2,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        code = main([
            "run", "--config", str(config_path),
            "--scripted-endpoint", str(self._write_script(tmp_path)),
            "--out", str(tmp_path / "r.json"),
        ])
        assert code == 3
        assert "no-trial" in capsys.readouterr().err
