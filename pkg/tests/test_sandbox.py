"""Sandbox tests: these spawn the real driver process."""

import time

import pytest

from execrank.sandbox import (
    GRACE_SECONDS,
    ExecutionBudget,
    OutputSignature,
    ReprError,
    SandboxSpawnError,
    canonicalize_output,
    capture_values,
    compute_signature,
    run_candidate_batch,
    run_trial_tests,
)
from execrank.tasks import load_task_suite

from conftest import make_task_record, write_suite

CORRECT = "def add(a, b):\n    return a + b\n"
WRONG = "def add(a, b):\n    return a - b\n"
LOOPING = "def add(a, b):\n    while True:\n        pass\n"
NAME_ERROR = "def add(a, b):\n    return helper(a, b)\n"


@pytest.fixture
def task(tmp_path):
    record = make_task_record(
        trial=["assert add(1, 2) == 3", "assert add(0, 0) == 0"],
        evals=[
            ("assert add(2, 3) == 5", "original"),
            ("assert add(10, -4) == 6", "original"),
            ("assert add(-1, -1) == -2", "extended"),
        ],
    )
    return load_task_suite(write_suite(tmp_path / "s.jsonl", [record])).tasks[0]


class TestRunTrialTests:
    def test_correct_program_passes_both(self, task, budget):
        outcomes = run_trial_tests(CORRECT, task, budget)
        assert [o.status for o in outcomes] == ["pass", "pass"]

    def test_wrong_program_fails(self, task, budget):
        outcomes = run_trial_tests(WRONG, task, budget)
        assert outcomes[0].status == "fail"
        assert outcomes[1].status == "pass"  # 0 - 0 == 0 still holds

    def test_infinite_loop_times_out_within_grace(self, task, fast_budget):
        start = time.monotonic()
        outcomes = run_trial_tests(LOOPING, task, fast_budget)
        elapsed = time.monotonic() - start
        assert all(o.status == "timeout" for o in outcomes)
        assert all(
            o.wall_time <= fast_budget.per_test_timeout + GRACE_SECONDS for o in outcomes
        )
        assert elapsed < 2 * (fast_budget.per_test_timeout + GRACE_SECONDS) + 1.0

    def test_undefined_name_reports_error_class(self, task, budget):
        outcomes = run_trial_tests(NAME_ERROR, task, budget)
        assert all(o.status == "error" for o in outcomes)
        assert all(o.error_class == "NameError" for o in outcomes)

    def test_parallel_workers_match_serial(self, task, budget):
        serial = run_trial_tests(CORRECT, task, budget, workers=1)
        parallel = run_trial_tests(CORRECT, task, budget, workers=4)
        assert [o.status for o in serial] == [o.status for o in parallel]

    def test_missing_driver_is_spawn_error(self, task, budget, tmp_path):
        with pytest.raises(SandboxSpawnError, match="not found"):
            run_trial_tests(CORRECT, task, budget, driver=tmp_path / "nope.py")


class TestComputeSignature:
    def test_behaviorally_equal_programs_share_signature(self, task, budget):
        other = "def add(x, y):\n    total = x\n    total += y\n    return total\n"
        sig_a = compute_signature(CORRECT, list(task.eval_tests), budget)
        sig_b = compute_signature(other, list(task.eval_tests), budget)
        assert sig_a == sig_b

    def test_crash_on_one_input(self, task, budget):
        crashing = (
            "def add(a, b):\n"
            "    if a == 10:\n"
            "        return 1 // 0\n"
            "    return a + b\n"
        )
        signature = compute_signature(crashing, list(task.eval_tests), budget)
        assert signature.entries[0] == ("value", "5")
        assert signature.entries[1] == ("error", "ZeroDivisionError")
        assert signature.entries[2] == ("value", "-2")

    def test_two_timeout_candidates_agree(self, task, fast_budget):
        looping_b = "def add(a, b):\n    while 1:\n        a += 1\n"
        sig_a = compute_signature(LOOPING, list(task.eval_tests), fast_budget)
        sig_b = compute_signature(looping_b, list(task.eval_tests), fast_budget)
        assert sig_a == sig_b
        assert all(entry == ("timeout", "") for entry in sig_a.entries)

    def test_deterministic(self, task, budget):
        first = compute_signature(CORRECT, list(task.eval_tests), budget)
        second = compute_signature(CORRECT, list(task.eval_tests), budget)
        assert first == second

    def test_round_trips_through_dict(self, task, budget):
        signature = compute_signature(CORRECT, list(task.eval_tests), budget)
        assert OutputSignature.from_dict(signature.to_dict()) == signature


class TestIsolation:
    def test_global_mutation_cannot_leak_between_tests(self, tmp_path, budget):
        # The candidate poisons an imported module in test 1; test 2 must
        # still see pristine state because each test runs in a new process.
        source = (
            "import string\n"
            "def add(a, b):\n"
            "    marker = getattr(string, 'LEAK', None)\n"
            "    string.LEAK = True\n"
            "    return 99 if marker else a + b\n"
        )
        record = make_task_record(
            trial=["assert add(1, 2) == 3", "assert add(1, 2) == 3"]
        )
        task = load_task_suite(write_suite(tmp_path / "s.jsonl", [record])).tasks[0]
        outcomes = run_trial_tests(source, task, budget)
        assert [o.status for o in outcomes] == ["pass", "pass"]


class TestCanonicalizeOutput:
    def test_list_literal(self):
        assert canonicalize_output([1, 2]) == "[1, 2]"

    def test_float_exact_text(self):
        assert canonicalize_output(0.1 + 0.2) == "0.30000000000000004"

    def test_huge_string_truncated_with_marker(self):
        text = canonicalize_output("x" * 10**7, max_output_bytes=1024)
        assert text.endswith("...[truncated]")
        assert len(text) <= 1024 + len("...[truncated]")

    def test_unrepresentable_value(self):
        class Bad:
            def __repr__(self):
                raise RuntimeError("no repr")

        with pytest.raises(ReprError):
            canonicalize_output(Bad())

    def test_agrees_with_driver(self, task, budget):
        # The harness-side and driver-side canonicalizations are one wire
        # contract; a drift between them would corrupt signature equality.
        cases = {
            "[1, 2]": "def f():\n    return [1, 2]\n",
            "0.30000000000000004": "def f():\n    return 0.1 + 0.2\n",
            "'a'": "def f():\n    return 'a'\n",
            "(1, 'b', None)": "def f():\n    return (1, 'b', None)\n",
        }
        from execrank.tasks import UnitTest

        for expected, source in cases.items():
            tests = [UnitTest(index=0, kind="input", input_expr="f()")]
            signature = compute_signature(source, tests, budget)
            assert signature.entries[0] == ("value", expected)

    def test_driver_truncation_matches(self, budget):
        from execrank.tasks import UnitTest

        small = ExecutionBudget(per_test_timeout=5.0, memory_limit=budget.memory_limit,
                                max_output_bytes=64)
        source = "def f():\n    return 'y' * 1000\n"
        tests = [UnitTest(index=0, kind="input", input_expr="f()")]
        signature = compute_signature(source, tests, small)
        assert signature.entries[0] == ("value", canonicalize_output("y" * 1000, 64))


class TestCaptureValues:
    def test_values_and_gaps(self, task, budget):
        values = capture_values(CORRECT, list(task.trial_tests), budget)
        assert values == ["3", "0"]

    def test_error_candidate_yields_none(self, task, budget):
        values = capture_values(NAME_ERROR, list(task.trial_tests), budget)
        assert values == [None, None]


class TestBatchMode:
    def test_matches_per_process_outcomes(self, task, budget):
        per_process = run_trial_tests(WRONG, task, budget)
        batched = run_candidate_batch(WRONG, list(task.trial_tests), budget)
        assert [o.status for o in per_process] == [o.status for o in batched]


def test_worker_pool_throughput(task, budget):
    # Eight independent candidates on four workers should take well under
    # eight serial driver startups' worth of wall time.
    candidates = [f"def add(a, b):\n    return a + b + {i} - {i}\n" for i in range(8)]
    start = time.monotonic()
    from execrank.sandbox import DriverJob, run_jobs

    jobs = [DriverJob(code, "assert add(1, 2) == 3", "assert") for code in candidates]
    results = run_jobs(jobs, budget, workers=4)
    elapsed = time.monotonic() - start
    assert all(not r.timed_out and r.record["status"] == "pass" for r in results)
    serial_start = time.monotonic()
    run_jobs(jobs[:2], budget, workers=1)
    two_serial = time.monotonic() - serial_start
    # ceil(8/4) = 2 batches; generous overhead allowance keeps this stable.
    assert elapsed < max(4 * two_serial, 5.0)
