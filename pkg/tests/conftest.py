import json

import pytest

from execrank.sandbox import ExecutionBudget
from execrank.tasks import load_task_suite


@pytest.fixture
def budget():
    return ExecutionBudget(per_test_timeout=5.0, memory_limit=512 * 1024 * 1024,
                           max_output_bytes=4096)


@pytest.fixture
def fast_budget():
    return ExecutionBudget(per_test_timeout=1.0, memory_limit=512 * 1024 * 1024,
                           max_output_bytes=4096)


def write_suite(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path


def make_task_record(task_id="t1", entry="add", trial=None, evals=None, prompt=None):
    if trial is None:
        trial = [f"assert {entry}(1, 2) == 3"]
    if evals is None:
        evals = [(f"assert {entry}(2, 3) == 5", "original")]
    eval_tests = []
    counters = {"original": 0, "extended": 0}
    for code, partition in evals:
        eval_tests.append({"code": code, "partition": partition,
                           "index": counters[partition]})
        counters[partition] += 1
    return {
        "id": task_id,
        "prompt": prompt or f"def {entry}(a, b):\n    \"\"\"Return the sum.\"\"\"\n",
        "entry_point": entry,
        "trial_tests": [{"code": code, "index": i} for i, code in enumerate(trial)],
        "eval_tests": eval_tests,
    }


@pytest.fixture
def simple_suite(tmp_path):
    record = make_task_record()
    return load_task_suite(write_suite(tmp_path / "suite.jsonl", [record]))
