#!/usr/bin/env python3
"""Run the full pipeline against a scripted endpoint, then replay it offline.

The scripted transport plays the role of the model server: it answers the
sampling request for each task with fixed completions (plus token
log-probabilities) and the greedy request with one completion. After the
first run, every stage is cached, so the same experiment reproduces the
report byte for byte with the endpoint disabled.
"""

import json
import tempfile
from pathlib import Path

from execrank import (
    DisabledTransport,
    ExperimentConfig,
    ScriptRule,
    ScriptedTransport,
    emit_report,
    method_from_name,
    run_experiment,
)


def fenced(code):
    return f"```python\n{code}\n```"


workdir = Path(tempfile.mkdtemp(prefix="execrank-demo-"))

tasks = [
    {
        "id": "demo-square",
        "prompt": 'def square(x):\n    """Square a number. demo-square"""\n',
        "entry_point": "square",
        "trial_tests": [{"code": "assert square(3) == 9", "index": 0}],
        "eval_tests": [
            {"code": "assert square(4) == 16", "partition": "original", "index": 0},
            {"code": "assert square(-2) == 4", "partition": "extended", "index": 0},
        ],
    },
    {
        "id": "demo-neg",
        "prompt": 'def neg(x):\n    """Negate a number. demo-neg"""\n',
        "entry_point": "neg",
        "trial_tests": [{"code": "assert neg(1) == -1", "index": 0}],
        "eval_tests": [
            {"code": "assert neg(-5) == 5", "partition": "original", "index": 0},
            {"code": "assert neg(0) == 0", "partition": "extended", "index": 0},
        ],
    },
]
suite_path = workdir / "suite.jsonl"
suite_path.write_text("\n".join(json.dumps(t) for t in tasks) + "\n", encoding="utf-8")

# The script: per task, one greedy completion and a 4-candidate sample.
transport = ScriptedTransport([
    ScriptRule(match=("demo-square",), greedy=True,
               completions=[fenced("def square(x):\n    return x * x")],
               token_logprobs=[[-0.1]]),
    ScriptRule(match=("demo-square",), greedy=False,
               completions=[
                   fenced("def square(x):\n    return x + x"),
                   fenced("def square(x):\n    return x * x"),
                   fenced("def square(x):\n    return x ** 2"),
                   fenced("def square(x):\n    return 9"),
               ],
               token_logprobs=[[-0.2], [-0.9], [-1.1], [-2.0]]),
    ScriptRule(match=("demo-neg",), greedy=True,
               completions=[fenced("def neg(x):\n    return 0 - x")],
               token_logprobs=[[-0.1]]),
    ScriptRule(match=("demo-neg",), greedy=False,
               completions=[
                   fenced("def neg(x):\n    return -x"),
                   fenced("def neg(x):\n    return x"),
                   fenced("def neg(x):\n    return abs(x)"),
                   fenced("def neg(x):\n    return -abs(x)"),
               ],
               token_logprobs=[[-0.4], [-0.3], [-1.5], [-1.6]]),
])

config = ExperimentConfig(
    suite_path=str(suite_path),
    model_id="scripted-model",
    candidate_counts=(1, 2, 4),
    methods=(
        method_from_name("greedy"),
        method_from_name("random"),
        method_from_name("mbr_exec"),
        method_from_name("filter+mbr_exec"),
        method_from_name("filter+ll+mbr_exec"),
    ),
    repetitions=2,
    base_seed=5,
    per_test_timeout=2.0,
    cache_dir=str(workdir / "cache"),
    workers=4,
)

print("== first run (scripted endpoint) ==")
report = run_experiment(config, transport=transport)
table_path, = emit_report(report, "table", workdir / "report.txt")
print(table_path.read_text())

print("== warm replay with the endpoint disabled ==")
offline = run_experiment(config, transport=DisabledTransport())
first_json, = emit_report(report, "json", workdir / "a.json")
second_json, = emit_report(offline, "json", workdir / "b.json")
identical = first_json.read_bytes() == second_json.read_bytes()
print(f"byte-identical report from cache: {identical}")
print(f"artifacts in {workdir}")
