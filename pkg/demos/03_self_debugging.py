#!/usr/bin/env python3
"""Show the two self-debugging regimes on one task.

The feedback sent to the model is rendered from real execution outcomes:
passing tests state the observed output, failing tests contrast the
assertion with the real output, and crashing tests embed the error class.
A scripted endpoint supplies the "fixed" completions, so the whole loop is
reproducible offline.
"""

import json
import tempfile
from pathlib import Path

from execrank import (
    Candidate,
    ExecutionBudget,
    LlmClient,
    ScriptRule,
    ScriptedTransport,
    build_feedback,
    load_task_suite,
    run_trial_tests,
    sd_multi,
)
from execrank.rerank import SelectionPolicy, SelectionResult
from execrank.sandbox import capture_values
from execrank.selfdebug import sd_one

workdir = Path(tempfile.mkdtemp(prefix="execrank-demo-"))
task_record = {
    "id": "demo-rot",
    "prompt": 'def rotations(s):\n    """Minimum rotations to restore a string. demo-rot"""\n',
    "entry_point": "rotations",
    "trial_tests": [{"code": 'assert rotations("aaaa") == 1', "index": 0}],
    "eval_tests": [
        {"code": 'assert rotations("abab") == 2', "partition": "original", "index": 0},
    ],
}
suite_path = workdir / "suite.jsonl"
suite_path.write_text(json.dumps(task_record) + "\n", encoding="utf-8")
task = load_task_suite(suite_path).tasks[0]

WRONG = (
    "def rotations(s):\n"
    "    best = len(s)\n"
    "    for i, c in enumerate(s):\n"
    "        if c == s[0] and i < best:\n"
    "            best = i\n"
    "    return best"
)
FIXED = (
    "def rotations(s):\n"
    "    n = len(s)\n"
    "    for i in range(1, n + 1):\n"
    "        if s[i:] + s[:i] == s:\n"
    "            return i\n"
    "    return n"
)

budget = ExecutionBudget(per_test_timeout=5.0)

print("== execution feedback for the wrong candidate ==")
outcomes = run_trial_tests(WRONG, task, budget)
captured = capture_values(WRONG, list(task.trial_tests), budget)
feedback = build_feedback(task, outcomes, captured)
print(feedback.render())

# The scripted endpoint answers any debug prompt containing the wrong code
# with a fenced fixed version (a real endpoint would be greedy-decoded).
transport = ScriptedTransport([
    ScriptRule(
        match=("###feedback", "best = i"),
        completions=[f"incorrect. Please fix it.\n\n### fixed code\n```python\n{FIXED}\n```"],
        greedy=True,
    ),
])
client = LlmClient(transport, sleep=lambda s: None)


def trial_runner(code):
    return (
        run_trial_tests(code, task, budget),
        capture_values(code, list(task.trial_tests), budget),
    )


print("== debug only the selected candidate (up to 3 rounds) ==")
pool = [Candidate(index=0, raw_completion=WRONG, code=WRONG)]
selection = SelectionResult(
    chosen_index=0, scores=({"filter": 0, "mbr": None, "nbest": None},),
    policy=SelectionPolicy(use_filter=True), tie_broken=False,
)
final, trace = sd_one(client, trial_runner, pool, selection, task, model_id="demo")
print(f"rounds used: {len(trace.rounds)}, terminal: {trace.terminal_reason}")
print(f"final code passes the trial test: "
      f"{all(o.passed for o in run_trial_tests(final.code, task, budget))}")

print("\n== debug every failing candidate once, keep indices ==")
pool = [
    Candidate(index=0, raw_completion=FIXED, code=FIXED),   # already passing
    Candidate(index=1, raw_completion=WRONG, code=WRONG),   # scripted fix
]
debugged, traces = sd_multi(client, trial_runner, pool, task, model_id="demo")
for candidate, trace in zip(debugged, traces):
    print(f"candidate {candidate.index}: origin={candidate.origin.kind}, "
          f"terminal={trace.terminal_reason}")
