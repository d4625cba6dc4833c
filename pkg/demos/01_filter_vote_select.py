#!/usr/bin/env python3
"""Walk through the core selection machinery, no model endpoint involved.

We hand the harness four candidate programs for one task and watch it
filter on the trial test, compute execution-output signatures on the
held-out test inputs, run the agreement vote, and pick a winner under a
few different policies.
"""

import json
import tempfile
from pathlib import Path

from execrank import (
    ExecutionBudget,
    FeatureVector,
    SelectionPolicy,
    UtilityMatrix,
    compute_signature,
    filter_score,
    load_task_suite,
    mbr_scores,
    run_trial_tests,
    select,
)

# One task: add two numbers. One trial assertion is public; three more
# assertions are held out for evaluation (two original, one extended).
task_record = {
    "id": "demo-add",
    "prompt": 'def add(a, b):\n    """Add the two numbers."""\n',
    "entry_point": "add",
    "trial_tests": [{"code": "assert add(1, 2) == 3", "index": 0}],
    "eval_tests": [
        {"code": "assert add(2, 3) == 5", "partition": "original", "index": 0},
        {"code": "assert add(0, 0) == 0", "partition": "original", "index": 1},
        {"code": "assert add(-1, -2) == -3", "partition": "extended", "index": 0},
    ],
}

workdir = Path(tempfile.mkdtemp(prefix="execrank-demo-"))
suite_path = workdir / "suite.jsonl"
suite_path.write_text(json.dumps(task_record) + "\n", encoding="utf-8")
task = load_task_suite(suite_path).tasks[0]

# Four "sampled" candidates. Two agree on the wrong behavior (a * b),
# one is correct, one subtracts. Agreement alone favors the wrong pair;
# the trial-test filter rescues the correct program.
candidates = [
    "def add(a, b):\n    return a * b",
    "def add(a, b):\n    b, a = a, b\n    return a * b",
    "def add(a, b):\n    return a + b",
    "def add(a, b):\n    return a - b",
]

budget = ExecutionBudget(per_test_timeout=5.0)

print("== trial-test filter bits ==")
bits = []
for i, code in enumerate(candidates):
    outcomes = run_trial_tests(code, task, budget)
    bit = filter_score(outcomes)
    bits.append(bit)
    print(f"candidate {i}: {[o.status for o in outcomes]} -> filter={bit}")

print("\n== output signatures on the evaluation-test inputs ==")
signatures = []
for i, code in enumerate(candidates):
    signature = compute_signature(code, list(task.eval_tests), budget)
    signatures.append(signature)
    print(f"candidate {i}: {signature.entries}")

print("\n== agreement vote (expected utility under exact output match) ==")
scores = mbr_scores(UtilityMatrix.from_exec_signatures(signatures))
print(f"vote scores: {scores}")
print("candidates 0 and 1 form the largest cluster, so the bare vote is wrong:")

features = [FeatureVector(filter=b) for b in bits]

vote_only = select(features, scores, SelectionPolicy(mbr_utility="exec"))
print(f"  vote-only winner:   candidate {vote_only.chosen_index}")

filtered = select(features, scores,
                  SelectionPolicy(use_filter=True, mbr_utility="exec"))
print(f"  filter+vote winner: candidate {filtered.chosen_index}  (the correct one)")

filter_only = select(features, None, SelectionPolicy(use_filter=True))
print(f"  filter-only winner: candidate {filter_only.chosen_index}")
