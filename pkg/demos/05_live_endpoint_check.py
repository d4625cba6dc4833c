#!/usr/bin/env python3
"""Manual smoke test against a live OpenAI-compatible endpoint (not CI).

Directional check: with a real model, sampling n candidates and selecting
with filter + execution-agreement voting should score at least as well as
a single greedy decode. Needs a reachable endpoint and a task suite:

    export EXECRANK_BASE_URL=http://localhost:8000/v1
    export EXECRANK_MODEL=codellama/CodeLlama-7b-Instruct-hf
    export OPENAI_API_KEY=...            # if the endpoint wants one
    python demos/05_live_endpoint_check.py path/to/suite.jsonl

Use a subset of at least 20 tasks and expect several minutes of runtime;
results land in ./live_check_cache so reruns are incremental.
"""

import os
import sys
import tempfile

from execrank import ExperimentConfig, method_from_name, run_experiment

base_url = os.environ.get("EXECRANK_BASE_URL")
model_id = os.environ.get("EXECRANK_MODEL")
if not base_url or not model_id or len(sys.argv) != 2:
    print(__doc__)
    sys.exit(1)

config = ExperimentConfig(
    suite_path=sys.argv[1],
    model_id=model_id,
    base_url=base_url,
    temperature=1.6,
    nucleus_p=0.95,
    candidate_counts=(1, 5, 10),
    methods=(
        method_from_name("greedy"),
        method_from_name("filter+mbr_exec"),
    ),
    repetitions=1,
    per_test_timeout=6.0,
    cache_dir="live_check_cache",
    workers=os.cpu_count() or 4,
)

report = run_experiment(config)
digest = report.to_dict()
greedy = digest["methods"]["greedy"]["mean_accuracy"]
selected = digest["methods"]["filter+mbr_exec"]["mean_accuracy"]
print(f"greedy accuracy:          {greedy}")
print(f"filter+vote accuracy:     {selected}")
print(f"oracle pass@10 (original): {digest['pass_at_k_mean']['original']['10']:.4f}")
if report.quarantined:
    print(f"quarantined tasks: {len(report.quarantined)}")
better = selected["original"] >= greedy["original"]
print(f"\ndirectional claim holds on this suite: {better}")
sys.exit(0 if better else 2)
