"""Five-task fixture with a fully scripted endpoint.

Every candidate's trial/evaluation behavior and every debug completion is
fixed, so the winner of each selection method was enumerated by hand:

fx-001 (add): the two agreeing candidates are wrong (a*b); only filtering
    rescues the correct a+b candidate. No debug fixes are scripted.
fx-002 (double): every candidate passes the trial test; two signature
    classes tie 2-2, so the smallest index wins; a scripted log-likelihood
    ordering makes the LL tie-breaker pick a wrong candidate.
fx-003 (last): nothing passes the trial test (wrong, two NameErrors that
    agree by error class, one infinite loop), exercising the filter
    fallback; debugging fixes all but one candidate.
fx-004 (mx): one correct candidate plus three failing ones, two of which
    have scripted fixes; the post-debug vote keeps the correct original.
fx-005 (even): a wrong candidate passes the trial test and wins pre-debug;
    debugging the two failing candidates grows the correct signature
    cluster, flipping the winner.
"""

from execrank.llm_client import ScriptRule, ScriptedTransport
from execrank.pipeline import ExperimentConfig, method_from_name
from execrank.rerank import pass_at_k

MODEL = "mock-model"


def _fenced(code):
    return f"```python\n{code}\n```"


def _fix(code):
    return (
        "incorrect. Please fix it. Make sure the code included in instruction "
        "will be executed correctly. Watch out for function/variable names, "
        "exception handling, and other errors.\n\n### fixed code\n"
        f"{_fenced(code)}\n### task end ###"
    )


NO_FIX = "incorrect. The function cannot be repaired automatically."

LAST_FIX = "def last(xs):\n    return xs[-1]"
MX_LOOP_FIX = (
    "def mx(xs):\n    m = xs[0]\n    for v in xs:\n        if v > m:\n"
    "            m = v\n    return m"
)
MX_SORT_FIX = "def mx(xs):\n    return sorted(xs)[-1]"
EVEN_FIX = "def even(n):\n    return n % 2 == 0"

FIXTURE = {
    "fx-001": {
        "entry": "add",
        "prompt": 'def add(a, b):\n    """Add the two numbers. fx-001"""\n',
        "trial": ["assert add(1, 2) == 3"],
        "evals": [
            ("assert add(2, 3) == 5", "original"),
            ("assert add(0, 0) == 0", "original"),
            ("assert add(-1, -2) == -3", "extended"),
        ],
        "candidates": [
            "def add(a, b):\n    return a * b",
            "def add(a, b):\n    b, a = a, b\n    return a * b",
            "def add(a, b):\n    return a + b",
            "def add(a, b):\n    return a - b",
        ],
        "logprobs": [[-0.2], [-0.3], [-0.4], [-0.5]],
        "greedy": "def add(a, b):\n    return a + b + 1",
        "fixes": {},  # nothing is repairable; the catch-all rule answers unfenced
    },
    "fx-002": {
        "entry": "double",
        "prompt": 'def double(x):\n    """Double the input. fx-002"""\n',
        "trial": ["assert double(2) == 4"],
        "evals": [
            ("assert double(3) == 6", "original"),
            ("assert double(0) == 0", "original"),
            ("assert double(-2) == -4", "extended"),
        ],
        "candidates": [
            "def double(x):\n    return x * 2",
            "def double(x):\n    return x + x",
            "def double(x):\n    return x * x",
            "def double(x):\n    return x ** 2",
        ],
        "logprobs": [[-2.0], [-1.5], [-0.5], [-1.0]],
        "greedy": "def double(x):\n    return 2 * x",
        "fixes": {},
    },
    "fx-003": {
        "entry": "last",
        "prompt": 'def last(xs):\n    """Return the last element. fx-003"""\n',
        "trial": ["assert last([1, 2]) == 2"],
        "evals": [
            ("assert last([3, 4]) == 4", "original"),
            ("assert last([5]) == 5", "original"),
            ("assert last([7, 8, 9]) == 9", "extended"),
        ],
        "candidates": [
            "def last(xs):\n    return xs[0]",
            "def last(xs):\n    return helper(xs)",
            "def last(xs):\n    return missing(xs)",
            "def last(xs):\n    while True:\n        xs = xs",
        ],
        "logprobs": [[-1.0], [-2.0], [-1.2], [-3.0]],
        "greedy": "def last(xs):\n    return xs[-1]",
        "fixes": {
            "def last(xs):\n    return xs[0]": LAST_FIX,
            "def last(xs):\n    return helper(xs)": LAST_FIX,
            "def last(xs):\n    return missing(xs)": None,
            "def last(xs):\n    while True:\n        xs = xs": LAST_FIX,
        },
    },
    "fx-004": {
        "entry": "mx",
        "prompt": 'def mx(xs):\n    """Return the maximum. fx-004"""\n',
        "trial": ["assert mx([1, 3, 2]) == 3"],
        "evals": [
            ("assert mx([4, 1]) == 4", "original"),
            ("assert mx([0]) == 0", "original"),
            ("assert mx([-5, -2]) == -2", "extended"),
        ],
        "candidates": [
            "def mx(xs):\n    return max(xs)",
            "def mx(xs):\n    return xs[0]",
            "def mx(xs):\n    return min(xs)",
            "def mx(xs):\n    return 0",
        ],
        "logprobs": [[-1.0], [-1.0], [-1.0], [-1.0]],
        "greedy": "def mx(xs):\n    return xs[-1]",
        "fixes": {
            "def mx(xs):\n    return xs[0]": MX_LOOP_FIX,
            "def mx(xs):\n    return min(xs)": MX_SORT_FIX,
            "def mx(xs):\n    return 0": None,
        },
    },
    "fx-005": {
        "entry": "even",
        "prompt": 'def even(n):\n    """True if n is even. fx-005"""\n',
        "trial": ["assert even(2) == True"],
        "evals": [
            ("assert even(4) == True", "original"),
            ("assert even(3) == False", "original"),
            ("assert even(0) == True", "extended"),
        ],
        "candidates": [
            "def even(n):\n    return n >= 0",
            "def even(n):\n    return n % 2 == 1",
            "def even(n):\n    return n % 2 == 0",
            "def even(n):\n    return bool(n % 2)",
        ],
        "logprobs": [[-0.5], [-1.0], [-2.0], [-3.0]],
        "greedy": "def even(n):\n    return n > 0",
        "fixes": {
            "def even(n):\n    return n % 2 == 1": EVEN_FIX,
            "def even(n):\n    return bool(n % 2)": EVEN_FIX,
        },
    },
}

METHOD_NAMES = [
    "greedy",
    "random",
    "filter",
    "mbr_exec",
    "filter+mbr_exec",
    "filter+ll+mbr_exec",
    "sd1",
    "sdmulti",
]

# Hand-enumerated winners (candidate index chosen per task and method).
EXPECTED_CHOSEN = {
    "fx-001": {"filter": 2, "mbr_exec": 0, "filter+mbr_exec": 2,
               "filter+ll+mbr_exec": 2, "sd1": 2, "sdmulti": 2},
    "fx-002": {"filter": 0, "mbr_exec": 0, "filter+mbr_exec": 0,
               "filter+ll+mbr_exec": 2, "sd1": 0, "sdmulti": 0},
    "fx-003": {"filter": 0, "mbr_exec": 1, "filter+mbr_exec": 1,
               "filter+ll+mbr_exec": 2, "sd1": 1, "sdmulti": 0},
    "fx-004": {"filter": 0, "mbr_exec": 0, "filter+mbr_exec": 0,
               "filter+ll+mbr_exec": 0, "sd1": 0, "sdmulti": 0},
    "fx-005": {"filter": 0, "mbr_exec": 1, "filter+mbr_exec": 0,
               "filter+ll+mbr_exec": 0, "sd1": 0, "sdmulti": 1},
}

# Hand-enumerated per-method accuracy over the five tasks.
EXPECTED_MEAN_ACCURACY = {
    "greedy": {"original": 0.4, "extended": 0.6},
    "random": {"original": 0.3, "extended": 0.3},
    "filter": {"original": 0.6, "extended": 0.8},
    "mbr_exec": {"original": 0.4, "extended": 0.4},
    "filter+mbr_exec": {"original": 0.6, "extended": 0.8},
    "filter+ll+mbr_exec": {"original": 0.4, "extended": 0.6},
    "sd1": {"original": 0.8, "extended": 1.0},
    "sdmulti": {"original": 1.0, "extended": 1.0},
}

# Hand-counted fully-passing candidates per task (pool of 4).
EXPECTED_PASS_COUNTS = {
    "original": {"fx-001": 1, "fx-002": 2, "fx-003": 0, "fx-004": 2, "fx-005": 1},
    "extended": {"fx-001": 1, "fx-002": 2, "fx-003": 0, "fx-004": 1, "fx-005": 2},
}


def expected_pass_at_k(partition, k):
    counts = EXPECTED_PASS_COUNTS[partition]
    values = [pass_at_k(4, c, k) for c in counts.values()]
    return sum(values) / len(values)


def suite_records():
    records = []
    for task_id, spec in FIXTURE.items():
        counters = {"original": 0, "extended": 0}
        eval_tests = []
        for code, partition in spec["evals"]:
            eval_tests.append(
                {"code": code, "partition": partition, "index": counters[partition]}
            )
            counters[partition] += 1
        records.append(
            {
                "id": task_id,
                "prompt": spec["prompt"],
                "entry_point": spec["entry"],
                "trial_tests": [
                    {"code": code, "index": i} for i, code in enumerate(spec["trial"])
                ],
                "eval_tests": eval_tests,
            }
        )
    return records


def write_fixture_suite(path):
    import json

    path.write_text(
        "\n".join(json.dumps(r) for r in suite_records()) + "\n", encoding="utf-8"
    )
    return path


def build_transport():
    rules = []
    # Debug rules first: they demand the feedback marker plus the exact
    # fenced candidate code, so nothing else can shadow them.
    for task_id, spec in FIXTURE.items():
        for code, fix in spec["fixes"].items():
            rules.append(
                ScriptRule(
                    match=("###feedback", task_id, _fenced(code)),
                    completions=[_fix(fix) if fix else NO_FIX],
                    greedy=True,
                )
            )
        rules.append(
            ScriptRule(match=("###feedback", task_id), completions=[NO_FIX], greedy=True)
        )
    for task_id, spec in FIXTURE.items():
        rules.append(
            ScriptRule(
                match=(task_id,),
                completions=[_fenced(spec["greedy"])],
                token_logprobs=[[-0.1]],
                greedy=True,
            )
        )
        rules.append(
            ScriptRule(
                match=(task_id,),
                completions=[_fenced(code) for code in spec["candidates"]],
                token_logprobs=spec["logprobs"],
                greedy=False,
            )
        )
    return ScriptedTransport(rules)


def build_config(tmp_path, **overrides):
    suite_path = tmp_path / "fixture_suite.jsonl"
    if not suite_path.exists():
        write_fixture_suite(suite_path)
    settings = {
        "suite_path": str(suite_path),
        "model_id": MODEL,
        "candidate_counts": (1, 2, 4),
        "methods": tuple(method_from_name(name) for name in METHOD_NAMES),
        "repetitions": 2,
        "base_seed": 11,
        "per_test_timeout": 0.6,
        "cache_dir": str(tmp_path / "cache"),
        "workers": 4,
        "style": "mbpp",
        "max_tokens": 512,
    }
    settings.update(overrides)
    return ExperimentConfig(**settings)
