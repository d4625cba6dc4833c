"""Benchmark task suites: prompts, entry points, and unit-test partitions.

A task carries two disjoint groups of tests:

* trial tests -- the few assertions shipped with the prompt, usable for
  filtering candidates and for building debug feedback;
* evaluation tests -- held-out assertions, tagged ``original`` or
  ``extended``, whose inputs drive output signatures and whose verdicts
  define accuracy.

Suites are line-delimited JSON, one task per line (see ``load_task_suite``).
"""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

ASSERTION_KIND = "assert"
INPUT_ONLY_KIND = "input"

PARTITIONS = ("original", "extended")


class TaskFormatError(ValueError):
    """A suite file violates the task record format."""


class DuplicateTaskIdError(TaskFormatError):
    """Two task records share an id."""


class NoTrialTestsError(ValueError):
    """An operation that needs trial tests was asked to run on a task without any."""

    def __init__(self, task_id: str):
        super().__init__(f"task {task_id!r} has no trial tests")
        self.task_id = task_id


@dataclass(frozen=True)
class UnitTest:
    """One unit test: either a standalone assertion program or a bare input.

    ``code`` holds the assertion program for ``assert``-kind tests.
    ``input_expr`` holds the call expression whose output is captured for
    signatures; for assertion tests it is derived from the assertion's
    left-hand side when possible.
    """

    index: int
    kind: str
    partition: str = "original"
    code: str | None = None
    input_expr: str | None = None

    def __post_init__(self):
        if self.kind not in (ASSERTION_KIND, INPUT_ONLY_KIND):
            raise TaskFormatError(f"unknown test kind: {self.kind!r}")
        if self.partition not in PARTITIONS:
            raise TaskFormatError(f"unknown partition: {self.partition!r}")
        if self.kind == INPUT_ONLY_KIND and self.code is not None:
            raise TaskFormatError("input-only tests must not carry an expected value")
        if self.kind == ASSERTION_KIND and not self.code:
            raise TaskFormatError("assertion tests require code")

    @property
    def assertion_display(self) -> str | None:
        """The assertion text without the leading ``assert``, for feedback."""
        if self.code is None:
            return None
        stripped = self.code.strip()
        if stripped.startswith("assert "):
            return stripped[len("assert "):].strip()
        return stripped


@dataclass(frozen=True)
class Task:
    id: str
    prompt: str
    entry_point: str
    trial_tests: tuple[UnitTest, ...]
    eval_tests: tuple[UnitTest, ...]

    def __post_init__(self):
        if not self.entry_point:
            raise TaskFormatError(f"task {self.id!r}: entry_point is empty")
        _check_contiguous(self.id, "trial", [t.index for t in self.trial_tests])
        for partition in PARTITIONS:
            indices = [t.index for t in self.eval_tests if t.partition == partition]
            _check_contiguous(self.id, partition, indices)

    @property
    def has_trial_tests(self) -> bool:
        return bool(self.trial_tests)

    def require_trial_tests(self) -> tuple[UnitTest, ...]:
        if not self.trial_tests:
            raise NoTrialTestsError(self.id)
        return self.trial_tests

    def eval_tests_for(self, partition: str) -> tuple[UnitTest, ...]:
        if partition not in PARTITIONS:
            raise ValueError(f"unknown partition: {partition!r}")
        return tuple(t for t in self.eval_tests if t.partition == partition)


@dataclass(frozen=True)
class TaskSuite:
    name: str
    tasks: tuple[Task, ...]
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self):
        return len(self.tasks)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)


def _check_contiguous(task_id: str, group: str, indices: list[int]) -> None:
    if sorted(indices) != list(range(len(indices))):
        raise TaskFormatError(
            f"task {task_id!r}: {group} test indices must be unique and contiguous "
            f"from 0, got {sorted(indices)}"
        )


def derive_input_expr(code: str) -> str | None:
    """Extract the call expression to capture from an assertion program.

    For ``assert f(x) == expected`` the left-hand side ``f(x)`` is returned;
    for a bare ``assert expr`` the whole expression is. Returns None when the
    code has no assert statement or does not parse.
    """
    try:
        tree = ast.parse(code)
    except SyntaxError:
        return None
    for node in ast.walk(tree):
        if isinstance(node, ast.Assert):
            test = node.test
            expr = test.left if isinstance(test, ast.Compare) else test
            return ast.unparse(expr)
    return None


def _parse_trial_test(task_id: str, raw: dict) -> UnitTest:
    if "code" not in raw or "index" not in raw:
        raise TaskFormatError(f"task {task_id!r}: trial test needs 'code' and 'index'")
    code = raw["code"]
    return UnitTest(
        index=int(raw["index"]),
        kind=ASSERTION_KIND,
        partition="original",
        code=code,
        input_expr=derive_input_expr(code),
    )


def _parse_eval_test(task_id: str, raw: dict) -> UnitTest:
    for name in ("partition", "index"):
        if name not in raw:
            raise TaskFormatError(f"task {task_id!r}: eval test needs {name!r}")
    code = raw.get("code")
    input_expr = raw.get("input_expr")
    if code is None and input_expr is None:
        raise TaskFormatError(
            f"task {task_id!r}: eval test needs 'code' or 'input_expr'"
        )
    if code is not None:
        return UnitTest(
            index=int(raw["index"]),
            kind=ASSERTION_KIND,
            partition=raw["partition"],
            code=code,
            input_expr=input_expr or derive_input_expr(code),
        )
    return UnitTest(
        index=int(raw["index"]),
        kind=INPUT_ONLY_KIND,
        partition=raw["partition"],
        input_expr=input_expr,
    )


REQUIRED_TASK_FIELDS = ("id", "prompt", "entry_point", "trial_tests", "eval_tests")


def load_task_suite(path: str | Path) -> TaskSuite:
    """Load a line-delimited task suite; rejects duplicate ids and bad records.

    A task with an empty trial-test list loads fine; the error is raised only
    when a filtering or self-debugging run actually needs those tests.
    """
    path = Path(path)
    raw_bytes = path.read_bytes()
    tasks: list[Task] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw_bytes.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TaskFormatError(f"{path.name}:{lineno}: invalid JSON: {exc}") from exc
        missing = [name for name in REQUIRED_TASK_FIELDS if name not in record]
        if missing:
            raise TaskFormatError(
                f"{path.name}:{lineno}: missing fields: {', '.join(missing)}"
            )
        task_id = record["id"]
        if task_id in seen:
            raise DuplicateTaskIdError(f"{path.name}:{lineno}: duplicate task id {task_id!r}")
        seen.add(task_id)
        try:
            task = Task(
                id=task_id,
                prompt=record["prompt"],
                entry_point=record["entry_point"],
                trial_tests=tuple(_parse_trial_test(task_id, t) for t in record["trial_tests"]),
                eval_tests=tuple(_parse_eval_test(task_id, t) for t in record["eval_tests"]),
            )
        except TaskFormatError as exc:
            raise TaskFormatError(f"{path.name}:{lineno}: {exc}") from exc
        tasks.append(task)
    return TaskSuite(
        name=path.stem,
        tasks=tuple(tasks),
        metadata={
            "source": path.name,
            "content_sha256": hashlib.sha256(raw_bytes).hexdigest(),
        },
    )


def select_eval_tests(task: Task, m: int) -> list[UnitTest]:
    """First ``m`` evaluation tests, original partition first, then extended.

    Within a partition tests keep their index order, so the selection for a
    smaller ``m`` is always a prefix of the selection for a larger one.
    ``m`` beyond the number of available tests clamps to all of them.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    ordered = sorted(
        task.eval_tests, key=lambda t: (PARTITIONS.index(t.partition), t.index)
    )
    return ordered[: min(m, len(ordered))]
