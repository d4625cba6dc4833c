"""Run untrusted candidate programs against unit tests in isolated processes.

Each (candidate, test) pair gets a fresh driver process by default, so state
leaked by one test can never touch another. The parent enforces the wall-clock
budget (hard kill after budget + grace) and the address-space limit; candidate
failures of any kind come back as data, never as harness exceptions.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .tasks import Task, UnitTest

GRACE_SECONDS = 1.0

TRUNCATION_MARKER = "...[truncated]"

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"


class SandboxSpawnError(RuntimeError):
    """The driver process could not be spawned or violated its protocol."""


class SignatureInputError(ValueError):
    """An evaluation test has no usable input expression."""


class ReprError(ValueError):
    """A value has no canonical textual form."""


@dataclass(frozen=True)
class ExecutionBudget:
    per_test_timeout: float = 5.0
    memory_limit: int = 512 * 1024 * 1024
    max_output_bytes: int = 8192

    def __post_init__(self):
        if self.per_test_timeout <= 0 or self.memory_limit <= 0 or self.max_output_bytes <= 0:
            raise ValueError("all budget fields must be positive")

    def to_dict(self) -> dict:
        return {
            "per_test_timeout": self.per_test_timeout,
            "memory_limit": self.memory_limit,
            "max_output_bytes": self.max_output_bytes,
        }


@dataclass(frozen=True)
class ExecutionOutcome:
    """Result of one test run: pass, fail, error(class), or timeout."""

    status: str
    error_class: str | None = None
    detail: str | None = None
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status not in (STATUS_PASS, STATUS_FAIL, STATUS_ERROR, STATUS_TIMEOUT):
            raise ValueError(f"unknown status: {self.status!r}")
        if self.status == STATUS_ERROR and not self.error_class:
            raise ValueError("error outcomes must carry an exception class name")

    @property
    def passed(self) -> bool:
        return self.status == STATUS_PASS

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "error_class": self.error_class,
            "detail": self.detail,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExecutionOutcome":
        return cls(
            status=raw["status"],
            error_class=raw.get("error_class"),
            detail=raw.get("detail"),
            wall_time=raw.get("wall_time", 0.0),
        )


# Signature entries are (kind, payload) pairs: ("value", canonical repr),
# ("error", class name), or ("timeout", ""). Errors and timeouts take part in
# equality on purpose: two candidates crashing identically do agree.
SignatureEntry = tuple[str, str]


@dataclass(frozen=True)
class OutputSignature:
    """Canonical outputs of one candidate on the evaluation-test inputs."""

    entries: tuple[SignatureEntry, ...]

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"entries": [list(e) for e in self.entries]}

    @classmethod
    def from_dict(cls, raw: dict) -> "OutputSignature":
        return cls(entries=tuple((e[0], e[1]) for e in raw["entries"]))


def canonicalize_output(value, max_output_bytes: int = 8192) -> str:
    """Deterministic literal form of a value, truncated with an explicit marker.

    Must stay byte-identical to the driver's canonicalization: both sides of
    the process boundary produce entries that are compared for exact match.
    """
    try:
        text = repr(value)
    except BaseException as exc:
        raise ReprError(str(exc)) from exc
    encoded = text.encode("utf-8")
    if len(encoded) > max_output_bytes:
        text = encoded[:max_output_bytes].decode("utf-8", errors="ignore") + TRUNCATION_MARKER
    return text


def _default_driver() -> Path:
    env = os.environ.get("EXECRANK_DRIVER")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "driver" / "exec_driver.py"


@dataclass(frozen=True)
class DriverJob:
    candidate_source: str
    test_program: str
    mode: str  # "assert" | "capture"


@dataclass
class DriverResult:
    timed_out: bool
    record: dict | None
    wall_time: float


def _run_job(job: DriverJob, budget: ExecutionBudget, driver: Path) -> DriverResult:
    if not driver.is_file():
        raise SandboxSpawnError(f"driver not found at {driver}")
    request = json.dumps(
        {
            "candidate_source": job.candidate_source,
            "test_program": job.test_program,
            "mode": job.mode,
            "output_byte_limit": budget.max_output_bytes,
        }
    )
    command = [
        sys.executable,
        "-I",
        str(driver),
        "--rlimit-as",
        str(budget.memory_limit),
    ]
    start = time.monotonic()
    try:
        process = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        raise SandboxSpawnError(f"cannot spawn driver: {exc}") from exc
    try:
        stdout, stderr = process.communicate(request, timeout=budget.per_test_timeout)
    except subprocess.TimeoutExpired:
        process.kill()
        process.communicate()
        return DriverResult(timed_out=True, record=None, wall_time=time.monotonic() - start)
    wall_time = time.monotonic() - start
    if process.returncode != 0:
        raise SandboxSpawnError(
            f"driver exited with {process.returncode}: {stderr.strip()[:500]}"
        )
    record = None
    for line in reversed(stdout.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            break
        except json.JSONDecodeError:
            continue
    if record is None:
        raise SandboxSpawnError(f"driver produced no record (stdout: {stdout[:200]!r})")
    return DriverResult(timed_out=False, record=record, wall_time=wall_time)


def run_jobs(jobs: list[DriverJob], budget: ExecutionBudget, *, workers: int = 1,
             driver: Path | None = None) -> list[DriverResult]:
    """Execute independent driver jobs on a bounded pool, preserving order."""
    driver = driver or _default_driver()
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job, budget, driver) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _run_job(job, budget, driver), jobs))


def _outcome_from(result: DriverResult) -> ExecutionOutcome:
    if result.timed_out:
        return ExecutionOutcome(status=STATUS_TIMEOUT, wall_time=result.wall_time)
    record = result.record
    status = record["status"]
    if status == "pass":
        return ExecutionOutcome(status=STATUS_PASS, wall_time=result.wall_time)
    if status == "fail":
        return ExecutionOutcome(
            status=STATUS_FAIL, detail=record.get("detail"), wall_time=result.wall_time
        )
    return ExecutionOutcome(
        status=STATUS_ERROR,
        error_class=record.get("error_class") or "Exception",
        detail=record.get("detail"),
        wall_time=result.wall_time,
    )


def run_trial_tests(code: str, task: Task, budget: ExecutionBudget, *,
                    workers: int = 1, driver: Path | None = None) -> list[ExecutionOutcome]:
    """One outcome per trial test, in test order, each in a fresh process."""
    trial = task.require_trial_tests()
    jobs = [DriverJob(code, test.code, "assert") for test in trial]
    return [_outcome_from(r) for r in run_jobs(jobs, budget, workers=workers, driver=driver)]


def run_assert_tests(code: str, tests: list[UnitTest], budget: ExecutionBudget, *,
                     workers: int = 1, driver: Path | None = None) -> list[ExecutionOutcome]:
    """Run assertion tests (e.g. the evaluation partitions) against a candidate."""
    jobs = [DriverJob(code, test.code, "assert") for test in tests]
    return [_outcome_from(r) for r in run_jobs(jobs, budget, workers=workers, driver=driver)]


def _entry_from(result: DriverResult) -> SignatureEntry:
    if result.timed_out:
        return (STATUS_TIMEOUT, "")
    record = result.record
    if record["status"] == "value":
        return ("value", record["value_repr"])
    return (STATUS_ERROR, record.get("error_class") or "Exception")


def compute_signature(code: str, eval_inputs: list[UnitTest], budget: ExecutionBudget, *,
                      workers: int = 1, driver: Path | None = None) -> OutputSignature:
    """Canonical output vector of a candidate over the evaluation-test inputs."""
    expressions = []
    for test in eval_inputs:
        if not test.input_expr:
            raise SignatureInputError(
                f"evaluation test {test.partition}/{test.index} has no input expression"
            )
        expressions.append(test.input_expr)
    jobs = [DriverJob(code, expr, "capture") for expr in expressions]
    results = run_jobs(jobs, budget, workers=workers, driver=driver)
    return OutputSignature(entries=tuple(_entry_from(r) for r in results))


def capture_values(code: str, tests: list[UnitTest], budget: ExecutionBudget, *,
                   workers: int = 1, driver: Path | None = None) -> list[str | None]:
    """Canonical value of each test's input expression, None where unavailable.

    Used to show "the real execution output" in debug feedback; errors and
    timeouts yield None because the error block carries that information.
    """
    jobs, slots = [], []
    for i, test in enumerate(tests):
        if test.input_expr:
            jobs.append(DriverJob(code, test.input_expr, "capture"))
            slots.append(i)
    values: list[str | None] = [None] * len(tests)
    for slot, result in zip(slots, run_jobs(jobs, budget, workers=workers, driver=driver)):
        if not result.timed_out and result.record["status"] == "value":
            values[slot] = result.record["value_repr"]
    return values


def run_candidate_batch(code: str, tests: list[UnitTest], budget: ExecutionBudget, *,
                        driver: Path | None = None) -> list[ExecutionOutcome]:
    """Opt-in throughput mode: one process runs all of a candidate's tests.

    The namespace is rebuilt between tests but the interpreter is shared, so
    this mode trades isolation for speed and is disallowed for acceptance
    runs. The wall budget covers the whole batch.
    """
    driver = driver or _default_driver()
    if not driver.is_file():
        raise SandboxSpawnError(f"driver not found at {driver}")
    requests = "\n".join(
        json.dumps(
            {
                "candidate_source": code,
                "test_program": test.code,
                "mode": "assert",
                "output_byte_limit": budget.max_output_bytes,
            }
        )
        for test in tests
    )
    deadline = budget.per_test_timeout * max(len(tests), 1)
    start = time.monotonic()
    try:
        process = subprocess.run(
            [sys.executable, "-I", str(driver), "--batch", "--rlimit-as",
             str(budget.memory_limit)],
            input=requests + "\n",
            capture_output=True,
            text=True,
            timeout=deadline,
        )
    except subprocess.TimeoutExpired:
        elapsed = time.monotonic() - start
        return [ExecutionOutcome(status=STATUS_TIMEOUT, wall_time=elapsed)] * len(tests)
    except OSError as exc:
        raise SandboxSpawnError(f"cannot spawn driver: {exc}") from exc
    if process.returncode != 0:
        raise SandboxSpawnError(f"driver exited with {process.returncode}")
    elapsed = time.monotonic() - start
    outcomes = []
    for line in process.stdout.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        outcomes.append(
            _outcome_from(DriverResult(timed_out=False, record=record,
                                       wall_time=elapsed / max(len(tests), 1)))
        )
    if len(outcomes) != len(tests):
        raise SandboxSpawnError(
            f"batch driver returned {len(outcomes)} records for {len(tests)} tests"
        )
    return outcomes
