"""Unit-test-feedback self-debugging, in two regimes.

``sd_one`` debugs only the already-selected candidate, up to three greedy
rounds with early stop on trial-test success. ``sd_multi`` debugs every
candidate that fails its trial tests (one round by default) and hands the
full set back for re-execution and reranking; indices are preserved so the
tie-breaking order carries over.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .llm_client import (
    Candidate,
    CandidateOrigin,
    EndpointRejectedError,
    LlmClient,
    PartialBatchError,
    TransportError,
    extract_code,
)
from .prompts import selfdebug_prompt
from .rerank import SelectionResult
from .sandbox import ExecutionOutcome
from .tasks import Task

VERDICT_CORRECT = "The code above is correct."
VERDICT_INCORRECT = (
    "The code above is incorrect. Please fix it. Make sure the code included in "
    "instruction will be executed correctly. Watch out for function/variable "
    "names, exception handling, and other errors."
)

# (outcomes, captured-lhs-values) for a piece of code, in trial-test order.
TrialRunner = Callable[[str], tuple[list[ExecutionOutcome], list[str | None]]]

_GENERATION_ERRORS = (TransportError, EndpointRejectedError, PartialBatchError)


@dataclass(frozen=True)
class DebugFeedback:
    """Rendered execution feedback, one line (or error block) per trial test."""

    lines: tuple[str, ...]
    verdict: str  # "correct" | "incorrect"

    def test_block(self) -> str:
        return "\n".join(self.lines)

    def render(self) -> str:
        sentence = VERDICT_CORRECT if self.verdict == "correct" else VERDICT_INCORRECT
        return self.test_block() + "\n" + sentence

    def compact(self) -> "DebugFeedback":
        """Keep only the first non-passing line; used when prompts would overflow."""
        for line in self.lines:
            if "The code passes the assertion." not in line:
                return DebugFeedback(lines=(line,), verdict=self.verdict)
        return DebugFeedback(lines=self.lines[:1], verdict=self.verdict)


@dataclass(frozen=True)
class DebugRound:
    prompt: str
    completion: str
    code: str
    outcomes: tuple[ExecutionOutcome, ...]
    extraction_failed: bool = False


@dataclass
class DebugTrace:
    parent_index: int
    rounds: list[DebugRound]
    terminal_reason: str  # "passed" | "max_rounds" | "generation_failed"


def build_feedback(task: Task, outcomes: list[ExecutionOutcome],
                   captured: list[str | None]) -> DebugFeedback:
    """Render per-test feedback in the few-shot format the debug prompt uses."""
    trial = task.require_trial_tests()
    if len(outcomes) != len(trial):
        raise ValueError(
            f"{len(outcomes)} outcomes for {len(trial)} trial tests of task {task.id!r}"
        )
    lines = []
    for test, outcome, actual in zip(trial, outcomes, captured):
        assertion = test.assertion_display
        if outcome.status == "pass":
            shown = actual if actual is not None else "?"
            lines.append(
                f"With the above function, the assertion is `{assertion}` and the "
                f"real execution output is `{shown}`. The code passes the assertion."
            )
        elif outcome.status == "fail":
            if actual is not None:
                lines.append(
                    f"With the above function, the assertion is `{assertion}` but "
                    f"the real execution output is `{actual}`."
                )
            else:
                lines.append(
                    f"With the above function, the assertion is `{assertion}` but "
                    "the assertion failed."
                )
        elif outcome.status == "timeout":
            lines.append(
                "With the above function, there`s following error:\n"
                '"""\nTimeoutError: execution timed out\n"""'
            )
        else:
            detail = f"{outcome.error_class}: {outcome.detail}" if outcome.detail \
                else str(outcome.error_class)
            lines.append(
                "With the above function, there`s following error:\n"
                f'"""\n{detail}\n"""'
            )
    verdict = "correct" if all(o.passed for o in outcomes) else "incorrect"
    return DebugFeedback(lines=tuple(lines), verdict=verdict)


def _unit_test_block(task: Task) -> str:
    return "\n".join(test.code.strip() for test in task.require_trial_tests())


def debug_round(client: LlmClient, candidate: Candidate, task: Task,
                feedback: DebugFeedback, *, style: str, model_id: str,
                round_number: int, max_tokens: int = 1024,
                max_prompt_chars: int | None = None) -> tuple[Candidate, str, str, bool]:
    """One greedy repair attempt; returns (candidate, prompt, completion, extraction_failed).

    A completion without a fenced block keeps the parent code: an unfenced
    "fix" is an extraction failure, not a new program.
    """
    if not candidate.code:
        raise ValueError(f"candidate {candidate.index} has no code to debug")
    prompt = selfdebug_prompt(
        instruction=task.prompt.strip(),
        unit_test=_unit_test_block(task),
        code=candidate.code,
        feedback=feedback.test_block(),
        style=style,
    )
    if max_prompt_chars is not None and len(prompt) > max_prompt_chars:
        prompt = selfdebug_prompt(
            instruction=task.prompt.strip(),
            unit_test=_unit_test_block(task),
            code=candidate.code,
            feedback=feedback.compact().test_block(),
            style=style,
        )
    completion = client.greedy_complete(prompt, model_id, max_tokens=max_tokens)
    extraction = extract_code(completion)
    if not extraction.fenced or not extraction.ok:
        return candidate, prompt, completion, True
    fixed = Candidate(
        index=candidate.index,
        raw_completion=completion,
        code=extraction.code,
        token_logprobs=None,
        origin=CandidateOrigin("debugged", round=round_number,
                               parent_index=candidate.index),
        fenced=True,
    )
    return fixed, prompt, completion, False


def _debug_loop(client: LlmClient, trial_runner: TrialRunner, candidate: Candidate,
                task: Task, *, max_rounds: int, style: str, model_id: str,
                max_tokens: int, max_prompt_chars: int | None) -> tuple[Candidate, DebugTrace]:
    trace = DebugTrace(parent_index=candidate.index, rounds=[], terminal_reason="max_rounds")
    current = candidate
    outcomes, captured = trial_runner(current.code)
    if all(o.passed for o in outcomes):
        trace.terminal_reason = "passed"
        return current, trace
    for round_number in range(1, max_rounds + 1):
        feedback = build_feedback(task, outcomes, captured)
        try:
            fixed, prompt, completion, extraction_failed = debug_round(
                client, current, task, feedback,
                style=style, model_id=model_id, round_number=round_number,
                max_tokens=max_tokens, max_prompt_chars=max_prompt_chars,
            )
        except _GENERATION_ERRORS:
            trace.terminal_reason = "generation_failed"
            return current, trace
        if extraction_failed or fixed.code == current.code:
            # Same code, same outcomes; record the round without re-executing.
            trace.rounds.append(DebugRound(
                prompt=prompt, completion=completion, code=current.code,
                outcomes=tuple(outcomes), extraction_failed=extraction_failed,
            ))
            continue
        current = fixed
        outcomes, captured = trial_runner(current.code)
        trace.rounds.append(DebugRound(
            prompt=prompt, completion=completion, code=current.code,
            outcomes=tuple(outcomes), extraction_failed=False,
        ))
        if all(o.passed for o in outcomes):
            trace.terminal_reason = "passed"
            break
    return current, trace


def sd_one(client: LlmClient, trial_runner: TrialRunner, candidates: list[Candidate],
           selection: SelectionResult, task: Task, *, max_rounds: int = 3,
           style: str = "mbpp", model_id: str, max_tokens: int = 1024,
           max_prompt_chars: int | None = None) -> tuple[Candidate, DebugTrace]:
    """Debug only the selected candidate, up to ``max_rounds`` greedy rounds."""
    if not 0 <= selection.chosen_index < len(candidates):
        raise ValueError(f"selection index {selection.chosen_index} out of range")
    return _debug_loop(
        client, trial_runner, candidates[selection.chosen_index], task,
        max_rounds=max_rounds, style=style, model_id=model_id,
        max_tokens=max_tokens, max_prompt_chars=max_prompt_chars,
    )


def sd_multi(client: LlmClient, trial_runner: TrialRunner, candidates: list[Candidate],
             task: Task, *, rounds: int = 1, style: str = "mbpp", model_id: str,
             max_tokens: int = 1024,
             max_prompt_chars: int | None = None) -> tuple[list[Candidate], list[DebugTrace]]:
    """Debug every candidate failing its trial tests; passing ones come back untouched.

    The output has the same length and index order as the input, so selection
    over the debugged set keeps the original tie-breaking semantics.
    """
    if not candidates:
        raise ValueError("sd_multi needs a non-empty candidate set")
    debugged: list[Candidate] = []
    traces: list[DebugTrace] = []
    for candidate in candidates:
        final, trace = _debug_loop(
            client, trial_runner, candidate, task,
            max_rounds=rounds, style=style, model_id=model_id,
            max_tokens=max_tokens, max_prompt_chars=max_prompt_chars,
        )
        debugged.append(final)
        traces.append(trace)
    return debugged, traces
