"""Client for OpenAI-compatible completion endpoints.

Covers the three interactions the harness needs: sampling a batch of
candidates (temperature + nucleus), greedy single completions for debugging,
and scoring a fixed continuation via echoed log-probabilities. Transports are
pluggable so tests and offline runs can script every response.
"""

from __future__ import annotations

import json
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field


class TransportError(Exception):
    """Transient transport failure; the client retries these."""


class EndpointRejectedError(Exception):
    """The endpoint refused the request; retrying will not help."""


class ContextOverflowError(EndpointRejectedError):
    def __init__(self, prompt_length: int, message: str = ""):
        super().__init__(
            f"prompt of {prompt_length} characters exceeds the endpoint context"
            + (f": {message}" if message else "")
        )
        self.prompt_length = prompt_length


class EndpointDisabledError(Exception):
    """Raised by the disabled transport; any call means a cache gap."""


class ScoringUnsupportedError(Exception):
    """The endpoint cannot return echoed log-probabilities."""


class PartialBatchError(Exception):
    def __init__(self, missing: list[int]):
        super().__init__(f"candidates missing from batch: {missing}")
        self.missing = list(missing)


@dataclass(frozen=True)
class SamplingConfig:
    model_id: str
    temperature: float
    nucleus_p: float = 0.95
    n_candidates: int = 1
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.temperature == 0 and self.n_candidates != 1:
            raise ValueError("temperature 0 (greedy) requires n_candidates == 1")
        if not (0 < self.nucleus_p <= 1):
            raise ValueError("nucleus_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CandidateOrigin:
    kind: str  # "generated" | "debugged"
    round: int | None = None
    parent_index: int | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "round": self.round, "parent_index": self.parent_index}

    @classmethod
    def from_dict(cls, raw: dict) -> "CandidateOrigin":
        return cls(raw["kind"], raw.get("round"), raw.get("parent_index"))


GENERATED = CandidateOrigin("generated")


@dataclass(frozen=True)
class CodeExtraction:
    code: str
    fenced: bool

    @property
    def ok(self) -> bool:
        return bool(self.code.strip())


@dataclass(frozen=True)
class Candidate:
    """One sampled (or debugged) program; ``index`` is stable for a whole run."""

    index: int
    raw_completion: str
    code: str
    token_logprobs: tuple[float, ...] | None = None
    origin: CandidateOrigin = GENERATED
    fenced: bool = True

    @property
    def extraction_ok(self) -> bool:
        return bool(self.code.strip())

    def mean_logprob(self) -> float | None:
        """Length-normalized log-likelihood of the generation, if recorded."""
        if not self.token_logprobs:
            return None
        return sum(self.token_logprobs) / len(self.token_logprobs)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "raw_completion": self.raw_completion,
            "code": self.code,
            "token_logprobs": list(self.token_logprobs) if self.token_logprobs else None,
            "origin": self.origin.to_dict(),
            "fenced": self.fenced,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Candidate":
        logprobs = raw.get("token_logprobs")
        return cls(
            index=raw["index"],
            raw_completion=raw["raw_completion"],
            code=raw["code"],
            token_logprobs=tuple(logprobs) if logprobs else None,
            origin=CandidateOrigin.from_dict(raw["origin"]),
            fenced=raw.get("fenced", True),
        )


_FENCED_BLOCK = re.compile(r"```(?:python)?[ \t]*\n(.*?)```", re.DOTALL)
_OPEN_FENCE = re.compile(r"```(?:python)?[ \t]*\n")


def extract_code(completion: str) -> CodeExtraction:
    """Pull the first fenced code block out of a completion.

    Handles the two truncation shapes completions actually come in: a block
    whose opening fence lives in the prompt (code before a bare closing
    fence), and a block cut off before its closing fence. With no fence at
    all, the whole trimmed completion is returned and flagged unfenced.
    """
    first = completion.find("```")
    if first == -1:
        return CodeExtraction(completion.strip(), False)
    # A bare ``` with real content before it closes a block the prompt
    # opened; a ```python fence after prose opens a fresh block.
    is_bare = not completion[first:].startswith("```python")
    if is_bare and completion[:first].strip():
        return CodeExtraction(completion[:first].strip("\n"), True)
    match = _FENCED_BLOCK.search(completion)
    if match:
        return CodeExtraction(match.group(1).strip("\n"), True)
    open_match = _OPEN_FENCE.search(completion)
    if open_match:
        return CodeExtraction(completion[open_match.end():].strip("\n"), True)
    return CodeExtraction(completion[:first].strip("\n"), True)


@dataclass(frozen=True)
class RawChoice:
    text: str
    token_logprobs: tuple[float, ...] | None = None


class HttpTransport:
    """Minimal OpenAI-compatible completions transport over HTTP."""

    def __init__(self, base_url: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout

    def post(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(
            f"{self.base_url}/completions", data=body, headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", errors="replace")
            if exc.code >= 500:
                raise TransportError(f"HTTP {exc.code}: {detail}") from exc
            lowered = detail.lower()
            if "context length" in lowered or "maximum context" in lowered:
                raise ContextOverflowError(len(payload.get("prompt", "")), detail) from exc
            raise EndpointRejectedError(f"HTTP {exc.code}: {detail}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransportError(str(exc)) from exc


class DisabledTransport:
    """Transport for cache-only runs: any request is a contract violation."""

    def post(self, payload: dict) -> dict:
        raise EndpointDisabledError(
            "the endpoint is disabled but a stage tried to call it"
        )


class ScriptError(EndpointRejectedError):
    """A scripted transport got a request its script does not cover."""


@dataclass
class ScriptRule:
    """One scripted behavior, selected when every ``match`` substring occurs
    in the request prompt.

    ``completions`` answer sampling requests (with ``token_logprobs``
    parallel to them when given); ``score_tokens`` answers echo-scoring
    requests and describes the trailing tokens of the scored text.
    ``greedy`` restricts the rule to temperature-0 requests (True) or
    sampling requests (False).
    """

    match: tuple[str, ...]
    completions: list[str] = field(default_factory=list)
    token_logprobs: list[list[float]] | None = None
    score_tokens: list[tuple[str, float]] | None = None
    greedy: bool | None = None

    def matches(self, prompt: str, is_greedy: bool) -> bool:
        if self.greedy is not None and self.greedy != is_greedy:
            return False
        return all(fragment in prompt for fragment in self.match)


class ScriptedTransport:
    """Deterministic stand-in for an endpoint, driven by an ordered rule list."""

    def __init__(self, rules: list[ScriptRule], max_prompt_chars: int | None = None):
        self.rules = list(rules)
        self.max_prompt_chars = max_prompt_chars
        self.request_count = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedTransport":
        raw = json.loads(open(path, encoding="utf-8").read())
        rules = [
            ScriptRule(
                match=tuple(entry["match"]),
                completions=entry.get("completions", []),
                token_logprobs=entry.get("token_logprobs"),
                score_tokens=[tuple(t) for t in entry["score_tokens"]]
                if entry.get("score_tokens")
                else None,
                greedy=entry.get("greedy"),
            )
            for entry in raw
        ]
        return cls(rules, max_prompt_chars=None)

    def post(self, payload: dict) -> dict:
        self.request_count += 1
        prompt = payload["prompt"]
        if self.max_prompt_chars is not None and len(prompt) > self.max_prompt_chars:
            raise ContextOverflowError(len(prompt), "scripted context limit")
        is_echo = bool(payload.get("echo")) and payload.get("max_tokens") == 0
        is_greedy = payload.get("temperature", 1.0) == 0
        for rule in self.rules:
            if not rule.matches(prompt, is_greedy):
                continue
            if is_echo:
                if rule.score_tokens is None:
                    continue
                return self._echo_response(prompt, rule)
            if not rule.completions:
                continue
            return self._sample_response(payload, rule)
        raise ScriptError(
            f"no scripted rule matches request (echo={is_echo}, greedy={is_greedy}): "
            f"{prompt[:160]!r}..."
        )

    def _sample_response(self, payload: dict, rule: ScriptRule) -> dict:
        n = payload.get("n", 1)
        choices = []
        for i, text in enumerate(rule.completions[:n]):
            logprobs = None
            if rule.token_logprobs is not None:
                values = rule.token_logprobs[i]
                logprobs = {
                    "tokens": [f"<tok{j}>" for j in range(len(values))],
                    "token_logprobs": values,
                    "text_offset": list(range(len(values))),
                }
            choices.append({"index": i, "text": text, "logprobs": logprobs})
        return {"choices": choices}

    def _echo_response(self, prompt: str, rule: ScriptRule) -> dict:
        tail = "".join(token for token, _ in rule.score_tokens)
        if not prompt.endswith(tail):
            raise ScriptError(
                f"scored text does not end with scripted tokens {tail!r}"
            )
        offsets, tokens, logprobs = [0], [prompt[: len(prompt) - len(tail)]], [None]
        position = len(prompt) - len(tail)
        for token, logprob in rule.score_tokens:
            offsets.append(position)
            tokens.append(token)
            logprobs.append(logprob)
            position += len(token)
        return {
            "choices": [
                {
                    "index": 0,
                    "text": prompt,
                    "logprobs": {
                        "tokens": tokens,
                        "token_logprobs": logprobs,
                        "text_offset": offsets,
                    },
                }
            ]
        }


class LlmClient:
    """Retrying façade over a transport; all harness code talks to this."""

    def __init__(self, transport, *, max_attempts: int = 3, backoff_base: float = 0.5,
                 sleep=time.sleep, supports_batch: bool = True,
                 supports_logprobs: bool = True):
        self.transport = transport
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.sleep = sleep
        self.supports_batch = supports_batch
        self.supports_logprobs = supports_logprobs

    def _request(self, payload: dict) -> dict:
        last_error = None
        for attempt in range(self.max_attempts):
            try:
                return self.transport.post(payload)
            except TransportError as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self.sleep(self.backoff_base * (2 ** attempt))
        raise last_error

    def _choices(self, response: dict) -> list[RawChoice]:
        choices = []
        for raw in response.get("choices", []):
            logprobs = None
            if raw.get("logprobs") and raw["logprobs"].get("token_logprobs") is not None:
                logprobs = tuple(
                    v for v in raw["logprobs"]["token_logprobs"] if v is not None
                )
            choices.append(RawChoice(text=raw.get("text", ""), token_logprobs=logprobs))
        return choices

    def sample(self, prompt: str, config: SamplingConfig) -> list[RawChoice]:
        payload = {
            "model": config.model_id,
            "prompt": prompt,
            "temperature": config.temperature,
            "top_p": config.nucleus_p,
            "max_tokens": config.max_tokens,
        }
        if config.seed is not None:
            payload["seed"] = config.seed
        if self.supports_logprobs:
            payload["logprobs"] = 0
        if self.supports_batch:
            payload["n"] = config.n_candidates
            choices = self._choices(self._request(payload))
            if len(choices) < config.n_candidates:
                raise PartialBatchError(list(range(len(choices), config.n_candidates)))
            return choices[: config.n_candidates]
        choices, missing = [], []
        for i in range(config.n_candidates):
            try:
                unit = self._choices(self._request(dict(payload, n=1)))
            except TransportError:
                unit = []
            if unit:
                choices.append(unit[0])
            else:
                missing.append(i)
        if missing:
            raise PartialBatchError(missing)
        return choices

    def greedy_complete(self, prompt: str, model_id: str, max_tokens: int = 1024) -> str:
        payload = {
            "model": model_id,
            "prompt": prompt,
            "temperature": 0,
            "max_tokens": max_tokens,
            "n": 1,
        }
        choices = self._choices(self._request(payload))
        if not choices:
            raise EndpointRejectedError("endpoint returned no completion")
        return choices[0].text

    def score_loglik(self, prompt: str, continuation: str, model_id: str) -> float:
        """Mean per-token log-probability of ``continuation`` given ``prompt``.

        Only tokens whose text offset falls inside the continuation are
        summed, so prompt tokens can never leak into the score.
        """
        if not continuation:
            raise ValueError("cannot score an empty continuation")
        payload = {
            "model": model_id,
            "prompt": prompt + continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
            "temperature": 0,
        }
        response = self._request(payload)
        choices = response.get("choices", [])
        if not choices or not choices[0].get("logprobs"):
            raise ScoringUnsupportedError(
                "endpoint did not return echoed log-probabilities"
            )
        logprobs = choices[0]["logprobs"]
        token_logprobs = logprobs.get("token_logprobs")
        offsets = logprobs.get("text_offset")
        if token_logprobs is None or offsets is None:
            raise ScoringUnsupportedError("echo response lacks token offsets")
        boundary = len(prompt)
        values = [
            lp
            for lp, offset in zip(token_logprobs, offsets)
            if offset >= boundary and lp is not None
        ]
        if not values:
            raise ScoringUnsupportedError("no continuation tokens were scored")
        return sum(values) / len(values)


def generate_candidates(client: LlmClient, prompt: str, config: SamplingConfig) -> list[Candidate]:
    """Sample ``config.n_candidates`` programs; indices are generation order."""
    choices = client.sample(prompt, config)
    candidates = []
    for i, choice in enumerate(choices):
        extraction = extract_code(choice.text)
        candidates.append(
            Candidate(
                index=i,
                raw_completion=choice.text,
                code=extraction.code,
                token_logprobs=choice.token_logprobs,
                origin=GENERATED,
                fenced=extraction.fenced,
            )
        )
    return candidates
