"""End-to-end experiment orchestration.

One run walks every (repetition, task) pair through: sample a candidate pool
(or load it from cache), execute trial tests and output signatures, optionally
self-debug, select a final candidate per method, and score it on the held-out
evaluation partitions. Every endpoint call and every execution result is
cached under a content-addressed key, so a warm rerun needs no endpoint and
reproduces the report byte for byte.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .cache import Cache, CacheKey, fingerprint
from .llm_client import (
    Candidate,
    CandidateOrigin,
    DisabledTransport,
    EndpointRejectedError,
    HttpTransport,
    LlmClient,
    PartialBatchError,
    SamplingConfig,
    ScoringUnsupportedError,
    TransportError,
    generate_candidates,
)
from .sandbox import SignatureInputError
from .prompts import (
    GENERATION,
    REVIEWER,
    SELFDEBUG,
    family_for_model,
    generation_prompt,
    load_template,
    reviewer_scoring_parts,
)
from .rerank import (
    EXEC_UTILITY,
    EXTERNAL_PREFIX,
    FeatureVector,
    MissingExternalScoreError,
    MissingFeatureError,
    SelectionPolicy,
    UtilityMatrix,
    external_scores_ingest,
    filter_score,
    mbr_scores,
    pass_at_k,
    select,
)
from .report import RunReport
from .sandbox import (
    ExecutionBudget,
    ExecutionOutcome,
    OutputSignature,
    capture_values,
    compute_signature,
    run_assert_tests,
    run_trial_tests,
)
from .selfdebug import sd_multi, sd_one
from .tasks import (
    NoTrialTestsError,
    Task,
    load_task_suite,
    select_eval_tests,
)

logger = logging.getLogger(__name__)

PARTITIONS = ("original", "extended")

PHASES = ("generate", "execute", "debug", "report")

# Failures that poison one task, not the run.
QUARANTINE_ERRORS = (
    TransportError,
    EndpointRejectedError,
    PartialBatchError,
    NoTrialTestsError,
    SignatureInputError,
    ScoringUnsupportedError,
    MissingFeatureError,
    MissingExternalScoreError,
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """One method row of the report: a named selection recipe."""

    name: str
    kind: str = "rerank"  # "greedy" | "random" | "rerank"
    policy: SelectionPolicy | None = None
    self_debug: str | None = None  # None inherits the config default

    def __post_init__(self):
        if self.kind not in ("greedy", "random", "rerank"):
            raise ConfigError(f"unknown method kind: {self.kind!r}")
        if self.kind == "rerank" and self.policy is None:
            raise ConfigError(f"method {self.name!r} needs a selection policy")
        if self.kind != "rerank" and self.self_debug not in (None, "none"):
            raise ConfigError(f"method {self.name!r} cannot combine {self.kind} with self-debug")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "policy": self.policy.to_dict() if self.policy else None,
            "self_debug": self.self_debug,
        }


def method_from_name(name: str, filter_fallback: str = "rerank-unfiltered") -> MethodSpec:
    """Build a method from a shorthand like ``filter+ll+mbr_exec`` or ``sd1``."""
    key = name.strip().lower().replace("-", "_")
    if key == "greedy":
        return MethodSpec(name=name, kind="greedy")
    if key == "random":
        return MethodSpec(name=name, kind="random")
    if key == "sd1":
        policy = SelectionPolicy(use_filter=True, mbr_utility=EXEC_UTILITY,
                                 filter_fallback=filter_fallback)
        return MethodSpec(name=name, kind="rerank", policy=policy, self_debug="sd1")
    if key == "sdmulti":
        policy = SelectionPolicy(use_filter=True, mbr_utility=EXEC_UTILITY,
                                 filter_fallback=filter_fallback)
        return MethodSpec(name=name, kind="rerank", policy=policy, self_debug="sdmulti")
    use_filter = False
    mbr_utility = None
    nbest = None
    for part in key.split("+"):
        if part == "filter":
            use_filter = True
        elif part in ("mbr_exec", "mbrexec", "mbr"):
            mbr_utility = EXEC_UTILITY
        elif part in ("ll", "cr"):
            nbest = part
        elif part.startswith("external:"):
            nbest = EXTERNAL_PREFIX + part.split(":", 1)[1]
        elif part.startswith("mbr_external:"):
            mbr_utility = EXTERNAL_PREFIX + part.split(":", 1)[1]
        else:
            raise ConfigError(f"unknown method shorthand: {name!r} (part {part!r})")
    policy = SelectionPolicy(use_filter=use_filter, mbr_utility=mbr_utility,
                             nbest_feature=nbest, filter_fallback=filter_fallback)
    return MethodSpec(name=name, kind="rerank", policy=policy, self_debug=None)


def method_from_dict(raw: dict, filter_fallback: str) -> MethodSpec:
    if isinstance(raw, str):
        return method_from_name(raw, filter_fallback)
    kind = raw.get("kind", "rerank")
    policy = None
    if kind == "rerank":
        policy = SelectionPolicy(
            use_filter=raw.get("use_filter", False),
            mbr_utility=raw.get("mbr_utility"),
            nbest_feature=raw.get("nbest_feature"),
            filter_fallback=raw.get("filter_fallback", filter_fallback),
        )
    return MethodSpec(
        name=raw["name"], kind=kind, policy=policy, self_debug=raw.get("self_debug")
    )


@dataclass(frozen=True)
class ExperimentConfig:
    suite_path: str
    model_id: str
    base_url: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 1.6
    nucleus_p: float = 0.95
    max_tokens: int = 1024
    candidate_counts: tuple[int, ...] = (1, 5, 10, 20, 25, 50)
    methods: tuple[MethodSpec, ...] = ()
    self_debug: str = "none"
    eval_test_count: int | None = None
    repetitions: int = 1
    base_seed: int = 1234
    per_test_timeout: float = 5.0
    memory_limit: int = 512 * 1024 * 1024
    max_output_bytes: int = 8192
    cache_dir: str = ".execrank_cache"
    workers: int = 4
    template_family: str | None = None
    style: str = "mbpp"
    sd1_rounds: int = 3
    sdmulti_rounds: int = 1
    max_prompt_chars: int | None = None
    external_scores: tuple[str, ...] = ()
    filter_fallback: str = "rerank-unfiltered"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.candidate_counts or any(k < 1 for k in self.candidate_counts):
            raise ConfigError("candidate_counts must be non-empty positive integers")
        if self.self_debug not in ("none", "sd1", "sdmulti"):
            raise ConfigError(f"unknown self_debug mode: {self.self_debug!r}")
        if not self.methods:
            object.__setattr__(
                self,
                "methods",
                (
                    method_from_name("greedy", self.filter_fallback),
                    method_from_name("filter+mbr_exec", self.filter_fallback),
                ),
            )

    @property
    def budget(self) -> ExecutionBudget:
        return ExecutionBudget(
            per_test_timeout=self.per_test_timeout,
            memory_limit=self.memory_limit,
            max_output_bytes=self.max_output_bytes,
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        fallback = raw.get("filter_fallback", "rerank-unfiltered")
        methods = tuple(
            method_from_dict(m, fallback) for m in raw.pop("methods", [])
        )
        counts = tuple(raw.pop("candidate_counts", (1, 5, 10, 20, 25, 50)))
        external = tuple(raw.pop("external_scores", ()))
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(methods=methods, candidate_counts=counts, external_scores=external, **raw)

    def metadata_dict(self, extra: dict) -> dict:
        """Config as recorded in reports: scientific fields only, nothing
        operational (endpoint URL, cache path, worker count), so a cached
        rerun against a dead endpoint emits an identical report."""
        return {
            "model_id": self.model_id,
            "sampling": {
                "temperature": self.temperature,
                "nucleus_p": self.nucleus_p,
                "max_tokens": self.max_tokens,
            },
            "candidate_counts": list(self.candidate_counts),
            "methods": [m.to_dict() for m in self.methods],
            "self_debug_default": self.self_debug,
            "eval_test_count": self.eval_test_count,
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "budget": self.budget.to_dict(),
            "style": self.style,
            "sd1_rounds": self.sd1_rounds,
            "sdmulti_rounds": self.sdmulti_rounds,
            "interpretation": {
                "combined_ranking": "lexicographic (filter, then agreement vote, then n-best feature, then smallest index)",
                "sd1_early_stop": True,
                "pass_at_k": "unbiased estimator over the full sample pool",
                "random_baseline": "expected accuracy (mean per-candidate pass rate)",
                "repetition_seeds": "base_seed + repetition index; endpoints may ignore seeds",
            },
            **extra,
        }


def make_transport(config: ExperimentConfig):
    if not config.base_url:
        return DisabledTransport()
    return HttpTransport(config.base_url, api_key_env=config.api_key_env)


def _partition_pass(tests, outcomes) -> dict[str, bool]:
    verdict = {}
    for partition in PARTITIONS:
        relevant = [o for t, o in zip(tests, outcomes) if t.partition == partition]
        verdict[partition] = all(o.passed for o in relevant)
    return verdict


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, transport=None):
        self.config = config
        self.suite = load_task_suite(config.suite_path)
        self.cache = Cache(config.cache_dir)
        self.client = LlmClient(transport if transport is not None else make_transport(config))
        self.family = config.template_family or family_for_model(config.model_id)
        self.n_pool = max(config.candidate_counts)
        self.budget = config.budget
        self.methods = tuple(
            replace(m, self_debug=m.self_debug or config.self_debug)
            if m.kind == "rerank"
            else m
            for m in config.methods
        )
        self.external = {}
        for path in config.external_scores:
            scores = external_scores_ingest(path)
            self.external[scores.metric] = scores
        self.template_shas = {
            GENERATION: fingerprint(load_template(GENERATION, self.family).text),
            REVIEWER: fingerprint(load_template(REVIEWER, config.style).text),
            SELFDEBUG: fingerprint(load_template(SELFDEBUG, config.style).text),
        }
        self.quarantined: list[dict] = []

    # ---- cache-backed primitives -------------------------------------------

    def _sample_fp(self) -> str:
        return fingerprint(
            {
                "temperature": self.config.temperature,
                "nucleus_p": self.config.nucleus_p,
                "max_tokens": self.config.max_tokens,
                "n": self.n_pool,
                "family": self.family,
                "template": self.template_shas[GENERATION],
            }
        )

    def _candidates(self, task: Task, seed: int) -> list[Candidate]:
        fp = self._sample_fp()
        keys = [
            CacheKey(self.config.model_id, task.id, "sample", fp, seed, i)
            for i in range(self.n_pool)
        ]
        cached = [self.cache.get(k) for k in keys]
        if all(c is not None for c in cached):
            return [Candidate.from_dict(c) for c in cached]
        prompt = generation_prompt(task.prompt, self.family)
        sampling = SamplingConfig(
            model_id=self.config.model_id,
            temperature=self.config.temperature,
            nucleus_p=self.config.nucleus_p,
            n_candidates=self.n_pool,
            max_tokens=self.config.max_tokens,
            seed=seed,
        )
        candidates = generate_candidates(self.client, prompt, sampling)
        return [
            Candidate.from_dict(self.cache.put(key, cand.to_dict()))
            for key, cand in zip(keys, candidates)
        ]

    def _greedy_candidate(self, task: Task) -> Candidate:
        fp = fingerprint(
            {
                "family": self.family,
                "max_tokens": self.config.max_tokens,
                "template": self.template_shas[GENERATION],
            }
        )
        # Greedy decoding is seed-independent; one entry serves every repetition.
        key = CacheKey(self.config.model_id, task.id, "greedy", fp, 0, 0)
        cached = self.cache.get(key)
        if cached is not None:
            return Candidate.from_dict(cached)
        prompt = generation_prompt(task.prompt, self.family)
        sampling = SamplingConfig(
            model_id=self.config.model_id,
            temperature=0,
            n_candidates=1,
            max_tokens=self.config.max_tokens,
        )
        candidate = generate_candidates(self.client, prompt, sampling)[0]
        return Candidate.from_dict(self.cache.put(key, candidate.to_dict()))

    def _exec_fp(self, code: str, extra: dict | None = None) -> str:
        payload = {
            "code": fingerprint(code),
            "budget": self.budget.to_dict(),
            "suite": self.suite.metadata.get("content_sha256", ""),
        }
        if extra:
            payload.update(extra)
        return fingerprint(payload)

    # Execution stages are content-addressed (the fingerprint covers the
    # program text), so identical programs share results and candidate_index
    # stays 0 in their keys.

    def _trial(self, task: Task, code: str, seed: int) -> list[ExecutionOutcome]:
        key = CacheKey(self.config.model_id, task.id, "trial", self._exec_fp(code), seed, 0)
        payload = self.cache.get(key)
        if payload is None:
            outcomes = run_trial_tests(code, task, self.budget, workers=self.config.workers)
            payload = self.cache.put(key, [o.to_dict() for o in outcomes])
        return [ExecutionOutcome.from_dict(o) for o in payload]

    def _captured(self, task: Task, code: str, seed: int) -> list[str | None]:
        key = CacheKey(self.config.model_id, task.id, "capture", self._exec_fp(code), seed, 0)
        payload = self.cache.get(key)
        if payload is None:
            values = capture_values(
                code, list(task.require_trial_tests()), self.budget,
                workers=self.config.workers,
            )
            payload = self.cache.put(key, {"values": values})
        return payload["values"]

    def _signature_tests(self, task: Task):
        if not task.eval_tests:
            return []
        m = self.config.eval_test_count or len(task.eval_tests)
        return select_eval_tests(task, m)

    def _signature(self, task: Task, code: str, seed: int) -> OutputSignature:
        tests = self._signature_tests(task)
        fp = self._exec_fp(code, {"m": len(tests)})
        key = CacheKey(self.config.model_id, task.id, "signature", fp, seed, 0)
        payload = self.cache.get(key)
        if payload is None:
            signature = compute_signature(code, tests, self.budget, workers=self.config.workers)
            payload = self.cache.put(key, signature.to_dict())
        return OutputSignature.from_dict(payload)

    def _eval_tests(self, task: Task):
        return [t for t in task.eval_tests if t.code]

    def _eval(self, task: Task, code: str, seed: int) -> list[ExecutionOutcome]:
        key = CacheKey(self.config.model_id, task.id, "eval", self._exec_fp(code), seed, 0)
        payload = self.cache.get(key)
        if payload is None:
            outcomes = run_assert_tests(
                code, self._eval_tests(task), self.budget, workers=self.config.workers
            )
            payload = self.cache.put(key, [o.to_dict() for o in outcomes])
        return [ExecutionOutcome.from_dict(o) for o in payload]

    def _eval_pass(self, task: Task, code: str, seed: int) -> dict[str, bool]:
        return _partition_pass(self._eval_tests(task), self._eval(task, code, seed))

    def _reviewer_score(self, task: Task, candidate: Candidate, seed: int) -> float:
        fp = fingerprint(
            {
                "code": fingerprint(candidate.code),
                "style": self.config.style,
                "template": self.template_shas[REVIEWER],
            }
        )
        key = CacheKey(self.config.model_id, task.id, "reviewer", fp, seed, 0)
        payload = self.cache.get(key)
        if payload is None:
            prefix, continuation = reviewer_scoring_parts(
                task.prompt, candidate.code, self.config.style
            )
            value = self.client.score_loglik(prefix, continuation, self.config.model_id)
            payload = self.cache.put(key, {"loglik": value})
        return payload["loglik"]

    def _trial_runner(self, task: Task, seed: int):
        def runner(code: str):
            return self._trial(task, code, seed), self._captured(task, code, seed)

        return runner

    def _sd_fp(self, code: str, rounds: int) -> str:
        return fingerprint(
            {
                "code": fingerprint(code),
                "style": self.config.style,
                "rounds": rounds,
                "template": self.template_shas[SELFDEBUG],
                "max_tokens": self.config.max_tokens,
                "suite": self.suite.metadata.get("content_sha256", ""),
            }
        )

    def _sdmulti_candidates(self, task: Task, seed: int,
                            pool: list[Candidate]) -> tuple[list[Candidate], list[dict]]:
        keys = [
            CacheKey(self.config.model_id, task.id, "sdmulti",
                     self._sd_fp(c.code, self.config.sdmulti_rounds), seed, c.index)
            for c in pool
        ]
        cached = [self.cache.get(k) for k in keys]
        if any(c is None for c in cached):
            debugged, traces = sd_multi(
                self.client, self._trial_runner(task, seed), pool, task,
                rounds=self.config.sdmulti_rounds, style=self.config.style,
                model_id=self.config.model_id, max_tokens=self.config.max_tokens,
                max_prompt_chars=self.config.max_prompt_chars,
            )
            cached = [
                self.cache.put(
                    key,
                    {
                        "code": final.code,
                        "changed": final.code != original.code,
                        "terminal": trace.terminal_reason,
                        "rounds": len(trace.rounds),
                    },
                )
                for key, final, trace, original in zip(keys, debugged, traces, pool)
            ]
        result, meta = [], []
        for original, payload in zip(pool, cached):
            if payload["changed"]:
                result.append(
                    Candidate(
                        index=original.index,
                        raw_completion="",
                        code=payload["code"],
                        token_logprobs=None,
                        origin=CandidateOrigin("debugged", round=payload["rounds"],
                                               parent_index=original.index),
                        fenced=True,
                    )
                )
            else:
                result.append(original)
            meta.append(payload)
        return result, meta

    def _sd1_final(self, task: Task, seed: int, candidates: list[Candidate],
                   selection) -> tuple[Candidate, dict]:
        selected = candidates[selection.chosen_index]
        key = CacheKey(
            self.config.model_id, task.id, "sd1",
            self._sd_fp(selected.code, self.config.sd1_rounds), seed, 0,
        )
        payload = self.cache.get(key)
        if payload is None:
            final, trace = sd_one(
                self.client, self._trial_runner(task, seed), candidates, selection,
                task, max_rounds=self.config.sd1_rounds, style=self.config.style,
                model_id=self.config.model_id, max_tokens=self.config.max_tokens,
                max_prompt_chars=self.config.max_prompt_chars,
            )
            payload = self.cache.put(
                key,
                {
                    "code": final.code,
                    "changed": final.code != selected.code,
                    "terminal": trace.terminal_reason,
                    "rounds": len(trace.rounds),
                },
            )
        if payload["changed"]:
            final = Candidate(
                index=selected.index,
                raw_completion="",
                code=payload["code"],
                token_logprobs=None,
                origin=CandidateOrigin("debugged", round=payload["rounds"],
                                       parent_index=selected.index),
                fenced=True,
            )
        else:
            final = selected
        return final, payload

    # ---- feature assembly and selection ------------------------------------

    def _features_and_mbr(self, policy: SelectionPolicy, task: Task, seed: int,
                          candidates: list[Candidate]):
        outcomes_per_candidate = None
        if policy.use_filter:
            outcomes_per_candidate = [
                self._trial(task, c.code, seed) for c in candidates
            ]
        mbr = None
        if policy.mbr_utility == EXEC_UTILITY:
            signatures = [self._signature(task, c.code, seed) for c in candidates]
            mbr = mbr_scores(UtilityMatrix.from_exec_signatures(signatures))
        elif policy.mbr_utility and policy.mbr_utility.startswith(EXTERNAL_PREFIX):
            metric = policy.mbr_utility[len(EXTERNAL_PREFIX):]
            if metric not in self.external:
                raise ConfigError(f"external metric {metric!r} not loaded")
            matrix = self.external[metric].utility_matrix(task.id, len(candidates))
            mbr = mbr_scores(matrix)

        external_per_candidate: dict[str, list[float]] = {}
        if policy.nbest_feature and policy.nbest_feature.startswith(EXTERNAL_PREFIX):
            metric = policy.nbest_feature[len(EXTERNAL_PREFIX):]
            if metric not in self.external:
                raise ConfigError(f"external metric {metric!r} not loaded")
            external_per_candidate[metric] = self.external[metric].candidate_scores(
                task.id, len(candidates)
            )

        features = []
        for i, candidate in enumerate(candidates):
            bit = filter_score(outcomes_per_candidate[i]) if policy.use_filter else None
            ll = candidate.mean_logprob()
            cr = None
            if policy.nbest_feature == "cr" and ll is not None:
                cr = ll + self._reviewer_score(task, candidate, seed)
            external = {name: values[i] for name, values in external_per_candidate.items()}
            features.append(FeatureVector(filter=bit, ll=ll, cr=cr, external=external))
        return features, mbr

    # ---- per-task driver ----------------------------------------------------

    def _run_task(self, rep: int, seed: int, task: Task, phase: str) -> dict | None:
        pool = self._candidates(task, seed)
        needs_greedy = any(m.kind == "greedy" for m in self.methods)
        greedy = self._greedy_candidate(task) if needs_greedy else None
        if any(
            m.kind == "rerank" and m.policy.nbest_feature == "cr" for m in self.methods
        ):
            for candidate in pool:
                if candidate.mean_logprob() is not None:
                    self._reviewer_score(task, candidate, seed)
        if phase == "generate":
            return None

        pool_evals = [self._eval_pass(task, c.code, seed) for c in pool]
        needs_trial = any(
            m.kind == "rerank" and (m.policy.use_filter or m.self_debug != "none")
            for m in self.methods
        )
        if needs_trial:
            for candidate in pool:
                self._trial(task, candidate.code, seed)
        if any(m.kind == "rerank" and m.policy.mbr_utility == EXEC_UTILITY
               for m in self.methods):
            for candidate in pool:
                self._signature(task, candidate.code, seed)
        if greedy is not None:
            self._eval_pass(task, greedy.code, seed)
        if phase == "execute":
            return None

        records: dict[str, dict] = {}
        for method in self.methods:
            if method.kind == "greedy":
                if phase != "debug":
                    records[method.name] = {
                        "chosen_index": None,
                        "tie_broken": None,
                        "final_pass": self._eval_pass(task, greedy.code, seed),
                        "sd": None,
                    }
                continue
            if method.kind == "random":
                if phase != "debug":
                    records[method.name] = {
                        "chosen_index": None,
                        "tie_broken": None,
                        "final_pass_fraction": {
                            partition: sum(p[partition] for p in pool_evals) / len(pool)
                            for partition in PARTITIONS
                        },
                        "sd": None,
                    }
                continue

            candidates = pool
            sd_meta = None
            if method.self_debug == "sdmulti":
                candidates, _ = self._sdmulti_candidates(task, seed, pool)
            features, mbr = self._features_and_mbr(method.policy, task, seed, candidates)
            selection = select(features, mbr, method.policy)
            final = candidates[selection.chosen_index]
            if method.self_debug == "sd1":
                final, sd_meta = self._sd1_final(task, seed, candidates, selection)
            elif method.self_debug == "sdmulti":
                sd_meta = {"terminal": "reranked-after-debug"}
            if phase == "debug":
                continue
            records[method.name] = {
                "chosen_index": selection.chosen_index,
                "tie_broken": selection.tie_broken,
                "final_pass": self._eval_pass(task, final.code, seed),
                "sd": sd_meta,
            }
        if phase == "debug":
            return None

        pass_counts = {
            partition: sum(p[partition] for p in pool_evals) for partition in PARTITIONS
        }
        return {
            "methods": records,
            "pass_counts": pass_counts,
            "n_pool": len(pool),
        }

    # ---- run and aggregate ---------------------------------------------------

    def run(self, phase: str = "report") -> RunReport | None:
        if phase not in PHASES:
            raise ConfigError(f"unknown phase {phase!r}")
        per_rep: list[dict] = []
        for rep in range(self.config.repetitions):
            seed = self.config.base_seed + rep
            rep_records = {}
            for task in self.suite:
                try:
                    result = self._run_task(rep, seed, task, phase)
                except QUARANTINE_ERRORS as exc:
                    logger.warning("task %s quarantined in rep %d: %s", task.id, rep, exc)
                    self.quarantined.append(
                        {
                            "rep": rep,
                            "task_id": task.id,
                            "error": f"{type(exc).__name__}: {exc}",
                        }
                    )
                    continue
                if result is not None:
                    rep_records[task.id] = result
            per_rep.append(rep_records)
        if phase != "report":
            return None
        return self._assemble(per_rep)

    def _assemble(self, per_rep: list[dict]) -> RunReport:
        method_order = [m.name for m in self.methods]
        methods = {
            name: {"accuracy": {partition: [] for partition in PARTITIONS}}
            for name in method_order
        }
        pass_series: dict[str, dict[str, list[float]]] = {
            partition: {str(k): [] for k in self.config.candidate_counts}
            for partition in PARTITIONS
        }
        selections: dict[str, dict[str, list]] = {}

        for rep, rep_records in enumerate(per_rep):
            tasks_in_rep = list(rep_records.values())
            for method in self.methods:
                for partition in PARTITIONS:
                    values = []
                    for record in tasks_in_rep:
                        entry = record["methods"][method.name]
                        if "final_pass_fraction" in entry:
                            values.append(entry["final_pass_fraction"][partition])
                        else:
                            values.append(1.0 if entry["final_pass"][partition] else 0.0)
                    methods[method.name]["accuracy"][partition].append(
                        sum(values) / len(values) if values else 0.0
                    )
            for partition in PARTITIONS:
                for k in self.config.candidate_counts:
                    estimates = [
                        pass_at_k(record["n_pool"], record["pass_counts"][partition],
                                  min(k, record["n_pool"]))
                        for record in tasks_in_rep
                    ]
                    pass_series[partition][str(k)].append(
                        sum(estimates) / len(estimates) if estimates else 0.0
                    )
            for task_id, record in rep_records.items():
                for name, entry in record["methods"].items():
                    selections.setdefault(task_id, {}).setdefault(name, []).append(
                        {"rep": rep, **entry}
                    )

        metadata = self.config.metadata_dict(
            {
                "template_family": self.family,
                "templates": dict(self.template_shas),
                "suite": {
                    "name": self.suite.name,
                    "content_sha256": self.suite.metadata.get("content_sha256", ""),
                    "tasks": len(self.suite),
                },
            }
        )
        return RunReport(
            metadata=metadata,
            method_order=method_order,
            methods=methods,
            pass_at_k=pass_series,
            selections=selections,
            quarantined=self.quarantined,
        )


def run_experiment(config: ExperimentConfig, transport=None,
                   phase: str = "report") -> RunReport | None:
    """Run (or resume) an experiment; ``phase`` stops after an earlier stage."""
    return ExperimentRunner(config, transport=transport).run(phase=phase)
