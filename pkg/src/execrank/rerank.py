"""Reranking: trial-test filtering, execution-agreement voting, and selection.

Selection combines up to three signals lexicographically: the binary filter
bit (all trial tests pass), the expected execution-agreement utility (a
majority vote over output-signature classes), and a single reference-free
feature such as normalized log-likelihood. Ties always resolve to the
smallest candidate index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sandbox import ExecutionOutcome, OutputSignature

EXEC_UTILITY = "exec"
EXTERNAL_PREFIX = "external:"

LL_FEATURE = "ll"
CR_FEATURE = "cr"


class MissingFeatureError(ValueError):
    def __init__(self, feature: str, candidate_index: int | None = None):
        where = "" if candidate_index is None else f" for candidate {candidate_index}"
        super().__init__(f"feature {feature!r} is unavailable{where}")
        self.feature = feature
        self.candidate_index = candidate_index


class MissingExternalScoreError(KeyError):
    def __init__(self, metric: str, task_id: str, missing: list):
        super().__init__(
            f"external metric {metric!r} lacks entries for task {task_id!r}: {missing}"
        )
        self.metric = metric
        self.task_id = task_id
        self.missing = missing


@dataclass(frozen=True)
class FeatureVector:
    """Per-candidate reranking features; absent features stay None, never 0."""

    filter: int | None = None
    ll: float | None = None
    cr: float | None = None
    external: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.filter not in (None, 0, 1):
            raise ValueError(f"filter must be 0 or 1, got {self.filter!r}")

    def nbest_value(self, feature: str) -> float | None:
        if feature == LL_FEATURE:
            return self.ll
        if feature == CR_FEATURE:
            return self.cr
        if feature.startswith(EXTERNAL_PREFIX):
            return self.external.get(feature[len(EXTERNAL_PREFIX):])
        raise ValueError(f"unknown n-best feature: {feature!r}")


@dataclass(frozen=True)
class UtilityMatrix:
    """U[i][j]: utility of candidate j judged against reference i."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"utility matrix must be square, got shape {arr.shape}")
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_exec_signatures(cls, signatures: list[OutputSignature]) -> "UtilityMatrix":
        """Exact-match utility: 0/1, symmetric, unit diagonal by construction."""
        n = len(signatures)
        lengths = {len(s) for s in signatures}
        if len(lengths) > 1:
            raise ValueError(
                f"signatures have inconsistent lengths {sorted(lengths)}; "
                "evaluation-test selection differed between candidates"
            )
        entries = np.zeros((n, n), dtype=float)
        for i in range(n):
            for j in range(i, n):
                u = float(exec_utility(signatures[i], signatures[j]))
                entries[i, j] = u
                entries[j, i] = u
        return cls(entries=entries)


@dataclass(frozen=True)
class SelectionPolicy:
    """Which signals participate in selection, and how an all-zero filter resolves.

    ``filter_fallback="rerank-unfiltered"`` ranks the full set by the
    remaining signals when nothing passes the trial tests; ``"literal"``
    keeps the degenerate all-zero product, which resolves to index 0.
    """

    use_filter: bool = False
    mbr_utility: str | None = None  # None | "exec" | "external:<name>"
    nbest_feature: str | None = None  # None | "ll" | "cr" | "external:<name>"
    filter_fallback: str = "rerank-unfiltered"

    def __post_init__(self):
        if not (self.use_filter or self.mbr_utility or self.nbest_feature):
            raise ValueError("policy must activate at least one signal")
        if self.filter_fallback not in ("rerank-unfiltered", "literal"):
            raise ValueError(f"unknown filter_fallback: {self.filter_fallback!r}")

    def to_dict(self) -> dict:
        return {
            "use_filter": self.use_filter,
            "mbr_utility": self.mbr_utility,
            "nbest_feature": self.nbest_feature,
            "filter_fallback": self.filter_fallback,
        }


@dataclass(frozen=True)
class SelectionResult:
    chosen_index: int
    scores: tuple[dict, ...]
    policy: SelectionPolicy
    tie_broken: bool

    def to_dict(self) -> dict:
        return {
            "chosen_index": self.chosen_index,
            "scores": list(self.scores),
            "policy": self.policy.to_dict(),
            "tie_broken": self.tie_broken,
        }


def filter_score(outcomes: list[ExecutionOutcome]) -> int:
    """1 iff every trial outcome passed; errors and timeouts count as not-pass."""
    if not outcomes:
        raise ValueError("filter needs at least one trial outcome")
    return int(all(outcome.passed for outcome in outcomes))


def exec_utility(a: OutputSignature, b: OutputSignature) -> int:
    """Exact match of output signatures; error and timeout entries compare too."""
    if len(a) != len(b):
        raise ValueError(f"signature lengths differ: {len(a)} vs {len(b)}")
    return int(a.entries == b.entries)


def mbr_scores(matrix: UtilityMatrix) -> list[float]:
    """Expected utility of each candidate against all candidates as references.

    The self term stays in the average; with exact-match utility the score is
    the fraction of candidates sharing the candidate's signature, so the
    decision is a majority vote over signature classes.
    """
    return [float(v) for v in matrix.entries.mean(axis=0)]


def coder_reviewer(ll_forward: float | None, ll_reverse: float | None) -> float:
    """Sum of normalized code-given-description and description-given-code scores."""
    if ll_forward is None:
        raise MissingFeatureError("ll_forward")
    if ll_reverse is None:
        raise MissingFeatureError("ll_reverse")
    return ll_forward + ll_reverse


def select(features: list[FeatureVector], mbr: list[float] | None,
           policy: SelectionPolicy) -> SelectionResult:
    """Pick the candidate maximizing (filter, mbr, n-best) lexicographically.

    The smallest index wins ties. When filtering is active and nothing
    passes, the fallback decides whether the remaining signals still rank
    the set or the degenerate all-zero product picks index 0.
    """
    n = len(features)
    if n < 1:
        raise ValueError("cannot select from an empty candidate set")
    if policy.mbr_utility:
        if mbr is None:
            raise ValueError("policy requires mbr scores but none were given")
        if len(mbr) != n:
            raise ValueError(f"{len(mbr)} mbr scores for {n} candidates")

    bits: list[int | None] = [None] * n
    if policy.use_filter:
        for i, feat in enumerate(features):
            if feat.filter is None:
                raise MissingFeatureError("filter", i)
            bits[i] = feat.filter

    nbest: list[float | None] = [None] * n
    if policy.nbest_feature:
        for i, feat in enumerate(features):
            value = feat.nbest_value(policy.nbest_feature)
            if value is None:
                raise MissingFeatureError(policy.nbest_feature, i)
            nbest[i] = value

    scores = tuple(
        {
            "filter": bits[i],
            "mbr": mbr[i] if policy.mbr_utility else None,
            "nbest": nbest[i],
        }
        for i in range(n)
    )

    none_pass = policy.use_filter and not any(bits)
    if none_pass and policy.filter_fallback == "literal":
        # All Eq-style products are zero; the smallest index wins outright.
        return SelectionResult(
            chosen_index=0, scores=scores, policy=policy, tie_broken=n > 1
        )

    def key(i: int) -> tuple:
        parts = []
        if policy.use_filter and not none_pass:
            parts.append(bits[i])
        if policy.mbr_utility:
            parts.append(mbr[i])
        if policy.nbest_feature:
            parts.append(nbest[i])
        return tuple(parts)

    best = 0
    for i in range(1, n):
        if key(i) > key(best):
            best = i
    tie_broken = any(key(i) == key(best) for i in range(n) if i != best)
    return SelectionResult(
        chosen_index=best, scores=scores, policy=policy, tie_broken=tie_broken
    )


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k drawn candidates is correct,
    given c correct among n; exact integer combinatorics, no overflow."""
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return 1.0 - math.comb(n - c, k) / math.comb(n, k)


@dataclass
class ExternalScores:
    """Precomputed per-candidate scores or per-pair utilities, loaded from disk."""

    metric: str
    per_candidate: dict[tuple[str, int], float] = field(default_factory=dict)
    per_pair: dict[tuple[str, int, int], float] = field(default_factory=dict)

    def candidate_scores(self, task_id: str, n: int) -> list[float]:
        missing = [i for i in range(n) if (task_id, i) not in self.per_candidate]
        if missing:
            raise MissingExternalScoreError(self.metric, task_id, missing)
        return [self.per_candidate[(task_id, i)] for i in range(n)]

    def utility_matrix(self, task_id: str, n: int) -> UtilityMatrix:
        missing = [
            (i, j)
            for i in range(n)
            for j in range(n)
            if (task_id, i, j) not in self.per_pair
        ]
        if missing:
            raise MissingExternalScoreError(self.metric, task_id, missing)
        entries = np.array(
            [[self.per_pair[(task_id, i, j)] for j in range(n)] for i in range(n)],
            dtype=float,
        )
        # External utilities need not be symmetric; only shape is enforced.
        return UtilityMatrix(entries=entries)


def external_scores_ingest(path: str | Path) -> ExternalScores:
    """Read line-delimited external scores; the metric name is the file stem."""
    path = Path(path)
    scores = ExternalScores(metric=path.stem)
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path.name}:{lineno}: invalid JSON: {exc}") from exc
        if "candidate_index" in record:
            scores.per_candidate[(record["task_id"], int(record["candidate_index"]))] = float(
                record["score"]
            )
        elif "i" in record and "j" in record:
            scores.per_pair[(record["task_id"], int(record["i"]), int(record["j"]))] = float(
                record["utility"]
            )
        else:
            raise ValueError(
                f"{path.name}:{lineno}: record needs candidate_index or i/j fields"
            )
    return scores
