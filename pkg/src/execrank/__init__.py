"""execrank: execution-based candidate selection for code generation.

Sample many programs from a code LLM, execute them against unit tests in
isolated processes, then pick one by combining trial-test filtering, a
majority vote over execution-output signatures, and reference-free features;
optionally self-debug one or all candidates along the way.
"""

from .cache import Cache, CacheKey, fingerprint
from .llm_client import (
    Candidate,
    CandidateOrigin,
    CodeExtraction,
    DisabledTransport,
    EndpointDisabledError,
    EndpointRejectedError,
    HttpTransport,
    LlmClient,
    PartialBatchError,
    SamplingConfig,
    ScoringUnsupportedError,
    ScriptRule,
    ScriptedTransport,
    TransportError,
    extract_code,
    generate_candidates,
)
from .pipeline import (
    ConfigError,
    ExperimentConfig,
    ExperimentRunner,
    MethodSpec,
    method_from_name,
    run_experiment,
)
from .prompts import PromptTemplate, family_for_model, generation_prompt, load_template
from .rerank import (
    ExternalScores,
    FeatureVector,
    MissingExternalScoreError,
    MissingFeatureError,
    SelectionPolicy,
    SelectionResult,
    UtilityMatrix,
    coder_reviewer,
    exec_utility,
    external_scores_ingest,
    filter_score,
    mbr_scores,
    pass_at_k,
    select,
)
from .report import RunReport, emit_report
from .sandbox import (
    ExecutionBudget,
    ExecutionOutcome,
    OutputSignature,
    SandboxSpawnError,
    SignatureInputError,
    canonicalize_output,
    compute_signature,
    run_trial_tests,
)
from .selfdebug import DebugFeedback, DebugTrace, build_feedback, sd_multi, sd_one
from .tasks import (
    DuplicateTaskIdError,
    NoTrialTestsError,
    Task,
    TaskFormatError,
    TaskSuite,
    UnitTest,
    load_task_suite,
    select_eval_tests,
)

__version__ = "0.1.0"
