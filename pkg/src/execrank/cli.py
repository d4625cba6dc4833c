"""Command-line entry point.

Subcommands mirror the pipeline stages: ``generate`` samples candidates into
the cache, ``execute`` runs them against tests, ``debug`` performs the
configured self-debugging, ``select`` prints the per-task selection records,
``report`` emits the aggregated report, and ``run`` does everything.

Exit codes: 0 success, 1 configuration error, 2 infrastructure error,
3 success with quarantined tasks.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .llm_client import EndpointDisabledError, ScriptedTransport
from .pipeline import ConfigError, ExperimentConfig, ExperimentRunner
from .report import emit_report
from .sandbox import SandboxSpawnError
from .tasks import TaskFormatError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFRA = 2
EXIT_PARTIAL = 3

_FORMAT_EXT = {"json": "json", "csv": "csv", "table": "txt"}


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--suite", help="task suite file (line-delimited JSON)")
    parser.add_argument("--model", help="model id sent to the endpoint")
    parser.add_argument("--base-url", help="OpenAI-compatible endpoint base URL")
    parser.add_argument("--api-key-env", help="environment variable holding the API key")
    parser.add_argument("--cache-dir", help="experiment cache directory")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--top-p", type=float, dest="nucleus_p")
    parser.add_argument("--max-tokens", type=int)
    parser.add_argument("--counts", help="comma-separated candidate counts, e.g. 1,5,10,20,25,50")
    parser.add_argument("--methods", help="comma-separated method names, e.g. greedy,filter+mbr_exec")
    parser.add_argument("--self-debug", choices=["none", "sd1", "sdmulti"])
    parser.add_argument("--eval-tests", type=int, dest="eval_test_count",
                        help="use only the first m evaluation-test inputs for signatures")
    parser.add_argument("--repetitions", type=int)
    parser.add_argument("--seed", type=int, dest="base_seed")
    parser.add_argument("--timeout", type=float, dest="per_test_timeout")
    parser.add_argument("--memory-limit", type=int)
    parser.add_argument("--max-output-bytes", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--family", dest="template_family",
                        help="generation template family (codellama, deepseek, generic)")
    parser.add_argument("--style", choices=["humaneval", "mbpp"],
                        help="reviewer/self-debug template style")
    parser.add_argument("--filter-fallback", choices=["rerank-unfiltered", "literal"])
    parser.add_argument("--external-scores", action="append", default=None,
                        help="external score file (repeatable)")
    parser.add_argument("--scripted-endpoint",
                        help="JSON rule file served instead of a live endpoint")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="execrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_output in [
        ("generate", False),
        ("execute", False),
        ("debug", False),
        ("select", True),
        ("report", True),
        ("run", True),
    ]:
        cmd = sub.add_parser(name)
        _add_common_options(cmd)
        if needs_output:
            cmd.add_argument("--out", help="output path")
            cmd.add_argument("--format", choices=["table", "csv", "json"], default="json")
    return parser


_OVERRIDE_FIELDS = (
    "model_id", "base_url", "api_key_env", "cache_dir", "temperature", "nucleus_p",
    "max_tokens", "self_debug", "eval_test_count", "repetitions", "base_seed",
    "per_test_timeout", "memory_limit", "max_output_bytes", "workers",
    "template_family", "style", "filter_fallback",
)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.suite:
        raw["suite_path"] = args.suite
    if args.model:
        raw["model_id"] = args.model
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if name == "model_id":
            continue
        if value is not None:
            raw[name] = value
    if args.counts:
        raw["candidate_counts"] = [int(v) for v in args.counts.split(",")]
    if args.methods:
        raw["methods"] = [name for name in args.methods.split(",") if name]
    if args.external_scores:
        raw["external_scores"] = list(args.external_scores)
    if "suite_path" not in raw:
        raise ConfigError("a task suite is required (--suite or config file)")
    if "model_id" not in raw:
        raise ConfigError("a model id is required (--model or config file)")
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = build_config(args)
        transport = None
        if args.scripted_endpoint:
            transport = ScriptedTransport.from_file(args.scripted_endpoint)
        runner = ExperimentRunner(config, transport=transport)
    except (ConfigError, TaskFormatError, FileNotFoundError, json.JSONDecodeError,
            ValueError) as exc:
        print(f"execrank: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command in ("generate", "execute", "debug"):
            runner.run(phase=args.command)
            report = None
        else:
            report = runner.run(phase="report")
    except (SandboxSpawnError, EndpointDisabledError, OSError) as exc:
        print(f"execrank: infrastructure error: {exc}", file=sys.stderr)
        return EXIT_INFRA

    if args.command == "select":
        text = json.dumps(report.selections, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
    elif args.command in ("report", "run"):
        out = args.out or f"execrank_report.{_FORMAT_EXT[args.format]}"
        for path in emit_report(report, args.format, out):
            print(f"wrote {path}")

    if runner.quarantined:
        for entry in runner.quarantined:
            print(
                f"quarantined rep {entry['rep']} task {entry['task_id']}: {entry['error']}",
                file=sys.stderr,
            )
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
