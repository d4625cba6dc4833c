#!/usr/bin/env python3
"""Execution driver: runs one untrusted candidate program against one test.

The driver is spawned as a subprocess by the harness. It reads a single JSON
request from stdin, executes the candidate source and the test program in a
fresh namespace, and writes a single JSON record line to stdout. All candidate
failures (exceptions, SystemExit, recursion blowups, even syntax errors) are
reported as data in the record; a non-zero exit code means the *driver* itself
could not do its job.

Request fields:
    candidate_source   program text to execute first
    test_program       in "assert" mode: a test program (usually assertions);
                       in "capture" mode: a single expression whose value is
                       captured and canonicalized
    mode               "assert" | "capture"
    output_byte_limit  canonical value reprs longer than this are truncated

Record fields:
    status       "pass" | "fail" | "error" | "value"
    value_repr   canonical repr (capture mode success only)
    error_class  exception class name (status == "error" only)
    detail       short human-readable message
    duration     seconds spent executing candidate + test

With --batch, one request per stdin line is accepted and one record line is
emitted per request; the namespace is rebuilt for every request.

This file must stay free of harness imports: stdin/stdout are its only
interface to the parent process.
"""

import argparse
import io
import json
import sys
import time

TRUNCATION_MARKER = "...[truncated]"

REQUIRED_FIELDS = ("candidate_source", "test_program", "mode", "output_byte_limit")


def canonical_repr(value, byte_limit):
    """Deterministic textual form of a value, truncated at byte_limit bytes."""
    text = repr(value)
    encoded = text.encode("utf-8")
    if len(encoded) > byte_limit:
        text = encoded[:byte_limit].decode("utf-8", errors="ignore") + TRUNCATION_MARKER
    return text


def run_request(request):
    mode = request["mode"]
    byte_limit = int(request["output_byte_limit"])
    namespace = {"__name__": "__candidate__", "__builtins__": __builtins__}

    record = {
        "status": "error",
        "value_repr": None,
        "error_class": None,
        "detail": None,
        "duration": 0.0,
    }

    # Candidate output on sys.stdout/stderr must not corrupt the record stream.
    saved_out, saved_err = sys.stdout, sys.stderr
    sys.stdout = io.StringIO()
    sys.stderr = io.StringIO()
    start = time.monotonic()
    try:
        try:
            exec(compile(request["candidate_source"], "<candidate>", "exec"), namespace)
        except BaseException as exc:
            record["error_class"] = type(exc).__name__
            record["detail"] = str(exc)
            return record

        if mode == "assert":
            try:
                exec(compile(request["test_program"], "<test>", "exec"), namespace)
                record["status"] = "pass"
            except AssertionError as exc:
                record["status"] = "fail"
                record["detail"] = str(exc)
            except BaseException as exc:
                record["error_class"] = type(exc).__name__
                record["detail"] = str(exc)
        else:  # capture
            try:
                value = eval(compile(request["test_program"], "<test>", "eval"), namespace)
            except BaseException as exc:
                record["error_class"] = type(exc).__name__
                record["detail"] = str(exc)
                return record
            try:
                record["value_repr"] = canonical_repr(value, byte_limit)
                record["status"] = "value"
            except BaseException as exc:
                record["error_class"] = "ReprError"
                record["detail"] = str(exc)
        return record
    finally:
        record["duration"] = time.monotonic() - start
        sys.stdout = saved_out
        sys.stderr = saved_err


def parse_request(text):
    try:
        request = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"request is not valid JSON: {exc}") from exc
    if not isinstance(request, dict):
        raise ValueError("request must be a JSON object")
    missing = [field for field in REQUIRED_FIELDS if field not in request]
    if missing:
        raise ValueError(f"request missing fields: {', '.join(missing)}")
    if request["mode"] not in ("assert", "capture"):
        raise ValueError(f"unknown mode: {request['mode']!r}")
    return request


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rlimit-as", type=int, default=None,
                        help="address-space limit in bytes, applied to this process")
    parser.add_argument("--batch", action="store_true",
                        help="read one request per line instead of a single request")
    args = parser.parse_args(argv)

    if args.rlimit_as is not None:
        try:
            import resource

            resource.setrlimit(resource.RLIMIT_AS, (args.rlimit_as, args.rlimit_as))
        except (ImportError, ValueError, OSError) as exc:
            print(f"exec_driver: cannot apply rlimit: {exc}", file=sys.stderr)

    stdout = sys.stdout
    try:
        if args.batch:
            for line in sys.stdin:
                if not line.strip():
                    continue
                record = run_request(parse_request(line))
                stdout.write(json.dumps(record) + "\n")
                stdout.flush()
        else:
            record = run_request(parse_request(sys.stdin.read()))
            stdout.write(json.dumps(record) + "\n")
            stdout.flush()
    except ValueError as exc:
        print(f"exec_driver: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
