#!/usr/bin/env python3
"""Runs every JSON-emitting program in a few configurations and validates what it prints against schemas/."""

import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
import referencing


def load_registry(schema_dir):
    resources = []
    for path in schema_dir.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        resources.append((schema["$id"], referencing.Resource.from_contents(schema)))
    return referencing.Registry().with_resources(resources)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--schemas", required=True, type=pathlib.Path)
    parser.add_argument("--bin", required=True, type=pathlib.Path, help="directory holding the bench programs")
    parser.add_argument("--launch", required=True)
    parser.add_argument("--topology", required=True)
    args = parser.parse_args()

    registry = load_registry(args.schemas)

    def validator(name):
        return jsonschema.Draft202012Validator({"$ref": name}, registry=registry)

    failures = []

    def check(label, document, schema):
        errors = list(validator(schema).iter_errors(document))
        print(f"{'ok  ' if not errors else 'FAIL'} {label} against {schema}")
        for e in errors:
            failures.append(f"{label}: {e.message}")

    def run(label, command, schema, expect_failure=False):
        done = subprocess.run(command, capture_output=True, text=True, timeout=300)
        if (done.returncode != 0) != expect_failure:
            failures.append(f"{label}: exit status {done.returncode}\n{done.stderr}")
            return
        stream = done.stderr if expect_failure else done.stdout
        check(label, json.loads(stream.strip().splitlines()[-1] if expect_failure else stream), schema)

    with tempfile.TemporaryDirectory() as scratch:
        trace = pathlib.Path(scratch) / "trace.jsonl"
        b = args.bin
        cases = [
            ("fib coroutines", [b / "fib", "--n", "12", "--workers", "3", "--trace-out", str(trace)], "fib.schema.json"),
            ("fib threads", [b / "fib", "--n", "10", "--variant", "threads"], "fib.schema.json"),
            ("jacobi", [b / "jacobi", "--grid", "8", "--threads", "1x2x2", "--iters", "4", "--residuals"], "jacobi.schema.json"),
            ("jacobi 13-point", [b / "jacobi", "--grid", "8", "--iters", "2", "--stencil", "13"], "jacobi.schema.json"),
            ("mlp", [b / "mlp", "--inputs", "5", "--backend", "coroutines"], "mlp.schema.json"),
            ("pingpong host", [b / "pingpong", "--sizes", "1,64", "--reps", "3"], "pingpong.schema.json"),
            ("pingpong net", [args.launch, "-n", "2", b / "pingpong", "--sizes", "1,4096", "--reps", "3"], "pingpong.schema.json"),
            ("jacobi net", [args.launch, "-n", "2", b / "jacobi", "--grid", "8", "--nodes", "2x1x1", "--iters", "3"], "jacobi.schema.json"),
            ("topology", [args.topology], "topology.schema.json"),
        ]
        for label, command, schema in cases:
            run(label, [str(c) for c in command], schema)

        lines = trace.read_text().splitlines()
        if not lines:
            failures.append("trace: empty")
        for i, line in enumerate(lines):
            errors = list(validator("trace-event.schema.json").iter_errors(json.loads(line)))
            failures.extend(f"trace line {i}: {e.message}" for e in errors)
        print(f"ok   {len(lines)} trace lines checked against trace-event.schema.json")

        run("jacobi error", [str(b / "jacobi"), "--nodes", "2x1x1", "--grid", "8"], "error.schema.json", expect_failure=True)
        run("pingpong error", [str(b / "pingpong"), "--sizes", "1", "--reps", "2", "--corrupt-echo"], "error.schema.json", expect_failure=True)

    for f in failures:
        print("FAILED:", f, file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
