"""Scriptable front door: validate knowledge bases, compose, plan, run and
serve without touching the HTTP API.

Exit codes are a stable contract: 0 ok, 1 input/validation error, 2 I/O
error, 3 no plan, 4 run failed.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from functools import reduce
from pathlib import Path

from .canon import canonical_json
from .compose import as_composite, compose, composite_document, parse_composite_document
from .errors import NoPlanError, SimComposeError
from .kb import load_class, parse_class_dict, validate_class
from .pipeline import ranked_plans_for, run_pipeline
from .planner import DEFAULT_CAP, parse_request, plans_document
from .stubs import fixture_registry

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_IO = 2
EXIT_NO_PLAN = 3
EXIT_RUN_FAILED = 4


def _emit(doc: dict) -> None:
    sys.stdout.write(canonical_json(doc))


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_composite(path: str):
    doc = _read_json(path)
    if "provenance" in doc:
        return parse_composite_document(doc)
    return as_composite(parse_class_dict(doc))


def _load_registry(spec: str):
    module_name, _, attr = spec.partition(":")
    module = importlib.import_module(module_name)
    return getattr(module, attr or "fixture_registry")()


def cmd_validate(args) -> int:
    failures = 0
    for path in args.kb:
        try:
            cls = load_class(path)
        except SimComposeError as exc:
            failures += 1
            violations = getattr(exc, "violations", ()) or (exc,)
            for v in violations:
                print(f"{path}: INVALID [{v.code}] {v.path}: {v.message}")
            continue
        violations = validate_class(cls)
        if violations:
            failures += 1
            for v in violations:
                print(f"{path}: INVALID [{v.code}] {v.path}: {v.message}")
        else:
            print(f"{path}: OK ({cls.name} v{cls.version})")
    return EXIT_INPUT if failures else EXIT_OK


def cmd_compose(args) -> int:
    if len(args.kb) < 2:
        print("compose needs at least two --kb classes", file=sys.stderr)
        return EXIT_INPUT
    classes = [load_class(path) for path in args.kb]
    composite = reduce(compose, classes)
    doc = composite_document(composite)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / f"{composite.name}.composite.json"
        out_path.write_text(canonical_json(doc), encoding="utf-8")
        print(f"wrote {out_path}")
    else:
        _emit(doc)
    return EXIT_OK


def cmd_plan(args) -> int:
    composite = _load_composite(args.composite)
    request = parse_request(_read_json(args.request), composite)
    result = ranked_plans_for(composite, request, cap=args.cap)
    if args.format == "machine":
        _emit(plans_document(result))
    else:
        print(f"{len(result.plans)} plan(s){' (truncated)' if result.truncated else ''}")
        for i, plan in enumerate(result.plans):
            chain = " -> ".join(m for m, _ in plan.models) or "(no models needed)"
            print(f"  [{i}] score={plan.score:.3f} models={len(plan.models)}: {chain}")
    return EXIT_OK


def cmd_run(args) -> int:
    composite = _load_composite(args.composite)
    request = parse_request(_read_json(args.request), composite)
    registry = _load_registry(args.registry)
    outcome = run_pipeline(
        composite,
        request,
        registry,
        plan_choice=args.plan,
        cap=args.cap,
        instance_params=None,
    )
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    result_path = out_dir / f"{outcome.run_id}.json"
    result_path.write_text(canonical_json(outcome.run_doc), encoding="utf-8")
    for child in outcome.child_docs:
        (out_dir / f"{child['run_id']}.json").write_text(
            canonical_json(child), encoding="utf-8"
        )
    if args.format == "machine":
        _emit(outcome.run_doc)
    else:
        print(f"run {outcome.run_id}: {outcome.status} (result in {result_path})")
    return EXIT_OK if outcome.status == "succeeded" else EXIT_RUN_FAILED


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(kb_dir=args.kb_dir, registry=_load_registry(args.registry))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simcompose")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate knowledge-base classes")
    p_validate.add_argument("--kb", action="append", required=True, help="class file (repeatable)")
    p_validate.set_defaults(fn=cmd_validate)

    p_compose = sub.add_parser("compose", help="compose two or more classes")
    p_compose.add_argument("--kb", action="append", required=True, help="class file (repeatable)")
    p_compose.add_argument("--out", help="output directory (stdout when omitted)")
    p_compose.set_defaults(fn=cmd_compose)

    p_plan = sub.add_parser("plan", help="enumerate and rank plans for a request")
    p_plan.add_argument("composite", help="composite document")
    p_plan.add_argument("request", help="task request document")
    p_plan.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p_plan.add_argument("--format", choices=("human", "machine"), default="human")
    p_plan.set_defaults(fn=cmd_plan)

    p_run = sub.add_parser("run", help="plan, compile, bind and execute a request")
    p_run.add_argument("composite", help="composite document")
    p_run.add_argument("request", help="task request document")
    p_run.add_argument("--plan", default="auto", help="plan index or 'auto'")
    p_run.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p_run.add_argument("--out", help="output directory for run documents")
    p_run.add_argument("--format", choices=("human", "machine"), default="human")
    p_run.add_argument(
        "--registry",
        default="simcompose.stubs:fixture_registry",
        help="module:callable returning a package registry",
    )
    p_run.set_defaults(fn=cmd_run)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--kb-dir", default=None, help="directory of class files")
    p_serve.add_argument(
        "--registry",
        default="simcompose.stubs:fixture_registry",
        help="module:callable returning a package registry",
    )
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NoPlanError as exc:
        blockers = ", ".join(r.label() for r in exc.blockers)
        print(f"no plan [{exc.code}]: {exc.message}", file=sys.stderr)
        if blockers:
            print(f"blocked on: {blockers}", file=sys.stderr)
        return EXIT_NO_PLAN
    except SimComposeError as exc:
        print(f"error [{exc.code}] {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
