"""Session-scoped HTTP API for knowledge-base browsing, system assembly,
composition, dataset marking, planning and run control.

Sessions live in memory; per-session mutations are serialized behind a
lock (single writer per session) while reads take a consistent snapshot.
Plan listings and run documents are returned as canonical JSON bytes so
that the CLI and the service emit identical bodies for the same request.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import replace
from functools import reduce
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .canon import FORMAT_VERSION, canonical_json
from .compose import CompositeObject, as_composite, compose, composite_document
from .errors import (
    DanglingReferenceError,
    DocumentSyntaxError,
    NoCompositeError,
    SimComposeError,
    UnknownModelError,
    UnknownSessionError,
)
from .kb import instantiate, load_class, parse_class_dict, parse_data_ref
from .pipeline import ranked_plans_for, run_pipeline
from .planner import (
    DEFAULT_CAP,
    mark_dataset_states,
    parse_request,
    plans_document,
    select_structure,
)
from .stubs import fixture_registry
from .types import PROVIDED_SOURCES, DataRef, SimObjectClass, SimObjectInstance
from .workflow import PackageRegistry

FIXTURE_DIR = Path(__file__).parent / "fixtures"

COMMANDS = (
    "load_class",
    "instantiate",
    "compose",
    "enable_model",
    "disable_model",
    "select_scenario",
    "declare_provided",
    "set_mode",
)


class SessionState:
    """Mutable per-session assembly state; guarded by its own lock."""

    def __init__(self, session_id: str):
        self.id = session_id
        self.lock = threading.Lock()
        self.classes: dict[str, SimObjectClass] = {}
        self.load_order: list[str] = []
        self.instances: dict[str, SimObjectInstance] = {}
        self.compose_order: list[str] = []
        self.toggles: dict[str, bool] = {}
        self.scenario_sel: dict[str, str] = {}
        self.provided: list[dict] = []
        self.mode: str = "analysis"
        self.last_plan_count: int | None = None
        self.runs: dict[str, dict] = {}

    # Derived state --------------------------------------------------------

    def composite(self) -> CompositeObject | None:
        if not self.compose_order:
            return None
        classes = [self.classes[name] for name in self.compose_order]
        comp = reduce(compose, classes) if len(classes) > 1 else as_composite(classes[0])
        if not self.scenario_sel:
            return comp
        models = tuple(
            replace(m, selected_scenario=self.scenario_sel.get(m.id, m.selected_scenario))
            for m in comp.models
        )
        return replace(comp, models=models)

    def enabled_models(self, comp: CompositeObject) -> tuple[str, ...]:
        enabled = {m.id for m in comp.models if m.enabled}
        for mid, on in self.toggles.items():
            if mid not in comp.models_by_id():
                continue
            (enabled.add if on else enabled.discard)(mid)
        return tuple(sorted(enabled))

    def instance_params(self) -> dict[str, Any]:
        params: dict[str, Any] = {}
        for name in sorted(self.instances):
            params.update(self.instances[name].params_by_value)
        return params

    def provided_refs(self, comp: CompositeObject) -> tuple[DataRef, ...]:
        """Declared refs plus every graph ref covered by an instance payload."""
        refs = {
            parse_data_ref(entry["ref"], comp.quality, "provided.ref") for entry in self.provided
        }
        have_values = set(self.instance_params())
        known = set(comp.all_refs())
        refs = {r for r in refs if r in known}
        for ref in known:
            if ref.value in have_values:
                refs.add(ref)
        return tuple(sorted(refs, key=DataRef.key))

    def dataset_states_doc(self, comp: CompositeObject | None) -> list[dict]:
        if comp is None:
            return []
        graph = select_structure(comp, self.enabled_models(comp))
        states = mark_dataset_states(graph, self.provided_refs(comp))
        return [s.as_document() for s in states]

    def state_document(self) -> dict:
        comp = self.composite()
        return {
            "format_version": FORMAT_VERSION,
            "session_id": self.id,
            "mode": self.mode,
            "classes": sorted(self.classes),
            "instances": {
                name: {
                    "params": dict(sorted(inst.params_by_value.items())),
                    "missing": list(inst.missing_params()),
                }
                for name, inst in sorted(self.instances.items())
            },
            "composite": composite_document(comp) if comp else None,
            "enabled_models": list(self.enabled_models(comp)) if comp else [],
            "provided": sorted(
                ({"ref": e["ref"], "source": e["source"]} for e in self.provided),
                key=lambda e: (e["ref"]["value"], e["ref"]["basis"] or ""),
            ),
            "dataset_states": self.dataset_states_doc(comp),
            "plan_count": self.last_plan_count,
            "runs": sorted(self.runs),
        }


def snapshot_session(session: SessionState) -> dict:
    """Serializable snapshot of a session (same formats as the wire bodies)."""
    from .kb import class_document

    return {
        "format_version": FORMAT_VERSION,
        "session_id": session.id,
        "mode": session.mode,
        "classes": {name: class_document(cls) for name, cls in session.classes.items()},
        "load_order": list(session.load_order),
        "instances": {name: inst.params_by_value for name, inst in session.instances.items()},
        "compose_order": list(session.compose_order),
        "toggles": dict(session.toggles),
        "scenario_sel": dict(session.scenario_sel),
        "provided": list(session.provided),
        "runs": dict(session.runs),
    }


def restore_session(doc: dict) -> SessionState:
    session = SessionState(doc["session_id"])
    session.mode = doc.get("mode", "analysis")
    for name, cls_doc in doc.get("classes", {}).items():
        session.classes[name] = parse_class_dict(cls_doc)
    session.load_order = list(doc.get("load_order", []))
    for name, params in doc.get("instances", {}).items():
        session.instances[name] = instantiate(session.classes[name], params)
    session.compose_order = list(doc.get("compose_order", []))
    session.toggles = dict(doc.get("toggles", {}))
    session.scenario_sel = dict(doc.get("scenario_sel", {}))
    session.provided = list(doc.get("provided", []))
    session.runs = dict(doc.get("runs", {}))
    return session


class SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionState] = {}
        self._counter = itertools.count(1)

    def create(self) -> SessionState:
        with self._lock:
            sid = f"s{next(self._counter):04d}"
            session = SessionState(sid)
            self._sessions[sid] = session
            return session

    def get(self, sid: str) -> SessionState:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise UnknownSessionError(f"unknown session '{sid}'", sid)
        return session


def _canonical_response(doc: dict) -> Response:
    return Response(content=canonical_json(doc).encode("utf-8"), media_type="application/json")


def create_app(
    kb_dir: str | Path | None = None,
    registry: PackageRegistry | None = None,
) -> FastAPI:
    kb_path = Path(kb_dir) if kb_dir else FIXTURE_DIR
    package_registry = registry or fixture_registry()
    app = FastAPI(title="simcompose", version="0.1.0")
    store = SessionStore()
    app.state.store = store
    app.state.kb_dir = kb_path
    app.state.registry = package_registry

    def available_classes() -> dict[str, Path]:
        out = {}
        for path in sorted(kb_path.glob("*.json")):
            try:
                cls = load_class(path)
            except SimComposeError:
                continue
            out[cls.name] = path
        return out

    @app.exception_handler(SimComposeError)
    async def engine_error_handler(_: Request, exc: SimComposeError):
        status = 404 if isinstance(exc, (UnknownSessionError, UnknownModelError)) else 400
        body = dict(exc.as_document())
        body["format_version"] = FORMAT_VERSION
        return JSONResponse(status_code=status, content=body)

    @app.post("/sessions")
    def create_session():
        session = store.create()
        return {"format_version": FORMAT_VERSION, "session_id": session.id}

    @app.get("/classes")
    def list_classes():
        classes = []
        for name, path in sorted(available_classes().items()):
            cls = load_class(path)
            classes.append({"name": name, "version": cls.version, "mode": cls.mode})
        return {"format_version": FORMAT_VERSION, "classes": classes}

    def handle_command(session: SessionState, body: dict) -> None:
        command = body.get("command")
        if command not in COMMANDS:
            raise DocumentSyntaxError(f"unknown command '{command}'", "command")
        if command == "load_class":
            if "document" in body:
                cls = parse_class_dict(body["document"])
            else:
                name = body.get("name", "")
                catalog = available_classes()
                if name not in catalog:
                    raise DanglingReferenceError(f"no class named '{name}' available", name)
                cls = load_class(catalog[name])
            session.classes[cls.name] = cls
            if cls.name not in session.load_order:
                session.load_order.append(cls.name)
        elif command == "instantiate":
            name = body.get("class", "")
            if name not in session.classes:
                raise DanglingReferenceError(f"class '{name}' not loaded", name)
            session.instances[name] = instantiate(session.classes[name], body.get("params", {}))
        elif command == "compose":
            names = body.get("classes") or session.load_order
            if not names:
                raise NoCompositeError("no classes loaded to compose")
            for name in names:
                if name not in session.classes:
                    raise DanglingReferenceError(f"class '{name}' not loaded", name)
            session.compose_order = list(names)
            session.composite()  # validate eagerly so errors surface here
        elif command in ("enable_model", "disable_model"):
            comp = session.composite()
            if comp is None:
                raise NoCompositeError("compose classes before toggling models")
            mid = body.get("model", "")
            if mid not in comp.models_by_id():
                raise UnknownModelError(f"unknown model '{mid}'", f"models.{mid}")
            session.toggles[mid] = command == "enable_model"
        elif command == "select_scenario":
            comp = session.composite()
            if comp is None:
                raise NoCompositeError("compose classes before selecting scenarios")
            mid, sid = body.get("model", ""), body.get("scenario", "")
            model = comp.models_by_id().get(mid)
            if model is None:
                raise UnknownModelError(f"unknown model '{mid}'", f"models.{mid}")
            if model.scenario(sid) is None:
                raise DanglingReferenceError(
                    f"model '{mid}' has no scenario '{sid}'", f"models.{mid}.scenarios.{sid}"
                )
            session.scenario_sel[mid] = sid
        elif command == "declare_provided":
            comp = session.composite()
            if comp is None:
                raise NoCompositeError("compose classes before declaring data")
            ref = parse_data_ref(body.get("ref", {}), comp.quality, "ref")
            if ref not in set(comp.all_refs()):
                raise DanglingReferenceError(
                    f"ref {ref.label()} does not occur in the composite", ref.label()
                )
            source = body.get("source", "user")
            if source not in PROVIDED_SOURCES:
                raise DocumentSyntaxError(f"unknown source '{source}'", "source")
            entry = {
                "ref": ref.as_document(),
                "source": source,
                "payload": body.get("payload"),
                "quality": body.get("quality"),
            }
            session.provided = [
                e for e in session.provided if e["ref"] != entry["ref"]
            ] + [entry]
        elif command == "set_mode":
            mode = body.get("mode", "")
            if mode not in ("analysis", "forecast", "optimization"):
                raise DocumentSyntaxError(f"unknown mode '{mode}'", "mode")
            session.mode = mode

    @app.post("/sessions/{sid}/commands")
    def post_command(sid: str, body: dict):
        session = store.get(sid)
        with session.lock:
            handle_command(session, body)
            return _canonical_response(session.state_document())

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str):
        session = store.get(sid)
        with session.lock:
            return _canonical_response(session.state_document())

    @app.post("/sessions/{sid}/plans")
    def post_plans(sid: str, body: dict, cap: int = DEFAULT_CAP):
        session = store.get(sid)
        with session.lock:
            comp = session.composite()
            if comp is None:
                raise NoCompositeError("compose classes before planning")
            request = parse_request(body, comp)
            result = ranked_plans_for(
                comp, request, enabled=session.enabled_models(comp), cap=cap
            )
            session.last_plan_count = len(result.plans)
            return _canonical_response(plans_document(result))

    @app.post("/sessions/{sid}/runs")
    def post_run(sid: str, body: dict):
        session = store.get(sid)
        with session.lock:
            comp = session.composite()
            if comp is None:
                raise NoCompositeError("compose classes before running")
            request = parse_request(body.get("request", {}), comp)
            outcome = run_pipeline(
                comp,
                request,
                package_registry,
                enabled=session.enabled_models(comp),
                plan_choice=body.get("plan", "auto"),
                cap=int(body.get("cap", DEFAULT_CAP)),
                instance_params=session.instance_params(),
            )
            for child in outcome.child_docs:
                session.runs[child["run_id"]] = child
            session.runs[outcome.run_id] = outcome.run_doc
            session.last_plan_count = len(outcome.plans.plans)
            return {
                "format_version": FORMAT_VERSION,
                "run_id": outcome.run_id,
                "status": outcome.status,
            }

    @app.get("/sessions/{sid}/runs/{rid}")
    def get_run(sid: str, rid: str):
        session = store.get(sid)
        with session.lock:
            doc = session.runs.get(rid)
            if doc is None:
                raise DanglingReferenceError(f"unknown run '{rid}'", rid)
            return _canonical_response(doc)

    return app


app = create_app()
