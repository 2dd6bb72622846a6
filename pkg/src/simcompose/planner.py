"""Task interpretation: structure filtering, dataset-state marking, plan
enumeration and ranking, and the task-mode templates.

Plan search is backward chaining from the requested refs over producer
models. Model-to-model dataflow must follow declared (active) edges;
provided data covers any input directly, and requested data only needs to
be produced by some plan model. A plan is a minimal acyclic sub-graph: no
model can be removed while the remaining set still derives every requested
ref from the provided ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Iterable

from .canon import FORMAT_VERSION, canonical_json
from .compose import NEEDS_PACKAGE_SCENARIO, TransitionModel
from .errors import (
    DanglingReferenceError,
    DocumentSyntaxError,
    ModeSpecMissingError,
    NoPlanError,
    UnknownModelError,
)
from .kb import parse_data_ref
from .types import (
    DataRef,
    Edge,
    KVPairs,
    Model,
    SimObjectClass,
    freeze_map,
    thaw_map,
)

DEFAULT_CAP = 64
SIMULATED_PENALTY = 0.5  # expert-score multiplier for refs not measured
_SEARCH_LIMIT = 4096  # safety valve on intermediate support-set fan-out

STATE_OK = "OK"
STATE_NEEDED = "NEEDED"
STATE_UNAVAILABLE = "UNAVAILABLE"


@dataclass(frozen=True)
class FilteredGraph:
    """A composite restricted to the models selected for the task."""

    base: SimObjectClass
    enabled_models: tuple[str, ...]
    active_edges: tuple[Edge, ...]

    def enabled_set(self) -> frozenset[str]:
        return frozenset(self.enabled_models)


@dataclass(frozen=True)
class DatasetState:
    """Availability marker for one dataset block (OK / NEEDED / UNAVAILABLE)."""

    ref: DataRef
    state: str
    reason: str

    def as_document(self) -> dict:
        return {"ref": self.ref.as_document(), "state": self.state, "reason": self.reason}


@dataclass(frozen=True)
class Plan:
    """A minimal executable sub-graph, models in firing order."""

    models: tuple[tuple[str, str], ...]
    edges: tuple[Edge, ...]
    provided: tuple[DataRef, ...]
    produced: tuple[DataRef, ...]
    score: float

    def model_ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.models)

    def as_document(self) -> dict:
        return {
            "models": [[m, s] for m, s in self.models],
            "edges": [e.as_document() for e in self.edges],
            "provided": [r.as_document() for r in self.provided],
            "produced": [r.as_document() for r in self.produced],
            "score": self.score,
        }


@dataclass(frozen=True)
class ProvidedData:
    """One provided dataset: the ref, its payload, and its runtime quality."""

    ref: DataRef
    payload: Any = None
    quality: KVPairs = ()
    source: str = "user"

    def quality_map(self) -> dict:
        return thaw_map(self.quality) if self.quality else self.ref.quality_map


@dataclass(frozen=True)
class TaskRequest:
    """What the user wants: provided data, requested data, and the task mode."""

    mode: str = "analysis"
    provided: tuple[ProvidedData, ...] = ()
    requested: tuple[DataRef, ...] = ()
    params: KVPairs = ()  # const-value payloads by value id
    forecast_basis: str | None = None
    forecast_params: KVPairs = ()
    objective: DataRef | None = None
    direction: str = "min"
    sweep: tuple[tuple[DataRef, tuple], ...] = ()
    disabled_models: tuple[str, ...] = ()
    basis_overrides: tuple[tuple[str, KVPairs], ...] = ()
    sweep_point: KVPairs = ()

    def provided_refs(self) -> frozenset[DataRef]:
        return frozenset(p.ref for p in self.provided)

    def params_map(self) -> dict:
        return thaw_map(self.params)


def model_runnable(model: Model) -> bool:
    """A model can fire when its selected scenario is executable: it calls at
    least one package, or it is a transition with a selection script."""
    scenario = model.scenario(model.selected_scenario)
    if scenario is None:
        return False
    if scenario.package_seq:
        return True
    if isinstance(model, TransitionModel):
        return bool(model.script) and model.selected_scenario != NEEDS_PACKAGE_SCENARIO
    return False


def select_structure(composite: SimObjectClass, enabled: Iterable[str]) -> FilteredGraph:
    """Restrict the model graph to an enabled subset; edges touching a
    disabled model are dropped."""
    enabled = tuple(sorted(set(enabled)))
    known = composite.models_by_id()
    for mid in enabled:
        if mid not in known:
            raise UnknownModelError(f"unknown model '{mid}'", f"models.{mid}")
    enabled_set = set(enabled)
    active = tuple(
        e for e in composite.edges if e.from_model in enabled_set and e.to_model in enabled_set
    )
    return FilteredGraph(base=composite, enabled_models=enabled, active_edges=active)


def _edge_producers(graph: FilteredGraph) -> dict[tuple[str, DataRef], tuple[str, ...]]:
    """Map (consumer model, input ref) to the producers wired to it."""
    models = graph.base.models_by_id()
    runnable = {
        mid for mid in graph.enabled_models if model_runnable(models[mid])
    }
    producers: dict[tuple[str, DataRef], list[str]] = {}
    for e in graph.active_edges:
        if e.from_model in runnable and e.to_model in runnable:
            producers.setdefault((e.to_model, e.data), []).append(e.from_model)
    return {k: tuple(sorted(v)) for k, v in producers.items()}


def _firing_order(
    graph: FilteredGraph, provided: frozenset[DataRef], subset: frozenset[str] | None = None
) -> tuple[tuple[str, ...], frozenset[DataRef]]:
    """Deterministic closure: fire every model (within subset) whose inputs
    are provided or wired from an already-fired model. Returns the firing
    sequence and the set of refs available afterwards."""
    models = graph.base.models_by_id()
    candidates = [
        mid
        for mid in graph.enabled_models
        if (subset is None or mid in subset) and model_runnable(models[mid])
    ]
    producers = _edge_producers(graph)
    fired: list[str] = []
    fired_set: set[str] = set()
    progress = True
    while progress:
        progress = False
        for mid in candidates:
            if mid in fired_set:
                continue
            m = models[mid]
            ok = True
            for d in m.inputs:
                if d in provided:
                    continue
                if any(p in fired_set for p in producers.get((mid, d), ())):
                    continue
                ok = False
                break
            if ok:
                fired.append(mid)
                fired_set.add(mid)
                progress = True
    available = set(provided)
    for mid in fired:
        available.update(models[mid].outputs)
    return tuple(fired), frozenset(available)


def _covers(
    graph: FilteredGraph,
    provided: frozenset[DataRef],
    requested: frozenset[DataRef],
    subset: frozenset[str],
) -> bool:
    _, available = _firing_order(graph, provided, subset)
    return requested <= available


def _merge_support_lists(
    acc: list[frozenset], alts: list[frozenset], overflow: dict
) -> list[frozenset]:
    combined = {a | b for a in acc for b in alts}
    out = sorted(combined, key=lambda s: (len(s), tuple(sorted(s))))
    if len(out) > _SEARCH_LIMIT:
        overflow["hit"] = True
        out = out[:_SEARCH_LIMIT]
    return out


def _model_supports(
    mid: str,
    graph: FilteredGraph,
    provided: frozenset[DataRef],
    producers: dict,
    path: frozenset[str],
    overflow: dict,
) -> list[frozenset[str]]:
    """All model sets (including this model) able to make it fire; a model
    may not appear twice on one derivation path, which breaks cycles."""
    if mid in path:
        return []
    model = graph.base.models_by_id()[mid]
    acc: list[frozenset] = [frozenset()]
    for d in model.inputs:
        alts: list[frozenset] = []
        if d in provided:
            alts.append(frozenset())
        for pid in producers.get((mid, d), ()):
            for sup in _model_supports(pid, graph, provided, producers, path | {mid}, overflow):
                alts.append(sup | {pid})
        if not alts:
            return []
        acc = _merge_support_lists(acc, alts, overflow)
    return [s | {mid} for s in acc]


def _blockers(
    graph: FilteredGraph, provided: frozenset[DataRef], requested: frozenset[DataRef]
) -> tuple[DataRef, ...]:
    """Refs in the backward cone of the request that nothing can supply."""
    models = graph.base.models_by_id()
    enabled = graph.enabled_set()
    producers_of: dict[DataRef, list[str]] = {}
    for m in graph.base.models:
        for r in m.outputs:
            producers_of.setdefault(r, []).append(m.id)

    cone: set[DataRef] = set()
    stack = list(requested)
    while stack:
        ref = stack.pop()
        if ref in cone:
            continue
        cone.add(ref)
        for mid in producers_of.get(ref, ()):
            if mid in enabled and model_runnable(models[mid]):
                stack.extend(models[mid].inputs)

    blockers = []
    for ref in cone:
        if ref in provided:
            continue
        candidates = producers_of.get(ref, [])
        usable = [
            mid for mid in candidates if mid in enabled and model_runnable(models[mid])
        ]
        if not usable:
            blockers.append(ref)
    return tuple(sorted(blockers, key=DataRef.key))


@dataclass(frozen=True)
class PlanSearchResult:
    plans: tuple[Plan, ...]
    truncated: bool


def _build_plan(
    graph: FilteredGraph,
    provided: frozenset[DataRef],
    requested: frozenset[DataRef],
    subset: frozenset[str],
    penalty: float,
) -> Plan:
    models = graph.base.models_by_id()
    order, _ = _firing_order(graph, provided, subset)
    index = {mid: i for i, mid in enumerate(order)}
    edges = tuple(
        sorted(
            (
                e
                for e in graph.active_edges
                if e.from_model in subset
                and e.to_model in subset
                and index[e.from_model] < index[e.to_model]
                and e.data in models[e.to_model].inputs
            ),
            key=lambda e: (index[e.from_model], index[e.to_model], e.data.key()),
        )
    )
    consumed: set[DataRef] = set()
    produced: set[DataRef] = set()
    for mid in order:
        consumed.update(models[mid].inputs)
        produced.update(models[mid].outputs)
    used_provided = (provided & consumed) | (provided & requested)
    scored = [r for r in requested if r in produced]
    contributions = [
        r.quality_map.get("expert", 0.0)
        * (1.0 if r.quality_map.get("measured", 0) else penalty)
        for r in scored
    ]
    score = round(sum(contributions) / len(contributions), 9) if contributions else 0.0
    return Plan(
        models=tuple((mid, models[mid].selected_scenario) for mid in order),
        edges=edges,
        provided=tuple(sorted(used_provided, key=DataRef.key)),
        produced=tuple(sorted(produced, key=DataRef.key)),
        score=score,
    )


def enumerate_plans(
    graph: FilteredGraph,
    request: TaskRequest,
    cap: int = DEFAULT_CAP,
    penalty: float = SIMULATED_PENALTY,
) -> PlanSearchResult:
    """Enumerate every minimal plan deriving the requested refs.

    Returns plans in deterministic order (lexicographic by model-id
    sequence), truncated at *cap* with the truncation flagged. Raises
    NoPlanError, listing the blocking refs, when the request is
    unreachable.
    """
    if cap < 1:
        raise DocumentSyntaxError("cap must be >= 1", "cap")
    if not request.requested:
        raise DocumentSyntaxError("request names no requested refs", "requested")
    provided = request.provided_refs()
    requested = frozenset(request.requested)
    models = graph.base.models_by_id()
    producers = _edge_producers(graph)
    runnable = [
        mid for mid in graph.enabled_models if model_runnable(models[mid])
    ]

    overflow = {"hit": False}
    per_ref: list[list[frozenset[str]]] = []
    for ref in sorted(requested, key=DataRef.key):
        alts: list[frozenset[str]] = []
        if ref in provided:
            alts.append(frozenset())
        for mid in runnable:
            if ref in models[mid].outputs:
                alts.extend(
                    _model_supports(mid, graph, provided, producers, frozenset(), overflow)
                )
        if not alts:
            blockers = _blockers(graph, provided, requested)
            labels = ", ".join(r.label() for r in blockers)
            raise NoPlanError(
                f"no way to derive {ref.label()}; blocked on: {labels}", blockers
            )
        per_ref.append(sorted(set(alts), key=lambda s: (len(s), tuple(sorted(s)))))

    candidates: list[frozenset[str]] = [frozenset()]
    for alts in per_ref:
        candidates = _merge_support_lists(candidates, alts, overflow)

    covering = [s for s in candidates if _covers(graph, provided, requested, s)]
    minimal = []
    seen = set()
    for s in covering:
        if s in seen:
            continue
        seen.add(s)
        if all(not _covers(graph, provided, requested, s - {mid}) for mid in s):
            minimal.append(s)
    if not minimal:
        blockers = _blockers(graph, provided, requested)
        labels = ", ".join(r.label() for r in blockers)
        raise NoPlanError(f"request is not derivable; blocked on: {labels}", blockers)

    plans = [_build_plan(graph, provided, requested, s, penalty) for s in minimal]
    plans.sort(key=Plan.model_ids)
    truncated = len(plans) > cap or overflow["hit"]
    return PlanSearchResult(plans=tuple(plans[:cap]), truncated=truncated)


def rank_plans(plans: Iterable[Plan]) -> tuple[Plan, ...]:
    """Sort by score descending, then fewer models, then model-id sequence."""
    return tuple(sorted(plans, key=lambda p: (-p.score, len(p.models), p.model_ids())))


def mark_dataset_states(
    graph: FilteredGraph, provided: Iterable[DataRef]
) -> tuple[DatasetState, ...]:
    """Mark every dataset of the graph as OK, NEEDED or UNAVAILABLE.

    OK: provided, or producible by enabled models whose transitive inputs
    are satisfiable. UNAVAILABLE: every producer of the ref is disabled.
    NEEDED: everything else (no producer at all, or producers that cannot
    run until supplied or tuned).
    """
    provided = frozenset(provided)
    universe = graph.base.all_refs()
    known = set(universe)
    for ref in provided:
        if ref not in known:
            raise DanglingReferenceError(
                f"provided ref {ref.label()} does not occur in the graph", ref.label()
            )
    models = graph.base.models_by_id()
    enabled = graph.enabled_set()
    order, available = _firing_order(graph, provided)
    first_producer: dict[DataRef, str] = {}
    for mid in order:
        for r in models[mid].outputs:
            first_producer.setdefault(r, mid)

    states = []
    for ref in universe:
        if ref in provided:
            states.append(DatasetState(ref, STATE_OK, "provided"))
            continue
        if ref in available:
            states.append(
                DatasetState(ref, STATE_OK, f"producible via {first_producer[ref]}")
            )
            continue
        producers = sorted(m.id for m in graph.base.models if ref in m.outputs)
        if producers and all(mid not in enabled for mid in producers):
            states.append(
                DatasetState(
                    ref, STATE_UNAVAILABLE, "all producers disabled: " + ", ".join(producers)
                )
            )
            continue
        if producers:
            reason = "producers cannot run: " + ", ".join(producers)
        else:
            reason = "no producer; must be supplied"
        states.append(DatasetState(ref, STATE_NEEDED, reason))
    return tuple(states)


def apply_mode(request: TaskRequest, graph: FilteredGraph) -> tuple[TaskRequest, ...]:
    """Expand a task request according to its mode template.

    analysis passes through; forecast overrides the params of one time
    basis; optimization derives one analysis request per point of the swept
    parameter grid, recording the sweep point for the post-run argbest.
    """
    if request.mode == "analysis":
        return (request,)
    if request.mode == "forecast":
        if not request.forecast_basis or not request.forecast_params:
            raise ModeSpecMissingError("forecast mode requires a horizon basis override", "forecast")
        basis = graph.base.bases_by_id().get(request.forecast_basis)
        if basis is None:
            raise DanglingReferenceError(
                f"unknown basis '{request.forecast_basis}'", f"bases.{request.forecast_basis}"
            )
        if basis.kind != "time":
            raise ModeSpecMissingError(
                f"forecast horizon basis '{basis.id}' must be a time basis", f"bases.{basis.id}"
            )
        merged = dict(basis.params_map)
        merged.update(thaw_map(request.forecast_params))
        derived = replace(
            request,
            mode="analysis",
            basis_overrides=((basis.id, freeze_map(merged)),),
        )
        return (derived,)
    if request.mode == "optimization":
        if request.objective is None or not request.sweep:
            raise ModeSpecMissingError(
                "optimization mode requires an objective and a swept parameter grid", "optimization"
            )
        points: list[list[tuple[DataRef, Any]]] = [[]]
        for ref, values in request.sweep:
            points = [p + [(ref, v)] for p in points for v in values]
        derived = []
        for point in points:
            overrides = {ref: value for ref, value in point}
            new_provided = tuple(
                replace(p, payload=overrides.get(p.ref, p.payload)) for p in request.provided
            )
            derived.append(
                replace(
                    request,
                    mode="analysis",
                    provided=new_provided,
                    sweep_point=freeze_map(
                        {ref.label(): value for ref, value in point}
                    ),
                )
            )
        return tuple(derived)
    raise DocumentSyntaxError(f"unknown mode '{request.mode}'", "mode")


# Document encoding ----------------------------------------------------------


def plan_document(plan: Plan) -> dict:
    return plan.as_document()


def plans_document(result: PlanSearchResult) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "plans": [p.as_document() for p in result.plans],
        "truncated": result.truncated,
    }


def serialize_plans(result: PlanSearchResult) -> str:
    return canonical_json(plans_document(result))


def parse_plan_document(doc: dict, cls: SimObjectClass) -> Plan:
    space = cls.quality
    return Plan(
        models=tuple((m, s) for m, s in doc["models"]),
        edges=tuple(
            Edge(
                from_model=e["from_model"],
                to_model=e["to_model"],
                data=parse_data_ref(e["data"], space, "edges.data"),
            )
            for e in doc["edges"]
        ),
        provided=tuple(parse_data_ref(r, space, "provided") for r in doc["provided"]),
        produced=tuple(parse_data_ref(r, space, "produced") for r in doc["produced"]),
        score=doc["score"],
    )


def request_document(request: TaskRequest) -> dict:
    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "mode": request.mode,
        "provided": [
            {
                "ref": p.ref.as_document(),
                "payload": p.payload,
                "quality": p.quality_map(),
                "source": p.source,
            }
            for p in request.provided
        ],
        "requested": [r.as_document() for r in request.requested],
        "params": request.params_map(),
    }
    if request.disabled_models:
        doc["disabled_models"] = list(request.disabled_models)
    if request.mode == "forecast":
        doc["forecast"] = {
            "basis": request.forecast_basis,
            "params": thaw_map(request.forecast_params),
        }
    if request.mode == "optimization":
        doc["optimization"] = {
            "objective": request.objective.as_document() if request.objective else None,
            "direction": request.direction,
            "sweep": [
                {"ref": ref.as_document(), "values": list(values)}
                for ref, values in request.sweep
            ],
        }
    return doc


def parse_request(doc: dict, cls: SimObjectClass) -> TaskRequest:
    """Decode a task-request document against a class's quality space."""
    if not isinstance(doc, dict):
        raise DocumentSyntaxError("request must be an object", "")
    space = cls.quality
    mode = doc.get("mode", "analysis")
    provided = []
    for i, p in enumerate(doc.get("provided", [])):
        path = f"provided[{i}]"
        if not isinstance(p, dict) or "ref" not in p:
            raise DocumentSyntaxError("provided entry must carry a ref", path)
        ref = parse_data_ref(p["ref"], space, f"{path}.ref")
        provided.append(
            ProvidedData(
                ref=ref,
                payload=p.get("payload"),
                quality=freeze_map(space.normalize_point(p.get("quality"))) if p.get("quality") else (),
                source=p.get("source", "user"),
            )
        )
    requested_doc = doc.get("requested", [])
    if not requested_doc:
        raise DocumentSyntaxError("request names no requested refs", "requested")
    requested = tuple(
        parse_data_ref(r, space, f"requested[{i}]") for i, r in enumerate(requested_doc)
    )
    forecast = doc.get("forecast") or {}
    optimization = doc.get("optimization") or {}
    objective = None
    sweep: list[tuple[DataRef, tuple]] = []
    if optimization:
        if optimization.get("objective"):
            objective = parse_data_ref(optimization["objective"], space, "optimization.objective")
        for i, entry in enumerate(optimization.get("sweep", [])):
            ref = parse_data_ref(entry["ref"], space, f"optimization.sweep[{i}].ref")
            sweep.append((ref, tuple(entry.get("values", []))))
    return TaskRequest(
        mode=mode,
        provided=tuple(provided),
        requested=requested,
        params=freeze_map(doc.get("params", {})),
        forecast_basis=forecast.get("basis"),
        forecast_params=freeze_map(forecast.get("params", {})),
        objective=objective,
        direction=optimization.get("direction", "min"),
        sweep=tuple(sweep),
        disabled_models=tuple(sorted(doc.get("disabled_models", []))),
    )
