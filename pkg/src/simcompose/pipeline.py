"""End-to-end orchestration shared by the CLI and the HTTP service.

Both front ends call these helpers, so a plan listing or a run document is
byte-identical no matter which surface produced it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .canon import FORMAT_VERSION, content_id
from .errors import DocumentSyntaxError
from .planner import (
    DEFAULT_CAP,
    Plan,
    PlanSearchResult,
    TaskRequest,
    apply_mode,
    enumerate_plans,
    rank_plans,
    select_structure,
)
from .types import SimObjectClass, thaw_map
from .workflow import PackageRegistry, compile_awf, bind_packages, execute


def default_enabled(composite: SimObjectClass) -> tuple[str, ...]:
    return tuple(sorted(m.id for m in composite.models if m.enabled))


def effective_enabled(
    composite: SimObjectClass,
    enabled: tuple[str, ...] | None,
    request: TaskRequest,
) -> tuple[str, ...]:
    base = set(enabled if enabled is not None else default_enabled(composite))
    base -= set(request.disabled_models)
    return tuple(sorted(base))


def ranked_plans_for(
    composite: SimObjectClass,
    request: TaskRequest,
    enabled: tuple[str, ...] | None = None,
    cap: int = DEFAULT_CAP,
) -> PlanSearchResult:
    """Enumerate and rank plans for a request (mode template applied first)."""
    graph = select_structure(composite, effective_enabled(composite, enabled, request))
    derived = apply_mode(request, graph)
    result = enumerate_plans(graph, derived[0], cap)
    return PlanSearchResult(plans=rank_plans(result.plans), truncated=result.truncated)


def choose_plan(result: PlanSearchResult, choice: str | int) -> Plan:
    if choice in ("auto", "AUTO"):
        return result.plans[0]
    try:
        index = int(choice)
        return result.plans[index]
    except (ValueError, IndexError) as exc:
        raise DocumentSyntaxError(
            f"plan choice '{choice}' does not select one of {len(result.plans)} plans", "plan"
        ) from exc


@dataclass
class PipelineOutcome:
    """Everything one orchestrated run produces."""

    plans: PlanSearchResult
    plan: Plan
    awf_docs: list[dict]
    run_doc: dict
    child_docs: list[dict]

    @property
    def run_id(self) -> str:
        return self.run_doc["run_id"]

    @property
    def status(self) -> str:
        return self.run_doc["status"]


def _execute_derived(
    derived: TaskRequest,
    plan: Plan,
    composite: SimObjectClass,
    registry: PackageRegistry,
    params: dict[str, Any],
) -> tuple[dict, dict]:
    overrides = {bid: thaw_map(p) for bid, p in derived.basis_overrides}
    awf = compile_awf(plan, composite, params, overrides)
    cwf = bind_packages(awf, registry)
    inputs = {p.ref: p.payload for p in derived.provided}
    quality = {p.ref: p.quality_map() for p in derived.provided}
    result = execute(cwf, inputs, quality)
    return awf.as_document(), result.as_document()


def run_pipeline(
    composite: SimObjectClass,
    request: TaskRequest,
    registry: PackageRegistry,
    enabled: tuple[str, ...] | None = None,
    plan_choice: str | int = "auto",
    cap: int = DEFAULT_CAP,
    instance_params: dict[str, Any] | None = None,
) -> PipelineOutcome:
    """Plan, compile, bind and execute one request.

    Analysis and forecast requests produce a single run document.
    Optimization requests produce one child run per grid point plus a
    summary document holding the argbest over the objective.
    """
    graph = select_structure(composite, effective_enabled(composite, enabled, request))
    derived_requests = apply_mode(request, graph)
    search = enumerate_plans(graph, derived_requests[0], cap)
    ranked = PlanSearchResult(plans=rank_plans(search.plans), truncated=search.truncated)
    plan = choose_plan(ranked, plan_choice)

    params = dict(instance_params or {})
    params.update(request.params_map())

    awf_docs: list[dict] = []
    run_docs: list[dict] = []
    for derived in derived_requests:
        awf_doc, run_doc = _execute_derived(derived, plan, composite, registry, params)
        awf_docs.append(awf_doc)
        run_docs.append(run_doc)

    if request.mode != "optimization":
        return PipelineOutcome(
            plans=ranked, plan=plan, awf_docs=awf_docs, run_doc=run_docs[0], child_docs=[]
        )

    objective = request.objective
    objective_doc = objective.as_document() if objective else None
    children = []
    best = None
    for derived, run_doc in zip(derived_requests, run_docs):
        value = None
        if run_doc["status"] == "succeeded" and objective is not None:
            for entry in run_doc["values"]:
                if entry["ref"] == objective_doc:
                    value = entry["payload"]
                    break
        entry = {
            "run_id": run_doc["run_id"],
            "status": run_doc["status"],
            "sweep_point": thaw_map(derived.sweep_point),
            "objective_value": value,
        }
        children.append(entry)
        if isinstance(value, (int, float)):
            better = (
                best is None
                or (request.direction == "min" and value < best["objective_value"])
                or (request.direction == "max" and value > best["objective_value"])
            )
            if better:
                best = entry
    summary = {
        "format_version": FORMAT_VERSION,
        "kind": "optimization_summary",
        "run_id": content_id([c["run_id"] for c in children], objective_doc, prefix="run-"),
        "status": "succeeded" if best is not None else "failed",
        "objective": objective_doc,
        "direction": request.direction,
        "children": children,
        "argbest": (
            {
                "run_id": best["run_id"],
                "sweep_point": best["sweep_point"],
                "objective_value": best["objective_value"],
            }
            if best
            else None
        ),
    }
    return PipelineOutcome(
        plans=ranked, plan=plan, awf_docs=awf_docs, run_doc=summary, child_docs=run_docs
    )
