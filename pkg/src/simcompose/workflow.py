"""Workflow compilation and execution.

A plan compiles to an abstract workflow: one block per package call (a
scenario with k packages yields k chained blocks) or one inline block for a
packageless transition, with every scenario parameter resolved to a
literal. Binding attaches registry stubs to package blocks, and execution
walks the blocks in topological order, propagating payloads and quality.

Execution is fully deterministic: run ids derive from content and trace
timestamps are logical (a fixed epoch plus the step index), so identical
inputs give byte-identical run documents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

from .canon import FORMAT_VERSION, canonical_json, content_id
from .compose import TransitionModel
from .errors import (
    CycleDetectedError,
    DuplicatePackageError,
    InvariantError,
    MissingInputError,
    MissingPackageError,
    SignatureMismatchError,
    UnresolvedParamError,
)
from .kb import parse_data_ref
from .planner import Plan
from .types import (
    DataRef,
    KVPairs,
    QualityAxis,
    QualitySpace,
    SimObjectClass,
    freeze_map,
    thaw_map,
)

KIND_PACKAGE = "package_call"
KIND_INLINE = "inline_script"

# Real axes aggregate as the minimum over block inputs; an empty input cone
# bottoms out at this value.
EMPTY_CONE_EXPERT = 0.0


@dataclass(frozen=True)
class AWFBlock:
    """One workflow step: a package call or an inline selection script."""

    id: str
    kind: str
    model: str
    scenario: str
    package: str | None
    params: KVPairs = ()
    basis_params: tuple[tuple[str, KVPairs], ...] = ()
    consumes: tuple[DataRef, ...] = ()
    produces: tuple[DataRef, ...] = ()
    script: KVPairs = ()

    @property
    def params_map(self) -> dict:
        return thaw_map(self.params)

    @property
    def basis_params_map(self) -> dict[str, dict]:
        return {bid: thaw_map(p) for bid, p in self.basis_params}

    def as_document(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "model": self.model,
            "scenario": self.scenario,
            "package": self.package,
            "params": self.params_map,
            "basis_params": self.basis_params_map,
            "consumes": [r.as_document() for r in self.consumes],
            "produces": [r.as_document() for r in self.produces],
            "script": thaw_map(self.script),
        }


@dataclass(frozen=True)
class AWF:
    """Abstract workflow: blocks plus producer/consumer links over DataRefs."""

    blocks: tuple[AWFBlock, ...] = ()
    links: tuple[tuple[str, str, DataRef], ...] = ()
    space: QualitySpace = QualitySpace(())

    def external_inputs(self) -> tuple[DataRef, ...]:
        produced = {r for b in self.blocks for r in b.produces}
        consumed = {r for b in self.blocks for r in b.consumes}
        return tuple(sorted(consumed - produced, key=DataRef.key))

    def block(self, block_id: str) -> AWFBlock | None:
        for b in self.blocks:
            if b.id == block_id:
                return b
        return None

    def as_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "blocks": [b.as_document() for b in self.blocks],
            "links": [
                {"producer": p, "consumer": c, "data": d.as_document()} for p, c, d in self.links
            ],
            "external_inputs": [r.as_document() for r in self.external_inputs()],
            "quality_axes": [{"id": a.id, "domain": a.domain} for a in self.space.axes],
        }


def serialize_awf(awf: AWF) -> str:
    return canonical_json(awf.as_document())


def parse_awf_document(doc: dict) -> AWF:
    space = QualitySpace(
        tuple(QualityAxis(a["id"], a["domain"]) for a in doc.get("quality_axes", []))
    )
    blocks = tuple(
        AWFBlock(
            id=b["id"],
            kind=b["kind"],
            model=b["model"],
            scenario=b["scenario"],
            package=b.get("package"),
            params=freeze_map(b.get("params", {})),
            basis_params=tuple(
                sorted((bid, freeze_map(p)) for bid, p in b.get("basis_params", {}).items())
            ),
            consumes=tuple(
                parse_data_ref(r, space, "consumes") for r in b.get("consumes", [])
            ),
            produces=tuple(
                parse_data_ref(r, space, "produces") for r in b.get("produces", [])
            ),
            script=freeze_map(b.get("script", {})),
        )
        for b in doc.get("blocks", [])
    )
    links = tuple(
        (l["producer"], l["consumer"], parse_data_ref(l["data"], space, "links.data"))
        for l in doc.get("links", [])
    )
    return AWF(blocks=blocks, links=links, space=space)


def _stage_ref(model_id: str, stage: int, space: QualitySpace) -> DataRef:
    return DataRef.make(f"{model_id}.stage{stage}", None, None, space)


def _resolve_params(model, scenario, instance_params: dict[str, Any]) -> dict[str, Any]:
    resolved: dict[str, Any] = {}
    for p in scenario.extra_params:
        if p.source == "literal":
            resolved[p.name] = p.binding
        elif p.source == "model_option":
            options = model.options_map
            if p.binding not in options:
                raise UnresolvedParamError(
                    f"model '{model.id}' has no option '{p.binding}' for scenario "
                    f"param '{p.name}'",
                    f"models.{model.id}.options.{p.binding}",
                )
            resolved[p.name] = options[p.binding]
        elif p.source == "vso_value":
            ref = p.binding
            if ref.value not in instance_params:
                raise UnresolvedParamError(
                    f"no instance payload for {ref.label()} bound to scenario param "
                    f"'{p.name}' of model '{model.id}'",
                    f"models.{model.id}.scenarios.{scenario.id}.extra_params.{p.name}",
                )
            resolved[p.name] = instance_params[ref.value]
    return resolved


def compile_awf(
    plan: Plan,
    composite: SimObjectClass,
    instance_params: dict[str, Any] | None = None,
    basis_overrides: dict[str, dict] | None = None,
) -> AWF:
    """Compile a plan into an abstract workflow.

    Every scenario parameter is resolved to a literal here: literals are
    taken as-is, model options come from the model, and value bindings are
    looked up in the instance payloads (UnresolvedParamError names the ref
    when one is missing). Links mirror the plan edges; chained package
    sequences get internal stage links.
    """
    instance_params = instance_params or {}
    basis_overrides = basis_overrides or {}
    models = composite.models_by_id()
    bases = composite.bases_by_id()
    space = composite.quality

    def basis_params_for(refs) -> tuple[tuple[str, KVPairs], ...]:
        out = {}
        for r in refs:
            if r.basis is None or r.basis not in bases:
                continue
            params = dict(bases[r.basis].params_map)
            params.update(basis_overrides.get(r.basis, {}))
            out[r.basis] = freeze_map(params)
        return tuple(sorted(out.items()))

    blocks: list[AWFBlock] = []
    links: list[tuple[str, str, DataRef]] = []
    first_block: dict[str, str] = {}
    last_block: dict[str, str] = {}

    for mid, sid in plan.models:
        model = models.get(mid)
        if model is None:
            raise InvariantError(f"plan references unknown model '{mid}'", f"models.{mid}")
        scenario = model.scenario(sid)
        if scenario is None:
            raise InvariantError(
                f"model '{mid}' has no scenario '{sid}'", f"models.{mid}.scenarios.{sid}"
            )
        params = freeze_map(_resolve_params(model, scenario, instance_params))
        if not scenario.package_seq:
            if not (isinstance(model, TransitionModel) and model.script):
                raise InvariantError(
                    f"scenario '{sid}' of model '{mid}' calls no package and has no script",
                    f"models.{mid}.scenarios.{sid}",
                )
            block = AWFBlock(
                id=mid,
                kind=KIND_INLINE,
                model=mid,
                scenario=sid,
                package=None,
                params=params,
                basis_params=basis_params_for(model.inputs + model.outputs),
                consumes=model.inputs,
                produces=model.outputs,
                script=model.script,
            )
            blocks.append(block)
            first_block[mid] = last_block[mid] = block.id
            continue
        seq = scenario.package_seq
        for i, pkg in enumerate(seq):
            block_id = mid if len(seq) == 1 else f"{mid}.{i + 1}"
            consumes = model.inputs if i == 0 else (_stage_ref(mid, i, space),)
            produces = model.outputs if i == len(seq) - 1 else (_stage_ref(mid, i + 1, space),)
            blocks.append(
                AWFBlock(
                    id=block_id,
                    kind=KIND_PACKAGE,
                    model=mid,
                    scenario=sid,
                    package=pkg,
                    params=params,
                    basis_params=basis_params_for(model.inputs + model.outputs),
                    consumes=consumes,
                    produces=produces,
                )
            )
            if i == 0:
                first_block[mid] = block_id
            else:
                links.append((f"{mid}.{i}" if len(seq) > 1 else mid, block_id, _stage_ref(mid, i, space)))
            last_block[mid] = block_id

    for e in plan.edges:
        links.append((last_block[e.from_model], first_block[e.to_model], e.data))

    return AWF(blocks=tuple(blocks), links=tuple(links), space=space)


def topo_order(awf: AWF) -> tuple[str, ...]:
    """Total block order, producers before consumers, ties broken by id."""
    ids = [b.id for b in awf.blocks]
    incoming: dict[str, set[str]] = {bid: set() for bid in ids}
    outgoing: dict[str, set[str]] = {bid: set() for bid in ids}
    for producer, consumer, _ in awf.links:
        if producer in incoming and consumer in incoming:
            incoming[consumer].add(producer)
            outgoing[producer].add(consumer)
    order: list[str] = []
    remaining = {bid: set(deps) for bid, deps in incoming.items()}
    while remaining:
        ready = sorted(bid for bid, deps in remaining.items() if not deps)
        if not ready:
            cycle = tuple(sorted(remaining))
            raise CycleDetectedError(
                "workflow links contain a cycle: " + ", ".join(cycle), cycle
            )
        for bid in ready:
            order.append(bid)
            del remaining[bid]
            for nxt in outgoing[bid]:
                if nxt in remaining:
                    remaining[nxt].discard(bid)
    return tuple(order)


# Package registry -----------------------------------------------------------


@dataclass(frozen=True)
class PackageStub:
    """Deterministic in-process stand-in for a software package.

    ``fn`` maps ({value id: payload}, {param: literal}) to
    {value id: payload} and must be pure.
    """

    id: str
    inputs: frozenset[str]
    outputs: frozenset[str]
    fn: Callable[[dict, dict], dict] = field(compare=False)


@dataclass(frozen=True)
class PackageRegistry:
    stubs: tuple[PackageStub, ...] = ()

    def by_id(self) -> dict[str, PackageStub]:
        return {s.id: s for s in self.stubs}

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(s.id for s in self.stubs))


def register_stub(registry: PackageRegistry, stub: PackageStub) -> PackageRegistry:
    if stub.id in registry.by_id():
        raise DuplicatePackageError(f"package '{stub.id}' already registered", stub.id)
    return PackageRegistry(stubs=registry.stubs + (stub,))


@dataclass(frozen=True)
class CWF:
    """A concrete workflow: the abstract one plus block-to-stub bindings.

    ``None`` as a binding means the block runs on the built-in selection
    interpreter.
    """

    awf: AWF
    bindings: tuple[tuple[str, PackageStub | None], ...]

    def stub_for(self, block_id: str) -> PackageStub | None:
        for bid, stub in self.bindings:
            if bid == block_id:
                return stub
        return None

    def bindings_map(self) -> dict[str, str]:
        return {bid: (stub.id if stub else "inline") for bid, stub in self.bindings}


def bind_packages(awf: AWF, registry: PackageRegistry) -> CWF:
    """Bind every package block to a registry stub with a matching signature;
    inline blocks bind to the built-in selection interpreter."""
    stubs = registry.by_id()
    missing = sorted(
        {b.package for b in awf.blocks if b.kind == KIND_PACKAGE and b.package not in stubs}
    )
    if missing:
        raise MissingPackageError(
            "registry lacks packages: " + ", ".join(missing), tuple(missing)
        )
    bindings: list[tuple[str, PackageStub | None]] = []
    for b in awf.blocks:
        if b.kind == KIND_INLINE:
            bindings.append((b.id, None))
            continue
        stub = stubs[b.package]
        consumed = frozenset(r.value for r in b.consumes)
        produced = frozenset(r.value for r in b.produces)
        if stub.inputs != consumed or stub.outputs != produced:
            raise SignatureMismatchError(
                f"stub '{stub.id}' signature ({sorted(stub.inputs)} -> {sorted(stub.outputs)}) "
                f"does not match block '{b.id}' ({sorted(consumed)} -> {sorted(produced)})",
                f"blocks.{b.id}",
            )
        bindings.append((b.id, stub))
    return CWF(awf=awf, bindings=tuple(bindings))


# Inline selection interpreter ------------------------------------------------


def run_selection(script: dict, basis_params: dict[str, dict], payload: Any) -> Any:
    """Built-in transition interpreter: nearest grid point for space,
    at-or-before sample for time, member filtering for groups, identity
    otherwise. Opaque payloads pass through unchanged."""
    method = script.get("method", "identity")
    target = basis_params.get(script.get("to_basis") or "", {})
    if method == "nearest_point" and isinstance(payload, dict) and "points" in payload:
        box = target
        if "x" in box and "y" in box:
            tx, ty = float(box["x"]), float(box["y"])
        elif all(k in box for k in ("x_min", "x_max", "y_min", "y_max")):
            tx = (float(box["x_min"]) + float(box["x_max"])) / 2.0
            ty = (float(box["y_min"]) + float(box["y_max"])) / 2.0
        else:
            raise ValueError("target space basis lacks a point or box")
        best = min(
            payload["points"],
            key=lambda p: ((float(p["x"]) - tx) ** 2 + (float(p["y"]) - ty) ** 2, float(p["x"]), float(p["y"])),
        )
        return best["value"]
    if method == "at_or_before" and isinstance(payload, dict) and "series" in payload:
        if "t" in target:
            t = float(target["t"])
        elif "start" in target:
            t = float(target["start"])
        else:
            raise ValueError("target time basis lacks an instant")
        eligible = [s for s in payload["series"] if float(s["t"]) <= t]
        if not eligible:
            raise ValueError(f"no sample at or before t={t}")
        return max(eligible, key=lambda s: float(s["t"]))["value"]
    if method == "subset" and isinstance(payload, dict) and "groups" in payload:
        members = set(map(str, target.get("members", [])))
        return {"groups": {k: v for k, v in payload["groups"].items() if k in members}}
    return payload


# Execution -------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    block: str
    start: str
    end: str
    status: str

    def as_document(self) -> dict:
        return {"block": self.block, "start": self.start, "end": self.end, "status": self.status}


@dataclass(frozen=True)
class RunResult:
    run_id: str
    status: str  # succeeded | failed
    values: tuple[tuple[DataRef, Any, KVPairs], ...]
    trace: tuple[TraceEntry, ...]
    failure: tuple[str, str] | None = None

    def values_map(self) -> dict[DataRef, Any]:
        return {ref: payload for ref, payload, _ in self.values}

    def quality_map(self) -> dict[DataRef, dict]:
        return {ref: thaw_map(q) for ref, _, q in self.values}

    def as_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "run_id": self.run_id,
            "status": self.status,
            "values": [
                {"ref": ref.as_document(), "payload": payload, "quality": thaw_map(q)}
                for ref, payload, q in self.values
            ],
            "trace": [t.as_document() for t in self.trace],
            "failure": {"block": self.failure[0], "error": self.failure[1]} if self.failure else None,
        }


def serialize_run_result(rr: RunResult) -> str:
    return canonical_json(rr.as_document())


def parse_run_result_document(doc: dict, space: QualitySpace) -> RunResult:
    return RunResult(
        run_id=doc["run_id"],
        status=doc["status"],
        values=tuple(
            (
                parse_data_ref(v["ref"], space, "values.ref"),
                v.get("payload"),
                freeze_map(v.get("quality", {})),
            )
            for v in doc.get("values", [])
        ),
        trace=tuple(
            TraceEntry(t["block"], t["start"], t["end"], t["status"]) for t in doc.get("trace", [])
        ),
        failure=(doc["failure"]["block"], doc["failure"]["error"]) if doc.get("failure") else None,
    )


def _logical_time(step: int) -> str:
    # Logical clock: run documents must be byte-identical across repeated
    # runs, so the trace counts steps from a fixed epoch instead of reading
    # the wall clock.
    return datetime.fromtimestamp(step, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _propagate_quality(
    space: QualitySpace, input_points: list[dict], via_stub: bool
) -> dict[str, float | int]:
    point: dict[str, float | int] = {}
    for axis in space.axes:
        if axis.domain == "binary":
            if via_stub:
                point[axis.id] = 0
            else:
                point[axis.id] = min((int(p.get(axis.id, 0)) for p in input_points), default=0)
        else:
            point[axis.id] = min(
                (float(p.get(axis.id, EMPTY_CONE_EXPERT)) for p in input_points),
                default=EMPTY_CONE_EXPERT,
            )
    return point


def execute(
    cwf: CWF,
    inputs: dict[DataRef, Any],
    input_quality: dict[DataRef, dict] | None = None,
) -> RunResult:
    """Run a bound workflow over the given external inputs.

    Stub outputs always lose measured status (binary axes forced to 0);
    inline selections keep it. Real axes aggregate pessimistically as the
    minimum over the block's inputs. The run id derives from the workflow
    and input content, so identical calls return identical documents.
    """
    awf = cwf.awf
    input_quality = input_quality or {}
    missing = [r for r in awf.external_inputs() if r not in inputs]
    if missing:
        labels = ", ".join(r.label() for r in missing)
        raise MissingInputError(f"missing payloads for external inputs: {labels}")

    inputs_doc = [
        {"ref": r.as_document(), "payload": p} for r, p in sorted(inputs.items(), key=lambda kv: kv[0].key())
    ]
    quality_doc = [
        {"ref": r.as_document(), "quality": q}
        for r, q in sorted(input_quality.items(), key=lambda kv: kv[0].key())
    ]
    run_id = content_id(awf.as_document(), inputs_doc, quality_doc, prefix="run-")

    env: dict[DataRef, Any] = dict(inputs)
    qual: dict[DataRef, dict] = {}
    for ref in env:
        qual[ref] = dict(input_quality.get(ref, ref.quality_map))

    trace: list[TraceEntry] = []
    failure: tuple[str, str] | None = None
    step = 0

    order = topo_order(awf)
    blocks = {b.id: b for b in awf.blocks}
    for bid in order:
        block = blocks[bid]
        start, end = _logical_time(step), _logical_time(step + 1)
        step += 2
        try:
            in_payloads = {}
            in_points = []
            for r in block.consumes:
                if r not in env:
                    raise MissingInputError(f"block '{bid}' input {r.label()} unavailable")
                in_payloads[r.value] = env[r]
                in_points.append(qual.get(r, r.quality_map))
            if block.kind == KIND_INLINE:
                src_ref = block.consumes[0]
                out_payload = run_selection(
                    thaw_map(block.script), block.basis_params_map, env[src_ref]
                )
                out_payloads = {r.value: out_payload for r in block.produces}
                point = _propagate_quality(awf.space, in_points, via_stub=False)
            else:
                stub = cwf.stub_for(bid)
                if stub is None:
                    raise MissingInputError(f"block '{bid}' has no bound package")
                out_payloads = stub.fn(dict(in_payloads), block.params_map)
                point = _propagate_quality(awf.space, in_points, via_stub=True)
            for r in block.produces:
                if r.value not in out_payloads:
                    raise ValueError(f"stub produced no payload for '{r.value}'")
                env[r] = out_payloads[r.value]
                qual[r] = dict(point)
            trace.append(TraceEntry(bid, start, end, "succeeded"))
        except Exception as exc:  # stub failures become a failed run, not a crash
            trace.append(TraceEntry(bid, start, end, "failed"))
            failure = (bid, f"{type(exc).__name__}: {exc}")
            break

    status = "succeeded" if failure is None else "failed"
    values = tuple(
        (ref, env[ref], freeze_map(qual.get(ref, {})))
        for ref in sorted(env, key=DataRef.key)
    )
    return RunResult(run_id=run_id, status=status, values=values, trace=tuple(trace), failure=failure)
