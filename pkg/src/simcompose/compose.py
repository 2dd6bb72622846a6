"""Composition of two object classes into one composite.

Composition unions bases, values, models and edges, merges the two quality
spaces with explicit axis maps, infers transition models for values shared
by both objects, and generates the edges that hook those transitions into
the existing model graphs. The result is itself a valid class, so composites
compose again (left fold for n-ary systems).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .canon import canonical_json
from .errors import (
    AxisConflictError,
    BasisIdCollisionError,
    InvariantError,
    UnitConflictError,
)
from .kb import class_document, parse_class_dict, validate_class
from .types import (
    Basis,
    DataRef,
    Edge,
    KVPairs,
    Model,
    QualitySpace,
    Scenario,
    SimObjectClass,
    Value,
    freeze_map,
    thaw_map,
)

TRANSITION_SCENARIO = "select"
NEEDS_PACKAGE_SCENARIO = "needs_package"


@dataclass(frozen=True)
class QualityMergeResult:
    """Merged quality space plus the axis maps into it from either side."""

    merged: QualitySpace
    map_left: KVPairs = ()
    map_right: KVPairs = ()

    @property
    def map_left_dict(self) -> dict:
        return thaw_map(self.map_left)

    @property
    def map_right_dict(self) -> dict:
        return thaw_map(self.map_right)


@dataclass(frozen=True)
class TransitionModel(Model):
    """Auto-inferred model transferring one shared value between the bases
    of two objects; needs no package when the target basis is a sub-domain
    of the source (plain selection)."""

    shared_value: str = ""
    from_basis: str | None = None
    to_basis: str | None = None
    script: KVPairs = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "script", freeze_map(self.script))

    @property
    def script_map(self) -> dict:
        return thaw_map(self.script)

    def needs_package(self) -> bool:
        return self.selected_scenario == NEEDS_PACKAGE_SCENARIO


@dataclass(frozen=True)
class Provenance:
    """Total map from every composite element to its source side."""

    bases: KVPairs = ()
    values: KVPairs = ()
    quality_axes: KVPairs = ()
    models: KVPairs = ()
    edges: tuple[tuple[str, ...], ...] = ()  # (from, to, value, basis, source)

    def as_document(self) -> dict:
        return {
            "bases": thaw_map(self.bases),
            "values": thaw_map(self.values),
            "quality_axes": thaw_map(self.quality_axes),
            "models": thaw_map(self.models),
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class CompositeObject(SimObjectClass):
    """A composed class: the unions plus provenance and quality maps."""

    provenance: Provenance = Provenance()
    quality_merge: QualityMergeResult = QualityMergeResult(QualitySpace(()))
    left_name: str = ""
    right_name: str = ""


def merge_quality(q1: QualitySpace, q2: QualitySpace) -> QualityMergeResult:
    """Union the axes of two quality spaces, matching axes by id.

    Axes with the same id must have the same domain; distinct ids are
    concatenated. Both returned maps are identities on the axis ids, which
    makes the round-trip property (map then invert is the identity) hold by
    construction.
    """
    axes = {a.id: a for a in q1.axes}
    for a in q2.axes:
        if a.id in axes and axes[a.id].domain != a.domain:
            raise AxisConflictError(
                f"axis '{a.id}' declared as {axes[a.id].domain} and {a.domain}",
                f"quality.axes.{a.id}",
            )
        axes.setdefault(a.id, a)
    merged = QualitySpace(tuple(axes.values()))
    return QualityMergeResult(
        merged=merged,
        map_left=tuple((a.id, a.id) for a in q1.axes),
        map_right=tuple((a.id, a.id) for a in q2.axes),
    )


def _widen_class(cls: SimObjectClass, space: QualitySpace) -> SimObjectClass:
    """Re-normalize every quality point in the class against a wider space."""

    def widen_ref(ref: DataRef) -> DataRef:
        return ref.with_space(space)

    def widen_scenario(s: Scenario) -> Scenario:
        params = tuple(
            replace(p, binding=widen_ref(p.binding))
            if p.source == "vso_value" and isinstance(p.binding, DataRef)
            else p
            for p in s.extra_params
        )
        return replace(s, extra_params=params)

    models = tuple(
        replace(
            m,
            inputs=tuple(widen_ref(r) for r in m.inputs),
            outputs=tuple(widen_ref(r) for r in m.outputs),
            scenarios=tuple(widen_scenario(s) for s in m.scenarios),
        )
        for m in cls.models
    )
    edges = tuple(replace(e, data=widen_ref(e.data)) for e in cls.edges)
    return replace(cls, quality=space, models=models, edges=edges)


# Basis containment conventions, one comparator per kind. Params are opaque
# to the rest of the engine; these comparators interpret a small vocabulary:
# space boxes (x_min/x_max/y_min/y_max) or points (x/y), time intervals
# (start/end) or instants (t), group member lists (members).


def _as_box(params: dict) -> tuple[float, float, float, float] | None:
    try:
        if all(k in params for k in ("x_min", "x_max", "y_min", "y_max")):
            return (
                float(params["x_min"]),
                float(params["x_max"]),
                float(params["y_min"]),
                float(params["y_max"]),
            )
        if "x" in params and "y" in params:
            x, y = float(params["x"]), float(params["y"])
            return (x, x, y, y)
    except (TypeError, ValueError):
        return None
    return None


def _as_interval(params: dict) -> tuple[float, float] | None:
    try:
        if "start" in params and "end" in params:
            return (float(params["start"]), float(params["end"]))
        if "t" in params:
            t = float(params["t"])
            return (t, t)
    except (TypeError, ValueError):
        return None
    return None


def basis_contains(kind: str, source: dict, target: dict) -> bool:
    """True when the target basis params describe a sub-domain of the source."""
    if kind == "space":
        src, dst = _as_box(source), _as_box(target)
        if src is None or dst is None:
            return False
        return src[0] <= dst[0] and dst[1] <= src[1] and src[2] <= dst[2] and dst[3] <= src[3]
    if kind == "time":
        src, dst = _as_interval(source), _as_interval(target)
        if src is None or dst is None:
            return False
        return src[0] <= dst[0] and dst[1] <= src[1]
    if kind == "group":
        src_members, dst_members = source.get("members"), target.get("members")
        if not isinstance(src_members, list) or not isinstance(dst_members, list):
            return False
        return set(map(str, dst_members)) <= set(map(str, src_members))
    return False


_SELECT_METHODS = {"space": "nearest_point", "time": "at_or_before", "group": "subset"}


def transition_id(value: str, b1: str | None, b2: str | None) -> str:
    return f"t_{value}__{b1 or 'none'}__{b2 or 'none'}"


def _ref_occurrences(classes, pick) -> dict[tuple[str, str | None], list]:
    """Map (value, basis) to the sorted quality points seen in model signatures."""
    occ: dict[tuple[str, str | None], set] = {}
    for cls in classes:
        for m in cls.models:
            for ref in pick(m):
                occ.setdefault((ref.value, ref.basis), set()).add(ref.quality)
    return {k: sorted(v) for k, v in occ.items()}


def _transition_triples(left: SimObjectClass, right: SimObjectClass):
    """Distinct (value, from-basis, to-basis) crossings between the objects."""
    shared = {v.id for v in left.values} & {v.id for v in right.values}
    left_out = _ref_occurrences([left], lambda m: m.outputs)
    left_in = _ref_occurrences([left], lambda m: m.inputs)
    right_out = _ref_occurrences([right], lambda m: m.outputs)
    right_in = _ref_occurrences([right], lambda m: m.inputs)
    all_out = _ref_occurrences([left, right], lambda m: m.outputs)
    all_in = _ref_occurrences([left, right], lambda m: m.inputs)

    triples = set()
    for (v, b1) in left_out:
        if v not in shared:
            continue
        for (v2, b2) in right_in:
            if v2 == v:
                triples.add((v, b1, b2))
    for (v, b1) in right_out:
        if v not in shared:
            continue
        for (v2, b2) in left_in:
            if v2 == v:
                triples.add((v, b1, b2))
    out = []
    for (v, b1, b2) in sorted(triples, key=lambda t: (t[0], t[1] or "", t[2] or "")):
        q1 = all_out[(v, b1)][0]
        q2 = all_in[(v, b2)][0]
        out.append((v, b1, b2, q1, q2))
    return out


def infer_transition_models(
    left: SimObjectClass, right: SimObjectClass
) -> tuple[TransitionModel, ...]:
    """Infer one transition model per distinct (value, from-basis, to-basis)
    crossing between the two objects.

    A crossing exists when a value shared by both objects appears in a
    producer signature on one side and a consumer signature on the other.
    Compatible bases (same kind, target a sub-domain of the source) yield a
    packageless selection script; incompatible ones are emitted with an
    empty scenario marked needs_package. Crossings whose input and output
    refs are identical need no transition at all (the value flows directly,
    see identity_crossing_edges).
    """
    space = merge_quality(left.quality, right.quality).merged
    left_x, right_x = _widen_class(left, space), _widen_class(right, space)
    bases = {b.id: b for b in left_x.bases}
    bases.update({b.id: b for b in right_x.bases})

    models = []
    for (v, b1, b2, q1, q2) in _transition_triples(left_x, right_x):
        in_ref = DataRef(v, b1, q1)
        out_ref = DataRef(v, b2, q2)
        if in_ref == out_ref:
            continue
        if b1 is None and b2 is None:
            compatible, method = True, "identity"
        elif b1 is None or b2 is None:
            compatible, method = False, ""
        else:
            src, dst = bases.get(b1), bases.get(b2)
            compatible = (
                src is not None
                and dst is not None
                and src.kind == dst.kind
                and basis_contains(src.kind, src.params_map, dst.params_map)
            )
            method = _SELECT_METHODS.get(src.kind, "") if compatible and src else ""
        if compatible:
            scenario = Scenario(id=TRANSITION_SCENARIO)
            selected = TRANSITION_SCENARIO
            script = {"method": method, "from_basis": b1, "to_basis": b2}
        else:
            scenario = Scenario(id=NEEDS_PACKAGE_SCENARIO, options={"needs_package": True})
            selected = NEEDS_PACKAGE_SCENARIO
            script = {}
        models.append(
            TransitionModel(
                id=transition_id(v, b1, b2),
                inputs=(in_ref,),
                outputs=(out_ref,),
                scenarios=(scenario,),
                packages=(),
                enabled=True,
                selected_scenario=selected,
                shared_value=v,
                from_basis=b1,
                to_basis=b2,
                script=freeze_map(script),
            )
        )
    return tuple(models)


def identity_crossing_edges(
    left: SimObjectClass, right: SimObjectClass
) -> tuple[Edge, ...]:
    """Direct producer-to-consumer edges for crossings whose input and output
    refs coincide (a transition model there would violate the input/output
    disjointness invariant, and the value needs no mapping anyway)."""
    space = merge_quality(left.quality, right.quality).merged
    left_x, right_x = _widen_class(left, space), _widen_class(right, space)
    edges = set()
    for (v, b1, b2, q1, q2) in _transition_triples(left_x, right_x):
        ref = DataRef(v, b1, q1)
        if ref != DataRef(v, b2, q2):
            continue
        for producer_cls, consumer_cls in ((left_x, right_x), (right_x, left_x)):
            for pm in producer_cls.models:
                if ref not in pm.outputs:
                    continue
                for cm in consumer_cls.models:
                    if ref in cm.inputs:
                        edges.add(Edge(pm.id, cm.id, ref))
    return tuple(sorted(edges, key=Edge.key))


def make_transition_edges(m_t: TransitionModel, models: tuple[Model, ...]) -> tuple[Edge, ...]:
    """Edges hooking a transition model into a model set: producers of its
    input feed it, consumers of its output read from it."""
    edges = []
    for m in models:
        for d in m_t.inputs:
            if d in m.outputs:
                edges.append(Edge(m.id, m_t.id, d))
        for d in m_t.outputs:
            if d in m.inputs:
                edges.append(Edge(m_t.id, m.id, d))
    return tuple(sorted(set(edges), key=Edge.key))


def _merge_values(left: SimObjectClass, right: SimObjectClass) -> tuple[Value, ...]:
    merged: dict[str, Value] = {v.id: v for v in left.values}
    for v in right.values:
        if v.id not in merged:
            merged[v.id] = v
            continue
        have = merged[v.id]
        if have.unit != v.unit or have.variability != v.variability:
            raise UnitConflictError(
                f"value '{v.id}' declared as ({have.variability}, unit '{have.unit}') "
                f"and ({v.variability}, unit '{v.unit}')",
                f"values.{v.id}",
            )
        merged[v.id] = replace(have, ontology_tags=tuple(set(have.ontology_tags) | set(v.ontology_tags)))
    return tuple(merged.values())


def _merge_bases(left: SimObjectClass, right: SimObjectClass) -> tuple[Basis, ...]:
    merged: dict[str, Basis] = {b.id: b for b in left.bases}
    for b in right.bases:
        if b.id in merged and merged[b.id] != b:
            raise BasisIdCollisionError(
                f"basis '{b.id}' declared differently on both sides; rename before composing",
                f"bases.{b.id}",
            )
        merged.setdefault(b.id, b)
    return tuple(merged.values())


def compose(left: SimObjectClass, right: SimObjectClass) -> CompositeObject:
    """Compose two classes: union their parts, merge quality spaces, infer
    transitions, and wire the transition edges. The result validates as a
    class and records provenance for every element."""
    merge = merge_quality(left.quality, right.quality)
    left_x = _widen_class(left, merge.merged)
    right_x = _widen_class(right, merge.merged)

    bases = _merge_bases(left_x, right_x)
    values = _merge_values(left_x, right_x)
    transitions = infer_transition_models(left, right)
    base_models = left_x.models + right_x.models

    transition_edges: set[Edge] = set(identity_crossing_edges(left, right))
    for t in transitions:
        transition_edges.update(make_transition_edges(t, base_models))

    left_ids = {m.id for m in left_x.models}
    models = base_models + transitions
    edges = tuple(sorted(set(left_x.edges) | set(right_x.edges) | transition_edges, key=Edge.key))

    provenance = Provenance(
        bases=freeze_map({b.id: ("left" if b.id in {x.id for x in left_x.bases} else "right") for b in bases}),
        values=freeze_map(
            {v.id: ("left" if v.id in {x.id for x in left_x.values} else "right") for v in values}
        ),
        quality_axes=freeze_map(
            {
                a.id: ("left" if left.quality.axis(a.id) is not None else "right")
                for a in merge.merged.axes
            }
        ),
        models=freeze_map(
            {
                m.id: (
                    "transition"
                    if isinstance(m, TransitionModel)
                    else "left" if m.id in left_ids else "right"
                )
                for m in models
            }
        ),
        edges=tuple(
            (
                e.from_model,
                e.to_model,
                e.data.value,
                e.data.basis or "",
                "transition"
                if e in transition_edges
                else "left" if e in set(left_x.edges) else "right",
            )
            for e in edges
        ),
    )

    mode = left.mode if left.mode == right.mode else "analysis"
    composite = CompositeObject(
        name="+".join(sorted({left.name, right.name})),
        version=max(left.version, right.version),
        mode=mode,
        bases=bases,
        values=values,
        quality=merge.merged,
        models=models,
        edges=edges,
        provenance=provenance,
        quality_merge=merge,
        left_name=left.name,
        right_name=right.name,
    )
    violations = validate_class(composite)
    if violations:
        first = violations[0]
        raise InvariantError(first.message, first.path, tuple(violations))
    return composite


def as_composite(cls: SimObjectClass) -> CompositeObject:
    """Wrap a plain class as a trivial composite (everything from the left)."""
    if isinstance(cls, CompositeObject):
        return cls
    merge = QualityMergeResult(
        merged=cls.quality, map_left=tuple((a.id, a.id) for a in cls.quality.axes), map_right=()
    )
    return CompositeObject(
        name=cls.name,
        version=cls.version,
        mode=cls.mode,
        bases=cls.bases,
        values=cls.values,
        quality=cls.quality,
        models=cls.models,
        edges=cls.edges,
        provenance=Provenance(
            bases=freeze_map({b.id: "left" for b in cls.bases}),
            values=freeze_map({v.id: "left" for v in cls.values}),
            quality_axes=freeze_map({a.id: "left" for a in cls.quality.axes}),
            models=freeze_map({m.id: "left" for m in cls.models}),
            edges=tuple(
                (e.from_model, e.to_model, e.data.value, e.data.basis or "", "left")
                for e in cls.edges
            ),
        ),
        quality_merge=merge,
        left_name=cls.name,
        right_name="",
    )


def composite_document(comp: CompositeObject) -> dict:
    doc = class_document(comp)
    doc["provenance"] = comp.provenance.as_document()
    doc["composition"] = {
        "left": comp.left_name,
        "right": comp.right_name,
        "quality_maps": {
            "left": comp.quality_merge.map_left_dict,
            "right": comp.quality_merge.map_right_dict,
        },
    }
    # Transition extras live beside the shared model schema so the document
    # round-trips without loss.
    doc["transitions"] = [
        {
            "id": t.id,
            "shared_value": t.shared_value,
            "from_basis": t.from_basis,
            "to_basis": t.to_basis,
            "script": t.script_map,
        }
        for t in comp.models
        if isinstance(t, TransitionModel)
    ]
    return doc


def serialize_composite(comp: CompositeObject) -> str:
    return canonical_json(composite_document(comp))


def parse_composite_document(doc: dict) -> CompositeObject:
    cls = parse_class_dict({k: v for k, v in doc.items() if k not in ("provenance", "composition", "transitions")})
    prov_doc = doc.get("provenance", {})
    provenance = Provenance(
        bases=freeze_map(prov_doc.get("bases", {})),
        values=freeze_map(prov_doc.get("values", {})),
        quality_axes=freeze_map(prov_doc.get("quality_axes", {})),
        models=freeze_map(prov_doc.get("models", {})),
        edges=tuple(tuple(e) for e in prov_doc.get("edges", [])),
    )
    comp_doc = doc.get("composition", {})
    merge = QualityMergeResult(
        merged=cls.quality,
        map_left=freeze_map(comp_doc.get("quality_maps", {}).get("left", {})),
        map_right=freeze_map(comp_doc.get("quality_maps", {}).get("right", {})),
    )
    transitions = {t["id"]: t for t in doc.get("transitions", [])}
    models = tuple(
        TransitionModel(
            id=m.id,
            inputs=m.inputs,
            outputs=m.outputs,
            scenarios=m.scenarios,
            packages=m.packages,
            enabled=m.enabled,
            selected_scenario=m.selected_scenario,
            options=m.options,
            shared_value=transitions[m.id]["shared_value"],
            from_basis=transitions[m.id]["from_basis"],
            to_basis=transitions[m.id]["to_basis"],
            script=freeze_map(transitions[m.id]["script"]),
        )
        if m.id in transitions
        else m
        for m in cls.models
    )
    return CompositeObject(
        name=cls.name,
        version=cls.version,
        mode=cls.mode,
        bases=cls.bases,
        values=cls.values,
        quality=cls.quality,
        models=models,
        edges=cls.edges,
        provenance=provenance,
        quality_merge=merge,
        left_name=comp_doc.get("left", ""),
        right_name=comp_doc.get("right", ""),
    )
