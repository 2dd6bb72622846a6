"""Knowledge-base file format: parsing, canonical serialization, validation,
instantiation.

One JSON document describes one object class (see docs/kb-format.md for the
grammar). Parsing validates every structural invariant and raises with the
offending path; serialization is canonical (arrays sorted by id, sorted
keys, stable number formatting) so parse/serialize round-trips are
byte-stable.
"""

from __future__ import annotations

import json
from typing import Any

from . import errors as err
from .canon import FORMAT_VERSION, canonical_json
from .errors import (
    DanglingReferenceError,
    DocumentSyntaxError,
    InvariantError,
    TypeMismatchError,
    UnknownParamError,
    Violation,
)
from .types import (
    AXIS_DOMAINS,
    BASIS_KINDS,
    BASIS_REFERENCES,
    DEFAULT_QUALITY_SPACE,
    MODES,
    PARAM_SOURCES,
    VARIABILITIES,
    Basis,
    DataRef,
    Edge,
    ExtraParam,
    Model,
    QualityAxis,
    QualitySpace,
    Scenario,
    SimObjectClass,
    SimObjectInstance,
    Value,
)


def _require(doc: dict, key: str, kind, path: str):
    if key not in doc:
        raise DocumentSyntaxError(f"missing key '{key}'", path)
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        raise DocumentSyntaxError(f"'{key}' has wrong type", f"{path}.{key}" if path else key)
    return val


def _enum(value: str, allowed: tuple, path: str) -> str:
    if value not in allowed:
        raise DocumentSyntaxError(f"'{value}' not one of {sorted(allowed)}", path)
    return value


def parse_data_ref(doc: dict, space: QualitySpace, path: str) -> DataRef:
    if not isinstance(doc, dict):
        raise DocumentSyntaxError("data ref must be an object", path)
    value = _require(doc, "value", str, path)
    basis = doc.get("basis")
    if basis is not None and not isinstance(basis, str):
        raise DocumentSyntaxError("'basis' must be a string or null", f"{path}.basis")
    quality = doc.get("quality") or {}
    if not isinstance(quality, dict):
        raise DocumentSyntaxError("'quality' must be an object", f"{path}.quality")
    return DataRef.make(value, basis, quality, space)


def _parse_quality_space(doc: Any, path: str) -> QualitySpace:
    if doc is None:
        return DEFAULT_QUALITY_SPACE
    axes_doc = _require(doc, "axes", list, path)
    axes = []
    for i, axis_doc in enumerate(axes_doc):
        axis_path = f"{path}.axes[{i}]"
        axis_id = _require(axis_doc, "id", str, axis_path)
        domain = _enum(_require(axis_doc, "domain", str, axis_path), AXIS_DOMAINS, f"{axis_path}.domain")
        axes.append(QualityAxis(axis_id, domain))
    return QualitySpace(tuple(axes))


def _parse_extra_param(doc: dict, space: QualitySpace, path: str) -> ExtraParam:
    name = _require(doc, "name", str, path)
    source = _enum(_require(doc, "source", str, path), PARAM_SOURCES, f"{path}.source")
    binding = doc.get("binding")
    if source == "vso_value":
        binding = parse_data_ref(binding, space, f"{path}.binding")
    elif source == "model_option" and not isinstance(binding, str):
        raise DocumentSyntaxError("model_option binding must name an option", f"{path}.binding")
    return ExtraParam(name=name, source=source, binding=binding)


def _parse_scenario(doc: dict, space: QualitySpace, path: str) -> Scenario:
    sid = _require(doc, "id", str, path)
    seq = doc.get("package_seq", [])
    if not isinstance(seq, list) or not all(isinstance(p, str) for p in seq):
        raise DocumentSyntaxError("'package_seq' must be a list of package ids", f"{path}.package_seq")
    params = [
        _parse_extra_param(p, space, f"{path}.extra_params[{i}]")
        for i, p in enumerate(doc.get("extra_params", []))
    ]
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise DocumentSyntaxError("'options' must be an object", f"{path}.options")
    return Scenario(id=sid, package_seq=tuple(seq), extra_params=tuple(params), options=options)


def _parse_model(doc: dict, space: QualitySpace, path: str) -> Model:
    mid = _require(doc, "id", str, path)
    inputs = [
        parse_data_ref(r, space, f"{path}.inputs[{i}]") for i, r in enumerate(doc.get("inputs", []))
    ]
    outputs = [
        parse_data_ref(r, space, f"{path}.outputs[{i}]") for i, r in enumerate(doc.get("outputs", []))
    ]
    scenarios = [
        _parse_scenario(s, space, f"{path}.scenarios[{i}]")
        for i, s in enumerate(doc.get("scenarios", []))
    ]
    packages = doc.get("packages", [])
    if not isinstance(packages, list) or not all(isinstance(p, str) for p in packages):
        raise DocumentSyntaxError("'packages' must be a list of package ids", f"{path}.packages")
    selected = doc.get("selected_scenario", scenarios[0].id if scenarios else "")
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise DocumentSyntaxError("'options' must be an object", f"{path}.options")
    return Model(
        id=mid,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        scenarios=tuple(scenarios),
        packages=tuple(packages),
        enabled=bool(doc.get("enabled", True)),
        selected_scenario=selected,
        options=options,
    )


def parse_class_dict(doc: dict) -> SimObjectClass:
    """Build a SimObjectClass from an already-decoded document and validate it."""
    if not isinstance(doc, dict):
        raise DocumentSyntaxError("class document must be an object", "")
    name = _require(doc, "vso_class", str, "")
    version = _require(doc, "version", int, "")
    mode = _enum(doc.get("mode", "analysis"), MODES, "mode")
    space = _parse_quality_space(doc.get("quality"), "quality")

    bases = []
    for i, b in enumerate(doc.get("bases", [])):
        path = f"bases[{i}]"
        bases.append(
            Basis(
                id=_require(b, "id", str, path),
                kind=_enum(_require(b, "kind", str, path), BASIS_KINDS, f"{path}.kind"),
                reference=_enum(b.get("reference", "absolute"), BASIS_REFERENCES, f"{path}.reference"),
                params=b.get("params", {}),
            )
        )
    values = []
    for i, v in enumerate(doc.get("values", [])):
        path = f"values[{i}]"
        tags = v.get("ontology_tags", [])
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise DocumentSyntaxError("'ontology_tags' must be a list of strings", f"{path}.ontology_tags")
        values.append(
            Value(
                id=_require(v, "id", str, path),
                variability=_enum(
                    _require(v, "variability", str, path), VARIABILITIES, f"{path}.variability"
                ),
                unit=v.get("unit", ""),
                ontology_tags=tuple(tags),
            )
        )
    models = [_parse_model(m, space, f"models[{i}]") for i, m in enumerate(doc.get("models", []))]
    edges = []
    for i, e in enumerate(doc.get("edges", [])):
        path = f"edges[{i}]"
        edges.append(
            Edge(
                from_model=_require(e, "from_model", str, path),
                to_model=_require(e, "to_model", str, path),
                data=parse_data_ref(_require(e, "data", dict, path), space, f"{path}.data"),
            )
        )

    cls = SimObjectClass(
        name=name,
        version=version,
        mode=mode,
        bases=tuple(bases),
        values=tuple(values),
        quality=space,
        models=tuple(models),
        edges=tuple(edges),
    )
    raise_on_violations(cls)
    return cls


def parse_class(text: str) -> SimObjectClass:
    """Parse a knowledge-base document into a validated SimObjectClass."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"invalid JSON: {exc}", "") from exc
    return parse_class_dict(doc)


def load_class(path) -> SimObjectClass:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_class(fh.read())


def class_document(cls: SimObjectClass) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "vso_class": cls.name,
        "version": cls.version,
        "mode": cls.mode,
        "bases": [b.as_document() for b in cls.bases],
        "values": [v.as_document() for v in cls.values],
        "quality": {"axes": [{"id": a.id, "domain": a.domain} for a in cls.quality.axes]},
        "models": [m.as_document() for m in cls.models],
        "edges": [e.as_document() for e in cls.edges],
    }


def serialize_class(cls: SimObjectClass) -> str:
    """Canonical byte-stable serialization of a valid class."""
    return canonical_json(class_document(cls))


def raise_on_violations(cls: SimObjectClass) -> None:
    violations = validate_class(cls)
    if not violations:
        return
    first = violations[0]
    dangling = {err.DANGLING_VALUE, err.DANGLING_BASIS, err.DANGLING_SCENARIO,
                err.DANGLING_PACKAGE, err.DANGLING_MODEL}
    if all(v.code in dangling for v in violations):
        raise DanglingReferenceError(first.message, first.path)
    raise InvariantError(first.message, first.path, tuple(violations))


def _check_unique(ids: list[str], path: str, out: list[Violation]) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            out.append(Violation(err.DUPLICATE_ID, f"{path}.{i}", f"duplicate id '{i}' in {path}"))
        seen.add(i)


def _check_ref(ref: DataRef, cls: SimObjectClass, path: str, out: list[Violation]) -> None:
    if ref.value not in cls.values_by_id():
        out.append(Violation(err.DANGLING_VALUE, path, f"unknown value '{ref.value}'"))
    if ref.basis is not None and ref.basis not in cls.bases_by_id():
        out.append(Violation(err.DANGLING_BASIS, path, f"unknown basis '{ref.basis}'"))
    axes = set(cls.quality.axis_ids())
    point = set(ref.quality_map)
    if point != axes:
        out.append(
            Violation(
                err.QUALITY_AXIS_MISMATCH,
                path,
                f"quality point axes {sorted(point)} do not match space {sorted(axes)}",
            )
        )


def validate_class(cls: SimObjectClass) -> list[Violation]:
    """Check every structural invariant; empty list means the class is valid."""
    out: list[Violation] = []
    _check_unique([b.id for b in cls.bases], "bases", out)
    _check_unique([v.id for v in cls.values], "values", out)
    _check_unique([a.id for a in cls.quality.axes], "quality.axes", out)
    _check_unique([m.id for m in cls.models], "models", out)

    for b in cls.bases:
        if b.kind in ("space", "time") and not b.params:
            out.append(
                Violation(
                    err.EMPTY_BASIS_PARAMS,
                    f"bases.{b.id}",
                    f"{b.kind} basis '{b.id}' must declare params",
                )
            )

    for m in cls.models:
        mpath = f"models.{m.id}"
        for i, ref in enumerate(m.inputs):
            _check_ref(ref, cls, f"{mpath}.inputs[{i}]", out)
        for i, ref in enumerate(m.outputs):
            _check_ref(ref, cls, f"{mpath}.outputs[{i}]", out)
        overlap = set(m.inputs) & set(m.outputs)
        if overlap:
            labels = sorted(r.label() for r in overlap)
            out.append(
                Violation(
                    err.IN_OUT_OVERLAP, mpath, f"inputs and outputs overlap on {labels}"
                )
            )
        _check_unique([s.id for s in m.scenarios], f"{mpath}.scenarios", out)
        if m.scenarios and m.scenario(m.selected_scenario) is None:
            out.append(
                Violation(
                    err.DANGLING_SCENARIO,
                    mpath,
                    f"selected_scenario '{m.selected_scenario}' not declared",
                )
            )
        for s in m.scenarios:
            spath = f"{mpath}.scenarios.{s.id}"
            for pkg in s.package_seq:
                if pkg not in m.packages:
                    out.append(
                        Violation(
                            err.DANGLING_PACKAGE,
                            spath,
                            f"scenario package '{pkg}' not in model packages",
                        )
                    )
            for p in s.extra_params:
                ppath = f"{spath}.extra_params.{p.name}"
                if p.source == "vso_value":
                    if isinstance(p.binding, DataRef):
                        _check_ref(p.binding, cls, ppath, out)
                    else:
                        out.append(
                            Violation(err.SCENARIO_BINDING, ppath, "vso_value binding must be a data ref")
                        )
                elif p.source == "literal" and p.binding is None:
                    out.append(
                        Violation(err.SCENARIO_BINDING, ppath, "literal binding carries no value")
                    )

    models = cls.models_by_id()
    for i, e in enumerate(cls.edges):
        epath = f"edges[{i}]"
        src = models.get(e.from_model)
        dst = models.get(e.to_model)
        if src is None:
            out.append(Violation(err.DANGLING_MODEL, epath, f"unknown model '{e.from_model}'"))
        if dst is None:
            out.append(Violation(err.DANGLING_MODEL, epath, f"unknown model '{e.to_model}'"))
        if src is None or dst is None:
            continue
        if e.data not in src.outputs or e.data not in dst.inputs:
            out.append(
                Violation(
                    err.EDGE_CONDITION,
                    epath,
                    f"edge data {e.data.label()} must be an output of "
                    f"'{e.from_model}' and an input of '{e.to_model}'",
                )
            )
    return out


def instantiate(cls: SimObjectClass, params: dict[str, Any] | None = None) -> SimObjectInstance:
    """Create an instance, setting payloads for const values by value id."""
    params = params or {}
    const_ids = {v.id for v in cls.const_values()}
    pairs = []
    for value_id in sorted(params):
        if value_id not in const_ids:
            raise UnknownParamError(
                f"'{value_id}' is not a const value of class '{cls.name}'", f"values.{value_id}"
            )
        payload = params[value_id]
        try:
            canonical_json(payload)
        except (TypeError, ValueError) as exc:
            raise TypeMismatchError(
                f"payload for '{value_id}' is not serializable: {exc}", f"values.{value_id}"
            ) from exc
        ref = DataRef.make(value_id, None, None, cls.quality)
        pairs.append((ref, payload))
    return SimObjectInstance(cls=cls, param_values=tuple(pairs))
